"""Exception types.

Separate classes rather than bare ValueError/RuntimeError so callers can
tell library failures apart from plain argument mistakes, and so the CLI
can map them onto its exit-code contract (usage/config errors exit 2,
numerical failures exit 3).
"""

__all__ = [
    "DetwaveError",
    "UsageError",
    "NumericalError",
    "DomainError",
    "NoShock",
    "LaxViolation",
    "NoBurnedState",
    "IgnitionError",
    "TransversalityError",
    "DomainExhausted",
    "NoConnection",
    "ConvergenceError",
    "StructureError",
    "SplitAmbiguous",
    "ContinuationError",
    "StiffnessError",
    "LiftError",
    "ContourThroughZero",
]


class DetwaveError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(DetwaveError):
    """Invalid arguments, configuration, or violated preconditions."""


class NumericalError(DetwaveError):
    """A numerical computation failed to meet its contract."""


class DomainError(UsageError):
    """State outside the model's admissible region.

    The message names the offending component (e.g. nonpositive tau).
    """


class NoShock(NumericalError):
    """No nontrivial Rankine-Hugoniot root found in the search box."""


class LaxViolation(NumericalError):
    """Characteristic ordering violates the Lax shock conditions.

    Carries the offending characteristic index in args[1] when known.
    """


class NoBurnedState(NumericalError):
    """No real burned state (heat release too large for the given speed)."""


class IgnitionError(NumericalError):
    """Ignition function vanishes where the profile requires it positive."""


class TransversalityError(NumericalError):
    """df(u) - s I singular where the construction needs it invertible."""


class DomainExhausted(NumericalError):
    """Reaction coordinate failed to decay within the maximum domain."""


class NoConnection(NumericalError):
    """Shooting for a viscous profile missed the target rest state."""


class ConvergenceError(NumericalError):
    """Iteration stagnated; carries the last residual in args[1]."""


class StructureError(NumericalError):
    """Required block of a coefficient assembly is singular or malformed."""


class SplitAmbiguous(NumericalError):
    """Limit-matrix eigenvalue too close to the imaginary axis to classify."""


class ContinuationError(NumericalError):
    """Analytic basis continuation hit a projector discontinuity."""


class StiffnessError(NumericalError):
    """Step-size collapse while integrating a manifold lift."""


class LiftError(NumericalError):
    """Exterior-power state drifted off the pure-wedge variety."""


class ContourThroughZero(NumericalError):
    """Argument tracking failed: contour passes too close to a zero."""
