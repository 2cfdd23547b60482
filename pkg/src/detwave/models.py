"""Reactive-flow model definitions and structural validators.

Two concrete models are provided:

* Majda-type scalar model: a single gas variable with Burgers flux
  f(u) = u**2/2, scalar viscosity, and a smooth cut-off ignition
  function of u itself.

* Ideal-gas model in Lagrangian coordinates: gas variables
  (tau, v, E) = (specific volume, velocity, total energy), with
  p = Gamma * e / tau, T = e / c, and total energy E = e + v**2/2 + q z.

Both are presented through a common interface in which the convective
flux depends on the gas variables alone.  For the ideal gas this is
arranged by working internally with the chemical-energy-free vector
u = (tau, v, E - q z); the flux, viscosity, and ignition function are
all functions of that vector, and the cross-diffusion of z cancels
exactly in these variables.

Gas variables are ordered hyperbolic-first: the leading dim_u1
components carry no viscosity (for the ideal gas, tau), the trailing
dim_u2 components are parabolic.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError

__all__ = [
    "GasState",
    "MajdaParams",
    "IdealGasParams",
    "ModelSpec",
    "MajdaModel",
    "IdealGasModel",
    "make_model",
    "evaluate_flux",
    "flux_jacobian",
    "ignition",
    "check_structure",
    "StructureReport",
]

_Z_SLACK = 1e-8


@dataclass(frozen=True)
class GasState:
    """Gas variables plus reaction progress.

    components holds the stored n-vector (for the ideal gas this is
    (tau, v, E) with E the full total energy including q*z); z is the
    unburned mass fraction.
    """

    components: tuple
    z: float

    def __post_init__(self):
        if not -_Z_SLACK <= self.z <= 1.0 + _Z_SLACK:
            raise DomainError(f"mass fraction z = {self.z} outside [0, 1]")

    @property
    def array(self):
        return np.asarray(self.components, dtype=float)


@dataclass(frozen=True)
class MajdaParams:
    """Parameters of the scalar Majda-type model."""

    q: float = 0.3
    k: float = 1.0
    u_ig: float = 0.5
    T_A: float = 1.0
    b: float = 1.0
    C: float = 1.0

    def __post_init__(self):
        if self.q <= 0:
            raise UsageError("heat release q must be positive")
        if self.k < 0:
            raise UsageError("rate constant k must be nonnegative")
        for name in ("T_A", "b", "C"):
            if getattr(self, name) <= 0:
                raise UsageError(f"parameter {name} must be positive")


@dataclass(frozen=True)
class IdealGasParams:
    """Parameters of the ideal-gas model (Lagrangian frame)."""

    Gamma: float = 0.4
    c: float = 1.0
    nu: float = 1.0
    kappa: float = 1.0
    d: float = 1.0
    k: float = 1.0
    q: float = 0.5
    T_i: float = 3.5
    T_A: float = 1.0

    def __post_init__(self):
        if self.k < 0:
            raise UsageError("rate constant k must be nonnegative")
        for name in ("Gamma", "c", "nu", "kappa", "d", "q", "T_A"):
            if getattr(self, name) <= 0:
                raise UsageError(f"parameter {name} must be positive")


class ModelSpec:
    """Common interface of the concrete models.

    Subclasses implement the gas-vector callbacks (flux, jacobian,
    viscosity block, species diffusion, ignition) on the internal
    chemical-energy-free vector; this base class provides state
    conversion, admissibility checks, and derived quantities.
    """

    name = "abstract"
    n = 0
    dim_u1 = 0
    dim_u2 = 0

    def __init__(self, params, epsilon=0.05):
        if epsilon <= 0:
            raise UsageError("epsilon must be positive")
        self.params = params
        self.epsilon = float(epsilon)

    # -- derived dimensions --

    @property
    def r(self):
        return self.dim_u2 + 1

    @property
    def k_rate(self):
        return self.params.k

    # -- state conversion --

    def state(self, components, z):
        st = GasState(tuple(float(c) for c in np.atleast_1d(components)), float(z))
        self._validate(self.u_of_state(st))
        return st

    def u_of_state(self, state):
        """Internal gas vector for a stored state."""
        return state.array

    def state_of_u(self, u, z):
        """Inverse of u_of_state."""
        return GasState(tuple(float(c) for c in u), float(z))

    # -- callbacks on the internal vector (subclass responsibility) --

    def f(self, u):
        raise NotImplementedError

    def df(self, u):
        raise NotImplementedError

    def b(self, u):
        raise NotImplementedError

    def db(self, u):
        """Derivative tensor db[i,j,l] = d b[i,j] / d u[l]."""
        raise NotImplementedError

    def Cdiff(self, u):
        raise NotImplementedError

    def dCdiff(self, u):
        raise NotImplementedError

    def phi(self, u):
        raise NotImplementedError

    def dphi(self, u):
        raise NotImplementedError

    def _validate(self, u):
        """Raise DomainError if u leaves the admissible region."""

    def clip_admissible(self, u):
        """Nearest clearly admissible vector; identity away from the boundary.

        Used by iterative solvers whose intermediate Newton steps may
        leave the physical region; converged answers are unaffected.
        """
        return u

    # -- assembled quantities --

    def B_full(self, u):
        """Full n x n viscosity with the (H2) zero block structure."""
        B = np.zeros((self.n, self.n))
        B[self.dim_u1 :, self.dim_u1 :] = self.b(u)
        return B

    def config_digest(self):
        payload = {
            "name": self.name,
            "epsilon": self.epsilon,
            "params": {k: getattr(self.params, k) for k in vars(self.params)},
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _smooth_cutoff(x, T_A):
    # exp(-T_A/x) continued by 0; all derivatives vanish at x = 0
    if x <= 0:
        return 0.0
    return float(np.exp(-T_A / x))


def _smooth_cutoff_deriv(x, T_A):
    if x <= 0:
        return 0.0
    return float(np.exp(-T_A / x) * T_A / x**2)


class MajdaModel(ModelSpec):
    """Scalar model: Burgers flux, fully parabolic gas variable."""

    name = "majda"
    n = 1
    dim_u1 = 0
    dim_u2 = 1

    def __init__(self, params=None, epsilon=0.05):
        super().__init__(params or MajdaParams(), epsilon)
        self.q_vec = np.array([self.params.q])

    def f(self, u):
        return np.array([0.5 * u[0] ** 2])

    def df(self, u):
        return np.array([[u[0]]])

    def b(self, u):
        return np.array([[self.params.b]])

    def db(self, u):
        return np.zeros((1, 1, 1))

    def Cdiff(self, u):
        return self.params.C

    def dCdiff(self, u):
        return np.zeros(1)

    def phi(self, u):
        return _smooth_cutoff(u[0] - self.params.u_ig, self.params.T_A)

    def dphi(self, u):
        return np.array([_smooth_cutoff_deriv(u[0] - self.params.u_ig, self.params.T_A)])


class IdealGasModel(ModelSpec):
    """Ideal gas in Lagrangian coordinates, gas vector (tau, v, E - q z)."""

    name = "ideal_gas"
    n = 3
    dim_u1 = 1
    dim_u2 = 2

    def __init__(self, params=None, epsilon=0.05):
        super().__init__(params or IdealGasParams(), epsilon)
        self.q_vec = np.array([0.0, 0.0, self.params.q])

    # internal vector u = (tau, v, Ec) with Ec = e + v^2/2

    def u_of_state(self, state):
        u = state.array.copy()
        u[2] -= self.params.q * state.z
        return u

    def state_of_u(self, u, z):
        comps = (float(u[0]), float(u[1]), float(u[2] + self.params.q * z))
        return GasState(comps, float(z))

    def _validate(self, u):
        tau, v, Ec = u
        if tau <= 0:
            raise DomainError(f"specific volume tau = {tau} must be positive")
        e = Ec - 0.5 * v**2
        if e <= 0:
            raise DomainError(f"internal energy e = {e} must be positive")

    def clip_admissible(self, u):
        tau, v, Ec = u
        tau = max(tau, 1e-8)
        Ec = max(Ec, 0.5 * v**2 + 1e-8)
        return np.array([tau, v, Ec])

    def _pe(self, u):
        tau, v, Ec = u
        e = Ec - 0.5 * v**2
        return self.params.Gamma * e / tau, e

    def f(self, u):
        self._validate(u)
        p, _ = self._pe(u)
        return np.array([-u[1], p, p * u[1]])

    def df(self, u):
        self._validate(u)
        tau, v, _ = u
        G = self.params.Gamma
        p, _ = self._pe(u)
        return np.array(
            [
                [0.0, -1.0, 0.0],
                [-p / tau, -G * v / tau, G / tau],
                [-p * v / tau, p - G * v**2 / tau, G * v / tau],
            ]
        )

    def b(self, u):
        tau, v, _ = u
        pr = self.params
        return (1.0 / tau) * np.array(
            [
                [pr.nu, 0.0],
                [(pr.nu - pr.kappa / pr.c) * v, pr.kappa / pr.c],
            ]
        )

    def db(self, u):
        tau, v, _ = u
        pr = self.params
        out = np.zeros((2, 2, 3))
        out[:, :, 0] = -self.b(u) / tau
        out[1, 0, 1] = (pr.nu - pr.kappa / pr.c) / tau
        return out

    def Cdiff(self, u):
        return self.params.d / u[0] ** 2

    def dCdiff(self, u):
        return np.array([-2.0 * self.params.d / u[0] ** 3, 0.0, 0.0])

    def temperature(self, u):
        _, e = self._pe(u)
        return e / self.params.c

    def phi(self, u):
        return _smooth_cutoff(self.temperature(u) - self.params.T_i, self.params.T_A)

    def dphi(self, u):
        x = self.temperature(u) - self.params.T_i
        dT = np.array([0.0, -u[1], 1.0]) / self.params.c
        return _smooth_cutoff_deriv(x, self.params.T_A) * dT

    @staticmethod
    def from_primitives(tau, v, p, z, params=None, epsilon=0.05):
        """Build model + state from (tau, v, p, z)."""
        pr = params or IdealGasParams()
        model = IdealGasModel(pr, epsilon)
        e = p * tau / pr.Gamma
        E = e + 0.5 * v**2 + pr.q * z
        return model, model.state((tau, v, E), z)


_MODEL_CLASSES = {"majda": (MajdaModel, MajdaParams), "ideal_gas": (IdealGasModel, IdealGasParams)}


def make_model(name, params=None, epsilon=0.05, **overrides):
    """Factory used by the CLI config loader."""
    try:
        cls, pcls = _MODEL_CLASSES[name]
    except KeyError:
        raise UsageError(
            f"unknown model {name!r}; expected one of {sorted(_MODEL_CLASSES)}"
        ) from None
    if params is None:
        try:
            params = pcls(**overrides)
        except TypeError as exc:
            raise UsageError(f"bad parameters for model {name!r}: {exc}") from None
    elif overrides:
        raise UsageError("pass either a params object or keyword overrides, not both")
    return cls(params, epsilon)


# -- spec-level operations on stored states --


def evaluate_flux(model, state):
    """Convective flux f at a stored state."""
    return model.f(model.u_of_state(state))


def flux_jacobian(model, state):
    """Jacobian df at a stored state (z held fixed)."""
    return model.df(model.u_of_state(state))


def ignition(model, state):
    """Ignition rate factor phi at a stored state."""
    return model.phi(model.u_of_state(state))


@dataclass
class StructureReport:
    """Outcome of the hypothesis validators (H1)-(H3)."""

    passed: bool
    theta: float
    records: list = field(default_factory=list)
    messages: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def _h1_record(model, u, s, tol=1e-8):
    lam = np.linalg.eigvals(model.df(u))
    scale = max(1.0, np.abs(lam).max())
    msgs = []
    if np.abs(lam.imag).max() > tol * scale:
        msgs.append("non-real characteristic speed")
    lam_r = np.sort(lam.real)
    if len(lam_r) > 1 and np.diff(lam_r).min() < tol * scale:
        msgs.append("repeated characteristic speeds")
    if np.abs(lam_r - s).min() < tol * scale:
        msgs.append("characteristic speed at the wave speed")
    return np.sort(lam.real), msgs


def _h3_theta(model, u, xi_grid):
    df = model.df(u)
    B = model.B_full(u)
    theta = np.inf
    for xi in xi_grid:
        if xi == 0.0:
            continue
        M = -1j * xi * df - xi**2 * B
        rate = -np.linalg.eigvals(M).real.max()
        theta = min(theta, rate * (1.0 + xi**2) / xi**2)
    return theta


def check_structure(model, states, s, xi_grid=None):
    """Validate hypotheses (H1)-(H3) on a list of states.

    Returns a StructureReport; passed is True iff every state has real
    distinct characteristic speeds away from s (H1), positive-definite
    dissipation blocks with a constant hyperbolic flux block (H2), and
    genuinely coupled dissipation theta(u) > 0 (H3).
    """
    if not states:
        raise UsageError("check_structure needs at least one state")
    if xi_grid is None:
        xi_grid = np.linspace(-10.0, 10.0, 201)
    xi_grid = np.asarray(xi_grid, dtype=float)
    if xi_grid.size == 0:
        raise UsageError("xi grid must be nonempty")
    if np.abs(xi_grid + xi_grid[::-1]).max() > 1e-12 or np.abs(xi_grid).min() > 1e-12:
        raise UsageError("xi grid must be symmetric about 0 and include 0")

    n1 = model.dim_u1
    messages = []
    records = []
    theta_min = np.inf
    df11_ref = df12_ref = None
    sign_ref = None
    for idx, state in enumerate(states):
        u = model.u_of_state(state)
        speeds, h1_msgs = _h1_record(model, u, s)
        for m in h1_msgs:
            messages.append(f"state {idx}: {m} (H1)")

        # (H2): dissipative parabolic block, constant hyperbolic block
        bmat = np.atleast_2d(model.b(u))
        if bmat.size and np.linalg.eigvals(bmat).real.min() <= 1e-10:
            messages.append(f"state {idx}: viscosity block not positive (H2)")
        if model.Cdiff(u) <= 1e-10:
            messages.append(f"state {idx}: species diffusion not positive (H2)")
        df = model.df(u)
        df11 = df[:n1, :n1]
        df12 = df[:n1, n1:]
        if df11_ref is None:
            df11_ref, df12_ref = df11, df12
        elif n1 and (
            np.abs(df11 - df11_ref).max() > 1e-8 or np.abs(df12 - df12_ref).max() > 1e-8
        ):
            messages.append(f"state {idx}: hyperbolic flux block not constant (H2)")
        if n1:
            mu = np.linalg.eigvals(df11)
            if np.abs(mu.imag).max() > 1e-8:
                messages.append(f"state {idx}: df11 spectrum not real (H2)")
            if np.abs(mu.real - s).min() < 1e-8:
                messages.append(f"state {idx}: df11 - s singular (H2)")
            sign = np.sign(mu.real - s)
            if sign_ref is None:
                sign_ref = sign[0]
            if np.any(sign != sign_ref):
                messages.append(f"state {idx}: df11 spectrum changes side of s (H2)")

        theta = _h3_theta(model, u, xi_grid)
        theta_min = min(theta_min, theta)
        records.append({"state": idx, "speeds": speeds, "theta": theta})
        if theta <= 1e-9:
            messages.append(f"state {idx}: theta = {theta:.3e} not positive (H3)")

    return StructureReport(
        passed=not messages, theta=float(theta_min), records=records, messages=messages
    )
