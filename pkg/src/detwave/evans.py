"""Decaying-solution manifolds and the three stability determinants.

Each determinant is assembled from exterior-power (compound-matrix)
integrations of the first-order systems built in linearize: the wedge
of the subspace basis is transported from the far field to the matching
point, renormalized by the analytic sum of the initialized growth rates
so the result stays analytic in the spectral parameter and independent
of the truncation length.
"""

from dataclasses import dataclass

import numpy as np

from ._integrate import propagate
from ._wedge import (
    complement_pairing,
    decomposability_residual,
    induced_matrix,
    wedge_of_columns,
)
from .errors import DomainError, LiftError, StructureError, UsageError
from .linearize import (
    CoefficientAssembly,
    _spectral_projector,
    analytic_basis,
    ns_frame,
    rns_frame,
    znd_frame,
    znd_jump_vector,
)
from .profiles import ViscousDetonationProfile, ViscousShockProfile, ZndProfile

__all__ = [
    "EvansOptions",
    "EvansValue",
    "ManifoldState",
    "integrate_manifold",
    "evans_lopatinski",
    "evans_ns",
    "evans_rns",
]

_ORIGIN_TOL = 1e-12


@dataclass(frozen=True)
class EvansOptions:
    """Knobs shared by the three determinant evaluators.

    truncation overrides the start |x| of the far-field integrations,
    in the frame's own coordinates (default: the coefficient domain
    extent; fast units for the viscous systems); match_x moves the
    two-sided pairing point, with the Abel drift removed so values and
    windings both stay put; switch_width is the slow/fast handover
    position for the reacting viscous system, in slow units.
    """

    anchor: complex = 1.0 + 0.0j
    truncation: float = None
    match_x: float = 0.0  # two-sided pairing point; values stay put, see _two_sided
    switch_width: float = 0.5
    rtol: float = 1e-9
    slow_rtol: float = 3e-8  # reaction-tail stretch; see integrate_manifold
    atol: float = 1e-13
    center_tol: float = 1e-9
    path_step: float = 0.3
    check_wedge: bool = True


_DEFAULT_OPTS = EvansOptions()


@dataclass(frozen=True)
class ManifoldState:
    """Wedge of one decaying-solution manifold, transported to x.

    lift holds unit-normalized Pluecker coordinates; the physical wedge
    is lift * exp(exponent), with exponent = sigma*(x - x_start) plus
    the real norm renormalizations folded out along the way.
    """

    lift: np.ndarray
    k: int
    m: int
    exponent: complex
    x: float
    x_start: float
    sigma: complex
    residual: float
    steps: int

    def log_norm_folds(self):
        """Real renormalization part of the exponent, net of the
        analytic shift; this is what enters the determinant."""
        return float((self.exponent - self.sigma * (self.x - self.x_start)).real)


@dataclass(frozen=True)
class EvansValue:
    """Scaled determinant sample: the true value is value*exp(log_scale).

    value is kept at unit modulus (zero only for an exact zero), so
    log_scale carries the whole magnitude; cond is the reciprocal
    pairing size of the unit lifts (large when the manifolds nearly
    intersect, i.e. near a root).
    """

    value: complex
    log_scale: float
    cond: float

    def log_abs(self):
        return self.log_scale + (np.log(abs(self.value)) if self.value else -np.inf)

    def phase(self):
        return float(np.angle(self.value))

    def reduced(self, reference=0.0):
        """value*exp(log_scale - reference); overflow-safe comparisons."""
        return self.value * np.exp(self.log_scale - reference)


def _assemble_value(pair, extra_log, cond):
    mag = abs(pair)
    if mag == 0.0:
        return EvansValue(value=0.0 + 0.0j, log_scale=float(extra_log), cond=np.inf)
    return EvansValue(
        value=pair / mag, log_scale=float(np.log(mag) + extra_log), cond=float(cond)
    )


# -- far-field subspace at the start of the integration --


def _origin_directions(G0, G1, k, which, center_tol):
    """Continued split subspace exactly at the origin of the parameter.

    Strict-sign eigenvectors are completed by center directions ranked
    by the first-order spectral motion dG/dlam restricted to the center
    block (the limit of the continued subspace along lam -> 0+).
    """
    ev = np.linalg.eigvals(G0)
    tol = center_tol * max(1.0, np.abs(ev).max())
    sign = 1.0 if which == "unstable" else -1.0

    P_strict, B_strict, n_strict = _spectral_projector(
        G0, lambda mu: sign * mu.real > tol
    )
    if n_strict > k:
        raise StructureError(
            f"{n_strict} strict {which} directions at the origin, expected <= {k}"
        )
    sigma = np.trace(G0 @ P_strict)
    if n_strict == k:
        return B_strict, sigma
    P_c, X, n_c = _spectral_projector(G0, lambda mu: abs(mu.real) <= tol)
    need = k - n_strict
    if n_c < need:
        raise StructureError(
            f"origin split needs {need} center directions, found {n_c}"
        )
    L = X.conj().T @ (G1 @ X)  # X orthonormal, range(P_c) invariant
    mu1, Y = np.linalg.eig(L)
    order = np.argsort(-sign * mu1.real)
    if sign * mu1.real[order[need - 1]] <= 0.0:
        raise StructureError(
            "center spectrum does not move into the "
            f"{which} half plane at first order"
        )
    cols = X @ Y[:, order[:need]]
    cols, _ = np.linalg.qr(np.column_stack([B_strict, cols]))
    return cols, sigma


def _end_basis(frame, lam, which, end, opts):
    """Analytic basis of the initialized subspace at the ±inf limit.

    Away from the origin the basis is carried from opts.anchor along a
    polar path (monotone modulus and argument), which keeps the
    continuation single-valued on the cut plane; at lam = 0 the basis
    is built directly from the origin splitting.
    """
    k = frame.split_dims[0] if end < 0 else frame.split_dims[1]
    limitf = frame.limit(end)
    if abs(lam) <= _ORIGIN_TOL:
        G0 = limitf(0.0)
        G1 = limitf(1.0) - G0  # limits are affine in the parameter
        B, sigma = _origin_directions(G0, G1, k, which, opts.center_tol)
        return B, sigma
    path = _polar_path(opts.anchor, lam, opts.path_step)
    ab = analytic_basis(frame, path, which=which, end=end)
    if ab.rank != k:
        raise StructureError(
            f"{which} subspace at the {frame.kind} {'-' if end < 0 else '+'}inf "
            f"limit has rank {ab.rank}, expected {k}"
        )
    sigma = np.trace(limitf(lam) @ ab.projectors[-1])
    return ab.bases[-1], sigma


def _polar_path(anchor, lam, step):
    ra, ta = abs(anchor), float(np.angle(anchor))
    rl, tl = abs(lam), float(np.angle(lam))
    if rl == 0.0:
        raise UsageError("polar continuation cannot target the origin")
    n = max(
        1,
        int(np.ceil(abs(tl - ta) / step)),
        int(np.ceil(abs(np.log(rl / ra)) / step)),
    )
    t = np.linspace(0.0, 1.0, n + 1)
    return (ra + t * (rl - ra)) * np.exp(1j * (ta + t * (tl - ta)))


# -- wedge transport --


def integrate_manifold(frame, lam, end=-1, L=None, target_x=0.0, opts=None):
    """Transport the wedge of the split subspace from x = ∓L to target_x.

    end = -1 integrates the unstable manifold from -inf rightward,
    end = +1 the stable manifold from +inf leftward.  The induced
    exterior-power system is shifted by the analytic sum of the
    initialized rates, so the returned lift is O(1) and the value is
    truncation-independent once the coefficients have settled.
    """
    opts = opts or _DEFAULT_OPTS
    lam = complex(lam)
    if end not in (-1, 1):
        raise UsageError("end must be -1 or +1")
    which = "unstable" if end < 0 else "stable"
    k = frame.split_dims[0] if end < 0 else frame.split_dims[1]
    m = frame.dimension
    if L is None:
        L = abs(frame.domain[0] if end < 0 else frame.domain[1])
    x_start = -float(L) if end < 0 else float(L)
    if (target_x - x_start) * end > 0:
        raise UsageError("target_x lies beyond the starting end")

    G_lim = frame.limit(end)(lam)
    settle = np.abs(frame.matrix_field(lam, x_start) - G_lim).max()
    if settle > 1e-8:
        raise DomainError(
            f"coefficients at x = {x_start:.3g} still {settle:.2e} from the "
            "limit; increase the truncation"
        )

    # beyond the coefficient domain the field is exactly the limit and
    # the wedge is its eigendirection, so transport there is the
    # identity after the shift; skip it (the sigma*(target - x_start)
    # term below still credits the analytic growth of the whole run)
    if end < 0:
        x_begin = min(max(x_start, float(frame.domain[0])), target_x)
    else:
        x_begin = max(min(x_start, float(frame.domain[1])), target_x)

    B, sigma = _end_basis(frame, lam, which, end, opts)
    w = wedge_of_columns(B)
    r0 = np.linalg.norm(w)
    w = w / r0
    exponent = complex(np.log(r0))

    def wedge_field(x):
        return induced_matrix(frame.matrix_field(lam, x), k)

    # the reacting viscous system varies on the slow scale over the
    # reaction tail: step it in slow units there, in fast units through
    # the shock window
    pieces = []
    if frame.kind == "rns" and end < 0:
        eps = frame.meta["eps"]
        x_switch = -opts.switch_width / eps
        if x_begin < x_switch < target_x:
            pieces.append(("slow", x_begin, x_switch, eps))
            pieces.append(("fast", x_switch, target_x, None))
        elif x_begin < target_x <= x_switch:
            pieces.append(("slow", x_begin, target_x, eps))
        else:
            pieces.append(("fast", x_begin, target_x, None))
    else:
        pieces.append(("fast", x_begin, target_x, None))

    steps = 0
    resid = 0.0
    for mode, xa, xb, eps in pieces:
        if xa == xb:
            continue
        if mode == "slow":
            # the wedge contracts onto its dominant direction down the
            # tail, so looser error control there costs ~1e-9 in the
            # determinant while halving the step count
            field = lambda y: wedge_field(y / eps) / eps
            v, log_norm, stats = propagate(
                field, eps * xa, eps * xb, w,
                shift=sigma / eps, rtol=opts.slow_rtol, atol=opts.atol,
            )
        else:
            v, log_norm, stats = propagate(
                wedge_field, xa, xb, w,
                shift=sigma, rtol=opts.rtol, atol=opts.atol,
            )
        w = v
        exponent += log_norm
        steps += stats["steps"]
        if opts.check_wedge:
            resid = decomposability_residual(w, m, k)
            if resid > 1e-6:
                raise LiftError(
                    f"wedge decomposability drifted to {resid:.2e} "
                    f"by x = {xb:.3g}"
                )
    exponent += sigma * (target_x - x_start)
    r = np.linalg.norm(w)
    w = w / r
    exponent += np.log(r)
    return ManifoldState(
        lift=w,
        k=k,
        m=m,
        exponent=exponent,
        x=float(target_x),
        x_start=x_start,
        sigma=sigma,
        residual=float(resid),
        steps=steps,
    )


# -- the three determinants --


def evans_lopatinski(znd, lam, opts=None):
    """Inviscid front determinant: interior decaying modes against the
    front-coupling column, paired at the shock position x = 0."""
    opts = opts or _DEFAULT_OPTS
    if not isinstance(znd, ZndProfile):
        raise UsageError("evans_lopatinski needs a ZndProfile")
    lam = complex(lam)
    frame = znd_frame(znd.model, znd)
    L = opts.truncation if opts.truncation is not None else abs(frame.domain[0])
    ms = integrate_manifold(frame, lam, end=-1, L=L, target_x=0.0, opts=opts)
    assembly = frame.meta["assembly"]
    jump = znd_jump_vector(assembly, znd, lam)
    pair = complement_pairing(ms.lift, jump, frame.dimension, ms.k)
    cond = np.linalg.norm(jump) / max(abs(pair), 1e-300)
    return _assemble_value(pair, ms.log_norm_folds(), cond)


def _trace_clock(frame, lam, x_m):
    """Abel integral of tr A(lam, .) over [0, x_m], composite Gauss."""
    if x_m == 0.0:
        return 0.0 + 0.0j
    nodes, weights = np.polynomial.legendre.leggauss(10)
    edges = np.linspace(0.0, x_m, max(4, int(np.ceil(2 * abs(x_m)))) + 1)
    total = 0.0 + 0.0j
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        for t, wgt in zip(nodes, weights):
            total += wgt * np.trace(frame.matrix_field(lam, mid + half * t)) * half
    return total


def _two_sided(frame, lam, opts):
    L = opts.truncation
    Lm = abs(frame.domain[0]) if L is None else L
    Lp = abs(frame.domain[1]) if L is None else L
    ms_m = integrate_manifold(
        frame, lam, end=-1, L=Lm, target_x=opts.match_x, opts=opts
    )
    ms_p = integrate_manifold(
        frame, lam, end=+1, L=Lp, target_x=opts.match_x, opts=opts
    )
    pair = complement_pairing(ms_m.lift, ms_p.lift, frame.dimension, ms_m.k)
    cond = 1.0 / max(abs(pair), 1e-300)
    extra = ms_m.log_norm_folds() + ms_p.log_norm_folds()
    if opts.match_x != 0.0:
        # the full wedge carries the Abel clock exp(int tr A) between
        # pairing points; remove it (net of the analytic end shifts the
        # transports already excluded) so the reported value is the
        # x = 0 one for any matching point
        drift = _trace_clock(frame, lam, opts.match_x)
        drift -= (ms_m.sigma + ms_p.sigma) * opts.match_x
        pair *= np.exp(-1j * drift.imag)
        extra -= drift.real
    return _assemble_value(pair, extra, cond)


def evans_ns(shock, lam_t, opts=None):
    """Shock determinant in the stretched parameter lam_t."""
    opts = opts or _DEFAULT_OPTS
    if not isinstance(shock, ViscousShockProfile):
        raise UsageError("evans_ns needs a ViscousShockProfile")
    frame = ns_frame(shock.model, shock)
    return _two_sided(frame, complex(lam_t), opts)


def evans_rns(profile, lam, opts=None):
    """Reacting viscous determinant; accepts the detonation profile or,
    for the reaction-off fixture, a prebuilt detonation assembly."""
    opts = opts or _DEFAULT_OPTS
    if isinstance(profile, ViscousDetonationProfile):
        frame = rns_frame(profile.model, profile)
    elif isinstance(profile, CoefficientAssembly) and profile.kind == "rns":
        frame = rns_frame(profile.model, profile)
    else:
        raise UsageError(
            "evans_rns needs a ViscousDetonationProfile or a detonation assembly"
        )
    return _two_sided(frame, complex(lam), opts)
