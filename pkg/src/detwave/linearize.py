"""First-order spectral systems along the computed waves.

Three eigenvalue problems share one phase-space layout: an inviscid
reacting one on the reaction-zone profile (flux variable Z = A W) and
two viscous ones (shock and reacting detonation) in the stretched
variable, written for the partially parabolic unknown (Y, W_2) with
Y the viscous flux.  This module assembles the coefficient matrices,
their constant limits, the sign splitting of those limits, and
analytically continued bases of the split subspaces.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import schur, solve_sylvester, sqrtm
from scipy.optimize import linear_sum_assignment

from .errors import (
    ContinuationError,
    SplitAmbiguous,
    StructureError,
    TransversalityError,
    UsageError,
)
from .profiles import (
    ViscousDetonationProfile,
    ViscousShockProfile,
    ZndProfile,
    _newton,
    _shock_rhs_full,
)

_AXIS_TOL = 1e-10  # spectrum closer than this to the imaginary axis is ambiguous


# -- pointwise coefficient blocks --


def _flux_jacobian(model, s, u):
    # dF for F = (f(u) - s u, -s z); the z column of the u rows is zero
    n = model.n
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = model.df(u) - s * np.eye(n)
    A[n, n] = -s
    return A


def _reaction_jacobian(model, q_vec, u, z):
    n, k = model.n, model.k_rate
    phi = model.phi(u)
    dphi = model.dphi(u)
    E = np.zeros((n + 1, n + 1))
    E[:n, :n] = k * z * np.outer(q_vec, dphi)
    E[:n, n] = k * phi * q_vec
    E[n, :n] = -k * z * dphi
    E[n, n] = -k * phi
    return E


def _viscosity_correction(model, W, DW):
    """Matrix v -> (d B~(W) v) W', the profile-derivative correction.

    Only the parabolic rows are nonzero: row i gets
    sum_j d b[i,j]/d u[l] * u2'[j] in the u columns, and the z row gets
    dC/du[l] * z'.  DW is the profile derivative in the frame variable.
    """
    n, d1 = model.n, model.dim_u1
    u = W[:n]
    M = np.zeros((n + 1, n + 1))
    db = model.db(u)  # (n2, n2, n)
    M[d1:n, :n] = np.einsum("ijl,j->il", db, DW[d1:n])
    M[n, :n] = model.dCdiff(u) * DW[n]
    return M


@dataclass(frozen=True)
class CoefficientAssembly:
    """Coefficient evaluations along one wave, in that wave's variable.

    kind "znd" works in the original variable on the reaction-zone
    profile; "rns" and "ns" work in the stretched variable, where the
    transport matrix carries the profile-derivative correction
    A~ v = dF v - (dB~ v) W'.
    """

    model: object
    kind: str
    profile: object
    s: float
    q_vec: np.ndarray
    eps: float = None

    def state(self, x):
        """(W, W') at x, derivatives taken in the frame variable."""
        fetch = getattr(self, "_state_fn", None)
        if fetch is None:
            fetch = _build_state_fn(self)
            object.__setattr__(self, "_state_fn", fetch)
        return fetch(float(x))

    def blocks(self, x):
        """(A~, b~, E) from one profile fetch; the viscous hot path."""
        if self.kind == "znd":
            raise UsageError("blocks is a viscous-frame quantity")
        W, DW = self.state(x)
        model = self.model
        u = W[: model.n]
        A_t = _flux_jacobian(model, self.s, u)
        A_t -= _viscosity_correction(model, W, DW)
        r = model.r
        bt = np.zeros((r, r))
        bt[: r - 1, : r - 1] = model.b(u)
        bt[r - 1, r - 1] = model.Cdiff(u)
        if self.kind == "ns":
            E = np.zeros_like(A_t)
        else:
            E = _reaction_jacobian(model, self.q_vec, u, W[-1])
        return A_t, bt, E

    def A(self, x):
        W, _ = self.state(x)
        return _flux_jacobian(self.model, self.s, W[: self.model.n])

    def E(self, x):
        if self.kind == "ns":
            m = self.model.n + 1
            return np.zeros((m, m))
        W, _ = self.state(x)
        return _reaction_jacobian(self.model, self.q_vec, W[: self.model.n], W[-1])

    def A_tilde(self, x):
        if self.kind == "znd":
            raise UsageError("A_tilde is a viscous-frame quantity")
        W, DW = self.state(x)
        A = _flux_jacobian(self.model, self.s, W[: self.model.n])
        return A - _viscosity_correction(self.model, W, DW)

    def b_tilde(self, x):
        W, _ = self.state(x)
        u = W[: self.model.n]
        r = self.model.r
        bt = np.zeros((r, r))
        bt[: r - 1, : r - 1] = self.model.b(u)
        bt[r - 1, r - 1] = self.model.Cdiff(u)
        return bt

    def end_blocks(self, side):
        """(A, E, b~) at the rest state on the given side (constants)."""
        model = self.model
        if self.kind == "znd" or isinstance(self.profile, ViscousDetonationProfile):
            ends = self.profile.end_states
            if side < 0:
                u, z = model.u_of_state(ends.u_minus), 0.0
            else:
                u, z = model.u_of_state(ends.u_plus), 1.0
        else:
            u = model.u_of_state(self.profile.u_star if side < 0 else self.profile.u_plus)
            z = 1.0
        A = _flux_jacobian(model, self.s, u)
        if self.kind == "ns":
            E = np.zeros_like(A)
        else:
            E = _reaction_jacobian(model, self.q_vec, u, z)
        r = model.r
        bt = np.zeros((r, r))
        bt[: r - 1, : r - 1] = model.b(u)
        bt[r - 1, r - 1] = model.Cdiff(u)
        return A, E, bt


def assemble_znd(model, znd):
    if not isinstance(znd, ZndProfile):
        raise UsageError("assemble_znd expects a reaction-zone profile")
    ends = znd.end_states
    return CoefficientAssembly(
        model=model, kind="znd", profile=znd, s=ends.s, q_vec=ends.q_vec(model)
    )


def assemble_rns(model, prof):
    if not isinstance(prof, ViscousDetonationProfile):
        raise UsageError("assemble_rns expects a viscous detonation profile")
    ends = prof.end_states
    return CoefficientAssembly(
        model=model,
        kind="rns",
        profile=prof,
        s=ends.s,
        q_vec=ends.q_vec(model),
        eps=prof.eps,
    )


def assemble_ns(model, shock):
    if not isinstance(shock, ViscousShockProfile):
        raise UsageError("assemble_ns expects a viscous shock profile")
    return CoefficientAssembly(
        model=model, kind="ns", profile=shock, s=shock.s, q_vec=np.zeros(model.n)
    )


def assemble_frozen_rns(model, shock, eps):
    """Detonation-frame assembly on the shock with z frozen at 1.

    The reacting and nonreacting viscous systems coincide on this
    object when the rate constant vanishes; used as that fixture.
    """
    if not isinstance(shock, ViscousShockProfile):
        raise UsageError("assemble_frozen_rns expects a viscous shock profile")
    if not 0.0 < eps:
        raise UsageError("eps must be positive")
    return CoefficientAssembly(
        model=model,
        kind="rns",
        profile=shock,
        s=shock.s,
        q_vec=np.array(model.q_vec, dtype=float),
        eps=float(eps),
    )


def _build_state_fn(assembly):
    """Scalar-point (W, W') fetcher with the per-wave constants bound once.

    Reproduces the batched profile samplers pointwise; long integrations
    hit this thousands of times, so the spline handles, end states, and
    reconstruction geometry must not be rebuilt per call.
    """
    model = assembly.model
    n = model.n

    if assembly.kind == "znd":
        prof = assembly.profile
        spl = prof._spline()
        lo = prof.grid[0]
        ends = prof.end_states
        W_m = np.append(model.u_of_state(ends.u_minus), 0.0)
        W_p = np.append(model.u_of_state(ends.u_plus), 1.0)
        rest = np.zeros(n + 1)
        s, k = ends.s, model.k_rate
        qv = ends.q_vec(model)
        eye = np.eye(n)
        conserved = prof.conserved_value

        def fetch_znd(x):
            if x > 0.0:
                return W_p.copy(), rest.copy()
            if x < lo:
                return W_m.copy(), rest.copy()
            row = spl(x)
            u, z = row[:n], row[n]
            # project the interpolant back onto the conserved relation
            target = conserved + s * qv * z
            root, ok = _newton(
                lambda v: model.f(v) - s * v - target,
                lambda v: model.df(v) - s * eye,
                u,
                1.0 + np.linalg.norm(u),
            )
            if ok:
                u = root
            dz = (k / s) * model.phi(u) * z
            du = np.linalg.solve(model.df(u) - s * eye, s * qv * dz)
            return np.append(u, z), np.append(du, dz)

        return fetch_znd

    if isinstance(assembly.profile, ViscousShockProfile):
        # covers kind "ns" and the reaction-frozen detonation fixture
        shock = assembly.profile
        spl = shock._spline()
        lo, hi = shock.fast_grid[0], shock.fast_grid[-1]
        u_star = model.u_of_state(shock.u_star)
        u_plus = model.u_of_state(shock.u_plus)
        W_m = np.append(u_star, 1.0)
        W_p = np.append(u_plus, 1.0)
        rest = np.zeros(n + 1)
        s = shock.s

        def fetch_shock(x):
            if x < lo:
                return W_m.copy(), rest.copy()
            if x > hi:
                return W_p.copy(), rest.copy()
            u = spl(x)
            du = _shock_rhs_full(model, u, u_plus, s)
            return np.append(u, 1.0), np.append(du, 0.0)

        return fetch_shock

    prof = assembly.profile
    eps = assembly.eps
    spl = prof._spline()
    lo, hi = prof.grid[0], prof.grid[-1]
    ends = prof.end_states
    n1, n2 = model.dim_u1, model.dim_u2
    _, _, M1, df12, c_f = prof._geometry()
    W_m = np.append(model.u_of_state(ends.u_minus), 0.0)
    W_p = np.append(model.u_of_state(ends.u_plus), 1.0)
    rest = np.zeros(n + 1)
    s, k = ends.s, model.k_rate
    qv = ends.q_vec(model)

    def fetch_rns(x):
        xs = eps * x
        if xs < lo:
            return W_m.copy(), rest.copy()
        if xs > hi:
            return W_p.copy(), rest.copy()
        V = spl(xs)
        uII = V[n + 1 : n + 1 + n2]
        z = V[-1]
        if n1:
            uI = M1 @ (V[:n1] - df12 @ uII - c_f)
            u = np.concatenate([uI, uII])
        else:
            u = uII
        # derivatives in the stretched variable: the 1/eps of the slow
        # rates cancels against the chain-rule factor
        YII = V[n1:n]
        duII = np.linalg.solve(model.b(u), model.f(u)[n1:] - s * u[n1:] - YII)
        dz = -(s * z + V[n]) / model.Cdiff(u)
        if n1:
            dYI = k * qv[:n1] * model.phi(u) * z
            duI = M1 @ (eps * dYI - df12 @ duII)
            du = np.concatenate([duI, duII])
        else:
            du = duII
        return np.append(u, z), np.append(du, dz)

    return fetch_rns


# -- first-order systems --


def _first_order_matrix(d1, A_t, b_t, S):
    """Phase-space matrix for variables (Y, W_2).

    A_t is the corrected transport matrix, b_t the parabolic block, and
    S the source-minus-spectral matrix multiplying W in the Y equation
    (already carrying any stretching factor).  W_1 is reconstructed
    algebraically from (Y_1, W_2); all blocks may be empty.
    """
    np1 = A_t.shape[0]
    m = np1 + (np1 - d1)
    A11 = A_t[:d1, :d1]
    A12 = A_t[:d1, d1:]
    A21 = A_t[d1:, :d1]
    A22 = A_t[d1:, d1:]
    if d1 and abs(np.linalg.det(A11)) < 1e-12:
        raise StructureError("hyperbolic transport block is singular")
    if abs(np.linalg.det(b_t)) < 1e-14:
        raise StructureError("parabolic viscosity block is singular")
    A11inv = np.linalg.inv(A11)
    binv = np.linalg.inv(b_t)
    G = np.zeros((m, m), dtype=complex)
    G[:np1, :d1] = S[:, :d1] @ A11inv
    G[:np1, np1:] = S[:, d1:] - S[:, :d1] @ A11inv @ A12
    G[np1:, :d1] = binv @ A21 @ A11inv
    G[np1:, d1:np1] = -binv
    G[np1:, np1:] = binv @ (A22 - A21 @ A11inv @ A12)
    return G


def znd_interior_matrix(assembly, lam, x):
    """(-lam I + E) A^{-1}, the flux-variable coefficient matrix."""
    if assembly.kind != "znd":
        raise UsageError("znd_interior_matrix needs a znd assembly")
    W, _ = assembly.state(x)
    u = W[: assembly.model.n]
    A = _flux_jacobian(assembly.model, assembly.s, u)
    E = _reaction_jacobian(assembly.model, assembly.q_vec, u, W[-1])
    if abs(np.linalg.det(A)) < 1e-12:
        raise TransversalityError(f"transport matrix singular at x = {x}")
    return np.linalg.solve(A.T, (-lam * np.eye(A.shape[0]) + E).T).T


def znd_jump_vector(assembly, znd, lam):
    """lam [W] + A(0-) W'(0-), the front-coupling column."""
    model = assembly.model
    ends = znd.end_states
    up = model.u_of_state(ends.u_plus)
    ustar = model.u_of_state(ends.u_star)
    jump = np.append(up - ustar, 0.0)  # z is continuous across the front
    W0 = np.append(ustar, 1.0)
    A0 = _flux_jacobian(model, ends.s, W0[: model.n])
    DW0 = znd.derivative(np.array([0.0]))[0]
    return lam * jump + A0 @ DW0


def rns_matrix(assembly, eps, lam, x):
    """Detonation coefficient matrix at stretched position x.

    The spectral entries enter through eps*lam, kept as one product so
    the large-modulus regime stays well scaled.
    """
    if assembly.kind != "rns":
        raise UsageError("rns_matrix needs a detonation assembly")
    if assembly.eps is not None and abs(assembly.eps - eps) > 1e-14 * abs(eps):
        raise UsageError("eps disagrees with the assembly's profile")
    A_t, b_t, E = assembly.blocks(x)
    S = eps * E - (eps * lam) * np.eye(E.shape[0])
    return _first_order_matrix(assembly.model.dim_u1, A_t, b_t, S)


def ns_matrix(shock, lam_t, x):
    """Shock coefficient matrix at stretched position x, parameter lam_t."""
    assembly = shock
    if isinstance(shock, ViscousShockProfile):
        assembly = assemble_ns(shock.model, shock)
    if assembly.kind != "ns":
        raise UsageError("ns_matrix needs a shock assembly")
    A_t, b_t, _ = assembly.blocks(x)
    S = -lam_t * np.eye(A_t.shape[0])
    return _first_order_matrix(assembly.model.dim_u1, A_t, b_t, S)


def lift_state(assembly, x, W, DW):
    """Phase-space vector of a gas-variables solution at x.

    W and DW are the solution value and its derivative in the frame
    variable; returns Z = A W for the znd frame and (A~ W - B~ W', W_2)
    for the viscous frames.
    """
    if assembly.kind == "znd":
        return assembly.A(x) @ W
    d1 = assembly.model.dim_u1
    A_t, b_t, _ = assembly.blocks(x)
    Y = A_t @ W
    Y[d1:] -= b_t @ DW[d1:]
    return np.concatenate([Y, W[d1:]])


# -- frames and limits --


@dataclass(frozen=True)
class SpectralFrame:
    """One eigenvalue problem as a parametrized linear system.

    matrix_field(lam, x) uses the frame's own spectral parameter (the
    stretched one for the shock frame) and its own space variable.
    split_dims = (unstable rank at -inf, stable rank at +inf) on the
    open right half plane; expected_ranks is None for hand-built frames,
    which disables the count checks.
    """

    kind: str
    dimension: int
    matrix_field: object
    limit_minus: object
    limit_plus: object
    split_dims: tuple
    domain: tuple
    expected_ranks: dict = None
    meta: dict = field(default_factory=dict)

    def limit(self, side):
        return self.limit_minus if side < 0 else self.limit_plus


def znd_frame(model, znd):
    assembly = assemble_znd(model, znd)
    ends = znd.end_states
    n = model.n
    um = model.u_of_state(ends.u_minus)
    up = model.u_of_state(ends.u_plus)
    A_m = _flux_jacobian(model, ends.s, um)
    A_p = _flux_jacobian(model, ends.s, up)
    E_m = _reaction_jacobian(model, assembly.q_vec, um, 0.0)
    Ainv_m, Ainv_p = np.linalg.inv(A_m), np.linalg.inv(A_p)

    return SpectralFrame(
        kind="znd",
        dimension=n + 1,
        matrix_field=lambda lam, x: znd_interior_matrix(assembly, lam, x),
        limit_minus=lambda lam: (-lam * np.eye(n + 1) + E_m) @ Ainv_m,
        limit_plus=lambda lam: -lam * Ainv_p,
        split_dims=(n, 0),
        domain=(znd.grid[0], 0.0),
        expected_ranks={"minus": (n, 1), "plus": (n + 1, 0)},
        meta={"assembly": assembly, "profile": znd},
    )


def _viscous_limit(model, assembly, side):
    return assembly.end_blocks(side)


def rns_frame(model, prof, eps=None):
    """Frame for the reacting viscous problem; accepts the detonation
    profile or, for the frozen-reaction fixture, a shock assembly."""
    if isinstance(prof, CoefficientAssembly):
        assembly = prof
        if assembly.kind != "rns":
            raise UsageError("rns_frame needs a detonation assembly")
    else:
        assembly = assemble_rns(model, prof)
    eps = assembly.eps if eps is None else float(eps)
    n, r, d1 = model.n, model.r, model.dim_u1
    m = n + 1 + r
    A_m, E_m, bt_m = _viscous_limit(model, assembly, -1)
    A_p, E_p, bt_p = _viscous_limit(model, assembly, +1)
    if isinstance(assembly.profile, ViscousShockProfile):
        grid = assembly.profile.fast_grid
        domain = (grid[0], grid[-1])
    else:
        grid = assembly.profile.grid
        domain = (grid[0] / eps, grid[-1] / eps)

    def lim_minus(lam):
        S = eps * E_m - (eps * lam) * np.eye(n + 1)
        return _first_order_matrix(d1, A_m, bt_m, S)

    def lim_plus(lam):
        S = eps * E_p - (eps * lam) * np.eye(n + 1)
        return _first_order_matrix(d1, A_p, bt_p, S)

    return SpectralFrame(
        kind="rns",
        dimension=m,
        matrix_field=lambda lam, x: rns_matrix(assembly, eps, lam, x),
        limit_minus=lim_minus,
        limit_plus=lim_plus,
        split_dims=(n + 1, r),
        domain=domain,
        expected_ranks={"minus": (n + 1, r), "plus": (n + 1, r)},
        meta={"assembly": assembly, "eps": eps},
    )


def ns_frame(model, shock):
    assembly = assemble_ns(model, shock)
    n, r, d1 = model.n, model.r, model.dim_u1
    A_m, _, bt_m = _viscous_limit(model, assembly, -1)
    A_p, _, bt_p = _viscous_limit(model, assembly, +1)

    def lim(A, bt):
        return lambda lam_t: _first_order_matrix(
            d1, A, bt, -lam_t * np.eye(n + 1)
        )

    return SpectralFrame(
        kind="ns",
        dimension=n + 1 + r,
        matrix_field=lambda lam_t, x: ns_matrix(assembly, lam_t, x),
        limit_minus=lim(A_m, bt_m),
        limit_plus=lim(A_p, bt_p),
        split_dims=(n + 1, r),
        domain=(shock.fast_grid[0], shock.fast_grid[-1]),
        expected_ranks={"minus": (n + 1, r), "plus": (n + 1, r)},
        meta={"assembly": assembly},
    )


# -- splitting of the limit matrices --


def _spectral_projector(G, select):
    """Projector onto the invariant subspace of the selected eigenvalues."""
    m = G.shape[0]
    T, Zs, sdim = schur(np.asarray(G, dtype=complex), output="complex", sort=select)
    if sdim == 0:
        return np.zeros((m, m), dtype=complex), np.zeros((m, 0), dtype=complex), 0
    if sdim == m:
        return np.eye(m, dtype=complex), Zs, m
    T11, T12, T22 = T[:sdim, :sdim], T[:sdim, sdim:], T[sdim:, sdim:]
    R = solve_sylvester(T11, -T22, T12)
    P_tilde = np.zeros((m, m), dtype=complex)
    P_tilde[:sdim, :sdim] = np.eye(sdim)
    P_tilde[:sdim, sdim:] = R
    P = Zs @ P_tilde @ Zs.conj().T
    return P, Zs[:, :sdim], sdim


@dataclass(frozen=True)
class EndSplit:
    eigenvalues: np.ndarray
    unstable_rank: int
    stable_rank: int
    gap: float
    P_unstable: np.ndarray
    P_stable: np.ndarray


@dataclass(frozen=True)
class SplitData:
    minus: EndSplit
    plus: EndSplit
    counts_checked: bool


def _sign_split(G, lam):
    ev = np.linalg.eigvals(G)
    scale = max(1.0, np.abs(ev).max())
    gap = np.abs(ev.real).min()
    if gap < max(_AXIS_TOL, 1e-13 * scale) and abs(lam) > 1e-8:
        raise SplitAmbiguous(
            f"limit spectrum within {gap:.2e} of the imaginary axis; "
            "deform the contour"
        )
    P_s, _, ns = _spectral_projector(G, lambda mu: mu.real < 0.0)
    P_u = np.eye(G.shape[0]) - P_s
    return EndSplit(
        eigenvalues=np.sort_complex(ev),
        unstable_rank=G.shape[0] - ns,
        stable_rank=ns,
        gap=float(gap),
        P_unstable=P_u,
        P_stable=P_s,
    )


def limiting_splitting(frame, lam):
    """Sign partition of both limit matrices at lam.

    On the open right half plane the ranks are checked against the
    frame's expected counts; elsewhere the partition is returned as
    computed, since the continued subspaces need not follow signs.
    """
    minus = _sign_split(frame.limit_minus(lam), lam)
    plus = _sign_split(frame.limit_plus(lam), lam)
    check = frame.expected_ranks is not None and lam.real > 1e-12
    if check:
        for name, split in (("minus", minus), ("plus", plus)):
            want_u, want_s = frame.expected_ranks[name]
            got = (split.unstable_rank, split.stable_rank)
            if got != (want_u, want_s):
                raise StructureError(
                    f"{frame.kind} limit at {name} infinity splits {got}, "
                    f"expected {(want_u, want_s)} at lam = {lam}"
                )
    return SplitData(minus=minus, plus=plus, counts_checked=check)


# -- analytic continuation of split subspaces --


@dataclass(frozen=True)
class AnalyticBasis:
    """Basis of one continued invariant subspace along a parameter path.

    bases[j] spans the subspace at lam_path[j]; the first entry has
    orthonormal columns and later ones evolve by projector transport,
    so they stay analytic in the parameter but not orthonormal.
    """

    lam_path: np.ndarray
    bases: list
    projectors: list
    which: str
    end: int
    rank: int
    steps: int
    max_projector_step: float

    def basis_at(self, j):
        return self.bases[j]


def _group_projector(G, targets, gap):
    delta = max(0.49 * gap, 1e-13 * (1.0 + np.abs(targets).max()))

    def select(mu):
        return bool(np.abs(mu - targets).min() < delta)

    P, cols, sdim = _spectral_projector(G, select)
    if sdim != targets.size:
        raise ContinuationError(
            f"eigenvalue group resolved {sdim} of {targets.size} members"
        )
    return P, cols


def _match_group(ev_old, ev_new, group_idx):
    cost = np.abs(ev_old[:, None] - ev_new[None, :])
    rows, cols = linear_sum_assignment(cost)
    to_new = dict(zip(rows, cols))
    new_idx = np.array(sorted(to_new[i] for i in group_idx))
    inside = ev_new[new_idx]
    outside = np.delete(ev_new, new_idx)
    if outside.size == 0 or inside.size == 0:
        gap = np.inf
    else:
        gap = np.abs(inside[:, None] - outside[None, :]).min()
    return new_idx, gap


def _direct_rotation(P0, P1):
    dP = P1 - P0
    m = P0.shape[0]
    core = P1 @ P0 + (np.eye(m) - P1) @ (np.eye(m) - P0)
    S = sqrtm(np.eye(m) - dP @ dP)
    return np.linalg.solve(S, core)


def analytic_basis(frame, lam_path, which="unstable", end=-1, max_step=0.05):
    """Continue a basis of the chosen split subspace along lam_path.

    The subspace is anchored by the sign partition at the first path
    point and then followed as an eigenvalue group, so it stays the
    analytic continuation even where real parts change sign.  Steps are
    bisected until the projector moves by at most max_step; a collapse
    of the group's spectral gap raises ContinuationError.
    """
    if which not in ("stable", "unstable"):
        raise UsageError("which must be 'stable' or 'unstable'")
    path = np.asarray(lam_path, dtype=complex).ravel()
    if path.size < 1:
        raise UsageError("empty parameter path")
    limitf = frame.limit(end)

    G = limitf(path[0])
    ev = np.linalg.eigvals(G)
    axis_gap = np.abs(ev.real).min()
    if axis_gap < _AXIS_TOL:
        raise SplitAmbiguous(
            f"cannot anchor a splitting at lam = {path[0]}: spectrum "
            f"within {axis_gap:.2e} of the imaginary axis"
        )
    mask = ev.real > 0.0 if which == "unstable" else ev.real < 0.0
    group = np.sort(np.nonzero(mask)[0])
    if group.size == 0:
        raise StructureError(f"no {which} directions at lam = {path[0]}")
    P, B = _group_projector(G, ev[group], _group_gap(ev, group))

    bases = [B]
    projectors = [P]
    steps = 0
    worst = 0.0
    lam_cur, ev_cur, group_cur = path[0], ev, group
    for lam_next in path[1:]:
        pending = [lam_next]
        while pending:
            trial = pending[-1]
            G_t = limitf(trial)
            ev_t = np.linalg.eigvals(G_t)
            idx_t, gap_t = _match_group(ev_cur, ev_t, group_cur)
            if gap_t < max(_AXIS_TOL, 1e-12 * (1.0 + np.abs(ev_t).max())):
                raise ContinuationError(
                    f"spectral gap collapsed near lam = {trial} (gap {gap_t:.2e})"
                )
            P_t, _ = _group_projector(G_t, ev_t[idx_t], gap_t)
            dP = np.linalg.norm(P_t - P, 2)
            if dP > max_step:
                if steps + len(pending) > 10000:
                    raise ContinuationError(
                        f"projector transport stalled near lam = {trial}"
                    )
                pending.append(0.5 * (lam_cur + trial))
                continue
            B = _direct_rotation(P, P_t) @ B
            P, ev_cur, group_cur, lam_cur = P_t, ev_t, idx_t, trial
            worst = max(worst, dP)
            steps += 1
            pending.pop()
        resid = np.linalg.norm(P @ B - B) / max(np.linalg.norm(B), 1e-300)
        if resid > 1e-10:
            raise ContinuationError(
                f"continued basis left its subspace at lam = {lam_next} "
                f"(residual {resid:.2e})"
            )
        bases.append(B)
        projectors.append(P)
    return AnalyticBasis(
        lam_path=path,
        bases=bases,
        projectors=projectors,
        which=which,
        end=end,
        rank=B.shape[1],
        steps=steps,
        max_projector_step=worst,
    )


def _group_gap(ev, group_idx):
    inside = ev[group_idx]
    outside = np.delete(ev, group_idx)
    if outside.size == 0:
        return np.inf
    return np.abs(inside[:, None] - outside[None, :]).min()
