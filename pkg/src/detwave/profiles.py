"""Traveling-wave profile construction.

Three profile families, all in the wave frame moving with speed s:

* ZND detonation: reaction zone on x <= 0, discontinuous shock at
  x = 0, constant unburned state ahead.  Computed from the conserved
  relation -s(u + q z) + f(u) = const and the scalar reaction equation
  z' = (k/s) phi(u(z)) z integrated backward from the shock.

* Viscous Neumann shock: smooth fast-variable profile solving
  B(u) u' = f(u) - f(u_+) - s(u - u_+), launched along the one
  dimensional unstable manifold of the post-shock state.

* Viscous reacting detonation: the full second-order traveling-wave
  system at small eps, posed as a first-order boundary-value problem
  in the integrated variables Y = f(u) - s u - eps B(u) u' and
  Y_z = -s z - eps C(u) z'.  In these variables the hyperbolic rows
  become exact algebraic relations (the flux rows without viscosity
  are affine), Y + q Y_z is conserved, and the boundary conditions
  reduce to spectral projections at the burned rest point plus center
  coordinate pins.

Profiles carry node values plus exact ODE derivatives at the nodes;
sampling is cubic Hermite on that data, so values reproduce bit-exactly
after a serialization round trip.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_bvp, solve_ivp
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import brentq

from .errors import (
    ConvergenceError,
    DomainError,
    DomainExhausted,
    IgnitionError,
    LaxViolation,
    NoBurnedState,
    NoConnection,
    NoShock,
    StructureError,
    TransversalityError,
    UsageError,
)
from .models import GasState

__all__ = [
    "ProfileOptions",
    "EndStates",
    "ZndProfile",
    "ViscousShockProfile",
    "ViscousDetonationProfile",
    "solve_neumann_shock",
    "solve_burned_state",
    "solve_end_states",
    "compute_znd_profile",
    "compute_ns_shock_profile",
    "compute_viscous_detonation_profile",
    "sample_profile",
    "save_profile",
    "load_profile",
]


@dataclass(frozen=True)
class ProfileOptions:
    """Numerical knobs shared by the profile constructors."""

    rtol: float = 1e-10
    atol: float = 1e-14
    tail_tol: float = 1e-10
    tail_margin: float = 1.2
    slow_spacing: float = 0.1
    fast_spacing: float = 0.05
    fast_tail_spacing: float = 0.5
    fast_core: float = 30.0
    L_tilde: float = 40.0
    max_domain: float = 10000.0
    shock_x_max: float = 400.0
    eps_max: float = 0.1
    delta: float = 0.5
    K_p3: float = 10.0
    bvp_tol: float = 1e-9
    bvp_accept: float = 1e-9
    bvp_spacing: float = 0.25
    bvp_window: float = 30.0
    z_table: int = 1025


_DEFAULT_OPTS = ProfileOptions()


def _snap_nodes(xq, grid, out, node_vals):
    # spline evaluation at a breakpoint carries roundoff; nodes are exact
    pos = np.clip(np.searchsorted(grid, xq), 0, grid.size - 1)
    hit = grid[pos] == xq
    if np.any(hit):
        out[hit] = node_vals[pos[hit]]


def _newton(res, jac, u0, scale, tol=1e-13, maxit=40):
    """Damped Newton for small dense systems; returns (root, ok)."""
    u = np.array(u0, dtype=float)
    try:
        r = res(u)
    except DomainError:
        return u, False
    for _ in range(maxit):
        nr = np.linalg.norm(r)
        if nr <= tol * scale:
            return u, True
        try:
            step = np.linalg.solve(jac(u), -r)
        except np.linalg.LinAlgError:
            return u, False
        t = 1.0
        while t > 1e-8:
            try:
                u_new = u + t * step
                r_new = res(u_new)
            except DomainError:
                t *= 0.5
                continue
            if np.linalg.norm(r_new) < nr or np.linalg.norm(r_new) <= tol * scale:
                break
            t *= 0.5
        else:
            return u, False
        u, r = u_new, r_new
    return u, np.linalg.norm(r) <= 10 * tol * scale


# -- end states --


@dataclass(frozen=True)
class EndStates:
    """Burned / post-shock / unburned states and the wave speed.

    q is the effective scalar heat release (= model.params.q unless a
    study overrides it, e.g. the q = 0 pure-shock fixture).
    """

    u_minus: GasState
    u_star: GasState
    u_plus: GasState
    s: float
    q: float = None
    z_minus: float = 0.0
    z_plus: float = 1.0

    def q_vec(self, model):
        if self.q is None:
            return model.q_vec
        return model.q_vec * (self.q / model.params.q)

    def validate(self, model, margin=1e-8):
        """Check Rankine-Hugoniot closure, Lax ordering, ignition signs."""
        um = model.u_of_state(self.u_minus)
        us = model.u_of_state(self.u_star)
        up = model.u_of_state(self.u_plus)
        s = self.s
        qv = self.q_vec(model)
        scale = 1.0 + max(np.linalg.norm(model.f(us)), abs(s) * np.linalg.norm(us))
        rh = s * (us - up) - (model.f(us) - model.f(up))
        if np.linalg.norm(rh) > 1e-10 * scale:
            raise ConvergenceError(
                "Rankine-Hugoniot residual too large", float(np.linalg.norm(rh))
            )
        burned = -s * (um - qv) + model.f(um) - (-s * us + model.f(us))
        if np.linalg.norm(burned) > 1e-10 * scale:
            raise ConvergenceError(
                "burned-state relation residual too large",
                float(np.linalg.norm(burned)),
            )
        _check_lax(model, um, us, up, s, margin)
        if model.phi(um) <= 0:
            raise IgnitionError("ignition function vanishes at the burned state")
        if model.phi(up) != 0.0 or np.any(model.dphi(up) != 0.0):
            raise IgnitionError("unburned state must sit strictly below ignition")
        return self


def _check_lax(model, um, us, up, s, margin=1e-8):
    # extreme Lax conditions on both sides of the fast layer
    for tag, u in (("burned", um), ("post-shock", us)):
        a = np.sort(np.linalg.eigvals(model.df(u)).real)
        if not a[-1] > s + margin:
            raise LaxViolation(f"a_n({tag}) must exceed s", model.n)
        if model.n > 1 and not a[-2] < s - margin:
            raise LaxViolation(f"a_(n-1)({tag}) must lie below s", model.n - 1)
    a_plus = np.sort(np.linalg.eigvals(model.df(up)).real)
    if not a_plus[-1] < s - margin:
        raise LaxViolation("a_n(unburned) must lie below s", model.n)


def solve_neumann_shock(model, u_plus, s, opts=None):
    """Post-shock state u_* of the inert shock with speed s ahead of u_+.

    Continuation in the shock speed from the acoustic limit keeps
    Newton on the nontrivial branch of s(u - u_+) = f(u) - f(u_+).
    """
    up = model.u_of_state(u_plus)
    scale = 1.0 + np.linalg.norm(up)
    lam, vec = np.linalg.eig(model.df(up))
    order = np.argsort(lam.real)
    a_n = lam.real[order[-1]]
    r_n = vec[:, order[-1]].real
    r_n = r_n / np.linalg.norm(r_n)
    if not s > a_n + 1e-8:
        raise LaxViolation(
            "wave speed does not exceed the fastest characteristic ahead", model.n
        )

    def a_max(u):
        return np.linalg.eigvals(model.df(u)).real.max()

    h = 1e-5 * scale
    g = (a_max(up + h * r_n) - a_max(up - h * r_n)) / (2 * h)
    if abs(g) < 1e-8:
        raise NoShock("characteristic family not genuinely nonlinear at u_+")

    fp = model.f(up)
    eye = np.eye(model.n)

    sigma_t = s - a_n
    steps = 24
    # secant continuation in sigma through (0, u_+); the first seed uses
    # the weak-shock asymptotic amplitude 2 sigma / (grad a_n . r_n)
    u_prev, sig_prev = up, 0.0
    u_cur = sig_cur = None
    for j in range(1, steps + 1):
        sig = sigma_t * (j / steps) ** 2
        if u_cur is None:
            guess = up + (2.0 * sig / g) * r_n
        else:
            guess = u_cur + (u_cur - u_prev) * ((sig - sig_cur) / (sig_cur - sig_prev))
        speed = a_n + sig
        root, ok = _newton(
            lambda u: model.f(u) - fp - speed * (u - up),
            lambda u: model.df(u) - speed * eye,
            guess,
            scale,
        )
        if not ok or np.linalg.norm(root - up) < 1e-6 * scale:
            raise NoShock(f"no nontrivial Hugoniot root at speed {speed:.6g}")
        if u_cur is not None:
            u_prev, sig_prev = u_cur, sig_cur
        u_cur, sig_cur = root, sig
    a_star = np.sort(np.linalg.eigvals(model.df(u_cur)).real)
    if not a_star[-1] > s + 1e-8:
        raise LaxViolation("post-shock state not subsonic relative to the wave", model.n)
    if model.n > 1 and not a_star[-2] < s - 1e-8:
        raise LaxViolation("intermediate characteristic violates Lax ordering", model.n - 1)
    u_star = model.state_of_u(u_cur, 1.0)
    model.state(u_star.components, 1.0)  # admissibility
    return u_star


def solve_burned_state(model, u_star, s, q=None):
    """Burned state u_- from -s u_* + f(u_*) = -s(u_- - q) + f(u_-).

    Continuation in the heat release from q = 0 (where u_- = u_*)
    tracks the strong-detonation branch; collapse of the continuation
    step signals that no real burned state exists.
    """
    us = model.u_of_state(u_star)
    scale = 1.0 + np.linalg.norm(us)
    if q is None:
        q = model.params.q
    if q < 0:
        raise UsageError("heat release must be nonnegative")
    q_dir = model.q_vec / model.params.q  # unit heat-release pattern
    m_star = model.f(us) - s * us
    eye = np.eye(model.n)

    def jac(u):
        return model.df(u) - s * eye

    u_cur = us.copy()
    t, dt = 0.0, 0.25
    while t < 1.0 - 1e-14:
        step = min(dt, 1.0 - t)
        qv = (t + step) * q * q_dir
        root, ok = _newton(lambda u: model.f(u) - s * u + s * qv - m_star, jac, u_cur, scale)
        if ok:
            # reject jumps over the sonic point onto the weak branch
            lam_max = np.linalg.eigvals(model.df(root)).real.max()
            ok = lam_max > s and np.linalg.norm(root - u_cur) < 0.8 * scale
        if not ok:
            dt = step / 2
            if dt < 1e-10:
                raise NoBurnedState(
                    f"no real burned state: continuation stalled at heat release {t * q:.6g}"
                )
            continue
        u_cur, t = root, t + step
        dt = min(2 * dt, 0.25)
    lam = np.sort(np.linalg.eigvals(model.df(u_cur)).real)
    if not lam[-1] > s + 1e-8:
        raise NoBurnedState("burned root lost the strong-detonation branch")
    if model.phi(u_cur) <= 0.0:
        raise IgnitionError("ignition function vanishes at the burned state")
    u_minus = model.state_of_u(u_cur, 0.0)
    model.state(u_minus.components, 0.0)
    return u_minus


def solve_end_states(model, u_plus, s, q=None, opts=None):
    """Assemble and validate the full EndStates record."""
    u_star = solve_neumann_shock(model, u_plus, s, opts)
    u_minus = solve_burned_state(model, u_star, s, q)
    ends = EndStates(
        u_minus=u_minus,
        u_star=u_star,
        u_plus=u_plus,
        s=float(s),
        q=float(q) if q is not None else float(model.params.q),
    )
    return ends.validate(model)


# -- shared serialization helpers --


def _ends_payload(ends):
    return {
        "u_minus": [list(ends.u_minus.components), ends.u_minus.z],
        "u_star": [list(ends.u_star.components), ends.u_star.z],
        "u_plus": [list(ends.u_plus.components), ends.u_plus.z],
        "s": ends.s,
        "q": ends.q,
    }


def _ends_from_payload(d):
    return EndStates(
        u_minus=GasState(tuple(d["u_minus"][0]), d["u_minus"][1]),
        u_star=GasState(tuple(d["u_star"][0]), d["u_star"][1]),
        u_plus=GasState(tuple(d["u_plus"][0]), d["u_plus"][1]),
        s=d["s"],
        q=d["q"],
    )


def _check_payload(payload, kind, model):
    if payload.get("format") != "detwave-profile-v1":
        raise UsageError("unrecognized profile cache format")
    if payload.get("kind") != kind:
        raise UsageError(
            f"cache holds a {payload.get('kind')!r} profile, expected {kind!r}"
        )
    if payload.get("model_digest") != model.config_digest():
        raise UsageError("profile cache was built for a different model configuration")


def save_profile(profile, path):
    with open(path, "w") as fh:
        json.dump(profile.to_payload(), fh, sort_keys=True)
        fh.write("\n")


def load_profile(path, model, znd=None, shock=None):
    with open(path) as fh:
        payload = json.load(fh)
    kind = payload.get("kind")
    if kind == "znd":
        return ZndProfile.from_payload(payload, model)
    if kind == "ns_shock":
        return ViscousShockProfile.from_payload(payload, model)
    if kind == "rns":
        return ViscousDetonationProfile.from_payload(payload, model, znd=znd, shock=shock)
    raise UsageError(f"unrecognized profile kind {kind!r}")


# -- profile containers --


class _HermiteMixin:
    """Cubic Hermite sampling over stored nodes and exact derivatives."""

    def _spline(self):
        if getattr(self, "_spl", None) is None:
            object.__setattr__(
                self,
                "_spl",
                CubicHermiteSpline(self._grid(), self._node_values(), self._node_derivs(), axis=0),
            )
        return self._spl


@dataclass(frozen=True)
class ZndProfile(_HermiteMixin):
    """Inviscid detonation profile on the slow grid x in [-L, 0]."""

    grid: np.ndarray
    u: np.ndarray
    z: np.ndarray
    du: np.ndarray
    dz: np.ndarray
    conserved_value: np.ndarray
    end_states: EndStates
    model: object
    meta: dict = field(default_factory=dict)
    _spl: object = field(default=None, repr=False, compare=False)

    def _grid(self):
        return self.grid

    def _node_values(self):
        return np.column_stack([self.u, self.z])

    def _node_derivs(self):
        return np.column_stack([self.du, self.dz])

    @property
    def L_slow(self):
        return -float(self.grid[0])

    def sample(self, x, polish=True):
        """Values (u, z) at points x; constant end states outside."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty((x.size, self.model.n + 1))
        inside = (x >= self.grid[0]) & (x <= 0.0)
        ahead = x > 0.0
        behind = x < self.grid[0]
        if np.any(ahead):
            up = self.model.u_of_state(self.end_states.u_plus)
            out[ahead] = np.concatenate([up, [1.0]])
        if np.any(behind):
            um = self.model.u_of_state(self.end_states.u_minus)
            out[behind] = np.concatenate([um, [0.0]])
        if np.any(inside):
            vals = np.atleast_2d(self._spline()(x[inside]))
            if polish:
                for row in vals:
                    row[: self.model.n] = self._polish_u(row[: self.model.n], row[-1])
            _snap_nodes(x[inside], self.grid, vals, self._node_values())
            out[inside] = vals
        return out

    def _polish_u(self, u_guess, z):
        model, s = self.model, self.end_states.s
        target = self.conserved_value + s * self.end_states.q_vec(model) * z
        eye = np.eye(model.n)
        root, ok = _newton(
            lambda u: model.f(u) - s * u - target,
            lambda u: model.df(u) - s * eye,
            u_guess,
            1.0 + np.linalg.norm(u_guess),
        )
        return root if ok else u_guess

    def derivative(self, x):
        """Exact ODE derivatives (u', z') at points x (0 off the grid)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        vals = self.sample(x)
        model, s = self.model, self.end_states.s
        qv = self.end_states.q_vec(model)
        out = np.zeros_like(vals)
        inside = (x >= self.grid[0]) & (x <= 0.0)
        eye = np.eye(model.n)
        for i in np.nonzero(inside)[0]:
            u, z = vals[i, :-1], vals[i, -1]
            dz = (model.k_rate / s) * model.phi(u) * z
            du = np.linalg.solve(model.df(u) - s * eye, s * qv * dz)
            out[i, :-1], out[i, -1] = du, dz
        return out

    def state_at(self, x):
        vals = self.sample(float(x))[0]
        return self.model.state_of_u(vals[:-1], float(np.clip(vals[-1], 0.0, 1.0)))

    def in_domain(self, x):
        return np.asarray(np.asarray(x) >= self.grid[0], dtype=bool)

    def to_payload(self):
        return {
            "format": "detwave-profile-v1",
            "kind": "znd",
            "model_digest": self.model.config_digest(),
            "meta": self.meta,
            "grid": self.grid.tolist(),
            "u": self.u.tolist(),
            "z": self.z.tolist(),
            "du": self.du.tolist(),
            "dz": self.dz.tolist(),
            "conserved_value": self.conserved_value.tolist(),
            "ends": _ends_payload(self.end_states),
        }

    @staticmethod
    def from_payload(payload, model):
        _check_payload(payload, "znd", model)
        return ZndProfile(
            grid=np.array(payload["grid"]),
            u=np.array(payload["u"]),
            z=np.array(payload["z"]),
            du=np.array(payload["du"]),
            dz=np.array(payload["dz"]),
            conserved_value=np.array(payload["conserved_value"]),
            end_states=_ends_from_payload(payload["ends"]),
            model=model,
            meta=payload["meta"],
        )


@dataclass(frozen=True)
class ViscousShockProfile(_HermiteMixin):
    """Viscous Neumann shock on the fast grid x~ in [-L~, L~]."""

    fast_grid: np.ndarray
    u: np.ndarray
    du: np.ndarray
    u_star: GasState
    u_plus: GasState
    s: float
    model: object
    meta: dict = field(default_factory=dict)
    _spl: object = field(default=None, repr=False, compare=False)

    def _grid(self):
        return self.fast_grid

    def _node_values(self):
        return self.u

    def _node_derivs(self):
        return self.du

    def sample(self, x, derivative=False):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.fast_grid[0], self.fast_grid[-1]
        xc = np.clip(x, lo, hi)
        vals = np.atleast_2d(self._spline()(xc))
        _snap_nodes(xc, self.fast_grid, vals, self.u)
        left = x < lo
        right = x > hi
        if np.any(left):
            vals[left] = self.model.u_of_state(self.u_star)
        if np.any(right):
            vals[right] = self.model.u_of_state(self.u_plus)
        if not derivative:
            return vals
        ders = np.zeros_like(vals)
        up = self.model.u_of_state(self.u_plus)
        for i in np.nonzero(~(left | right))[0]:
            ders[i] = _shock_rhs_full(self.model, vals[i], up, self.s)
        return vals, ders

    def state_at(self, x):
        return self.model.state_of_u(self.sample(float(x))[0], 1.0)

    def in_domain(self, x):
        x = np.asarray(x)
        return (x >= self.fast_grid[0]) & (x <= self.fast_grid[-1])

    def residual(self):
        """Max pointwise ODE residual over nodes."""
        up = self.model.u_of_state(self.u_plus)
        worst = 0.0
        for u, du in zip(self.u, self.du):
            B = self.model.B_full(u)
            h = self.model.f(u) - self.model.f(up) - self.s * (u - up)
            worst = max(worst, np.linalg.norm(B @ du - h))
        return worst

    def to_payload(self):
        return {
            "format": "detwave-profile-v1",
            "kind": "ns_shock",
            "model_digest": self.model.config_digest(),
            "meta": self.meta,
            "grid": self.fast_grid.tolist(),
            "u": self.u.tolist(),
            "du": self.du.tolist(),
            "u_star": [list(self.u_star.components), self.u_star.z],
            "u_plus": [list(self.u_plus.components), self.u_plus.z],
            "s": self.s,
        }

    @staticmethod
    def from_payload(payload, model):
        _check_payload(payload, "ns_shock", model)
        return ViscousShockProfile(
            fast_grid=np.array(payload["grid"]),
            u=np.array(payload["u"]),
            du=np.array(payload["du"]),
            u_star=GasState(tuple(payload["u_star"][0]), payload["u_star"][1]),
            u_plus=GasState(tuple(payload["u_plus"][0]), payload["u_plus"][1]),
            s=payload["s"],
            model=model,
            meta=payload["meta"],
        )


@dataclass(frozen=True)
class ViscousDetonationProfile(_HermiteMixin):
    """Reacting viscous profile on the composite grid.

    Stores the first-order variables V = (Y, Y_z, u_II, z) with their
    exact derivatives; gas values are reconstructed through the same
    algebraic relations the boundary-value problem used, so sampled
    points satisfy them identically.
    """

    eps: float
    grid: np.ndarray
    V: np.ndarray
    dV: np.ndarray
    end_states: EndStates
    model: object
    diagnostics: dict = field(default_factory=dict)
    znd: object = None
    shock: object = None
    meta: dict = field(default_factory=dict)
    _spl: object = field(default=None, repr=False, compare=False)

    def _grid(self):
        return self.grid

    def _node_values(self):
        return self.V

    def _node_derivs(self):
        return self.dV

    def _geometry(self):
        model = self.model
        n, n1 = model.n, model.dim_u1
        up = model.u_of_state(self.end_states.u_plus)
        if n1:
            df = model.df(up)
            df11, df12 = df[:n1, :n1], df[:n1, n1:]
            c_f = model.f(up)[:n1] - df11 @ up[:n1] - df12 @ up[n1:]
            M1 = np.linalg.inv(df11 - self.end_states.s * np.eye(n1))
        else:
            df12 = np.zeros((0, model.dim_u2))
            c_f = np.empty(0)
            M1 = np.empty((0, 0))
        return n, n1, M1, df12, c_f

    def _reconstruct(self, Vrows):
        n, n1, M1, df12, c_f = self._geometry()
        n2 = self.model.dim_u2
        W = np.empty((Vrows.shape[0], n + 1))
        for i, V in enumerate(Vrows):
            uII = V[n + 1 : n + 1 + n2]
            if n1:
                uI = M1 @ (V[:n1] - df12 @ uII - c_f)
                W[i, :n] = np.concatenate([uI, uII])
            else:
                W[i, :n] = uII
            W[i, n] = V[-1]
        return W

    @property
    def u(self):
        return self._reconstruct(self.V)[:, :-1]

    @property
    def z(self):
        return self.V[:, -1]

    def sample(self, x, derivative=False):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        model = self.model
        n, n1, M1, df12, _ = self._geometry()
        n2 = model.dim_u2
        lo, hi = self.grid[0], self.grid[-1]
        xc = np.clip(x, lo, hi)
        Vs = np.atleast_2d(self._spline()(xc))
        _snap_nodes(xc, self.grid, Vs, self.V)
        W = self._reconstruct(Vs)
        left = x < lo
        right = x > hi
        if np.any(left):
            um = model.u_of_state(self.end_states.u_minus)
            W[left] = np.concatenate([um, [0.0]])
        if np.any(right):
            up = model.u_of_state(self.end_states.u_plus)
            W[right] = np.concatenate([up, [1.0]])
        if not derivative:
            return W
        qv = self.end_states.q_vec(model)
        s, k, eps = self.end_states.s, model.k_rate, self.eps
        dW = np.zeros_like(W)
        for i in np.nonzero(~(left | right))[0]:
            V = Vs[i]
            u, z = W[i, :-1], W[i, -1]
            YII = V[n1:n]
            duII = np.linalg.solve(model.b(u), model.f(u)[n1:] - s * u[n1:] - YII) / eps
            dz = -(s * z + V[n]) / (eps * model.Cdiff(u))
            if n1:
                dYI = k * qv[:n1] * model.phi(u) * z
                duI = M1 @ (dYI - df12 @ duII)
                dW[i, :-1] = np.concatenate([duI, duII])
            else:
                dW[i, :-1] = duII
            dW[i, -1] = dz
        return W, dW

    def state_at(self, x):
        vals = self.sample(float(x))[0]
        return self.model.state_of_u(vals[:-1], float(np.clip(vals[-1], 0.0, 1.0)))

    def in_domain(self, x):
        x = np.asarray(x)
        return (x >= self.grid[0]) & (x <= self.grid[-1])

    def to_payload(self):
        return {
            "format": "detwave-profile-v1",
            "kind": "rns",
            "model_digest": self.model.config_digest(),
            "meta": self.meta,
            "eps": self.eps,
            "grid": self.grid.tolist(),
            "V": self.V.tolist(),
            "dV": self.dV.tolist(),
            "diagnostics": self.diagnostics,
            "ends": _ends_payload(self.end_states),
        }

    @staticmethod
    def from_payload(payload, model, znd=None, shock=None):
        _check_payload(payload, "rns", model)
        return ViscousDetonationProfile(
            eps=payload["eps"],
            grid=np.array(payload["grid"]),
            V=np.array(payload["V"]),
            dV=np.array(payload["dV"]),
            end_states=_ends_from_payload(payload["ends"]),
            model=model,
            diagnostics=payload["diagnostics"],
            znd=znd,
            shock=shock,
            meta=payload["meta"],
        )


def sample_profile(profile, x, with_flag=False):
    """State at position x.

    Outside the stored domain the nearest end state is returned; with
    with_flag=True the second element reports whether x was inside.
    """
    state = profile.state_at(x)
    if with_flag:
        return state, bool(np.all(profile.in_domain(x)))
    return state


# -- ZND profile --


def compute_znd_profile(model, ends, opts=None):
    """Reaction-zone profile of the inviscid detonation."""
    opts = opts or _DEFAULT_OPTS
    ends.validate(model)
    s, k = ends.s, model.k_rate
    us = model.u_of_state(ends.u_star)
    qv = ends.q_vec(model)
    conserved = model.f(us) - s * (us + qv * 1.0)
    scale = 1.0 + np.linalg.norm(conserved)
    eye = np.eye(model.n)

    # table of u(z) by continuation down the conserved relation
    z_tab = np.linspace(1.0, 0.0, opts.z_table)
    u_tab = np.empty((z_tab.size, model.n))
    u_cur = us.copy()
    for i, z in enumerate(z_tab):
        target = conserved + s * qv * z
        u_cur, ok = _newton(
            lambda u: model.f(u) - s * u - target,
            lambda u: model.df(u) - s * eye,
            u_cur,
            scale,
        )
        if not ok or abs(np.linalg.det(model.df(u_cur) - s * eye)) < 1e-12 * scale**model.n:
            raise TransversalityError(f"df - s I singular near z = {z:.4f}")
        u_tab[i] = u_cur
    seed = PchipInterpolator(z_tab[::-1], u_tab[::-1], axis=0)

    def u_of_z(z):
        target = conserved + s * qv * z
        root, ok = _newton(
            lambda u: model.f(u) - s * u - target,
            lambda u: model.df(u) - s * eye,
            seed(float(np.clip(z, 0.0, 1.0))),
            scale,
        )
        if not ok:
            raise TransversalityError(f"conserved-relation solve failed at z = {z:.4g}")
        return root

    def rhs(x, y):
        return [(k / s) * model.phi(u_of_z(y[0])) * y[0]]

    def tail(x, y):
        return y[0] - opts.tail_tol

    tail.terminal = True
    tail.direction = -1
    probe = solve_ivp(
        rhs,
        (0.0, -opts.max_domain),
        [1.0],
        rtol=opts.rtol,
        atol=opts.atol,
        events=tail,
        method="RK45",
    )
    if not probe.t_events[0].size:
        raise DomainExhausted(
            f"reaction coordinate still {probe.y[0, -1]:.3e} at x = {probe.t[-1]:.6g}"
        )
    L = opts.tail_margin * float(-probe.t_events[0][0])
    full = solve_ivp(
        rhs,
        (0.0, -L),
        [1.0],
        rtol=opts.rtol,
        atol=opts.atol,
        dense_output=True,
        method="RK45",
    )
    n_nodes = max(int(np.ceil(L / opts.slow_spacing)), 64) + 1
    grid = np.linspace(-L, 0.0, n_nodes)
    z_nodes = np.clip(full.sol(grid)[0], 0.0, None)
    z_nodes[-1] = 1.0
    u_nodes = np.array([u_of_z(z) for z in z_nodes])
    dz_nodes = np.array([(k / s) * model.phi(u) * z for u, z in zip(u_nodes, z_nodes)])
    du_nodes = np.array(
        [
            np.linalg.solve(model.df(u) - s * eye, s * qv * dz)
            for u, dz in zip(u_nodes, dz_nodes)
        ]
    )
    drift = max(
        np.linalg.norm(model.f(u) - s * (u + qv * z) - conserved)
        for u, z in zip(u_nodes, z_nodes)
    )
    if drift > 1e-8 * scale:
        raise ConvergenceError("conserved relation drift too large", float(drift))
    meta = {
        "rtol": opts.rtol,
        "atol": opts.atol,
        "tail_tol": opts.tail_tol,
        "spacing": opts.slow_spacing,
        "conserved_drift": float(drift),
    }
    return ZndProfile(
        grid=grid,
        u=u_nodes,
        z=z_nodes,
        du=du_nodes,
        dz=dz_nodes,
        conserved_value=conserved,
        end_states=ends,
        model=model,
        meta=meta,
    )


# -- viscous Neumann shock --


def _affine_blocks(model, u_ref, s):
    """Constant hyperbolic flux blocks, affine offset, and (df11-s)^-1."""
    n1 = model.dim_u1
    if n1 == 0:
        return (
            np.zeros((0, 0)),
            np.zeros((0, model.dim_u2)),
            np.empty(0),
            np.empty((0, 0)),
        )
    df = model.df(u_ref)
    df11 = df[:n1, :n1]
    df12 = df[:n1, n1:]
    c_f = model.f(u_ref)[:n1] - df11 @ u_ref[:n1] - df12 @ u_ref[n1:]
    try:
        M1 = np.linalg.inv(df11 - s * np.eye(n1))
    except np.linalg.LinAlgError:
        raise TransversalityError("df11 - s I is singular") from None
    return df11, df12, c_f, M1


def _check_affine(model, df11, df12, c_f, u_probe, scale):
    n1 = model.dim_u1
    if n1 == 0:
        return
    mism = model.f(u_probe)[:n1] - (df11 @ u_probe[:n1] + df12 @ u_probe[n1:] + c_f)
    if np.linalg.norm(mism) > 1e-8 * scale:
        raise StructureError("hyperbolic flux rows are not affine (H2 violated)")


def _shock_uI(model, uII, up, M1, df12):
    if model.dim_u1 == 0:
        return np.empty(0)
    return up[: model.dim_u1] - M1 @ (df12 @ (uII - up[model.dim_u1 :]))


def _shock_rhs_full(model, u, up, s):
    """Exact fast-variable derivative of the shock profile at state u."""
    n1 = model.dim_u1
    h = model.f(u) - model.f(up) - s * (u - up)
    duII = np.linalg.solve(model.b(u), h[n1:])
    if n1 == 0:
        return duII
    df11, df12, _, _ = _affine_blocks(model, up, s)
    duI = -np.linalg.solve(df11 - s * np.eye(n1), df12 @ duII)
    return np.concatenate([duI, duII])


def compute_ns_shock_profile(model, u_star, u_plus, s, opts=None):
    """Viscous shock profile connecting u_* (left) to u_+ (right)."""
    opts = opts or _DEFAULT_OPTS
    us = model.u_of_state(u_star)
    up = model.u_of_state(u_plus)
    n1, n2 = model.dim_u1, model.dim_u2
    scale = 1.0 + np.linalg.norm(us)
    df11, df12, c_f, M1 = _affine_blocks(model, up, s)
    _check_affine(model, df11, df12, c_f, us, scale)

    # launch along the unstable manifold of u_*
    S = -M1 @ df12 if n1 else np.zeros((0, n2))
    df_s = model.df(us)
    J_red = np.linalg.solve(
        model.b(us), df_s[n1:, :n1] @ S + df_s[n1:, n1:] - s * np.eye(n2)
    )
    mu, vecs = np.linalg.eig(J_red)
    unstable = np.nonzero(mu.real > 1e-10)[0]
    if unstable.size != 1:
        raise NoConnection(
            f"post-shock state has {unstable.size} unstable fast directions, expected 1"
        )
    v = vecs[:, unstable[0]].real
    v /= np.linalg.norm(v)
    if np.dot(v, up[n1:] - us[n1:]) < 0:
        v = -v
    delta = 1e-10 * scale
    y0 = us[n1:] + delta * v

    def rhs(x, y):
        uI = _shock_uI(model, y, up, M1, df12)
        u = np.concatenate([uI, y])
        h = model.f(u) - model.f(up) - s * (u - up)
        return np.linalg.solve(model.b(u), h[n1:])

    def arrived(x, y):
        return np.linalg.norm(y - up[n1:]) - 1e-12 * scale

    arrived.terminal = True
    arrived.direction = -1
    try:
        sol = solve_ivp(
            rhs,
            (0.0, opts.shock_x_max),
            y0,
            rtol=opts.rtol,
            atol=1e-14,
            dense_output=True,
            events=arrived,
            method="RK45",
        )
    except DomainError as exc:
        raise NoConnection(f"trajectory left the admissible region: {exc}") from None
    if not sol.t_events[0].size:
        raise NoConnection(
            "shooting missed u_+: distance "
            f"{np.linalg.norm(sol.y[:, -1] - up[n1:]):.3e} at x~ = {sol.t[-1]:.4g}"
        )
    x_end = float(sol.t_events[0][0])

    # center: first parabolic component's midpoint crossing sits at 0
    mid = 0.5 * (us[n1] + up[n1])
    probe_x = np.linspace(0.0, x_end, 4001)
    gvals = sol.sol(probe_x)[0] - mid
    sign_change = np.nonzero(np.diff(np.sign(gvals)) != 0)[0]
    if not sign_change.size:
        raise NoConnection("midpoint crossing not found while centering")
    i0 = sign_change[sign_change.size // 2]
    x_c = brentq(lambda x: sol.sol(x)[0] - mid, probe_x[i0], probe_x[i0 + 1], xtol=1e-13)

    Lt = opts.L_tilde
    core = np.arange(-opts.fast_core, opts.fast_core + 1e-9, opts.fast_spacing)
    left = np.arange(-Lt, -opts.fast_core, opts.fast_tail_spacing)
    right = np.arange(
        opts.fast_core + opts.fast_tail_spacing, Lt + 1e-9, opts.fast_tail_spacing
    )
    grid = np.concatenate([left, core, right])

    u_nodes = np.empty((grid.size, model.n))
    for i, xg in enumerate(grid):
        x_orig = xg + x_c
        if x_orig <= 0.0:
            u_nodes[i] = us
        elif x_orig >= x_end:
            u_nodes[i] = up
        else:
            uII = sol.sol(x_orig)
            u_nodes[i] = np.concatenate([_shock_uI(model, uII, up, M1, df12), uII])
    du_nodes = np.array([_shock_rhs_full(model, u, up, s) for u in u_nodes])

    profile = ViscousShockProfile(
        fast_grid=grid,
        u=u_nodes,
        du=du_nodes,
        u_star=model.state_of_u(us, 1.0),
        u_plus=model.state_of_u(up, 1.0),
        s=float(s),
        model=model,
        meta={"rtol": opts.rtol, "x_center": x_c, "launch_delta": delta},
    )
    res = profile.residual()
    if res > 1e-8 * scale:
        raise ConvergenceError("shock profile residual too large", float(res))
    tail_err = max(
        np.linalg.norm(profile.sample(-Lt)[0] - us),
        np.linalg.norm(profile.sample(Lt)[0] - up),
    )
    if tail_err > 10 * opts.tail_tol:
        raise NoConnection(f"shock tails not settled at |x~| = {Lt}: {tail_err:.3e}")
    return profile


# -- viscous detonation boundary-value problem --


def _real_row_space(rows):
    """Real basis of the row space of a small complex row stack."""
    stack = np.vstack([rows.real, rows.imag])
    q, r = np.linalg.qr(stack.T)
    keep = np.abs(np.diag(r)) > 1e-10 * max(1.0, np.abs(r).max())
    return q.T[keep]


def compute_viscous_detonation_profile(model, eps, znd, shock, opts=None):
    """Full reacting viscous profile at transport strength eps.

    Solves the integrated first-order system for (Y, Y_z, u_II, z) by
    collocation on two matched halves x = t x_L and x = t x_R, t in
    [0, 1], with the matched ZND/shock composite as initial guess.
    Matching at x = 0 lets the translation phase be pinned there by the
    parabolic midpoint convention; pinning it through the exponentially
    small reaction tail instead leaves the collocation Jacobian
    singular to working precision.
    """
    opts = opts or _DEFAULT_OPTS
    if eps <= 0:
        raise UsageError("eps must be positive")
    if eps > opts.eps_max:
        raise UsageError(f"eps = {eps} exceeds eps_max = {opts.eps_max}")
    ends = znd.end_states
    if (
        np.linalg.norm(
            np.array(shock.u_star.components) - np.array(ends.u_star.components)
        )
        > 1e-9
        or abs(shock.s - ends.s) > 1e-12
    ):
        raise UsageError("ZND and shock scaffolds disagree on end states")

    s, k, n, n1, n2 = ends.s, model.k_rate, model.n, model.dim_u1, model.dim_u2
    qv = ends.q_vec(model)
    um = model.u_of_state(ends.u_minus)
    us = model.u_of_state(ends.u_star)
    up = model.u_of_state(ends.u_plus)
    scale = 1.0 + np.linalg.norm(us)
    df11, df12, c_f, M1 = _affine_blocks(model, up, s)
    _check_affine(model, df11, df12, c_f, us, scale)

    N = n + 2 + n2  # components: Y (n), Y_z, u_II (n2), z
    iY, iYz, iU, iz = slice(0, n), n, slice(n + 1, n + 1 + n2), n + 1 + n2
    V_minus = np.concatenate([model.f(um) - s * um, [0.0], um[n1:], [0.0]])
    K_minus = V_minus[iY] + qv * V_minus[iYz]

    def unpack_u(V):
        uII = V[iU]
        if n1:
            uI = M1 @ (V[iY][:n1] - df12 @ uII - c_f)
            return np.concatenate([uI, uII])
        return uII

    def rhs_column(V):
        u = model.clip_admissible(unpack_u(V))
        z = V[iz]
        phi = model.phi(u)
        dV = np.empty(N)
        dV[iY] = k * qv * phi * z
        dV[iYz] = -k * phi * z
        h = model.f(u)[n1:] - s * u[n1:] - V[iY][n1:]
        dV[iU] = np.linalg.solve(model.b(u), h) / eps
        dV[iz] = -(s * z + V[iYz]) / (eps * model.Cdiff(u))
        return dV

    # left-end Jacobian supplies the fast-stable boundary rows
    J_m = np.zeros((N, N))
    phi_m = model.phi(um)
    J_m[iY, iz] = k * qv * phi_m
    J_m[iYz, iz] = -k * phi_m
    b_inv = np.linalg.inv(model.b(um))
    dfm = model.df(um)
    S = -M1 @ df12 if n1 else np.zeros((0, n2))
    if n1:
        J_m[iU, iY.start : n1] = (b_inv @ (dfm[n1:, :n1] @ M1)) / eps
    J_m[iU, n1:n] = -b_inv / eps
    J_m[iU, iU] = (b_inv @ (dfm[n1:, :n1] @ S + dfm[n1:, n1:] - s * np.eye(n2))) / eps
    J_m[iz, iYz] = -1.0 / (eps * model.Cdiff(um))
    J_m[iz, iz] = -s / (eps * model.Cdiff(um))
    mu, vecs = np.linalg.eig(J_m)
    stable = mu.real < -1e-6
    if stable.sum() != model.r - 1:
        raise StructureError(
            f"burned rest point has {int(stable.sum())} fast-stable directions, "
            f"expected {model.r - 1}"
        )
    left_rows = _real_row_space(np.linalg.inv(vecs)[stable])
    if left_rows.shape[0] != model.r - 1:
        raise StructureError("left boundary projector is rank deficient")

    x_L = float(znd.grid[0])
    x_R = eps * opts.L_tilde
    mid = 0.5 * (us[n1] + up[n1])
    m_rows = left_rows.shape[0]

    def fun(t, W):
        out = np.empty_like(W)
        for j in range(W.shape[1]):
            out[:N, j] = x_L * rhs_column(W[:N, j])
            out[N:, j] = x_R * rhs_column(W[N:, j])
        return out

    def bc(Wa, Wb):
        out = np.empty(2 * N)
        out[:N] = Wa[:N] - Wa[N:]  # both halves meet at x = 0
        out[N : N + m_rows] = left_rows @ (Wb[:N] - V_minus)
        kk = N + m_rows
        out[kk : kk + n] = (Wb[iY] + qv * Wb[iYz]) - K_minus
        out[kk + n] = Wb[N + iYz] + s
        out[kk + n + 1] = Wa[N + n + 1] - mid  # u_II[0](0) at its midpoint
        return out

    # shared t-mesh resolving the reaction tail (left half) and the
    # fast layer (both halves)
    win = opts.bvp_window * eps
    t_slow = znd.grid[znd.grid < -win] / x_L
    t_fast_a = np.arange(0.0, win + 1e-12, opts.bvp_spacing * eps) / (-x_L)
    t_fast_b = np.arange(0.0, x_R + 1e-12, opts.bvp_spacing * eps) / x_R
    tmesh = np.unique(np.concatenate([[0.0, 1.0], t_slow, t_fast_a, t_fast_b]))
    tmesh = tmesh[np.concatenate([[True], np.diff(tmesh) > 1e-12])]
    if tmesh[-1] != 1.0:
        tmesh = np.append(tmesh[:-1], 1.0)

    def composite_guess(x):
        xt = x / eps
        su, dsu_fast = shock.sample(xt, derivative=True)
        su, dsu = su[0], dsu_fast[0] / eps
        if x <= 0.0:
            w = znd.sample(x)[0]
            dw = znd.derivative(x)[0]
            u0 = w[:n] + (su - us)
            du0 = dw[:n] + dsu
            z0, dz0 = w[-1], dw[-1]
        else:
            u0, du0 = su, dsu
            z0, dz0 = 1.0, 0.0
        V = np.empty(N)
        V[iY] = model.f(u0) - s * u0 - eps * (model.B_full(u0) @ du0)
        V[iYz] = -s * z0 - eps * model.Cdiff(u0) * dz0
        V[iU] = u0[n1:]
        V[iz] = z0
        return V

    W0 = np.empty((2 * N, tmesh.size))
    for j, t in enumerate(tmesh):
        W0[:N, j] = composite_guess(t * x_L)
        W0[N:, j] = composite_guess(t * x_R)

    sol = solve_bvp(
        fun, bc, tmesh, W0, tol=opts.bvp_tol,
        max_nodes=max(20_000, 10 * tmesh.size), verbose=0
    )
    rms = float(np.max(sol.rms_residuals)) if sol.rms_residuals.size else np.inf
    if not sol.success and rms > opts.bvp_accept:
        raise ConvergenceError(f"collocation failed: {sol.message}", rms)

    # assemble the single-domain profile; the halves agree at x = 0 to
    # within the boundary residual, stored once as their average
    match = 0.5 * (sol.y[:N, 0] + sol.y[N:, 0])
    xa = (sol.x * x_L)[::-1]
    xb = sol.x * x_R
    grid = np.concatenate([xa[:-1], xb])
    V = np.vstack([sol.y[:N].T[::-1][:-1], sol.y[N:].T])
    V[xa.size - 1] = match
    dV = np.array([rhs_column(V[j]) for j in range(V.shape[0])])
    drift = np.abs(V[:, iY] + np.outer(V[:, iYz], qv) - K_minus).max()

    profile = ViscousDetonationProfile(
        eps=float(eps),
        grid=grid,
        V=V,
        dV=dV,
        end_states=ends,
        model=model,
        znd=znd,
        shock=shock,
        meta={"bvp_tol": opts.bvp_tol},
    )

    # (P3) a-posteriori bounds, recorded but not fatal
    xs_slow = np.linspace(x_L, -opts.delta, 800)
    err_slow = float(np.abs(profile.sample(xs_slow) - znd.sample(xs_slow)).max())
    xs_fast = np.linspace(0.0, x_R, 400)
    shock_vals = np.column_stack([shock.sample(xs_fast / eps), np.ones(xs_fast.size)])
    err_fast = float(np.abs(profile.sample(xs_fast) - shock_vals).max())
    profile.diagnostics.update(
        {
            "rms_residual": rms,
            "conservation_drift": float(drift),
            "p3_slow_error": err_slow,
            "p3_fast_error": err_fast,
            "p3_bound": opts.K_p3 * eps,
            "p3_ok": bool(err_slow <= opts.K_p3 * eps and err_fast <= opts.K_p3 * eps),
            "nodes": int(grid.size),
            "bvp_success": bool(sol.success),
        }
    )
    return profile
