"""Three-region verification that the reacting viscous determinant
reproduces the inviscid (ZND) and shock-scale (NS) stability pictures
as the viscosity parameter shrinks.

Region I compares windings and root sets of D_rNS and D_ZND on a fixed
box around the origin.  Region II works in the stretched parameter
lam_t = eps*lam and compares D_rNS(lam_t/eps) with D_NS(lam_t)/lam_t
on an annular sector.  Region III certifies that D_rNS has no roots on
a large semicircle of radius R/eps in the closed right half plane.

Each determinant carries its own unknown analytic prefactor, so values
are never compared directly: every verdict is a winding number or a
zero-location statement.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContourThroughZero, NumericalError, UsageError
from .evans import EvansOptions, EvansValue, evans_lopatinski, evans_ns, evans_rns
from .models import GasState
from .profiles import (
    compute_ns_shock_profile,
    compute_viscous_detonation_profile,
    compute_znd_profile,
    solve_end_states,
)
from .roots import Contour, locate_roots, winding_number

__all__ = [
    "StudyConfig",
    "ConvergenceReport",
    "RegionOne",
    "RegionOneEps",
    "RegionTwo",
    "RegionTwoEps",
    "RegionThree",
    "RegionThreeEps",
    "RootMatch",
    "build_evaluators",
    "scale_value",
    "match_root_sets",
    "region1_study",
    "region2_study",
    "region3_check",
    "full_certificate",
    "decide_verdicts",
]

# winding work tolerates looser integration than root polishing; the
# measured determinant error at these settings is ~5e-7 relative,
# far below the pi/2 phase-step budget of the argument tracker
_SURVEY_OPTS = EvansOptions(rtol=1e-8, slow_rtol=3e-7, atol=1e-12)


@dataclass(frozen=True)
class StudyConfig:
    """Geometry and tolerances of the three spectral regions, plus the
    wave data needed to build the profiles for every eps.

    box_halfwidth bounds Region I, annulus_constant fixes the Region-II
    sector (inner radius const*eps, outer 1/const in the stretched
    parameter), arc_radius_factor fixes the Region-III radius R/eps.
    """

    epsilons: tuple = (0.1, 0.05, 0.025)
    s: float = 1.0
    u_plus: tuple = (0.0,)
    z_plus: float = 1.0
    eta: float = 0.01
    box_halfwidth: float = 2.0
    annulus_constant: float = 2.0
    arc_radius_factor: float = 4.0
    indent_radius: float = 0.05
    eps_max: float = 0.25
    noise_floor: float = 1e-4
    det_floor: float = 1e-3
    base_samples: int = 64
    arc_samples: int = 96
    max_depth: int = 10

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        object.__setattr__(self, "epsilons", eps)
        object.__setattr__(self, "u_plus", tuple(float(c) for c in self.u_plus))
        if not eps:
            raise UsageError("need at least one eps")
        if any(e <= 0.0 for e in eps):
            raise UsageError("every eps must be positive")
        if any(e > self.eps_max for e in eps):
            raise UsageError(f"eps values must stay at or below {self.eps_max}")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise UsageError("eps list must be strictly decreasing")
        if self.eta <= 0.0:
            raise UsageError("eta must be positive")
        if self.box_halfwidth <= 0.0 or self.indent_radius <= 0.0:
            raise UsageError("box halfwidth and indent radius must be positive")
        if self.indent_radius >= self.box_halfwidth:
            raise UsageError("indent radius must sit inside the box")
        if self.annulus_constant <= 0.0:
            raise UsageError("annulus constant must be positive")
        c = self.annulus_constant
        for e in eps:
            if c * e >= 1.0 / c:
                raise UsageError(
                    f"eps={e} incompatible with annulus constant {c}: "
                    "inner radius reaches the outer one"
                )
        if self.eta >= c:
            raise UsageError("eta must be smaller than the annulus constant")
        if self.arc_radius_factor < 2.0:
            raise UsageError("arc radius factor below the minimum of 2")

    def to_payload(self):
        return {
            "epsilons": list(self.epsilons),
            "s": self.s,
            "u_plus": list(self.u_plus),
            "z_plus": self.z_plus,
            "eta": self.eta,
            "box_halfwidth": self.box_halfwidth,
            "annulus_constant": self.annulus_constant,
            "arc_radius_factor": self.arc_radius_factor,
            "indent_radius": self.indent_radius,
            "eps_max": self.eps_max,
            "noise_floor": self.noise_floor,
            "det_floor": self.det_floor,
            "base_samples": self.base_samples,
            "arc_samples": self.arc_samples,
            "max_depth": self.max_depth,
        }

    @staticmethod
    def from_payload(payload):
        d = dict(payload)
        d["epsilons"] = tuple(d.get("epsilons", ()))
        d["u_plus"] = tuple(d.get("u_plus", (0.0,)))
        return StudyConfig(**d)


def _c2p(z):
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _p2c(p):
    return complex(p[0], p[1])


@dataclass(frozen=True)
class RootMatch:
    """One edge of the bipartite root matching; a missing partner means
    the root was penalized at the region diameter."""

    left: complex = None
    right: complex = None
    distance: float = 0.0

    def to_payload(self):
        return {
            "left": None if self.left is None else _c2p(self.left),
            "right": None if self.right is None else _c2p(self.right),
            "distance": float(self.distance),
        }

    @staticmethod
    def from_payload(p):
        return RootMatch(
            left=None if p["left"] is None else _p2c(p["left"]),
            right=None if p["right"] is None else _p2c(p["right"]),
            distance=float(p["distance"]),
        )


def _roots_payload(roots):
    return [_c2p(r) for r in roots]


def _roots_from(payload):
    return tuple(_p2c(p) for p in payload)


@dataclass(frozen=True)
class RegionOneEps:
    eps: float
    winding: int
    circle_winding: int
    roots: tuple = ()
    matches: tuple = ()
    ok: bool = True
    note: str = ""

    def to_payload(self):
        return {
            "eps": self.eps,
            "winding": self.winding,
            "circle_winding": self.circle_winding,
            "roots": _roots_payload(self.roots),
            "matches": [m.to_payload() for m in self.matches],
            "ok": self.ok,
            "note": self.note,
        }

    @staticmethod
    def from_payload(p):
        return RegionOneEps(
            eps=p["eps"],
            winding=p["winding"],
            circle_winding=p["circle_winding"],
            roots=_roots_from(p["roots"]),
            matches=tuple(RootMatch.from_payload(m) for m in p["matches"]),
            ok=p["ok"],
            note=p["note"],
        )


@dataclass(frozen=True)
class RegionOne:
    """Box comparison of D_rNS against D_ZND around the origin."""

    eta: float
    winding_znd: int
    circle_winding_znd: int
    roots_znd: tuple = ()
    per_eps: tuple = ()
    monotone: bool = None  # None: single eps, no trend to judge
    ok: bool = True
    note: str = ""

    def to_payload(self):
        return {
            "eta": self.eta,
            "winding_znd": self.winding_znd,
            "circle_winding_znd": self.circle_winding_znd,
            "roots_znd": _roots_payload(self.roots_znd),
            "per_eps": [e.to_payload() for e in self.per_eps],
            "monotone": self.monotone,
            "ok": self.ok,
            "note": self.note,
        }

    @staticmethod
    def from_payload(p):
        return RegionOne(
            eta=p["eta"],
            winding_znd=p["winding_znd"],
            circle_winding_znd=p["circle_winding_znd"],
            roots_znd=_roots_from(p["roots_znd"]),
            per_eps=tuple(RegionOneEps.from_payload(e) for e in p["per_eps"]),
            monotone=p["monotone"],
            ok=p["ok"],
            note=p["note"],
        )


@dataclass(frozen=True)
class RegionTwoEps:
    eps: float
    winding: int
    winding_ns: int
    roots: tuple = ()  # stretched scale: these are eps*lam locations
    roots_ns: tuple = ()
    matches: tuple = ()
    ok: bool = True
    note: str = ""

    def to_payload(self):
        return {
            "eps": self.eps,
            "winding": self.winding,
            "winding_ns": self.winding_ns,
            "roots": _roots_payload(self.roots),
            "roots_ns": _roots_payload(self.roots_ns),
            "matches": [m.to_payload() for m in self.matches],
            "ok": self.ok,
            "note": self.note,
        }

    @staticmethod
    def from_payload(p):
        return RegionTwoEps(
            eps=p["eps"],
            winding=p["winding"],
            winding_ns=p["winding_ns"],
            roots=_roots_from(p["roots"]),
            roots_ns=_roots_from(p["roots_ns"]),
            matches=tuple(RootMatch.from_payload(m) for m in p["matches"]),
            ok=p["ok"],
            note=p["note"],
        )


@dataclass(frozen=True)
class RegionTwo:
    """Annulus comparison in the stretched parameter, translational
    zero divided out of the shock determinant."""

    eta: float
    per_eps: tuple = ()
    ok: bool = True
    note: str = ""

    def to_payload(self):
        return {
            "eta": self.eta,
            "per_eps": [e.to_payload() for e in self.per_eps],
            "ok": self.ok,
            "note": self.note,
        }

    @staticmethod
    def from_payload(p):
        return RegionTwo(
            eta=p["eta"],
            per_eps=tuple(RegionTwoEps.from_payload(e) for e in p["per_eps"]),
            ok=p["ok"],
            note=p["note"],
        )


@dataclass(frozen=True)
class RegionThreeEps:
    eps: float
    radius: float
    winding: int
    min_rescaled: float
    samples: int
    roots: tuple = ()
    ok: bool = True
    note: str = ""

    def to_payload(self):
        return {
            "eps": self.eps,
            "radius": self.radius,
            "winding": self.winding,
            "min_rescaled": self.min_rescaled,
            "samples": self.samples,
            "roots": _roots_payload(self.roots),
            "ok": self.ok,
            "note": self.note,
        }

    @staticmethod
    def from_payload(p):
        return RegionThreeEps(
            eps=p["eps"],
            radius=p["radius"],
            winding=p["winding"],
            min_rescaled=p["min_rescaled"],
            samples=p["samples"],
            roots=_roots_from(p["roots"]),
            ok=p["ok"],
            note=p["note"],
        )


@dataclass(frozen=True)
class RegionThree:
    per_eps: tuple = ()
    ok: bool = True
    note: str = ""

    def to_payload(self):
        return {
            "per_eps": [e.to_payload() for e in self.per_eps],
            "ok": self.ok,
            "note": self.note,
        }

    @staticmethod
    def from_payload(p):
        return RegionThree(
            per_eps=tuple(RegionThreeEps.from_payload(e) for e in p["per_eps"]),
            ok=p["ok"],
            note=p["note"],
        )


@dataclass(frozen=True)
class ConvergenceReport:
    """Verdicts plus every number they were derived from, so the logic
    can be replayed offline (see decide_verdicts)."""

    config: StudyConfig
    region1: RegionOne = None
    region2: RegionTwo = None
    region3: RegionThree = None
    per_eps_verdict: tuple = ()
    verdict: str = "FAIL:empty"
    unstable_roots: tuple = ()  # unstretched lam scale

    def to_payload(self):
        return {
            "config": self.config.to_payload(),
            "region1": None if self.region1 is None else self.region1.to_payload(),
            "region2": None if self.region2 is None else self.region2.to_payload(),
            "region3": None if self.region3 is None else self.region3.to_payload(),
            "per_eps_verdict": [[e, v] for e, v in self.per_eps_verdict],
            "verdict": self.verdict,
            "unstable_roots": _roots_payload(self.unstable_roots),
        }

    @staticmethod
    def from_payload(p):
        return ConvergenceReport(
            config=StudyConfig.from_payload(p["config"]),
            region1=None if p["region1"] is None else RegionOne.from_payload(p["region1"]),
            region2=None if p["region2"] is None else RegionTwo.from_payload(p["region2"]),
            region3=None if p["region3"] is None else RegionThree.from_payload(p["region3"]),
            per_eps_verdict=tuple((e, v) for e, v in p["per_eps_verdict"]),
            verdict=p["verdict"],
            unstable_roots=_roots_from(p["unstable_roots"]),
        )


def scale_value(val, factor):
    """Multiply a determinant sample by an analytic factor, keeping the
    unit-modulus/log-scale split when the sample carries one."""
    factor = complex(factor)
    if not isinstance(val, EvansValue):
        return val * factor
    z = val.value * factor
    m = abs(z)
    if m == 0.0 or not np.isfinite(m):
        return EvansValue(value=z, log_scale=val.log_scale, cond=val.cond)
    return EvansValue(
        value=z / m, log_scale=val.log_scale + float(np.log(m)), cond=val.cond
    )


def build_evaluators(model, cfg, opts=None, profiles=None):
    """Factory (kind, eps) -> lam -> determinant sample.

    Profiles are built lazily and stored in `profiles` (pass the same
    dict to several factories to share the expensive constructions
    across accuracy grades).  kind "znd" and "ns" ignore eps.
    """
    store = profiles if profiles is not None else {}

    def ends():
        if "ends" not in store:
            store["ends"] = solve_end_states(
                model, GasState(cfg.u_plus, cfg.z_plus), cfg.s
            )
        return store["ends"]

    def znd():
        if "znd" not in store:
            store["znd"] = compute_znd_profile(model, ends())
        return store["znd"]

    def shock():
        if "shock" not in store:
            e = ends()
            store["shock"] = compute_ns_shock_profile(model, e.u_star, e.u_plus, e.s)
        return store["shock"]

    def rns(eps):
        key = ("rns", float(eps))
        if key not in store:
            store[key] = compute_viscous_detonation_profile(
                model, float(eps), znd(), shock()
            )
        return store[key]

    def factory(kind, eps=None):
        if kind == "znd":
            prof = znd()
            return lambda lam: evans_lopatinski(prof, lam, opts)
        if kind == "ns":
            prof = shock()
            return lambda lam: evans_ns(prof, lam, opts)
        if kind == "rns":
            if eps is None:
                raise UsageError("rns evaluator needs eps")
            prof = rns(eps)
            return lambda lam: evans_rns(prof, lam, opts)
        raise UsageError(f"unknown determinant kind {kind!r}")

    return factory


def _eval_pair(model, cfg, evaluators):
    # (survey grade, polish grade); a user-supplied factory serves both
    if evaluators is None:
        store = {}
        return (
            build_evaluators(model, cfg, _SURVEY_OPTS, profiles=store),
            build_evaluators(model, cfg, None, profiles=store),
        )
    if isinstance(evaluators, tuple):
        return evaluators
    return (evaluators, evaluators)


def _memo(fn):
    cache = {}

    def call(lam):
        lam = complex(lam)
        hit = cache.get(lam)
        if hit is None:
            hit = fn(lam)
            cache[lam] = hit
        return hit

    return call


def _eta_attempts(eta):
    return (eta, 1.2 * eta, 0.8 * eta)


def _box_pieces(eta, half, r, base):
    """Contours bounding the box with the origin ball removed.

    When the ball pokes through the left edge (eta < r) the boundary is
    a single carved curve; when it is strictly interior the region is
    doubly connected and the winding subtracts a circle around 0.
    """
    if abs(eta - r) < 0.1 * r:
        raise UsageError("eta nearly tangent to the indent ball; move one of them")
    if eta < r:
        carved = Contour.rectangle(
            -eta, half, -half, half, base_samples=base, indent=((0j, r),)
        )
        return ((carved, 1),)
    rect = Contour.rectangle(-eta, half, -half, half, base_samples=base)
    hole = Contour.circle(0j, r, base_samples=base)
    return ((rect, 1), (hole, -1))


def _pieces_winding(D, pieces, executor):
    return sum(sign * int(winding_number(D, ct, executor=executor)) for ct, sign in pieces)


def _expand(report_roots):
    out = []
    for r in report_roots:
        out.extend([complex(r.location)] * int(r.multiplicity))
    return tuple(out)


def _located(D, box, cfg, keep):
    rep = locate_roots(
        D, box, max_depth=cfg.max_depth, base_samples=cfg.base_samples
    )
    return tuple(r for r in _expand(rep.roots) if keep(r))


def match_root_sets(left, right, penalty):
    """Minimum-cost pairing of two root lists; unmatched entries pair
    with nothing at the penalty distance."""
    left = [complex(z) for z in left]
    right = [complex(z) for z in right]
    n = max(len(left), len(right))
    if n == 0:
        return ()
    cost = np.full((n, n), float(penalty))
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            cost[i, j] = abs(a - b)
    rows, cols = linear_sum_assignment(cost)
    out = []
    for i, j in zip(rows, cols):
        if i < len(left) and j < len(right):
            out.append(RootMatch(left[i], right[j], float(cost[i, j])))
        elif i < len(left):
            out.append(RootMatch(left[i], None, float(penalty)))
        elif j < len(right):
            out.append(RootMatch(None, right[j], float(penalty)))
    return tuple(out)


def _monotone_ok(per_eps, znd_roots, noise):
    """Distances to each reference root must not grow as eps shrinks."""
    for j, _ in enumerate(znd_roots):
        prev = None
        for entry in per_eps:
            dist = None
            for m in entry.matches:
                if m.right is not None and abs(m.right - znd_roots[j]) < 1e-12:
                    dist = m.distance
                    break
            if dist is None:
                continue
            if prev is not None and dist > prev + noise:
                return False
            prev = dist
    return True


def region1_study(model, cfg, *, evaluators=None, executor=None):
    """Winding and root-set comparison of D_rNS against D_ZND on the
    indented box {Re lam in [-eta, C], |Im lam| <= C}."""
    survey, polish = _eval_pair(model, cfg, evaluators)
    half, r = cfg.box_halfwidth, cfg.indent_radius
    circle = Contour.circle(0j, r, base_samples=cfg.base_samples)

    znd_survey = _memo(survey("znd"))
    circ_znd = int(winding_number(znd_survey, circle, executor=executor))
    rns_survey = {e: _memo(survey("rns", e)) for e in cfg.epsilons}
    circ = {
        e: int(winding_number(rns_survey[e], circle, executor=executor))
        for e in cfg.epsilons
    }

    last = None
    for eta in _eta_attempts(cfg.eta):
        try:
            pieces = _box_pieces(eta, half, r, cfg.base_samples)
            w_znd = _pieces_winding(znd_survey, pieces, executor)
            w_rns = {
                e: _pieces_winding(rns_survey[e], pieces, executor)
                for e in cfg.epsilons
            }
            break
        except ContourThroughZero as exc:
            last = exc
    else:
        raise NumericalError(
            "box contour kept running through a determinant root"
        ) from last

    box = (-eta, half, -half, half)
    diam = float(np.hypot(eta + half, 2 * half))
    in_region = lambda z: abs(z) > r  # noqa: E731  box membership is implied

    znd_roots = ()
    if w_znd != 0:
        znd_roots = _located(_memo(polish("znd")), box, cfg, in_region)

    entries = []
    for e in cfg.epsilons:
        roots = ()
        if w_rns[e] != 0:
            roots = _located(_memo(polish("rns", e)), box, cfg, in_region)
        matches = match_root_sets(roots, znd_roots, diam)
        ok = w_rns[e] == w_znd and circ[e] == 1
        note = ""
        if w_rns[e] != w_znd:
            note = f"winding {w_rns[e]} disagrees with the inviscid {w_znd}"
        elif circ[e] != 1:
            note = f"origin circle winding {circ[e]} instead of a simple zero"
        entries.append(
            RegionOneEps(
                eps=e,
                winding=w_rns[e],
                circle_winding=circ[e],
                roots=roots,
                matches=matches,
                ok=ok,
                note=note,
            )
        )

    monotone = None
    if len(cfg.epsilons) > 1:
        monotone = _monotone_ok(entries, znd_roots, cfg.noise_floor)
    ok = (
        all(en.ok for en in entries)
        and circ_znd == 1
        and monotone is not False
    )
    note = "" if ok else "see per-eps notes"
    if monotone is False:
        note = "matched-root distances grew as eps shrank"
    return RegionOne(
        eta=eta,
        winding_znd=w_znd,
        circle_winding_znd=circ_znd,
        roots_znd=znd_roots,
        per_eps=tuple(entries),
        monotone=monotone,
        ok=ok,
        note=note,
    )


def region2_study(model, cfg, *, evaluators=None, executor=None):
    """Stretched-scale comparison on the annular sector
    {Re lam_t >= -eps*eta, c*eps <= |lam_t| <= 1/c}."""
    survey, polish = _eval_pair(model, cfg, evaluators)
    c = cfg.annulus_constant
    r_out = 1.0 / c

    ns_survey = _memo(survey("ns"))
    ns_ratio = lambda lt: scale_value(ns_survey(lt), 1.0 / lt)  # noqa: E731

    last = None
    for eta in _eta_attempts(cfg.eta):
        try:
            w_rns, w_ns = {}, {}
            for e in cfg.epsilons:
                sector = Contour.annulus_sector(
                    c * e, r_out, -e * eta, base_samples=cfg.arc_samples
                )
                rns_e = _memo(survey("rns", e))
                stretched = lambda lt, _e=e, _f=rns_e: _f(lt / _e)  # noqa: E731
                w_rns[e] = int(winding_number(stretched, sector, executor=executor))
                w_ns[e] = int(winding_number(ns_ratio, sector, executor=executor))
            break
        except ContourThroughZero as exc:
            last = exc
    else:
        raise NumericalError(
            "annulus contour kept running through a determinant root"
        ) from last

    entries = []
    for e in cfg.epsilons:
        r_in = c * e
        box = (-e * eta, r_out, -r_out, r_out)
        keep = lambda z, _r=r_in: _r <= abs(z) <= r_out and z.real >= -e * eta  # noqa: E731
        roots = roots_ns = ()
        if w_rns[e] != 0:
            sharp = _memo(polish("rns", e))
            roots = _located(
                lambda lt, _e=e, _f=sharp: _f(lt / _e), box, cfg, keep
            )
        if w_ns[e] != 0:
            sharp_ns = _memo(polish("ns"))
            roots_ns = _located(
                lambda lt, _f=sharp_ns: scale_value(_f(lt), 1.0 / lt),
                box,
                cfg,
                keep,
            )
        matches = match_root_sets(roots, roots_ns, 2.0 * r_out)
        ok = w_rns[e] == w_ns[e]
        note = (
            ""
            if ok
            else f"stretched winding {w_rns[e]} disagrees with the shock {w_ns[e]}"
        )
        entries.append(
            RegionTwoEps(
                eps=e,
                winding=w_rns[e],
                winding_ns=w_ns[e],
                roots=roots,
                roots_ns=roots_ns,
                matches=matches,
                ok=ok,
                note=note,
            )
        )
    ok = all(en.ok for en in entries)
    return RegionTwo(
        eta=eta,
        per_eps=tuple(entries),
        ok=ok,
        note="" if ok else "see per-eps notes",
    )


def region3_check(model, cfg, *, evaluators=None, executor=None):
    """High-frequency exclusion: no roots on the closed right half disk
    of radius R/eps (origin ball removed), and the determinant modulus
    stays above det_floor relative to its maximum on the contour."""
    survey, polish = _eval_pair(model, cfg, evaluators)
    entries = []
    for e in cfg.epsilons:
        radius = cfg.arc_radius_factor / e
        contour = Contour.semicircle_with_chord(
            radius, cfg.indent_radius, base_samples=cfg.arc_samples
        )
        rns_e = _memo(survey("rns", e))
        w = winding_number(rns_e, contour, executor=executor)
        diag = w.diagnostics
        min_rescaled = float(np.exp(diag["min_log_abs"] - diag["max_log_abs"]))
        roots = ()
        note = ""
        ok = int(w) == 0 and min_rescaled >= cfg.det_floor
        if int(w) != 0:
            # a high-frequency root contradicts the large-|lam| bound;
            # treat as an implementation-bug signal, but still locate it
            keep = lambda z: z.real >= 0.0 and cfg.indent_radius < abs(z) <= radius  # noqa: E731
            roots = _located(
                _memo(polish("rns", e)), (0.0, radius, -radius, radius), cfg, keep
            )
            note = "nonzero winding on the high-frequency contour (suspect a bug)"
        elif min_rescaled < cfg.det_floor:
            note = f"contour modulus ratio {min_rescaled:.3e} under the floor"
        entries.append(
            RegionThreeEps(
                eps=e,
                radius=radius,
                winding=int(w),
                min_rescaled=min_rescaled,
                samples=int(diag["samples"]),
                roots=roots,
                ok=ok,
                note=note,
            )
        )
    ok = all(en.ok for en in entries)
    return RegionThree(
        per_eps=tuple(entries), ok=ok, note="" if ok else "see per-eps notes"
    )


def _merge_roots(groups, tol=1e-4):
    out = []
    for z in groups:
        if all(abs(z - w) > tol for w in out):
            out.append(z)
    return tuple(out)


def decide_verdicts(cfg, region1, region2, region3):
    """Replayable verdict logic: STABLE needs every checked winding to
    vanish and the origin zero to stay simple; located roots in the
    open right half plane force UNSTABLE; anything else incoherent is
    a region failure."""
    per = []
    unstable = []
    for e in cfg.epsilons:
        e1 = next((x for x in region1.per_eps if x.eps == e), None) if region1 else None
        e2 = next((x for x in region2.per_eps if x.eps == e), None) if region2 else None
        e3 = next((x for x in region3.per_eps if x.eps == e), None) if region3 else None
        roots = []
        if e1:
            roots += [z for z in e1.roots if z.real > 0.0]
        if e2:
            roots += [z / e for z in e2.roots if z.real > 0.0]
        if e3:
            roots += [z for z in e3.roots if z.real > 0.0]
        extra = bool(roots) or (e1 is not None and e1.circle_winding > 1)
        if extra:
            per.append((e, "UNSTABLE"))
            unstable.extend(roots)
            continue
        if e1 is not None and not e1.ok:
            per.append((e, "FAIL:I"))
        elif e2 is not None and not e2.ok:
            per.append((e, "FAIL:II"))
        elif e3 is not None and not e3.ok:
            per.append((e, "FAIL:III"))
        elif (e1 and e1.winding != 0) or (e2 and e2.winding != 0):
            # winding without locatable right-half roots: left sliver
            per.append((e, "FAIL:I" if (e1 and e1.winding) else "FAIL:II"))
        else:
            per.append((e, "STABLE"))

    verdicts = [v for _, v in per]
    if any(v == "UNSTABLE" for v in verdicts):
        overall = "UNSTABLE"
    elif any(v.startswith("FAIL") for v in verdicts):
        overall = next(v for v in verdicts if v.startswith("FAIL"))
    elif region1 is not None and not region1.ok:
        overall = "FAIL:I"
    elif region2 is not None and not region2.ok:
        overall = "FAIL:II"
    elif region3 is not None and not region3.ok:
        overall = "FAIL:III"
    else:
        overall = "STABLE"
    return tuple(per), overall, _merge_roots(unstable)


def full_certificate(model, cfg, *, evaluators=None, executor=None):
    """Compose the three regions into a stability verdict per eps: the
    wave passes when the only zero on the scanned set is the simple
    translational one at the origin."""
    pair = _eval_pair(model, cfg, evaluators)
    r1 = region1_study(model, cfg, evaluators=pair, executor=executor)
    r2 = region2_study(model, cfg, evaluators=pair, executor=executor)
    r3 = region3_check(model, cfg, evaluators=pair, executor=executor)
    per, verdict, roots = decide_verdicts(cfg, r1, r2, r3)
    return ConvergenceReport(
        config=cfg,
        region1=r1,
        region2=r2,
        region3=r3,
        per_eps_verdict=per,
        verdict=verdict,
        unstable_roots=roots,
    )
