"""Argument-principle zero counting and localization.

Works on any map lam -> EvansValue (or plain complex); only phases and
log magnitudes enter, so widely scaled determinant values are safe.
Winding numbers come from adaptive phase unwrapping rather than
quadrature of D'/D: evaluations are expensive and derivative-free, and
unwrapping gives an integer-exact answer once successive increments are
below pi/2.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContourThroughZero, NumericalError, UsageError

__all__ = [
    "Contour",
    "LocatedRoot",
    "RootReport",
    "Winding",
    "locate_roots",
    "winding_number",
]

_CLOSURE_TOL = 1e-12
_MIN_GAP = 1e-9  # parameter width below which refinement gives up
_FLOOR_LOG = 60.0  # contour values this far under the max count as zeros


def _phase_log(val):
    """(phase, log|.|) of an EvansValue or a plain complex number."""
    if hasattr(val, "log_scale") and hasattr(val, "value"):
        v = complex(val.value)
        if v == 0.0:
            return 0.0, -np.inf
        return float(np.angle(v)), float(val.log_scale) + float(np.log(abs(v)))
    v = complex(val)
    if v == 0.0:
        return 0.0, -np.inf
    return float(np.angle(v)), float(np.log(abs(v)))


# -- contours --


@dataclass(frozen=True)
class Contour:
    """Closed piecewise line/arc curve, counterclockwise positive.

    segments hold ("line", z0, z1) and ("arc", center, radius, a0, a1)
    records, an arc running a0 -> a1 (decreasing for clockwise pieces).
    indentations record the exclusion detours built into the segments:
    each (center, radius) ball is outside the enclosed region.
    """

    segments: tuple
    base_samples: int = 64
    indentations: tuple = ()

    def __post_init__(self):
        if not self.segments:
            raise UsageError("a contour needs at least one segment")
        if self.base_samples < 8:
            raise UsageError("base_samples must be at least 8")
        ends = [self.point(i, 1.0) for i in range(len(self.segments))]
        starts = [self.point(i, 0.0) for i in range(len(self.segments))]
        scale = max(1.0, max(abs(z) for z in ends))
        for i, z in enumerate(ends):
            nxt = starts[(i + 1) % len(self.segments)]
            if abs(z - nxt) > _CLOSURE_TOL * scale:
                raise UsageError(
                    f"contour is not closed: segment {i} ends at {z}, "
                    f"next starts at {nxt}"
                )

    def point(self, seg, t):
        """Position at parameter t in [0, 1] along segment seg."""
        rec = self.segments[seg]
        if rec[0] == "line":
            _, z0, z1 = rec
            return complex(z0) + t * (complex(z1) - complex(z0))
        _, c, r, a0, a1 = rec
        return complex(c) + r * np.exp(1j * (a0 + t * (a1 - a0)))

    def _lengths(self):
        out = []
        for rec in self.segments:
            if rec[0] == "line":
                out.append(abs(complex(rec[2]) - complex(rec[1])))
            else:
                out.append(abs(rec[2] * (rec[4] - rec[3])))
        return np.array(out)

    def nodes(self, factor=1.0):
        """Traversal-ordered (seg, t) sample nodes, endpoint excluded."""
        lens = self._lengths()
        weights = lens / lens.sum()
        out = []
        for i, w in enumerate(weights):
            n = max(3, int(np.ceil(self.base_samples * w * factor)))
            for j in range(n):
                out.append((i, j / n))
        return out

    def to_payload(self):
        segs = []
        for rec in self.segments:
            if rec[0] == "line":
                segs.append(
                    {
                        "type": "line",
                        "z0": [complex(rec[1]).real, complex(rec[1]).imag],
                        "z1": [complex(rec[2]).real, complex(rec[2]).imag],
                    }
                )
            else:
                segs.append(
                    {
                        "type": "arc",
                        "center": [complex(rec[1]).real, complex(rec[1]).imag],
                        "radius": float(rec[2]),
                        "a0": float(rec[3]),
                        "a1": float(rec[4]),
                    }
                )
        return {
            "segments": segs,
            "base_samples": self.base_samples,
            "indentations": [
                [complex(c).real, complex(c).imag, float(r)]
                for c, r in self.indentations
            ],
        }

    @staticmethod
    def from_payload(payload):
        segs = []
        for rec in payload["segments"]:
            if rec["type"] == "line":
                segs.append(
                    ("line", complex(*rec["z0"]), complex(*rec["z1"]))
                )
            elif rec["type"] == "arc":
                segs.append(
                    (
                        "arc",
                        complex(*rec["center"]),
                        rec["radius"],
                        rec["a0"],
                        rec["a1"],
                    )
                )
            else:
                raise UsageError(f"unknown contour segment type {rec['type']!r}")
        return Contour(
            segments=tuple(segs),
            base_samples=payload.get("base_samples", 64),
            indentations=tuple(
                (complex(c[0], c[1]), c[2])
                for c in payload.get("indentations", ())
            ),
        )

    @staticmethod
    def circle(center, radius, base_samples=64):
        if radius <= 0:
            raise UsageError("circle radius must be positive")
        return Contour(
            segments=(("arc", complex(center), float(radius), 0.0, 2 * np.pi),),
            base_samples=base_samples,
        )

    @staticmethod
    def rectangle(x0, x1, y0, y1, base_samples=64, indent=()):
        """Axis-aligned ccw rectangle; indent = ((center, radius), ...)
        carves semicircular exclusions into any edge passing through a
        listed ball, keeping the center outside the enclosed region."""
        if not (x0 < x1 and y0 < y1):
            raise UsageError("rectangle needs x0 < x1 and y0 < y1")
        corners = [
            complex(x0, y0),
            complex(x1, y0),
            complex(x1, y1),
            complex(x0, y1),
        ]
        segs = []
        for i in range(4):
            segs.extend(
                _indent_edge(corners[i], corners[(i + 1) % 4], indent)
            )
        return Contour(
            segments=tuple(segs),
            base_samples=base_samples,
            indentations=tuple((complex(c), float(r)) for c, r in indent),
        )

    @staticmethod
    def semicircle_with_chord(radius, indent_radius=None, base_samples=96):
        """Right-half-plane arc |z| = radius closed along the imaginary
        axis, optionally detoured around the origin (exclusion)."""
        if radius <= 0:
            raise UsageError("radius must be positive")
        R = float(radius)
        segs = [("arc", 0j, R, -np.pi / 2, np.pi / 2)]
        if indent_radius:
            r = float(indent_radius)
            if not 0 < r < R:
                raise UsageError("indent radius must sit inside the arc")
            segs.append(("line", complex(0, R), complex(0, r)))
            segs.append(("arc", 0j, r, np.pi / 2, -np.pi / 2))
            segs.append(("line", complex(0, -r), complex(0, -R)))
            indents = ((0j, r),)
        else:
            segs.append(("line", complex(0, R), complex(0, -R)))
            indents = ()
        return Contour(
            segments=tuple(segs), base_samples=base_samples, indentations=indents
        )

    @staticmethod
    def annulus_sector(r_in, r_out, left_re, base_samples=96):
        """Boundary of {Re z >= left_re} ∩ {r_in <= |z| <= r_out} for
        left_re < 0 < r_in < r_out: outer arc ccw, inner arc cw, joined
        by chords on the vertical line."""
        if not (0 < r_in < r_out):
            raise UsageError("need 0 < r_in < r_out")
        if not -r_in < left_re <= 0:
            raise UsageError("the vertical cut must intersect both circles")
        a_out = float(np.arctan2(np.sqrt(r_out**2 - left_re**2), left_re))
        a_in = float(np.arctan2(np.sqrt(r_in**2 - left_re**2), left_re))
        y_out = np.sqrt(r_out**2 - left_re**2)
        y_in = np.sqrt(r_in**2 - left_re**2)
        segs = (
            ("arc", 0j, float(r_out), -a_out, a_out),
            ("line", complex(left_re, y_out), complex(left_re, y_in)),
            ("arc", 0j, float(r_in), a_in, -a_in),
            ("line", complex(left_re, -y_in), complex(left_re, -y_out)),
        )
        return Contour(segments=segs, base_samples=base_samples)


def _indent_edge(z0, z1, indent):
    """Split the edge z0 -> z1 around listed balls, replacing each chord
    with the arc bulging toward the region interior (left of travel)."""
    pieces = [("line", z0, z1)]
    for center, radius in indent:
        c, r = complex(center), float(radius)
        out = []
        for rec in pieces:
            if rec[0] != "line":
                out.append(rec)
                continue
            a, b = complex(rec[1]), complex(rec[2])
            d = b - a
            L = abs(d)
            # perpendicular distance and chord parameter window
            t_c = ((c - a) / d).real if L else 2.0
            h = abs((c - a) - t_c * d)
            if h >= r or L == 0.0:
                out.append(rec)
                continue
            half = np.sqrt(r * r - h * h) / L
            s0, s1 = t_c - half, t_c + half
            if s1 <= 0.0 or s0 >= 1.0:
                out.append(rec)
                continue
            if s0 < 0.0 or s1 > 1.0:
                raise UsageError(
                    "indentation ball sticks out past an edge endpoint"
                )
            p0, p1 = a + s0 * d, a + s1 * d
            # interior is to the left of travel for a ccw contour
            left = 1j * d / L
            an0 = float(np.angle(p0 - c))
            an1 = float(np.angle(p1 - c))
            ccw1 = an1 if an1 >= an0 else an1 + 2 * np.pi
            mid_ccw = c + r * np.exp(1j * (an0 + ccw1) / 2)
            if ((mid_ccw - c) / left).real > 0:
                arc = ("arc", c, r, an0, ccw1)
            else:
                cw1 = an1 if an1 <= an0 else an1 - 2 * np.pi
                arc = ("arc", c, r, an0, cw1)
            if s0 > 0.0:
                out.append(("line", a, p0))
            out.append(arc)
            if s1 < 1.0:
                out.append(("line", p1, b))
        pieces = out
    return pieces


# -- winding numbers --


class Winding(int):
    """Integer winding carrying the diagnostics of its computation."""

    def __new__(cls, value, diagnostics):
        obj = super().__new__(cls, value)
        obj.diagnostics = diagnostics
        return obj


def winding_number(D, contour, executor=None):
    """Winding of D along the contour by adaptive phase unwrapping.

    Refines sample pairs until every phase increment is below pi/2 and
    the accumulated argument is within 1e-2 of an integer multiple of
    2*pi.  Raises ContourThroughZero when an increment cannot be
    resolved or the contour values dip to the zero floor.
    """
    nodes = contour.nodes()
    cache = {}

    def logged(seg_t):
        if seg_t not in cache:
            cache[seg_t] = _phase_log(D(contour.point(*seg_t)))
        return cache[seg_t]

    if executor is not None:
        pts = [contour.point(*st) for st in nodes]
        for st, val in zip(nodes, executor.map(D, pts)):
            cache[st] = _phase_log(val)
    else:
        for st in nodes:
            logged(st)

    nseg = len(contour.segments)
    while True:
        vals = [logged(st) for st in nodes]
        max_log = max(lg for _, lg in vals)
        if not np.isfinite(max_log):
            raise ContourThroughZero("contour value vanished at a sample")
        low = [st for st, (_, lg) in zip(nodes, vals) if lg < max_log - _FLOOR_LOG]
        if low:
            raise ContourThroughZero(
                f"contour value at {contour.point(*low[0])} is below the "
                "zero floor; perturb the contour"
            )
        total = 0.0
        worst = 0.0
        inserts = []
        for idx in range(len(nodes)):
            (si, ti), (ph0, _) = nodes[idx], vals[idx]
            (sj, tj), (ph1, _) = (
                nodes[(idx + 1) % len(nodes)],
                vals[(idx + 1) % len(nodes)],
            )
            inc = (ph1 - ph0 + np.pi) % (2 * np.pi) - np.pi
            total += inc
            worst = max(worst, abs(inc))
            if abs(inc) >= np.pi / 2:
                if si == sj:
                    gap = tj - ti
                    mid = (si, ti + gap / 2)
                else:
                    gap = (1.0 - ti) + tj  # crossing a segment joint
                    mid = (si, ti + gap / 2) if ti + gap / 2 < 1.0 else (
                        sj,
                        ti + gap / 2 - 1.0,
                    )
                    if sj != (si + 1) % nseg:  # wraparound pair
                        mid = (si, (ti + 1.0) / 2)
                if gap < _MIN_GAP:
                    raise ContourThroughZero(
                        f"phase jump of {abs(inc):.2f} rad persists near "
                        f"{contour.point(si, ti)}; a zero sits on the contour"
                    )
                inserts.append((idx, mid))
        if not inserts:
            turns = total / (2 * np.pi)
            w = int(np.round(turns))
            dev = abs(turns - w)
            if dev >= 1e-2:
                raise NumericalError(
                    f"accumulated argument is {dev:.3f} turns from an integer"
                )
            return Winding(
                w,
                {
                    "samples": len(nodes),
                    "deviation": float(dev),
                    "max_increment": float(worst),
                    "min_log_abs": float(min(lg for _, lg in vals)),
                    "max_log_abs": float(max_log),
                },
            )
        for offset, (idx, mid) in enumerate(inserts):
            nodes.insert(idx + 1 + offset, mid)


# -- root localization --


@dataclass(frozen=True)
class LocatedRoot:
    location: complex
    multiplicity: int
    residual: float
    cluster: bool = False


@dataclass(frozen=True)
class RootReport:
    """Zeros of an analytic map inside a rectangular search box."""

    winding: int
    roots: tuple
    tree: tuple
    diagnostics: dict = field(default_factory=dict)

    def locations(self):
        return [r.location for r in self.roots]


_PERTURB = (0.0, 0.017, -0.023, 0.031, -0.041, 0.053)


def _box_winding(D, box, base_samples, indent=()):
    """Winding on the box boundary, nudging the box off any zero."""
    x0, x1, y0, y1 = box
    dx, dy = x1 - x0, y1 - y0
    last = None
    for p in _PERTURB:
        try:
            c = Contour.rectangle(
                x0 - p * dx,
                x1 + p * dx,
                y0 - p * dy,
                y1 + p * dy,
                base_samples=base_samples,
                indent=indent,
            )
            return winding_number(D, c), (
                x0 - p * dx,
                x1 + p * dx,
                y0 - p * dy,
                y1 + p * dy,
            )
        except ContourThroughZero as exc:
            last = exc
    raise ContourThroughZero(
        f"could not move the box {box} boundary off a zero"
    ) from last


def _split_winding(D, box, base_samples):
    """Quadrisect with a split point nudged off any zero; children are
    returned with their windings, summing to the parent's."""
    x0, x1, y0, y1 = box
    dx, dy = x1 - x0, y1 - y0
    last = None
    for p in _PERTURB:
        cx = x0 + dx * (0.5 + p)
        cy = y0 + dy * (0.5 + 0.7 * p)
        quads = [
            (x0, cx, y0, cy),
            (cx, x1, y0, cy),
            (x0, cx, cy, y1),
            (cx, x1, cy, y1),
        ]
        try:
            return [
                (q, winding_number(D, Contour.rectangle(*q, base_samples=base_samples)))
                for q in quads
            ]
        except ContourThroughZero as exc:
            last = exc
    raise ContourThroughZero(
        f"could not split the box {box} with zero-free child edges"
    ) from last


def _muller_polish(f, z0, size, steps):
    """Muller iteration from z0, steps damped to the leaf scale;
    returns the best point seen."""
    h = 0.125 * size
    zs = [z0 + h, z0 - h, z0]
    fs = [f(z) for z in zs]
    best = min(zip(zs, fs), key=lambda t: abs(t[1]))
    for _ in range(steps):
        (z2, z1, z0_), (f2, f1, f0_) = zs[-3:], fs[-3:]
        q01 = (f1 - f0_) / (z1 - z0_) if z1 != z0_ else 0.0
        q02 = (f2 - f0_) / (z2 - z0_) if z2 != z0_ else 0.0
        q12 = (f2 - f1) / (z2 - z1) if z2 != z1 else 0.0
        c2 = (q12 - q01) / (z2 - z0_) if z2 != z0_ else 0.0
        b = q01 + q02 - q12
        disc = np.sqrt(complex(b * b - 4.0 * f0_ * c2))
        den1, den2 = b + disc, b - disc
        den = den1 if abs(den1) >= abs(den2) else den2
        if den == 0.0:
            break
        step = -2.0 * f0_ / den
        if abs(step) > 0.75 * size:  # stay in this root's basin
            step *= 0.75 * size / abs(step)
        z_new = z0_ + step
        f_new = f(z_new)
        zs.append(z_new)
        fs.append(f_new)
        if abs(f_new) < abs(best[1]):
            best = (z_new, f_new)
        if abs(step) < 1e-13 * max(size, abs(z_new)) or abs(f_new) == 0.0:
            break
    return best


def locate_roots(D, box, max_depth=10, base_samples=64, residual_tol=1e-6):
    """Zeros of D inside box = (re0, re1, im0, im1) by winding descent.

    Quadrisects while the winding exceeds the leaf capacity, polishes
    each leaf by Muller iteration, and takes multiplicities from leaf
    windings; a leaf at max_depth holding more than one zero is reported
    as a cluster at its polished center.
    """
    if max_depth < 0:
        raise UsageError("max_depth must be nonnegative")
    cache = {}

    def Dm(z):
        if z not in cache:
            cache[z] = D(z)
        return cache[z]

    w_top, top_box = _box_winding(Dm, tuple(map(float, box)), base_samples)
    tree = [{"box": top_box, "depth": 0, "winding": int(w_top)}]
    roots = []

    def leaf_scale_and_f(bx):
        x0, x1, y0, y1 = bx
        corners = [
            complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1),
            complex((x0 + x1) / 2, y0), complex((x0 + x1) / 2, y1),
        ]
        logs = [_phase_log(Dm(z))[1] for z in corners]
        ref = max(lg for lg in logs if np.isfinite(lg))

        def f(z):
            ph, lg = _phase_log(Dm(z))
            if not np.isfinite(lg):
                return 0.0 + 0.0j
            return np.exp(lg - ref + 1j * ph)

        return ref, f

    def polish(bx, mult, accept_outside):
        """Polish inside the leaf; False when the iterate escaped a
        leaf it was supposed to stay in."""
        x0, x1, y0, y1 = bx
        size = max(x1 - x0, y1 - y0)
        center = complex((x0 + x1) / 2, (y0 + y1) / 2)
        _, f = leaf_scale_and_f(bx)
        z, fz = _muller_polish(f, center, size, steps=60)
        # leaf edges are zero-free, so the leaf's own root is strictly
        # interior; anything on or past an edge is a foreign basin
        inside = x0 < z.real < x1 and y0 < z.imag < y1
        scale = max(abs(f(complex(x, y))) for x in (x0, x1) for y in (y0, y1))
        resid = abs(fz)
        converged = resid <= residual_tol * max(scale, 1e-300)
        if not accept_outside and not (inside and converged):
            return False
        roots.append(
            LocatedRoot(
                location=z,
                multiplicity=int(mult),
                residual=float(resid),
                cluster=bool(mult > 1 or not (inside and converged)),
            )
        )
        return True

    def descend(bx, w, depth):
        if w == 0:
            return
        if depth >= max_depth:
            polish(bx, w, accept_outside=True)
            return
        if w == 1 and polish(bx, w, accept_outside=False):
            return
        # more than one zero, or the polish wandered: split further
        for child, wc in _split_winding(Dm, bx, base_samples):
            tree.append({"box": child, "depth": depth + 1, "winding": int(wc)})
            descend(child, wc, depth + 1)

    descend(top_box, int(w_top), 0)
    if sum(r.multiplicity for r in roots) != int(w_top):
        raise NumericalError(
            "child windings lost a zero during subdivision; the box "
            "boundary moved across it"
        )
    return RootReport(
        winding=int(w_top),
        roots=tuple(roots),
        tree=tuple(tree),
        diagnostics={"evaluations": len(cache), "max_depth": max_depth},
    )
