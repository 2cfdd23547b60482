"""Command line surface: config ingestion, profile caching, determinant
sampling, winding counts, region studies, and result emission.

Exit codes: 0 success, 1 a study or validation verdict other than pass,
2 usage/configuration problems, 3 numerical failures.

Flags can also come from the environment with the DETWAVE_ prefix
(DETWAVE_OUT, DETWAVE_THREADS, DETWAVE_SEED, DETWAVE_REGIONS,
DETWAVE_EPS); an explicit flag wins over the environment.
"""

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .errors import DetwaveError, UsageError
from .limits import (
    _SURVEY_OPTS,
    _box_pieces,
    ConvergenceReport,
    StudyConfig,
    build_evaluators,
    decide_verdicts,
    region1_study,
    region2_study,
    region3_check,
)
from .models import GasState, check_structure, make_model
from .profiles import (
    ProfileOptions,
    compute_ns_shock_profile,
    compute_viscous_detonation_profile,
    compute_znd_profile,
    load_profile,
    save_profile,
    solve_end_states,
)
from .roots import Contour, winding_number

_MODEL_KEYS = {"name", "params", "epsilon"}
_PROFILE_KEYS = {"s", "u_plus", "z_plus", "epsilons", "tolerances"}
_STUDY_KEYS = {
    "eta",
    "box_halfwidth",
    "annulus_constant",
    "arc_radius_factor",
    "indent_radius",
    "eps_max",
    "noise_floor",
    "det_floor",
    "base_samples",
    "arc_samples",
    "max_depth",
}
_OUTPUT_KEYS = {"directory", "formats"}
_FORMATS = {"json", "csv", "svg"}


def _reject_unknown(section, keys, allowed):
    extra = set(keys) - allowed
    if extra:
        raise UsageError(
            f"unknown {section} keys: {', '.join(sorted(extra))}; "
            f"allowed: {', '.join(sorted(allowed))}"
        )


def _num(section, key, val):
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise UsageError(f"{section}.{key} must be a number, got {val!r}")
    return val


def load_config(path):
    """Parse and schema-check an experiment config file.

    Returns (model, study config, profile options, output section,
    hash of the wave-defining sections).
    """
    if not isinstance(path, str) or not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except ValueError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise UsageError("config must be a JSON object")
    _reject_unknown("config", payload, {"model", "profile", "study", "output"})

    msec = payload.get("model", {})
    _reject_unknown("model", msec, _MODEL_KEYS)
    name = msec.get("name")
    if not isinstance(name, str):
        raise UsageError("model.name is required")
    params = msec.get("params", {})
    if not isinstance(params, dict):
        raise UsageError("model.params must be an object")
    for k, v in params.items():
        _num("model.params", k, v)
    kw = dict(params)
    if "epsilon" in msec:
        kw["epsilon"] = _num("model", "epsilon", msec["epsilon"])
    model = make_model(name, **kw)

    psec = payload.get("profile", {})
    _reject_unknown("profile", psec, _PROFILE_KEYS)
    tol = psec.get("tolerances", {})
    if not isinstance(tol, dict):
        raise UsageError("profile.tolerances must be an object")
    try:
        popts = ProfileOptions(**tol)
    except TypeError as exc:
        raise UsageError(f"bad profile.tolerances: {exc}") from None

    ssec = payload.get("study", {})
    _reject_unknown("study", ssec, _STUDY_KEYS)
    u_plus = psec.get("u_plus", [0.0])
    if not isinstance(u_plus, (list, tuple)):
        raise UsageError("profile.u_plus must be a list of numbers")
    cfg = StudyConfig(
        epsilons=tuple(psec.get("epsilons", (0.1, 0.05, 0.025))),
        s=_num("profile", "s", psec.get("s", 1.0)),
        u_plus=tuple(_num("profile", "u_plus", c) for c in u_plus),
        z_plus=_num("profile", "z_plus", psec.get("z_plus", 1.0)),
        **ssec,
    )

    osec = payload.get("output", {})
    _reject_unknown("output", osec, _OUTPUT_KEYS)
    formats = osec.get("formats", sorted(_FORMATS))
    if not set(formats) <= _FORMATS:
        raise UsageError(f"output.formats entries must be among {sorted(_FORMATS)}")
    out = {"directory": osec.get("directory", "detwave-out"), "formats": list(formats)}

    wave_key = json.dumps(
        {"model": msec, "profile": psec}, sort_keys=True, separators=(",", ":")
    )
    digest = hashlib.sha256(wave_key.encode()).hexdigest()
    return model, cfg, popts, out, digest


# -- profile construction with an on-disk cache --


def _rns_name(eps):
    return f"rns_{repr(float(eps))}.json"


def ensure_profiles(model, cfg, popts, cache_dir=None, digest=None):
    """Build (or reload) every profile the studies need.

    Returns (store for build_evaluators, cache_hit, build_seconds).
    """
    t0 = time.perf_counter()
    ends = solve_end_states(model, GasState(cfg.u_plus, cfg.z_plus), cfg.s)
    store = {"ends": ends}
    names = ["znd.json", "shock.json"] + [_rns_name(e) for e in cfg.epsilons]

    hit = False
    if cache_dir is not None:
        keyfile = os.path.join(cache_dir, "cache_key.txt")
        have = os.path.isfile(keyfile) and all(
            os.path.isfile(os.path.join(cache_dir, n)) for n in names
        )
        if have and digest is not None:
            with open(keyfile) as fh:
                hit = fh.read().strip() == digest
    if hit:
        znd = load_profile(os.path.join(cache_dir, "znd.json"), model)
        shock = load_profile(os.path.join(cache_dir, "shock.json"), model)
        store["znd"], store["shock"] = znd, shock
        for e in cfg.epsilons:
            store[("rns", float(e))] = load_profile(
                os.path.join(cache_dir, _rns_name(e)), model, znd=znd, shock=shock
            )
        return store, True, time.perf_counter() - t0

    znd = compute_znd_profile(model, ends, popts)
    shock = compute_ns_shock_profile(model, ends.u_star, ends.u_plus, ends.s, popts)
    store["znd"], store["shock"] = znd, shock
    for e in cfg.epsilons:
        store[("rns", float(e))] = compute_viscous_detonation_profile(
            model, float(e), znd, shock, popts
        )
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        save_profile(znd, os.path.join(cache_dir, "znd.json"))
        save_profile(shock, os.path.join(cache_dir, "shock.json"))
        for e in cfg.epsilons:
            save_profile(store[("rns", float(e))], os.path.join(cache_dir, _rns_name(e)))
        if digest is not None:
            with open(os.path.join(cache_dir, "cache_key.txt"), "w") as fh:
                fh.write(digest + "\n")
    return store, False, time.perf_counter() - t0


# -- small output helpers --


def _fmt(x):
    return repr(float(x))


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _csv(header, rows):
    lines = [",".join(header)]
    lines += [",".join(r) for r in rows]
    return "\n".join(lines) + "\n"


def _env(name, cast=str):
    raw = os.environ.get("DETWAVE_" + name)
    if raw is None:
        return None
    try:
        return cast(raw)
    except ValueError:
        raise UsageError(f"bad DETWAVE_{name} value {raw!r}") from None


def _pick(flag, env_name, fallback, cast=str):
    if flag is not None:
        return flag
    got = _env(env_name, cast)
    return fallback if got is None else got


# -- verb: profile --


def _znd_drift(znd):
    model = znd.model
    s = znd.end_states.s
    qv = znd.end_states.q_vec(model)
    worst = 0.0
    for u, z in zip(znd.u, znd.z):
        res = model.f(u) - s * (u + qv * z)
        worst = max(worst, float(np.linalg.norm(res - znd.conserved_value)))
    return worst / (1.0 + float(np.linalg.norm(znd.conserved_value)))


def _rh_residual(model, ends):
    us = model.u_of_state(ends.u_star)
    up = model.u_of_state(ends.u_plus)
    return float(np.linalg.norm((model.f(us) - model.f(up)) - ends.s * (us - up)))


def cmd_profile(args):
    model, cfg, popts, out, digest = load_config(args.config)
    eps = _pick(args.eps, "EPS", cfg.epsilons[0], float)
    ends = solve_end_states(model, GasState(cfg.u_plus, cfg.z_plus), cfg.s)
    print(f"model={model.name} s={_fmt(cfg.s)} rh_residual={_rh_residual(model, ends):.3e}")

    if args.kind == "znd":
        prof = compute_znd_profile(model, ends, popts)
        print(
            f"znd nodes={prof.grid.size} domain=[{prof.grid[0]:.3f},0] "
            f"conserved_drift={_znd_drift(prof):.3e}"
        )
    elif args.kind == "ns":
        prof = compute_ns_shock_profile(model, ends.u_star, ends.u_plus, ends.s, popts)
        end_dev = max(
            float(np.max(np.abs(prof.u[0] - model.u_of_state(ends.u_star)))),
            float(np.max(np.abs(prof.u[-1] - model.u_of_state(ends.u_plus)))),
        )
        print(f"ns nodes={prof.fast_grid.size} end_deviation={end_dev:.3e}")
    else:
        znd = compute_znd_profile(model, ends, popts)
        shock = compute_ns_shock_profile(model, ends.u_star, ends.u_plus, ends.s, popts)
        prof = compute_viscous_detonation_profile(model, float(eps), znd, shock, popts)
        left = prof.sample(float(prof.grid[0]))[0]
        tgt = np.append(model.u_of_state(ends.u_minus), 0.0)
        print(
            f"rns eps={_fmt(eps)} nodes={prof.grid.size} "
            f"burned_end_deviation={float(np.max(np.abs(left - tgt))):.3e}"
        )

    dest = args.out or os.path.join(out["directory"], "profiles")
    if args.out is None:
        os.makedirs(dest, exist_ok=True)
        dest = os.path.join(
            dest, _rns_name(eps) if args.kind == "rns" else f"{args.kind}.json"
        )
    save_profile(prof, dest)
    print(f"wrote {dest}")
    return 0


# -- verb: evans --


def _parse_lams(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip().replace(" ", "")
        if not tok:
            continue
        try:
            out.append(complex(tok))
        except ValueError:
            raise UsageError(f"bad lambda value {tok!r}") from None
    if not out:
        raise UsageError("empty lambda list")
    return out


def _load_contour(path):
    if not os.path.isfile(path):
        raise UsageError(f"contour file not found: {path}")
    with open(path) as fh:
        try:
            payload = json.load(fh)
        except ValueError as exc:
            raise UsageError(f"contour is not valid JSON: {exc}") from None
    try:
        return Contour.from_payload(payload)
    except (KeyError, TypeError) as exc:
        raise UsageError(f"malformed contour payload: {exc}") from None


def _evaluator_for(model, cfg, popts, kind, eps, opts=None):
    # prewarm just the pieces this determinant needs, honoring the
    # config's profile tolerances; the factory fills any gaps lazily
    ends = solve_end_states(model, GasState(cfg.u_plus, cfg.z_plus), cfg.s)
    store = {"ends": ends}
    if kind in ("znd", "rns"):
        store["znd"] = compute_znd_profile(model, ends, popts)
    if kind in ("ns", "rns"):
        store["shock"] = compute_ns_shock_profile(
            model, ends.u_star, ends.u_plus, ends.s, popts
        )
    if kind == "rns":
        store[("rns", float(eps))] = compute_viscous_detonation_profile(
            model, float(eps), store["znd"], store["shock"], popts
        )
    return build_evaluators(model, cfg, opts, profiles=store)(kind, eps)


def cmd_evans(args):
    model, cfg, popts, out, _ = load_config(args.config)
    if (args.lam is None) == (args.contour is None):
        raise UsageError("pass exactly one of --lam or --contour")
    eps = _pick(args.eps, "EPS", cfg.epsilons[0], float)
    D = _evaluator_for(model, cfg, popts, args.kind, eps)
    if args.lam is not None:
        lams = _parse_lams(args.lam)
    else:
        ct = _load_contour(args.contour)
        lams = [ct.point(*st) for st in ct.nodes()]
    rows = []
    for lam in lams:
        v = D(lam)
        rows.append(
            (
                _fmt(lam.real),
                _fmt(lam.imag),
                _fmt(v.value.real),
                _fmt(v.value.imag),
                _fmt(v.log_scale),
            )
        )
    text = _csv(["re_lambda", "im_lambda", "re_D", "im_D", "log_scale"], rows)
    if args.out:
        _write_text(args.out, text)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        sys.stdout.write(text)
    return 0


# -- verb: winding --


def cmd_winding(args):
    model, cfg, popts, out, _ = load_config(args.config)
    eps = _pick(args.eps, "EPS", cfg.epsilons[0], float)
    ct = _load_contour(args.contour)
    D = _evaluator_for(model, cfg, popts, args.kind, eps, opts=_SURVEY_OPTS)
    executor = None
    threads = _pick(args.threads, "THREADS", 1, int)
    try:
        if threads > 1:
            executor = ThreadPoolExecutor(max_workers=threads)
        w = winding_number(D, ct, executor=executor)
    finally:
        if executor is not None:
            executor.shutdown()
    doc = {
        "kind": args.kind,
        "eps": float(eps),
        "winding": int(w),
        "diagnostics": {k: float(v) for k, v in w.diagnostics.items()},
    }
    text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    if args.out:
        _write_text(args.out, text)
    sys.stdout.write(text)
    return 0


# -- verb: study --


def _parse_regions(text):
    try:
        regions = {int(t) for t in text.split(",") if t.strip()}
    except ValueError:
        raise UsageError(f"bad regions list {text!r}") from None
    if not regions or not regions <= {1, 2, 3}:
        raise UsageError("regions must be a comma list drawn from 1,2,3")
    return regions


def _region_csvs(report):
    files = {}
    r1, r2, r3 = report.region1, report.region2, report.region3
    if r1 is not None:
        rows = [
            (
                _fmt(e.eps),
                str(e.winding),
                str(r1.winding_znd),
                str(e.circle_winding),
                str(r1.circle_winding_znd),
                str(int(e.ok)),
            )
            for e in r1.per_eps
        ]
        files["region1.csv"] = _csv(
            ["eps", "winding_rns", "winding_znd", "circle_rns", "circle_znd", "ok"],
            rows,
        )
        rows = []
        for e in r1.per_eps:
            for m in e.matches:
                rows.append(
                    (
                        _fmt(e.eps),
                        "" if m.left is None else _fmt(m.left.real),
                        "" if m.left is None else _fmt(m.left.imag),
                        "" if m.right is None else _fmt(m.right.real),
                        "" if m.right is None else _fmt(m.right.imag),
                        _fmt(m.distance),
                    )
                )
        files["region1_matches.csv"] = _csv(
            ["eps", "rns_re", "rns_im", "znd_re", "znd_im", "distance"], rows
        )
    if r2 is not None:
        rows = [
            (_fmt(e.eps), str(e.winding), str(e.winding_ns), str(int(e.ok)))
            for e in r2.per_eps
        ]
        files["region2.csv"] = _csv(["eps", "winding_rns", "winding_ns", "ok"], rows)
        rows = []
        for e in r2.per_eps:
            for m in e.matches:
                rows.append(
                    (
                        _fmt(e.eps),
                        "" if m.left is None else _fmt(m.left.real),
                        "" if m.left is None else _fmt(m.left.imag),
                        "" if m.right is None else _fmt(m.right.real),
                        "" if m.right is None else _fmt(m.right.imag),
                        _fmt(m.distance),
                    )
                )
        files["region2_matches.csv"] = _csv(
            ["eps", "rns_re", "rns_im", "ns_re", "ns_im", "distance"], rows
        )
    if r3 is not None:
        rows = [
            (
                _fmt(e.eps),
                _fmt(e.radius),
                str(e.winding),
                _fmt(e.min_rescaled),
                str(e.samples),
                str(int(e.ok)),
            )
            for e in r3.per_eps
        ]
        files["region3.csv"] = _csv(
            ["eps", "radius", "winding", "min_rescaled", "samples", "ok"], rows
        )
    return files


# deterministic palette for eps-indexed markers
_PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _contour_points(contour, per_arc=96):
    pts = []
    for seg in contour.segments:
        if seg[0] == "line":
            pts.extend([seg[1], seg[2]])
        else:
            _, c, r, a0, a1 = seg
            for t in np.linspace(a0, a1, per_arc):
                pts.append(c + r * np.exp(1j * t))
    pts.append(pts[0])
    return pts


def _group(roots):
    out = []
    for z in sorted(roots, key=lambda w: (w.real, w.imag)):
        for g in out:
            if abs(z - g[0]) < 1e-9:
                g[1] += 1
                break
        else:
            out.append([z, 1])
    return out


class _Panel:
    def __init__(self, title, x0, y0, size, world):
        self.title = title
        self.x0, self.y0, self.size = x0, y0, size
        wx0, wx1, wy0, wy1 = world
        scale = size / max(wx1 - wx0, wy1 - wy0)
        self.sx = lambda re: x0 + (re - wx0) * scale
        self.sy = lambda im: y0 + size - (im - wy0) * scale
        self.parts = [
            f'<rect x="{x0}" y="{y0}" width="{size}" height="{size}" '
            'fill="none" stroke="#999"/>',
            f'<text x="{x0}" y="{y0 - 8}" font-size="13">{title}</text>',
        ]
        if wx0 < 0 < wx1:
            x = self.sx(0.0)
            self.parts.append(
                f'<line x1="{x:.2f}" y1="{y0}" x2="{x:.2f}" y2="{y0 + size}" '
                'stroke="#ccc" stroke-dasharray="4 3"/>'
            )
        if wy0 < 0 < wy1:
            y = self.sy(0.0)
            self.parts.append(
                f'<line x1="{x0}" y1="{y:.2f}" x2="{x0 + size}" y2="{y:.2f}" '
                'stroke="#ccc" stroke-dasharray="4 3"/>'
            )

    def curve(self, pts, color="#444"):
        coords = " ".join(f"{self.sx(p.real):.2f},{self.sy(p.imag):.2f}" for p in pts)
        self.parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1"/>'
        )

    def cross(self, z, color="#000"):
        x, y = self.sx(z.real), self.sy(z.imag)
        self.parts.append(
            f'<path d="M {x - 4:.2f} {y - 4:.2f} L {x + 4:.2f} {y + 4:.2f} '
            f'M {x - 4:.2f} {y + 4:.2f} L {x + 4:.2f} {y - 4:.2f}" '
            f'stroke="{color}" stroke-width="1.6"/>'
        )

    def dot(self, z, mult, color):
        r = 3.0 + 2.0 * (mult - 1)
        self.parts.append(
            f'<circle cx="{self.sx(z.real):.2f}" cy="{self.sy(z.imag):.2f}" '
            f'r="{r:.1f}" fill="{color}" fill-opacity="0.55" stroke="{color}"/>'
        )

    def caption(self, line):
        self.parts.append(
            f'<text x="{self.x0}" y="{self.y0 + self.size + 16}" font-size="11">'
            f"{line}</text>"
        )


def zero_map_svg(report):
    """Root/contour map, one panel per region present in the report."""
    cfg = report.config
    color = {e: _PALETTE[i % len(_PALETTE)] for i, e in enumerate(cfg.epsilons)}
    size, margin, gap = 300, 46, 34
    panels = []

    if report.region1 is not None:
        r1 = report.region1
        half = cfg.box_halfwidth
        pad = 0.15 * half
        p = _Panel(
            "origin box, lam plane",
            margin,
            margin,
            size,
            (-r1.eta - pad, half + pad, -half - pad, half + pad),
        )
        for ct, _ in _box_pieces(r1.eta, half, cfg.indent_radius, 8):
            p.curve(_contour_points(ct))
        for z, m in _group(r1.roots_znd):
            p.cross(z)
        for e in r1.per_eps:
            for z, m in _group(e.roots):
                p.dot(z, m, color[e.eps])
        p.caption("crosses: inviscid roots; disks: viscous roots per eps")
        panels.append(p)

    if report.region2 is not None:
        r2 = report.region2
        r_out = 1.0 / cfg.annulus_constant
        pad = 0.15 * r_out
        p = _Panel(
            "shock scale, eps*lam plane",
            margin + (size + gap) * len(panels),
            margin,
            size,
            (-r_out - pad, r_out + pad, -r_out - pad, r_out + pad),
        )
        for e in r2.per_eps:
            sector = Contour.annulus_sector(
                cfg.annulus_constant * e.eps, r_out, -e.eps * r2.eta
            )
            p.curve(_contour_points(sector), color[e.eps])
            for z, m in _group(e.roots):
                p.dot(z, m, color[e.eps])
            for z, m in _group(e.roots_ns):
                p.cross(z)
        p.caption("crosses: shock roots; disks: viscous roots per eps")
        panels.append(p)

    if report.region3 is not None:
        r3 = report.region3
        rmax = max(e.radius for e in r3.per_eps)
        pad = 0.1 * rmax
        p = _Panel(
            "high frequency, lam plane",
            margin + (size + gap) * len(panels),
            margin,
            size,
            (-pad, rmax + pad, -rmax - pad, rmax + pad),
        )
        for e in r3.per_eps:
            arc = Contour.semicircle_with_chord(e.radius, cfg.indent_radius)
            p.curve(_contour_points(arc), color[e.eps])
            for z, m in _group(e.roots):
                p.dot(z, m, color[e.eps])
        p.caption("semicircle radius 1/eps-scaled; any disk here is a defect")
        panels.append(p)

    width = margin * 2 + size * len(panels) + gap * max(0, len(panels) - 1)
    height = margin * 2 + size + 40
    legend = "; ".join(f"eps={_fmt(e)}: {color[e]}" for e in cfg.epsilons)
    body = "\n".join(part for p in panels for part in p.parts)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f"{body}\n"
        f'<text x="{margin}" y="{height - 10}" font-size="11">verdict: '
        f"{report.verdict}; {legend}</text>\n</svg>\n"
    )


def cmd_study(args):
    model, cfg, popts, out, digest = load_config(args.config)
    regions = _parse_regions(_pick(args.regions, "REGIONS", "1,2,3"))
    out_dir = _pick(args.out, "OUT", out["directory"])
    threads = _pick(args.threads, "THREADS", 1, int)
    seed = _pick(args.seed, "SEED", None, int)
    started = datetime.now(timezone.utc).isoformat()

    try:
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write_probe")
        with open(probe, "w") as fh:
            fh.write("ok")
        os.remove(probe)
    except OSError as exc:
        raise UsageError(f"output directory not writable: {exc}") from None

    store, cache_hit, build_s = ensure_profiles(
        model, cfg, popts, cache_dir=os.path.join(out_dir, "profiles"), digest=digest
    )
    pair = (
        build_evaluators(model, cfg, _SURVEY_OPTS, profiles=store),
        build_evaluators(model, cfg, None, profiles=store),
    )

    executor = None
    try:
        if threads > 1:
            executor = ThreadPoolExecutor(max_workers=threads)
        r1 = (
            region1_study(model, cfg, evaluators=pair, executor=executor)
            if 1 in regions
            else None
        )
        r2 = (
            region2_study(model, cfg, evaluators=pair, executor=executor)
            if 2 in regions
            else None
        )
        r3 = (
            region3_check(model, cfg, evaluators=pair, executor=executor)
            if 3 in regions
            else None
        )
    finally:
        if executor is not None:
            executor.shutdown()

    per, verdict, roots = decide_verdicts(cfg, r1, r2, r3)
    report = ConvergenceReport(
        config=cfg,
        region1=r1,
        region2=r2,
        region3=r3,
        per_eps_verdict=per,
        verdict=verdict,
        unstable_roots=roots,
    )

    formats = set(out["formats"])
    files = []
    if "json" in formats:
        _write_text(
            os.path.join(out_dir, "report.json"),
            json.dumps(report.to_payload(), sort_keys=True, indent=1) + "\n",
        )
        files.append("report.json")
    if "csv" in formats:
        for name, text in sorted(_region_csvs(report).items()):
            _write_text(os.path.join(out_dir, name), text)
            files.append(name)
    if "svg" in formats:
        _write_text(os.path.join(out_dir, "zero_map.svg"), zero_map_svg(report))
        files.append("zero_map.svg")

    run_meta = {
        "config_hash": digest,
        "versions": {
            "detwave": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
        "regions": sorted(regions),
        "threads": threads,
        "seed": seed,
        "profile_cache": {"hit": cache_hit, "build_seconds": build_s},
        "files": sorted(files),
    }
    _write_text(
        os.path.join(out_dir, "run.json"),
        json.dumps(run_meta, sort_keys=True, indent=1) + "\n",
    )
    print(f"verdict: {verdict}")
    for e, v in per:
        print(f"  eps={_fmt(e)}: {v}")
    print(f"wrote {out_dir} ({', '.join(sorted(files + ['run.json']))})")
    return 0 if verdict == "STABLE" else 1


# -- verb: validate --


def cmd_validate(args):
    model, cfg, popts, out, _ = load_config(args.config)
    ends = solve_end_states(model, GasState(cfg.u_plus, cfg.z_plus), cfg.s)
    rep = check_structure(model, [ends.u_minus, ends.u_star, ends.u_plus], cfg.s)
    print(f"hypotheses: {'pass' if rep.passed else 'FAIL'} theta={rep.theta:.6g}")
    for msg in rep.messages:
        print(f"  {msg}")
    return 0 if rep.passed else 1


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="detwave",
        description="Detonation-wave profiles and stability determinants.",
    )
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, kind=True):
        p.add_argument("--config", required=True, help="experiment config JSON")
        if kind:
            p.add_argument("--kind", required=True, choices=("znd", "ns", "rns"))
            p.add_argument("--eps", type=float, default=None)

    p = sub.add_parser("profile", help="build a wave profile and cache it")
    common(p)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("evans", help="sample a determinant on points or a contour")
    common(p)
    p.add_argument("--lam", default=None, help="comma list of complex values")
    p.add_argument("--contour", default=None, help="contour JSON file")
    p.add_argument("--out", default=None, help="CSV destination (default stdout)")
    p.set_defaults(fn=cmd_evans)

    p = sub.add_parser("winding", help="winding number over a contour")
    common(p)
    p.add_argument("--contour", required=True)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_winding)

    p = sub.add_parser("study", help="run the three-region verification")
    common(p, kind=False)
    p.add_argument("--regions", default=None, help="subset such as 1,3")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=cmd_study)

    p = sub.add_parser("validate", help="check structural hypotheses on the end states")
    common(p, kind=False)
    p.set_defaults(fn=cmd_validate)
    return ap


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except DetwaveError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
