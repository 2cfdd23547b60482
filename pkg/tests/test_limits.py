"""Verdict machinery for the three-region studies, exercised on cheap
closed-form determinant streams; one pure-shock configuration runs the
real integrators end to end."""

import json

import pytest

from detwave import GasState, make_model
from detwave.errors import UsageError
from detwave.evans import evans_ns, evans_rns
from detwave.limits import (
    ConvergenceReport,
    StudyConfig,
    decide_verdicts,
    full_certificate,
    match_root_sets,
    region1_study,
    region3_check,
)
from detwave.linearize import assemble_frozen_rns
from detwave.profiles import compute_ns_shock_profile, solve_end_states

# flat at infinity, simple zero at the origin, pole far enough left
# that no study contour or root-search box ever reaches it: a stand-in
# with the same winding bookkeeping as the genuine determinants
base = lambda lam: lam / (20.0 + lam)


def fake_factory(rns_by_eps=None, znd=None, ns=None):
    def factory(kind, eps=None):
        if kind == "znd":
            return znd or base
        if kind == "ns":
            return ns or base
        fn = (rns_by_eps or (lambda e: base))(eps)
        return fn

    return factory


def small_cfg(**kw):
    kw.setdefault("epsilons", (0.1, 0.05))
    kw.setdefault("annulus_constant", 2.0)
    kw.setdefault("base_samples", 32)
    kw.setdefault("arc_samples", 48)
    return StudyConfig(**kw)


def test_config_guards():
    with pytest.raises(UsageError):
        StudyConfig(epsilons=())
    with pytest.raises(UsageError):
        StudyConfig(epsilons=(0.05, 0.1))  # increasing
    with pytest.raises(UsageError):
        StudyConfig(epsilons=(0.1, -0.05))
    with pytest.raises(UsageError):
        StudyConfig(epsilons=(0.3,))  # above eps_max
    with pytest.raises(UsageError):
        StudyConfig(epsilons=(0.1,), eta=0.0)
    with pytest.raises(UsageError):
        # annulus constant 4 puts the inner radius past the outer at eps=0.1
        StudyConfig(epsilons=(0.1,), annulus_constant=4.0)
    with pytest.raises(UsageError):
        StudyConfig(epsilons=(0.05,), arc_radius_factor=1.9)
    with pytest.raises(UsageError):
        StudyConfig(epsilons=(0.05,), indent_radius=3.0)


def test_config_payload_roundtrip():
    cfg = small_cfg()
    assert StudyConfig.from_payload(cfg.to_payload()) == cfg


def test_match_root_sets():
    got = match_root_sets([1 + 1j, -2j], [1.05 + 1j, -2.04j], penalty=10.0)
    dists = sorted(m.distance for m in got)
    assert len(got) == 2
    assert dists[0] == pytest.approx(0.04) and dists[1] == pytest.approx(0.05)

    got = match_root_sets([0.5], [], penalty=7.0)
    assert got == (match_root_sets([0.5], [], 7.0))
    assert got[0].right is None and got[0].distance == 7.0
    assert match_root_sets([], [], 3.0) == ()

    # the dummy padding must not steal a genuine pairing
    got = match_root_sets([0.0], [0.1, 5.0], penalty=6.0)
    paired = [m for m in got if m.left is not None and m.right is not None]
    assert len(paired) == 1 and paired[0].right == 0.1


def test_stable_stream_is_stable_everywhere():
    cfg = small_cfg()
    rep = full_certificate(None, cfg, evaluators=fake_factory())
    assert rep.verdict == "STABLE"
    assert all(v == "STABLE" for _, v in rep.per_eps_verdict)
    assert rep.region1.winding_znd == 0
    assert rep.region1.circle_winding_znd == 1
    assert all(e.winding == 0 and e.circle_winding == 1 for e in rep.region1.per_eps)
    assert all(e.winding == e.winding_ns == 0 for e in rep.region2.per_eps)
    assert all(e.winding == 0 and e.ok for e in rep.region3.per_eps)
    assert rep.region1.monotone is True  # vacuous but judged: two eps present
    assert rep.unstable_roots == ()


def test_report_payload_roundtrip_and_replay():
    cfg = small_cfg()
    rep = full_certificate(None, cfg, evaluators=fake_factory())
    wire = json.loads(json.dumps(rep.to_payload()))
    back = ConvergenceReport.from_payload(wire)
    assert back == rep
    per, verdict, roots = decide_verdicts(
        back.config, back.region1, back.region2, back.region3
    )
    assert per == back.per_eps_verdict and verdict == back.verdict
    assert roots == back.unstable_roots


def test_injected_root_flips_to_unstable():
    cfg = small_cfg()
    inject = lambda e: (lambda lam: (lam - 0.3) * base(lam))
    rep = full_certificate(None, cfg, evaluators=fake_factory(rns_by_eps=inject))
    assert rep.verdict == "UNSTABLE"
    assert all(v == "UNSTABLE" for _, v in rep.per_eps_verdict)
    assert len(rep.unstable_roots) == 1
    assert abs(rep.unstable_roots[0] - 0.3) < 1e-6
    e1 = rep.region1.per_eps[0]
    assert e1.winding == 1 and rep.region1.winding_znd == 0
    assert not e1.ok
    # region III sees the same root and flags the bug-suspicion path
    assert any(not e.ok and e.winding == 1 for e in rep.region3.per_eps)
    assert any(abs(r - 0.3) < 1e-6 for e in rep.region3.per_eps for r in e.roots)


def drifting_factory(drift_by_eps):
    z0 = -0.006 + 1.0j
    znd = lambda lam: (lam - z0) * base(lam)
    rns = lambda e: (lambda lam: (lam - (z0 + drift_by_eps[e])) * base(lam))
    return fake_factory(rns_by_eps=rns, znd=znd)


def test_monotone_violation_fails_region_one():
    cfg = small_cfg()
    r1 = region1_study(
        None, cfg, evaluators=drifting_factory({0.1: 0.001, 0.05: 0.003})
    )
    assert r1.monotone is False
    assert not r1.ok
    _, verdict, _ = decide_verdicts(cfg, r1, None, None)
    assert verdict == "FAIL:I"


def test_left_sliver_root_is_not_stable_but_monotone_holds():
    cfg = small_cfg()
    r1 = region1_study(
        None, cfg, evaluators=drifting_factory({0.1: 0.003, 0.05: 0.001})
    )
    assert r1.monotone is True
    e1 = r1.per_eps[0]
    assert e1.winding == r1.winding_znd == 1
    assert e1.matches[0].distance == pytest.approx(0.003, abs=1e-6)
    # the root sits left of the imaginary axis: not an instability,
    # but the certificate must refuse to call the wave stable
    _, verdict, roots = decide_verdicts(cfg, r1, None, None)
    assert verdict == "FAIL:I" and roots == ()


def test_single_eps_gives_no_monotonicity_verdict():
    cfg = small_cfg(epsilons=(0.1,))
    r1 = region1_study(None, cfg, evaluators=fake_factory())
    assert r1.monotone is None
    assert r1.ok


def test_interior_indent_uses_two_piece_contour():
    cfg = small_cfg(epsilons=(0.1,), eta=0.2)
    r1 = region1_study(None, cfg, evaluators=fake_factory())
    assert r1.winding_znd == 0 and r1.per_eps[0].winding == 0
    assert r1.per_eps[0].circle_winding == 1


def test_contour_root_triggers_eta_retry():
    cfg = small_cfg(epsilons=(0.1,))
    z0 = -cfg.eta + 0.5j  # exactly on the initial left edge
    f = lambda lam: (lam - z0) * base(lam)
    r1 = region1_study(
        None, cfg, evaluators=fake_factory(rns_by_eps=lambda e: f, znd=f)
    )
    assert r1.eta != cfg.eta
    assert r1.winding_znd == 1 and r1.per_eps[0].winding == 1


def test_region3_floor_violation_reported():
    cfg = small_cfg(epsilons=(0.1,), det_floor=0.5)
    r3 = region3_check(None, cfg, evaluators=fake_factory())
    assert not r3.ok
    assert r3.per_eps[0].winding == 0
    assert r3.per_eps[0].min_rescaled < 0.5
    assert "floor" in r3.per_eps[0].note
    _, verdict, _ = decide_verdicts(cfg, None, None, r3)
    assert verdict == "FAIL:III"


def test_pure_shock_certificate_is_stable():
    """Reaction switched off: the wave is the viscous Burgers shock,
    whose spectrum on the scanned set is the translational zero only."""
    model = make_model("majda", k=0.0)
    ends = solve_end_states(model, GasState((0.0,), 1.0), 1.0)
    shock = compute_ns_shock_profile(model, ends.u_star, ends.u_plus, ends.s)
    frames = {}

    def factory(kind, eps=None):
        if kind in ("znd", "ns"):
            return lambda lam: evans_ns(shock, lam)
        if eps not in frames:
            frames[eps] = assemble_frozen_rns(model, shock, eps)
        frozen = frames[eps]
        return lambda lam: evans_rns(frozen, lam)

    cfg = small_cfg(epsilons=(0.1,), base_samples=24, arc_samples=32)
    rep = full_certificate(model, cfg, evaluators=factory)
    assert rep.verdict == "STABLE"
    assert rep.region1.per_eps[0].circle_winding == 1
    assert rep.region3.per_eps[0].min_rescaled >= cfg.det_floor
