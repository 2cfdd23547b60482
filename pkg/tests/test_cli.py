"""Command-line surface: exit codes, config validation, file outputs,
and byte-level determinism.  Study orchestration runs on closed-form
determinant streams; profile/evans/winding verbs run the real thing on
the scalar model."""

import json
import os

import numpy as np
import pytest

from detwave import cli
from detwave.errors import UsageError
from detwave.limits import StudyConfig
from detwave.profiles import ProfileOptions
from detwave.roots import Contour

# same stand-in stream the study tests use: zero at the origin, pole
# far outside every contour
base = lambda lam: lam / (20.0 + lam)


def write_config(path, **over):
    doc = {
        "model": {"name": "majda", "params": {"q": 0.3, "k": 1.0, "u_ig": 0.5}},
        "profile": {"s": 1.0, "u_plus": [0.0], "z_plus": 1.0, "epsilons": [0.1, 0.05]},
        "study": {"annulus_constant": 2.0, "base_samples": 32, "arc_samples": 48},
        "output": {"directory": str(path.parent / "out")},
    }
    for key, val in over.items():
        if val is None:
            doc.pop(key, None)
        else:
            doc[key] = val
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def config(tmp_path):
    return write_config(tmp_path / "cfg.json")


def patch_synthetic(monkeypatch, factory):
    """Short-circuit profile construction and determinant assembly."""
    monkeypatch.setattr(cli, "ensure_profiles", lambda *a, **k: ({}, False, 0.0))
    monkeypatch.setattr(
        cli, "build_evaluators", lambda model, cfg, opts=None, profiles=None: factory
    )


def synthetic(rns=None, znd=None, ns=None):
    def factory(kind, eps=None):
        if kind == "znd":
            return znd or base
        if kind == "ns":
            return ns or base
        return rns or base

    return factory


# -- usage and config failures (exit 2) --


def test_missing_config_file(tmp_path):
    assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 2


def test_unknown_config_section(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"model": {"name": "majda"}, "bogus": {}}')
    assert cli.main(["validate", "--config", str(p)]) == 2


def test_config_not_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("not json {")
    assert cli.main(["validate", "--config", str(p)]) == 2


def test_config_details(tmp_path):
    path = write_config(
        tmp_path / "c.json", profile={"s": 1.0, "tolerances": {"L_tilde": 30.0}}
    )
    model, cfg, popts, out, digest = cli.load_config(path)
    assert model.name == "majda"
    assert popts.L_tilde == 30.0
    assert cfg.epsilons == (0.1, 0.05, 0.025)  # defaults fill in
    assert len(digest) == 64

    with pytest.raises(UsageError):
        cli.load_config(write_config(tmp_path / "c2.json", model={"params": {}}))
    with pytest.raises(UsageError):
        cli.load_config(
            write_config(tmp_path / "c3.json", model={"name": "majda", "q": 1})
        )
    with pytest.raises(UsageError):
        cli.load_config(
            write_config(
                tmp_path / "c4.json",
                model={"name": "majda", "params": {"q": "hot"}},
            )
        )
    with pytest.raises(UsageError):
        cli.load_config(
            write_config(
                tmp_path / "c5.json",
                profile={"s": 1.0, "tolerances": {"nope": 1.0}},
            )
        )
    with pytest.raises(UsageError):
        cli.load_config(
            write_config(tmp_path / "c6.json", output={"formats": ["pdf"]})
        )


def test_evans_lambda_flag_errors(config, tmp_path):
    ct = tmp_path / "ct.json"
    json.dump(Contour.circle(0.0, 0.05, base_samples=16).to_payload(), ct.open("w"))
    argv = ["evans", "--config", config, "--kind", "znd"]
    assert cli.main(argv) == 2  # neither source
    assert cli.main(argv + ["--lam", "1", "--contour", str(ct)]) == 2  # both
    assert cli.main(argv + ["--lam", "1+2k"]) == 2  # unparsable
    assert cli.main(argv + ["--lam", " , "]) == 2  # empty


def test_open_contour_rejected(config, tmp_path):
    bad = tmp_path / "open.json"
    bad.write_text(
        '{"segments": [{"type": "line", "z0": [0, 0], "z1": [1, 0]}]}'
    )
    assert cli.main(
        ["winding", "--config", config, "--kind", "znd", "--contour", str(bad)]
    ) == 2
    bad.write_text('{"rings": []}')
    assert cli.main(
        ["winding", "--config", config, "--kind", "znd", "--contour", str(bad)]
    ) == 2


def test_bad_regions_list(config, monkeypatch):
    patch_synthetic(monkeypatch, synthetic())
    assert cli.main(["study", "--config", config, "--regions", "1,4"]) == 2
    assert cli.main(["study", "--config", config, "--regions", "x"]) == 2


def test_out_path_collision(config, tmp_path, monkeypatch):
    patch_synthetic(monkeypatch, synthetic())
    blocker = tmp_path / "blocker"
    blocker.write_text("file, not a directory")
    assert cli.main(["study", "--config", config, "--out", str(blocker)]) == 2


# -- numerical failures (exit 3) --


def test_no_burned_state_exits_three(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"model": {"name": "majda", "params": {"q": 0.6}}}')
    assert cli.main(["profile", "--config", p.as_posix(), "--kind", "znd"]) == 3


# -- study orchestration on synthetic streams --

STUDY_FILES = [
    "report.json",
    "region1.csv",
    "region1_matches.csv",
    "region2.csv",
    "region2_matches.csv",
    "region3.csv",
    "zero_map.svg",
    "run.json",
]


def run_study(config, out_dir, extra=()):
    code = cli.main(["study", "--config", config, "--out", str(out_dir)] + list(extra))
    names = sorted(f.name for f in out_dir.iterdir() if f.is_file())
    return code, names


def test_study_stable_end_to_end(config, tmp_path, monkeypatch, capsys):
    patch_synthetic(monkeypatch, synthetic())
    code, names = run_study(config, tmp_path / "out")
    assert code == 0
    assert names == sorted(STUDY_FILES)

    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["verdict"] == "STABLE"
    assert [v for _, v in report["per_eps_verdict"]] == ["STABLE", "STABLE"]
    assert report["unstable_roots"] == []

    r1 = (tmp_path / "out" / "region1.csv").read_text().splitlines()
    assert r1[0] == "eps,winding_rns,winding_znd,circle_rns,circle_znd,ok"
    assert len(r1) == 3  # header + one row per eps
    assert all(row.split(",")[5] == "1" for row in r1[1:])

    r3 = (tmp_path / "out" / "region3.csv").read_text().splitlines()
    assert r3[0] == "eps,radius,winding,min_rescaled,samples,ok"
    assert [row.split(",")[2] for row in r3[1:]] == ["0", "0"]

    svg = (tmp_path / "out" / "zero_map.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert "verdict: STABLE" in svg

    run = json.loads((tmp_path / "out" / "run.json").read_text())
    assert run["profile_cache"]["hit"] is False
    assert run["regions"] == [1, 2, 3]
    assert sorted(run["files"] + ["run.json"]) == sorted(STUDY_FILES)
    assert "verdict: STABLE" in capsys.readouterr().out


def test_study_reruns_are_byte_identical(config, tmp_path, monkeypatch):
    patch_synthetic(monkeypatch, synthetic())
    code1, _ = run_study(config, tmp_path / "a")
    code2, _ = run_study(config, tmp_path / "b")
    assert code1 == code2 == 0
    for name in STUDY_FILES:
        if name == "run.json":
            continue  # timestamps live here and only here
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b, name


def test_study_unstable_exit_and_root(config, tmp_path, monkeypatch):
    patch_synthetic(monkeypatch, synthetic(rns=lambda lam: (lam - 0.3) * base(lam)))
    code, _ = run_study(config, tmp_path / "out")
    assert code == 1
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["verdict"] == "UNSTABLE"
    roots = [complex(re, im) for re, im in report["unstable_roots"]]
    assert min(abs(r - 0.3) for r in roots) < 1e-6


def test_study_region_subset(config, tmp_path, monkeypatch):
    patch_synthetic(monkeypatch, synthetic())
    code, names = run_study(config, tmp_path / "out", ["--regions", "3"])
    assert code == 0
    assert "region3.csv" in names
    assert "region1.csv" not in names and "region2.csv" not in names
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["region1"] is None and report["region2"] is None
    assert report["region3"]["ok"] is True


def test_study_formats_filter(tmp_path, monkeypatch):
    patch_synthetic(monkeypatch, synthetic())
    cfg = write_config(
        tmp_path / "c.json",
        output={"directory": str(tmp_path / "out"), "formats": ["json"]},
    )
    code, names = run_study(cfg, tmp_path / "out")
    assert code == 0
    assert names == ["report.json", "run.json"]


def test_env_overrides_and_flag_precedence(config, tmp_path, monkeypatch):
    patch_synthetic(monkeypatch, synthetic())
    monkeypatch.setenv("DETWAVE_REGIONS", "3")
    code, names = run_study(config, tmp_path / "a")
    assert code == 0 and "region1.csv" not in names
    # explicit flag wins over the environment
    code, names = run_study(config, tmp_path / "b", ["--regions", "1"])
    assert code == 0 and "region1.csv" in names and "region3.csv" not in names
    monkeypatch.setenv("DETWAVE_THREADS", "not-a-number")
    assert cli.main(["study", "--config", config, "--out", str(tmp_path / "c")]) == 2


def test_report_payload_replays(config, tmp_path, monkeypatch):
    from detwave.limits import ConvergenceReport, decide_verdicts

    patch_synthetic(monkeypatch, synthetic())
    run_study(config, tmp_path / "out")
    report = ConvergenceReport.from_payload(
        json.loads((tmp_path / "out" / "report.json").read_text())
    )
    per, verdict, roots = decide_verdicts(
        report.config, report.region1, report.region2, report.region3
    )
    assert verdict == report.verdict
    assert per == report.per_eps_verdict


# -- profile cache --


def test_profile_cache_hit_skips_builds(
    tmp_path, monkeypatch, majda, majda_znd, majda_shock, majda_rns
):
    calls = {"znd": 0, "shock": 0, "rns": 0}

    def fake_znd(model, ends, opts=None):
        calls["znd"] += 1
        return majda_znd

    def fake_shock(model, us, up, s, opts=None):
        calls["shock"] += 1
        return majda_shock

    def fake_rns(model, eps, znd, shock, opts=None):
        calls["rns"] += 1
        return majda_rns

    monkeypatch.setattr(cli, "compute_znd_profile", fake_znd)
    monkeypatch.setattr(cli, "compute_ns_shock_profile", fake_shock)
    monkeypatch.setattr(cli, "compute_viscous_detonation_profile", fake_rns)

    cfg = StudyConfig(epsilons=(0.05,), annulus_constant=2.0)
    cache = str(tmp_path / "profiles")
    store, hit, _ = cli.ensure_profiles(majda, cfg, ProfileOptions(), cache, "k1")
    assert not hit and calls == {"znd": 1, "shock": 1, "rns": 1}

    store2, hit2, _ = cli.ensure_profiles(majda, cfg, ProfileOptions(), cache, "k1")
    assert hit2 and calls == {"znd": 1, "shock": 1, "rns": 1}
    np.testing.assert_allclose(store2["znd"].grid, store["znd"].grid)
    np.testing.assert_allclose(store2[("rns", 0.05)].V, store[("rns", 0.05)].V)

    # changed wave data invalidates the cache
    _, hit3, _ = cli.ensure_profiles(majda, cfg, ProfileOptions(), cache, "k2")
    assert not hit3 and calls["znd"] == 2


# -- real-integration verbs on the scalar model --


def test_validate_passes(config):
    assert cli.main(["validate", "--config", config]) == 0


def test_profile_verb_summary_and_file(config, tmp_path, capsys):
    dest = tmp_path / "znd.json"
    code = cli.main(
        ["profile", "--config", config, "--kind", "znd", "--out", str(dest)]
    )
    assert code == 0
    out = capsys.readouterr().out
    drift = float(out.split("conserved_drift=")[1].split()[0])
    assert drift <= 1e-8
    assert dest.is_file()
    payload = json.loads(dest.read_text())
    assert payload["kind"] == "znd"


def test_evans_csv_contract(config, tmp_path):
    ct = tmp_path / "ct.json"
    json.dump(Contour.circle(0.0, 0.05, base_samples=16).to_payload(), ct.open("w"))
    argv = [
        "evans",
        "--config",
        config,
        "--kind",
        "znd",
        "--contour",
        str(ct),
        "--out",
    ]
    assert cli.main(argv + [str(tmp_path / "a.csv")]) == 0
    assert cli.main(argv + [str(tmp_path / "b.csv")]) == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes()

    lines = a.decode().splitlines()
    assert lines[0] == "re_lambda,im_lambda,re_D,im_D,log_scale"
    assert len(lines) == 17  # 16 contour nodes
    for row in lines[1:]:
        re, im, dre, dim, logs = map(float, row.split(","))
        assert abs(complex(re, im)) == pytest.approx(0.05, rel=1e-12)
        assert abs(complex(dre, dim)) == pytest.approx(1.0, rel=1e-9)
        assert np.isfinite(logs)


def test_winding_verb_counts_origin_zero(config, tmp_path, capsys):
    ct = tmp_path / "ct.json"
    json.dump(Contour.circle(0.0, 0.05, base_samples=16).to_payload(), ct.open("w"))
    code = cli.main(
        ["winding", "--config", config, "--kind", "znd", "--contour", str(ct)]
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["winding"] == 1
    assert doc["diagnostics"]["deviation"] < 0.1
