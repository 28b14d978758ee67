import json
import math

import numpy as np
import pytest

from mocpde import cli
from mocpde.errors import HypothesisError, MocPdeError
from mocpde.harness import (ExperimentConfig, check_gradient_bounds, gradient_bound, initial_field,
                            run_comparison, run_sharpness, run_trajectory)
from mocpde.onedim import erf_gradient_bound


def _cfg(**kw):
    base = dict(pair="heat", grid={"extent": [2 * math.pi], "nodes": [128], "boundary": "periodic"},
                initial={"kind": "square-wave", "M": 2.0}, snapshots=[0.05, 0.1], target={"kind": "erf"})
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_config_validation():
    with pytest.raises(MocPdeError):
        ExperimentConfig.from_dict({"pairs": "heat"})
    with pytest.raises(MocPdeError):
        ExperimentConfig(snapshots=[])
    with pytest.raises(MocPdeError):
        ExperimentConfig(snapshots=[0.5], t_end=0.2)
    with pytest.raises(MocPdeError):
        ExperimentConfig(initial={"kind": "gaussian"})
    with pytest.raises(MocPdeError):
        ExperimentConfig(target={"kind": "oracle"})
    cfg = ExperimentConfig(snapshots=[0.3, 0.1])
    assert cfg.snapshots == [0.1, 0.3] and cfg.t_end == 0.3


def test_config_json_round_trip(tmp_path):
    cfg = _cfg(bounds=[{"kind": "erf-gradient"}])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg


@pytest.mark.parametrize("kind", ["sin-mode", "square-wave", "random-bounded"])
@pytest.mark.parametrize("M", [1.0, 3.0])
def test_generators_have_oscillation_M(kind, M):
    cfg = _cfg(initial={"kind": kind, "M": M},
               grid={"extent": [2 * math.pi, 2 * math.pi], "nodes": [32, 32], "boundary": "periodic"})
    u0 = initial_field(cfg)
    assert u0.oscillation() == pytest.approx(M, rel=1e-12 if kind != "sin-mode" else 1e-2)
    assert u0.values.max() <= M / 2 + 1e-12 and u0.values.min() >= -M / 2 - 1e-12


def test_csv_generator(tmp_path):
    x = np.linspace(0, 1, 10, endpoint=False)
    path = tmp_path / "u0.csv"
    np.savetxt(path, np.column_stack([x, np.cos(x)]), delimiter=",", header="x1,u", comments="")
    cfg = _cfg(initial={"kind": "csv", "path": str(path), "M": 1.0},
               grid={"extent": [1.0], "nodes": [10], "boundary": "periodic"})
    np.testing.assert_allclose(initial_field(cfg).values, np.cos(x))


def test_heat_comparison_passes():
    report, traj = run_comparison(_cfg())
    assert report.ok
    assert len(report.comparisons) == 2
    assert traj.times == [0.05, 0.1]
    assert report.worst_excess() <= 0


def test_hypothesis_failure_is_an_error():
    # a target of height 1 cannot dominate data of oscillation 2
    with pytest.raises(HypothesisError):
        run_comparison(_cfg(target={"kind": "erf", "M": 1.0}))


def test_wrong_target_is_detected():
    # the erf profile of a faster diffusion (lam = 4) is too flat near s = 0, so measured omega exceeds it
    report, _ = run_comparison(_cfg(pair="heat", target={"kind": "erf", "lam": 4.0}, rel_tol=0.0, abs_tol=0.0))
    assert not report.ok


def test_initial_target_for_proper_operator():
    cfg = _cfg(pair="proper", overrides={"c": 0.0}, initial={"kind": "random-bounded", "M": 2.0, "blocks": 6},
               grid={"extent": [2 * math.pi, 2 * math.pi], "nodes": [24, 24], "boundary": "periodic"},
               target={"kind": "initial"}, rel_tol=0.0, abs_tol=1e-12)
    report, _ = run_comparison(cfg)
    assert report.ok


def test_solve1d_target():
    cfg = _cfg(target={"kind": "solve1d", "f": "heat", "phi0": "const:2", "S": 12.0, "nodes": 401})
    report, _ = run_comparison(cfg)
    assert report.ok and report.meta["target"] == "solve1d"


def test_gradient_bounds():
    cfg = _cfg(grid={"extent": [2 * math.pi], "nodes": [512], "boundary": "periodic"}, snapshots=[0.02, 0.05])
    traj = run_trajectory(cfg)
    out = check_gradient_bounds(traj, "erf-gradient", {"M": 2.0})
    assert out["ok"]
    assert all(r["ratio"] > 0.9 for r in out["rows"])
    assert gradient_bound("erf-gradient", 0.25, {"M": 2.0}) == erf_gradient_bound(2.0, 0.25)
    assert gradient_bound("mcf-exp", 1.0, {"M": 1.0}) == pytest.approx(math.exp(2.0))
    with pytest.raises(MocPdeError):
        gradient_bound("nope", 1.0, {})


def test_sharpness_ratio_near_one():
    cfg = _cfg(grid={"extent": [2 * math.pi], "nodes": [512], "boundary": "periodic"}, snapshots=[0.01, 0.02])
    out, _ = run_sharpness(cfg)
    assert 0.95 <= out["min_ratio"] and out["max_ratio"] <= 1.001
    with pytest.raises(MocPdeError):
        run_sharpness(_cfg(initial={"kind": "sin-mode", "M": 2.0}))


def test_reports_are_deterministic():
    cfg = _cfg(initial={"kind": "random-bounded", "M": 2.0}, seed=3)
    a = json.dumps(run_comparison(cfg)[0].to_dict(), sort_keys=True)
    b = json.dumps(run_comparison(cfg)[0].to_dict(), sort_keys=True)
    assert a == b


# ---------------------------------------------------------------------------
# CLI


def _write_cfg(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    return str(path)


def test_cli_catalog(capsys):
    assert cli.main(["catalog"]) == 0
    names = [p["name"] for p in json.loads(capsys.readouterr().out)["pairs"]]
    assert "heat" in names and "pucci-plus" in names


def test_cli_check_sc(tmp_path, capsys):
    assert cli.main(["check-sc", "--pair", "heat", "--samples", "200", "--dim", "2", "--seed", "1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["violations"] == 0 and rep["samples"] == 200
    out = tmp_path / "sc.json"
    assert cli.main(["check-sc", "--pair", "pucci-plus", "--params", '{"lambda": 0.5, "Lambda": 3}',
                     "--samples", "100", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["ok"] is True


def test_cli_check_sc_all(capsys):
    assert cli.main(["check-sc", "--pair", "all", "--samples", "80"]) == 0
    assert len(json.loads(capsys.readouterr().out)) == 7


def test_cli_errors_exit_2(capsys):
    assert cli.main(["check-sc", "--pair", "nope", "--samples", "10"]) == 2
    assert "error" in capsys.readouterr().err
    assert cli.main(["verify"]) == 2


def test_cli_solve_and_moc(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, _cfg(grid={"extent": [2 * math.pi], "nodes": [32], "boundary": "periodic"}))
    run = tmp_path / "run"
    assert cli.main(["solve", "--config", cfg, "--out", str(run)]) == 0
    capsys.readouterr()
    assert (run / "t_0.05.csv").exists() and (run / "meta.json").exists()
    assert cli.main(["moc", "--in", str(run), "--bins", "8"]) == 0
    lines = (run / "moc" / "moc_t_0.1.csv").read_text().splitlines()
    assert lines[0] == "s,omega" and len(lines) == 9
    dest = tmp_path / "one.csv"
    assert cli.main(["moc", "--in", str(run), "--time", "0.05", "--out", str(dest)]) == 0
    assert dest.read_text().startswith("s,omega")


def test_cli_verify_and_sharpness(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, _cfg(grid={"extent": [2 * math.pi], "nodes": [256], "boundary": "periodic"},
                                    snapshots=[0.02]))
    out = tmp_path / "verify"
    assert cli.main(["verify", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "verify.json").read_text())["ok"] is True
    assert (out / "moc_t_0.02.csv").exists()
    assert cli.main(["sharpness", "--config", cfg]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["ok"] and rep["window"] == [0.95, 1.001]
    bad = _write_cfg(tmp_path, _cfg(target={"kind": "erf", "lam": 4.0}, rel_tol=0.0, abs_tol=0.0))
    assert cli.main(["verify", "--config", bad]) == 1


def test_cli_solve1d_and_profile(tmp_path, capsys):
    out = tmp_path / "one"
    assert cli.main(["solve1d", "--f", "heat", "--phi0", "const:2", "--S", "8", "--nodes", "161",
                     "--t-end", "0.25", "--times", "0.1", "--out", str(out)]) == 0
    data = np.loadtxt(out / "t_0.25.csv", delimiter=",", skiprows=1)
    assert data.shape == (161, 2)
    meta = json.loads((out / "meta.json").read_text())
    assert meta["left_bc"] == "odd_reflection" and meta["times"] == [0.1, 0.25]
    assert cli.main(["solve1d", "--f", "heat", "--phi0", "gauss"]) == 2
    capsys.readouterr()
    assert cli.main(["profile", "--kind", "erf", "--M", "2", "--t", "0.25", "--s-max", "1", "--points", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "s,phi"
    assert float(lines[2].split(",")[1]) == pytest.approx(0.8427007929497149)
    prof = tmp_path / "p.csv"
    assert cli.main(["profile", "--kind", "plaplace", "--p", "3", "--out", str(prof)]) == 0
    assert cli.main(["profile", "--kind", "tkappa", "--kappa", "-1", "--out", str(prof)]) == 0
    assert prof.read_text().startswith("s,phi")
