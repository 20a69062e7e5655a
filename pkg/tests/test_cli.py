import json

import numpy as np
import pytest

from qubitfield.cli import EXIT_INVALID, EXIT_NUMERIC, EXIT_OK, Scenario, main


def run(argv):
    return main([str(a) for a in argv])


def test_branches_json(tmp_path):
    assert run(["branches", "--kappa", 2.4, "--outdir", tmp_path]) == EXIT_OK
    data = json.loads((tmp_path / "branches.json").read_text())
    assert data["kappa"] == 2.4
    labels = {b["label"] for b in data["branches"]}
    assert labels == {"symmetric_plus", "symmetric_minus", "asym_plus", "asym_minus"}
    manifest = json.loads((tmp_path / "branches_manifest.json").read_text())
    assert manifest["parameters"]["kappa"] == 2.4
    assert "created" in manifest


def test_simulate_hartree_trajectory(tmp_path):
    assert run(["simulate", "--kappa", 1.4, "--T", 2, "--outdir", tmp_path]) == EXIT_OK
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0].startswith("t,q0,p0,q1,p1,l2")
    last = [float(v) for v in lines[-1].split(",")]
    assert last[0] == pytest.approx(2.0)
    assert last[5] == pytest.approx(1.0, abs=1e-12)  # norm along the run
    report = json.loads((tmp_path / "conservation.json").read_text())
    assert report["flagged"] is False


def test_simulate_coupled_with_plots(tmp_path):
    code = run(
        ["simulate", "--model", "coupled", "--kappa", 1.4, "--T", 1,
         "--n-modes", 32, "--outdir", tmp_path, "--plot"]
    )
    assert code == EXIT_OK
    for name in ("trajectory.csv", "phase_portrait.png", "energy_split.png"):
        assert (tmp_path / name).exists()
    manifest = json.loads((tmp_path / "simulate_manifest.json").read_text())
    assert manifest["parameters"]["kappa_computed"] == pytest.approx(1.4, rel=1e-8)
    assert manifest["parameters"]["grid_nodes"] == 32


def test_count_matches_library(tmp_path):
    code = run(
        ["count", "--model", "coupled", "--branch", "symmetric_minus",
         "--kappa", 1.58, "--outdir", tmp_path]
    )
    assert code == EXIT_OK
    verdict = json.loads((tmp_path / "verdict.json").read_text())
    assert verdict["verdict"] == "spectrally_unstable"
    assert verdict["counts"]["N_complex"] == 2


def test_spectrum_json(tmp_path):
    assert run(["spectrum", "--kappa", 2.4, "--outdir", tmp_path]) == EXIT_OK
    report = json.loads((tmp_path / "spectrum.json").read_text())
    rates = sorted(e["re"] for e in report["eigenvalues"])
    assert rates[0] == pytest.approx(-2 * np.sqrt(0.2), abs=1e-12)
    assert rates[-1] == pytest.approx(2 * np.sqrt(0.2), abs=1e-12)


def test_linearize_writes_snapshots(tmp_path):
    assert run(["linearize", "--kappa", 1.4, "--T", 1, "--delta", 1e-3,
                "--outdir", tmp_path]) == EXIT_OK
    lines = (tmp_path / "linearized.csv").read_text().splitlines()
    assert lines[0] == "t,y0,y1,y2,y3"
    first = [float(v) for v in lines[1].split(",")]
    assert first[1] == 1e-3


def test_growth_linear_ill(tmp_path):
    code = run(["growth", "--experiment", "hartree_linear_ill", "--kappa", 1.4,
                "--T", 20, "--outdir", tmp_path])
    assert code == EXIT_OK
    fit = json.loads((tmp_path / "growth.json").read_text())
    assert fit["kind"] == "linear"
    assert fit["rate"] == pytest.approx(fit["predicted"], rel=1e-2)


def test_dispersion_root_path(tmp_path):
    code = run(["dispersion", "--kappa", 0.5604, "--tau", -1,
                "--c-path", "1,2,5", "--outdir", tmp_path])
    assert code == EXIT_OK
    lines = (tmp_path / "root_path.csv").read_text().splitlines()
    assert lines[0] == "c,A,B,residual,iterations,stiff"
    assert len(lines) == 4
    assert all(float(line.split(",")[3]) <= 1e-10 for line in lines[1:])


def test_plemelj_error_column_shrinks(tmp_path):
    code = run(["plemelj", "--kappa", 1.0, "--mu", "1.0",
                "--b-values", "1e-1,1e-2,1e-3", "--outdir", tmp_path])
    assert code == EXIT_OK
    rows = [line.split(",") for line in
            (tmp_path / "plemelj.csv").read_text().splitlines()[1:]]
    errs = [float(r[6]) for r in rows]
    assert errs[0] > errs[1] > errs[2]


def test_lost_dispersion_root_is_numeric_error(tmp_path, capsys):
    # the quadrature cannot resolve the resonance at an absurd wave speed
    code = run(["dispersion", "--kappa", 0.5604, "--tau", -1,
                "--c-path", "1,400", "--outdir", tmp_path])
    assert code == EXIT_NUMERIC
    assert json.loads(capsys.readouterr().err)["error"] == "numerical"


def test_too_short_growth_window_is_numeric_error(tmp_path):
    code = run(["growth", "--experiment", "hartree", "--kappa", 2.4,
                "--T", 1.01, "--outdir", tmp_path])
    assert code == EXIT_NUMERIC
    fit = json.loads((tmp_path / "growth.json").read_text())
    assert fit["conclusive"] is False


# -- validation and failure isolation ---------------------------------------


def test_threshold_kappa_rejected(tmp_path, capsys):
    assert run(["count", "--kappa", 2, "--outdir", tmp_path]) == EXIT_INVALID
    reason = json.loads(capsys.readouterr().err)
    assert reason["error"] == "validation"


def test_asym_branch_needs_supercritical_kappa(tmp_path):
    code = run(["branches", "--branch", "asym_plus", "--kappa", 1.4,
                "--outdir", tmp_path])
    assert code == EXIT_INVALID


def test_unknown_config_key_rejected(tmp_path, capsys):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"kapa": 1.4}))
    assert run(["branches", "--config", cfg, "--outdir", tmp_path]) == EXIT_INVALID
    assert "kapa" in json.loads(capsys.readouterr().err)["reason"]


def test_growth_stable_regime_is_validation_error(tmp_path):
    # tau=+1, kappa<2 has no unstable direction to seed the escape run
    code = run(["growth", "--experiment", "hartree", "--kappa", 1.4,
                "--T", 5, "--outdir", tmp_path])
    assert code == EXIT_INVALID


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "scenario.json"
    cfg.write_text(json.dumps({"kappa": 1.4, "T": 2.0, "dt": 1e-2}))
    out = tmp_path / "run"
    assert run(["simulate", "--config", cfg, "--T", 1, "--outdir", out]) == EXIT_OK
    manifest = json.loads((out / "simulate_manifest.json").read_text())
    assert manifest["parameters"]["T"] == 1.0  # flag wins
    assert manifest["parameters"]["dt"] == 1e-2  # config wins over default


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("QUBITFIELD_OUTDIR", str(tmp_path / "from_env"))
    monkeypatch.setenv("QUBITFIELD_WORKERS", "2")
    assert run(["sweep", "--kappa-grid", "1.4"]) == EXIT_OK
    manifest = json.loads((tmp_path / "from_env" / "sweep_manifest.json").read_text())
    assert manifest["parameters"]["workers"] == 2


def test_sweep_isolates_threshold_cell(tmp_path):
    code = run(["sweep", "--kappa-grid", "1.4,2,2.4", "--outdir", tmp_path])
    assert code == EXIT_OK
    lines = (tmp_path / "sweep.csv").read_text().splitlines()[1:]
    bad = [l for l in lines if ",error," in l]
    good = [l for l in lines if ",error," not in l]
    assert bad and good
    assert all(",2," in l for l in bad)  # only the threshold kappa fails
    manifest = json.loads((tmp_path / "sweep_manifest.json").read_text())
    assert manifest["parameters"]["n_failed"] == len(bad)


def test_sweep_empty_grid_succeeds(tmp_path):
    assert run(["sweep", "--kappa-grid", "", "--outdir", tmp_path]) == EXIT_OK
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 1  # header only


def test_sweep_matches_stability_classification(tmp_path):
    assert run(["sweep", "--kappa-grid", "0.5,1.4,2.4", "--outdir", tmp_path]) == EXIT_OK
    rows = {}
    for line in (tmp_path / "sweep.csv").read_text().splitlines()[1:]:
        parts = line.split(",")
        rows[(parts[0], parts[1], float(parts[2]))] = parts[5]
    # emitter+field model: symmetric state stable iff tau=+1 and kappa<2;
    # the asymmetric pair is stable above the threshold
    for k in (0.5, 1.4):
        assert rows[("coupled", "symmetric_plus", k)] == "spectrally_stable"
        assert rows[("coupled", "symmetric_minus", k)] == "spectrally_unstable"
    assert rows[("coupled", "symmetric_plus", 2.4)] == "spectrally_unstable"
    assert rows[("coupled", "asym_plus", 2.4)] == "spectrally_stable"


def test_determinism_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["simulate", "--kappa", 1.4, "--T", 1, "--outdir", out]) == EXIT_OK
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    assert (a / "conservation.json").read_bytes() == (b / "conservation.json").read_bytes()
    # manifests agree except for the timestamp and the target directory
    ma = json.loads((a / "simulate_manifest.json").read_text())["parameters"]
    mb = json.loads((b / "simulate_manifest.json").read_text())["parameters"]
    ma.pop("outdir"), mb.pop("outdir")
    assert ma == mb


def test_scenario_defaults_recorded(tmp_path):
    assert run(["branches", "--outdir", tmp_path]) == EXIT_OK
    params = json.loads((tmp_path / "branches_manifest.json").read_text())["parameters"]
    defaults = Scenario()
    for key in ("kappa", "tau", "c", "dt", "shape_kind", "n_modes"):
        assert params[key] == getattr(defaults, key)
