import hashlib
import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from sulfsim.cli import main
from sulfsim.io import read_csv


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def cfg_file(tmp_path):
    cfg = {
        "physical": {"lambda": 1.0, "c0": 1.0, "phi0": 0.3, "phi1": 0.7, "phi_bar": 2.0},
        "kernel": {"bandwidth": 0.3},
        "grid": {"lower": -10.0, "upper": 10.0, "spacing": 0.05},
        "horizon": 0.05,
        "step": 1e-3,
        "particles": 300,
        "initial": {"family": "gaussian-bump", "center": 0.0, "width": 1.0},
    }
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def _csv_digests(root: Path) -> dict:
    return {
        p.relative_to(root): hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(root.rglob("*.csv"))
    }


def test_simulate_repeat_is_byte_identical(runner, cfg_file, tmp_path):
    for name, workers in (("r1", "1"), ("r2", "4")):
        res = runner.invoke(
            main,
            ["simulate", "--config", str(cfg_file), "--mode", "fk", "--seed", "7",
             "--out", str(tmp_path / name), "--workers", workers],
        )
        assert res.exit_code == 0, res.output
    assert _csv_digests(tmp_path / "r1") == _csv_digests(tmp_path / "r2")


def test_simulate_missing_seed_exits_2(runner, cfg_file, tmp_path):
    res = runner.invoke(
        main, ["simulate", "--config", str(cfg_file), "--out", str(tmp_path / "x")]
    )
    assert res.exit_code == 2
    assert "--seed" in res.output


def test_simulate_invalid_config_exits_2(runner, cfg_file, tmp_path):
    res = runner.invoke(
        main,
        ["simulate", "--config", str(cfg_file), "--seed", "1", "--phi1", "-0.4",
         "--out", str(tmp_path / "x")],
    )
    assert res.exit_code == 2
    assert "porosity" in res.output


def test_simulate_numerical_abort_exits_3(runner, cfg_file, tmp_path, monkeypatch):
    from sulfsim.particles import NonFiniteStateError
    import sulfsim.cli as cli_mod

    def boom(*args, **kwargs):
        raise NonFiniteStateError(12, np.array([3]))

    monkeypatch.setattr(cli_mod, "run_simulation", boom)
    res = runner.invoke(
        main,
        ["simulate", "--config", str(cfg_file), "--seed", "1", "--out", str(tmp_path / "x")],
    )
    assert res.exit_code == 3
    assert "step 12" in res.output


def test_kill_mode_lambda_zero_alive_fraction_one(runner, cfg_file, tmp_path):
    out = tmp_path / "kz"
    res = runner.invoke(
        main,
        ["simulate", "--config", str(cfg_file), "--mode", "kill", "--seed", "3",
         "--lambda", "0.0", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    cols = read_csv(out / "run.csv")
    assert cols["alive_fraction_or_mean_weight"][-1] == 1.0


def test_simulate_manifest_lists_outputs(runner, cfg_file, tmp_path):
    out = tmp_path / "m"
    res = runner.invoke(
        main,
        ["simulate", "--config", str(cfg_file), "--seed", "5", "--out", str(out),
         "--archive"],
    )
    assert res.exit_code == 0, res.output
    manifest = json.loads((out / "manifest.json").read_text())
    names = {o["path"] for o in manifest["outputs"]}
    assert "run.csv" in names and "archive.bin" in names
    from sulfsim.io import sha256_file

    for entry in manifest["outputs"]:
        assert sha256_file(out / entry["path"]) == entry["sha256"]


def test_simulate_fields_stride_exports(runner, cfg_file, tmp_path):
    out = tmp_path / "flds"
    res = runner.invoke(
        main,
        ["simulate", "--config", str(cfg_file), "--seed", "5", "--out", str(out),
         "--fields-stride", "25"],
    )
    assert res.exit_code == 0, res.output
    files = sorted((out / "fields").glob("af_*.csv"))
    assert files
    cols = read_csv(files[-1])
    assert set(cols) == {"x", "A", "G"}
    assert np.all(cols["A"] >= 0.0)


def test_pde_command_and_mass(runner, cfg_file, tmp_path):
    out = tmp_path / "pde"
    res = runner.invoke(main, ["pde", "--config", str(cfg_file), "--out", str(out)])
    assert res.exit_code == 0, res.output
    cols = read_csv(out / "run.csv")
    assert abs(cols["mass"][0] - 1.0) < 1e-6
    ledger = read_csv(out / "ledger.csv")
    assert np.max(np.abs(ledger["residual"])) < 1e-10


def test_compare_run_against_itself_is_zero(runner, cfg_file, tmp_path):
    out = tmp_path / "one"
    runner.invoke(
        main,
        ["simulate", "--config", str(cfg_file), "--seed", "7", "--out", str(out)],
    )
    cmp_out = tmp_path / "cmp"
    res = runner.invoke(
        main,
        ["compare", "--a", str(out), "--b", str(out), "--out", str(cmp_out)],
    )
    assert res.exit_code == 0, res.output
    cols = read_csv(cmp_out / "report.csv")
    assert np.all(cols["l1"] == 0.0) and np.all(cols["sup"] == 0.0)


def test_compare_grid_mismatch_exits_4(runner, cfg_file, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    runner.invoke(main, ["simulate", "--config", str(cfg_file), "--seed", "1", "--out", str(a)])
    runner.invoke(
        main,
        ["simulate", "--config", str(cfg_file), "--seed", "1", "--spacing", "0.1",
         "--out", str(b)],
    )
    res = runner.invoke(main, ["compare", "--a", str(a), "--b", str(b), "--out", str(tmp_path / "c")])
    assert res.exit_code == 4


def test_compare_regenerates_from_config(runner, cfg_file, tmp_path):
    out = tmp_path / "regen"
    res = runner.invoke(
        main,
        ["compare", "--config", str(cfg_file), "--seed", "11", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    for name in ("report_fk_vs_kill.csv", "report_fk_vs_pde.csv", "report_kill_vs_pde.csv"):
        assert (out / name).is_file()


def test_convergence_table_shape(runner, cfg_file, tmp_path):
    out = tmp_path / "conv"
    res = runner.invoke(
        main,
        ["convergence", "--config", str(cfg_file), "--n", "50,100,200", "--seeds", "2",
         "--seed", "3", "--out", str(out)],
    )
    assert res.exit_code == 0, res.output
    cols = read_csv(out / "convergence.csv")
    assert list(cols["n"]) == [50.0, 100.0, 200.0]
    assert len(cols["fk_stderr"]) == 3


def test_fixedpoint_lambda_zero_converges_iteration_one(runner, cfg_file, tmp_path):
    run_dir = tmp_path / "arch"
    res = runner.invoke(
        main,
        ["simulate", "--config", str(cfg_file), "--seed", "2", "--lambda", "0.0",
         "--out", str(run_dir), "--archive"],
    )
    assert res.exit_code == 0, res.output
    fp_dir = tmp_path / "fp"
    res = runner.invoke(
        main,
        ["fixedpoint", "--archive", str(run_dir / "archive.bin"), "--config", str(cfg_file),
         "--lambda", "0.0", "--out", str(fp_dir)],
    )
    assert res.exit_code == 0, res.output
    assert "after iteration 1" in res.output
    trace = read_csv(fp_dir / "trace.csv")
    assert trace["sup_distance"][-1] == 0.0


def test_emit_plots_and_render(runner, cfg_file, tmp_path):
    out = tmp_path / "plotrun"
    runner.invoke(main, ["simulate", "--config", str(cfg_file), "--seed", "4", "--out", str(out)])
    res = runner.invoke(main, ["emit-plots", "--run", str(out)])
    assert res.exit_code == 0, res.output
    assert (out / "plot_density.py").is_file()
    assert (out / "plot_mass.py").is_file()
    assert (out / "density_snapshots.png").is_file()
    assert (out / "mass_decay.png").is_file()
    script = (out / "plot_density.py").read_text()
    assert "snapshots/u_" in script and "read_csv" in script


def test_emit_plots_empty_dir_exits_4(runner, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    res = runner.invoke(main, ["emit-plots", "--run", str(empty)])
    assert res.exit_code == 4


def test_emit_plots_convergence_script(runner, cfg_file, tmp_path):
    out = tmp_path / "convplot"
    runner.invoke(
        main,
        ["convergence", "--config", str(cfg_file), "--n", "50,100", "--seeds", "2",
         "--seed", "3", "--out", str(out)],
    )
    res = runner.invoke(main, ["emit-plots", "--run", str(out), "--no-render"])
    assert res.exit_code == 0, res.output
    script = (out / "plot_convergence.py").read_text()
    assert "N^(-1/2)" in script
