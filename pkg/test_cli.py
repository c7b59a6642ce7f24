#!/usr/bin/env python3
"""
Tests for experiment configuration, runs, sweeps, reports and the command-line entry point
"""
import json
import logging
import math
import sys
from pathlib import Path

import pandas as pd
import pytest

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from pinn_cli.config import (
    ExperimentConfig,
    Mode,
    Scale,
    SweepAxis,
    SweepSpec,
    describe_preset,
    load_config,
    preset,
)
from pinn_cli.main import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    EXIT_RUN_FAILURE,
    build_parser,
    experiment_from_args,
    main,
)
from pinn_cli.report import render_report
from pinn_cli.runner import SUMMARY_COLUMNS, aggregate, run_id, run_seeds, run_single, run_sweep
from pinn_pde.catalogue import get_problem
from shared.csv_io import read_rows, write_rows
from shared.errors import ConfigurationError
from shared.settings import reset_settings

logging.basicConfig(level=logging.WARNING)

TINY_CONVDIFF = dict(problem="convdiff", architecture="(x)-8-(u)", iterations=2)


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    monkeypatch.setenv("PINNLAB_OUTPUT_DIR", str(tmp_path / "default-results"))
    monkeypatch.setenv("PINNLAB_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("PINNLAB_WORKERS", "1")
    reset_settings()
    yield
    reset_settings()


# --- configuration ------------------------------------------------------------


def test_sweep_values_keep_endpoints():
    values = SweepSpec(axis=SweepAxis.SIGMA, low=0.1, high=10.0, count=3).values()
    assert values[0] == 0.1 and values[-1] == 10.0
    assert values[1] == pytest.approx(1.0)
    linear = SweepSpec(axis=SweepAxis.LAMBDA, low=1.0, high=5.0, count=5, log=False).values()
    assert linear == pytest.approx([1.0, 2.0, 3.0, 4.0, 5.0])
    assert SweepSpec(axis=SweepAxis.SIGMA, low=2.0, high=3.0, count=1).values() == [2.0]


def test_sweep_defaults_and_validation():
    assert SweepSpec.default(SweepAxis.LAMBDA).high == 1e6
    assert SweepSpec.default(SweepAxis.SIGMA).count == 25
    with pytest.raises(ConfigurationError):
        SweepSpec(axis=SweepAxis.SIGMA, low=2.0, high=1.0)
    with pytest.raises(ConfigurationError):
        SweepSpec(axis=SweepAxis.SIGMA, low=0.0, high=1.0)
    with pytest.raises(ConfigurationError):
        SweepSpec(axis=SweepAxis.LAMBDA, low=0.5, high=10.0)


def test_experiment_defaults_follow_the_problem():
    sf = ExperimentConfig(problem="convdiff")
    assert sf.resolved_sigma() == 0.5
    assert sf.resolved_lam() == 500.0
    assert sf.resolved_architecture() == "(x)-32-10-10-10-(u)"
    assert sf.resolved_iterations() == 20_000
    assert sf.with_values(scale=Scale.PAPER).resolved_iterations() == 50_000
    assert ExperimentConfig(problem="convdiff", variant="standard").resolved_sigma() is None
    assert ExperimentConfig(problem="convdiff", variant="siren").resolved_sigma() is None
    assert ExperimentConfig(problem="wave1d", sigma=1.5).resolved_sigma() == 1.5


def test_scale_flag_selects_iteration_preset():
    defaults = get_problem("convdiff").defaults
    args = build_parser().parse_args(["run", "--problem", "convdiff", "--scale", "paper"])
    config = experiment_from_args(args)
    assert config.scale == Scale.PAPER
    assert config.resolved_iterations() == defaults.iterations_full
    args = build_parser().parse_args(["run", "--problem", "convdiff", "--scale", "desk"])
    assert experiment_from_args(args).resolved_iterations() == defaults.iterations_desk
    assert ExperimentConfig(problem="convdiff", scale="paper").scale == Scale.PAPER
    assert describe_preset("convdiff")["iterations"]["paper"] == defaults.iterations_full


def test_experiment_aliases_and_updates():
    config = ExperimentConfig.model_validate({"problem": "wave1d", "lambda": 7.0})
    assert config.lam == 7.0
    changed = config.with_values(lam=9.0, sigma=2.0)
    assert (changed.lam, changed.sigma) == (9.0, 2.0)
    assert config.lam == 7.0


def test_experiment_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig(problem="burgers")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(problem="convdiff", variant="relu-net")
    with pytest.raises(ConfigurationError):
        ExperimentConfig(problem="convdiff", sigma=-1.0)
    with pytest.raises(ConfigurationError):
        ExperimentConfig(problem="convdiff", seeds=())
    with pytest.raises(ConfigurationError):
        ExperimentConfig(problem="convdiff", iterations=-5)


def test_train_config_from_experiment():
    config = ExperimentConfig(problem="wave1d", iterations=7, lr=1e-2, accumulation=2)
    problem = config.load_problem()
    settings = config.train_config(problem, seed=4)
    assert (settings.iterations, settings.lr, settings.accumulation, settings.seed) == (7, 1e-2, 2, 4)
    assert config.loss_spec(problem).lam == 180.0
    assert ExperimentConfig(problem="wave1d").train_config(problem, 0).lr == 5e-3


def test_presets():
    assert preset("kdv").problem == "kdv"
    with pytest.raises(ConfigurationError):
        preset("nope")
    wave = describe_preset("wave1d")
    assert wave["architecture"] == "(x,t)-64-50-50-50-(u)"
    assert wave["batch"] == {"pde": 450, "ic": 40, "bc": 10, "data": 0}
    assert wave["inverse"]
    cavity = describe_preset("cavity")
    assert cavity["metric"] == "velocity_average"
    assert not cavity["inverse"]


def test_load_config(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({"problem": "kdv", "variant": "ff", "lambda": 3.0}))
    config = load_config(path, {"sigma": 2.0})
    assert (config.problem, config.variant, config.lam, config.sigma) == ("kdv", "ff", 3.0, 2.0)

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigurationError):
        load_config(bad)
    bad.write_text(json.dumps({"problem": "kdv", "mode": "sideways"}))
    with pytest.raises(ConfigurationError):
        load_config(bad)
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.json")


def test_run_ids():
    assert run_id(ExperimentConfig(problem="convdiff"), 0) == "convdiff_sf_sigma0.5_lambda500_forward_seed0"
    standard = ExperimentConfig(problem="wave1d", variant="standard", mode=Mode.INVERSE_SPARSE)
    assert run_id(standard, 3) == "wave1d_standard_sigmadefault_lambda180_inverse-sparse_seed3"


def test_aggregate_best_over_seeds():
    rows = [
        {"problem": "p", "variant": "sf", "sigma": 1.0, "lambda": 2.0, "seed": 0, "mse": 0.3},
        {"problem": "p", "variant": "sf", "sigma": 1.0, "lambda": 2.0, "seed": 1, "mse": 0.1},
        {"problem": "p", "variant": "sf", "sigma": 1.0, "lambda": 2.0, "seed": 2, "mse": math.nan},
        {"problem": "p", "variant": "sf", "sigma": 2.0, "lambda": 2.0, "seed": 0, "mse": None},
    ]
    cells = aggregate(rows)
    assert len(cells) == 2
    assert (cells[0]["best_mse"], cells[0]["best_seed"], cells[0]["runs"], cells[0]["failed"]) == (
        0.1,
        1,
        3,
        1,
    )
    assert math.isnan(cells[1]["best_mse"]) and cells[1]["best_seed"] is None


def test_csv_rows_read_back_typed(tmp_path):
    path = write_rows(
        tmp_path / "t.csv", ["a", "b", "c", "d"], [{"a": 1, "b": 0.1, "c": True, "d": None}]
    )
    columns, rows = read_rows(path)
    assert columns == ["a", "b", "c", "d"]
    assert rows == [{"a": 1, "b": 0.1, "c": True, "d": None}]


def test_csv_rewrite_keeps_bytes_and_rejects_short_rows(tmp_path):
    rows = [
        {"id": "convdiff-sf-s0", "mse": 1 / 3, "best": float("nan"), "seed": None},
        {"id": "kdv-ff-s1", "mse": 2.5e-12, "best": 0.25, "seed": 7},
    ]
    first = write_rows(tmp_path / "a.csv", ["id", "mse", "best", "seed"], rows)
    assert first.read_text().splitlines()[1] == "convdiff-sf-s0,0.3333333333333333,nan,"
    columns, typed = read_rows(first)
    second = write_rows(tmp_path / "b.csv", columns, typed)
    assert second.read_bytes() == first.read_bytes()
    assert pd.read_csv(first)["mse"].tolist() == [1 / 3, 2.5e-12]

    (tmp_path / "short.csv").write_text("a,b\n1\n")
    with pytest.raises(ValueError):
        read_rows(tmp_path / "short.csv")
    (tmp_path / "empty.csv").write_text("")
    with pytest.raises(ValueError):
        read_rows(tmp_path / "empty.csv")


# --- runs ---------------------------------------------------------------------


def test_run_single_writes_artifacts(tmp_path):
    config = ExperimentConfig(**TINY_CONVDIFF)
    row = run_single(config, 0, tmp_path)
    assert set(SUMMARY_COLUMNS) <= set(row)
    assert row["status"] == "ok"
    assert row["iters"] == 2
    assert math.isfinite(row["mse"])
    run_dir = tmp_path / row["run_id"]
    _, history = read_rows(run_dir / "history.csv")
    assert [entry["iteration"] for entry in history] == [2]
    meta = json.loads((run_dir / "run.json").read_text())
    assert meta["config"]["lambda"] is None
    assert meta["summary"]["run_id"] == row["run_id"]
    assert meta["weight_displacement"] > 0
    columns, field_rows = read_rows(run_dir / "field.csv")
    assert columns == ["x", "u_model", "u_true"]
    assert len(field_rows) == 5000


def test_run_without_reference_reports_residuals(tmp_path):
    config = ExperimentConfig(
        problem="cavity", architecture="(x,y)-8-[(u),(v),(p)]", iterations=1, export_field=False
    )
    row = run_single(config, 0, tmp_path)
    assert row["status"] == "no_reference"
    assert math.isnan(row["mse"])
    meta = json.loads((tmp_path / row["run_id"] / "run.json").read_text())
    assert set(meta["residual_rms"]) == {"continuity", "momentum_x", "momentum_y"}
    assert not (tmp_path / row["run_id"] / "field.csv").exists()


def test_inverse_run_reports_physics_estimate(tmp_path):
    config = ExperimentConfig(
        problem="wave1d",
        architecture="(x,t)-8-(u)",
        iterations=2,
        mode=Mode.INVERSE_SPARSE,
        export_field=False,
    )
    row = run_single(config, 1, tmp_path)
    assert row["status"] == "ok"
    assert row["physics_estimate"].startswith("c=")
    assert row["loss_data"] > 0
    assert row["loss_ic"] == 0.0


def test_run_seeds_records_failures(tmp_path):
    config = ExperimentConfig(
        problem="helmholtz2d", mode=Mode.INVERSE_DENSE, iterations=1, seeds=(0, 1)
    )
    result = run_seeds(config, tmp_path)
    assert [row["status"] for row in result.rows] == ["failed: UnsupportedError"] * 2
    columns, rows = read_rows(tmp_path / "summary.csv")
    assert columns == SUMMARY_COLUMNS
    assert len(rows) == 2
    assert result.aggregate[0]["failed"] == 2


def test_sweep_and_report(tmp_path):
    sweep = SweepSpec(axis=SweepAxis.SIGMA, low=0.5, high=1.0, count=2)
    config = ExperimentConfig(**TINY_CONVDIFF, export_field=False, sweep=sweep)
    result = run_sweep(config, tmp_path)
    assert len(result.rows) == 2
    assert sorted(row["sigma"] for row in result.rows) == [0.5, 1.0]
    assert len(result.aggregate) == 2
    protocol = json.loads((tmp_path / "sweep.json").read_text())
    assert protocol == {"axis": "sigma", "values": [0.5, 1.0], "seeds": [0]}
    assert (tmp_path / "aggregate.csv").exists()

    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "summary.csv").write_text("")
    (tmp_path / "odd").mkdir()
    (tmp_path / "odd" / "summary.csv").write_text("a,b\n1,2\n")
    outputs = render_report(tmp_path)
    assert len(outputs["summary"].read_text().strip().splitlines()) == 3
    assert "sigma:." in outputs
    assert sum(1 for key in outputs if key.startswith("history:")) == 2
    assert all(path.exists() for path in outputs.values())


def test_sweep_needs_an_axis(tmp_path):
    with pytest.raises(ConfigurationError):
        run_sweep(ExperimentConfig(**TINY_CONVDIFF), tmp_path)
    with pytest.raises(ConfigurationError):
        render_report(tmp_path / "missing")


# --- command line ---------------------------------------------------------------


def test_main_run(tmp_path):
    argv = ["run", "--problem", "convdiff", "--arch", "(x)-8-(u)", "--iters", "1"]
    argv += ["--seeds", "0", "1", "--no-field", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    _, rows = read_rows(tmp_path / "summary.csv")
    assert [row["seed"] for row in rows] == [0, 1]


def test_main_exit_codes(tmp_path):
    assert main(["run", "--problem", "convdiff", "--sigma", "-1"]) == EXIT_CONFIG_ERROR
    assert main(["report", str(tmp_path / "missing")]) == EXIT_CONFIG_ERROR
    failing = ["run", "--problem", "helmholtz2d", "--mode", "inverse-dense", "--iters", "1"]
    assert main(failing + ["--out", str(tmp_path)]) == EXIT_RUN_FAILURE
    with pytest.raises(SystemExit):
        main(["run", "--problem", "burgers"])


def test_main_props_subset(tmp_path):
    argv = ["props", "--sections", "coverage", "--out", str(tmp_path), "--no-plots"]
    assert main(argv) == EXIT_OK
    assert (tmp_path / "coverage.csv").exists()
    assert not (tmp_path / "prop1.csv").exists()


def test_main_sweep_config_file(tmp_path):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps({**TINY_CONVDIFF, "export_field": False}))
    argv = ["sweep", "--config", str(path), "--axis", "lambda", "--low", "10", "--high", "100"]
    argv += ["--count", "2", "--out", str(tmp_path / "sweep")]
    assert main(argv) == EXIT_OK
    _, cells = read_rows(tmp_path / "sweep" / "aggregate.csv")
    assert sorted(cell["lambda"] for cell in cells) == [10.0, 100.0]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
