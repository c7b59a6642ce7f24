"""Single runs, multi-seed runs and parameter sweeps with per-run artifacts.

Every run writes into its own directory:

- ``history.csv``: training history rows
- ``run.json``: resolved configuration, status, weight displacement, physics
  estimates and failure diagnostics
- ``field.csv``: model (and, when known, true) fields on the test grid

Multi-run commands add ``summary.csv`` (one row per run) and, for sweeps,
``aggregate.csv`` (best over seeds per cell) and ``sweep.json``.
"""
import json
import logging
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pinn_cli.config import ExperimentConfig
from pinn_network.variants import build_network_config
from pinn_pde.catalogue import get_problem, make_inverse_variant
from pinn_train.metrics import evaluate_residual_rms, predict, reference_grid, sample_observations
from pinn_train.sampling import uniform_grid
from pinn_train.trainer import HistoryRow, TrainResult, train
from shared.csv_io import is_missing, write_rows
from shared.errors import ConfigurationError, DivergenceError, PinnLabError
from shared.rng import DATA_STREAM, spawn_streams
from shared.settings import get_settings

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = [
    "run_id",
    "problem",
    "variant",
    "sigma",
    "lambda",
    "seed",
    "scale",
    "iters",
    "mse",
    "loss_pde",
    "loss_ic",
    "loss_bc",
    "loss_data",
    "physics_estimate",
    "wall_seconds",
    "status",
]
HISTORY_COLUMNS = [
    "iteration",
    "lr",
    "loss_total",
    "loss_pde",
    "loss_ic",
    "loss_bc",
    "loss_data",
    "test_mse",
    "physics_scalar_estimates",
]
AGGREGATE_COLUMNS = [
    "problem",
    "variant",
    "sigma",
    "lambda",
    "best_mse",
    "best_seed",
    "runs",
    "failed",
]
# field exports above this size are skipped
FIELD_EXPORT_LIMIT = 150_000


@dataclass
class SweepResult:
    rows: List[Dict[str, Any]]
    aggregate: List[Dict[str, Any]] = field(default_factory=list)
    out_dir: Optional[Path] = None


def run_id(config: ExperimentConfig, seed: int) -> str:
    sigma = config.resolved_sigma()
    parts = [
        config.problem,
        config.variant,
        f"sigma{sigma:.6g}" if sigma is not None else "sigmadefault",
        f"lambda{config.resolved_lam():.6g}",
        config.mode.value,
        f"seed{seed}",
    ]
    return re.sub(r"[^A-Za-z0-9_.+-]", "_", "_".join(parts))


def _history_rows(history: Sequence[Any]) -> List[Dict[str, Any]]:
    rows = []
    for entry in history:
        row = entry if isinstance(entry, HistoryRow) else HistoryRow(**entry)
        data = {column: getattr(row, column) for column in HISTORY_COLUMNS}
        rows.append(data)
    return rows


def _export_field(config, params, problem, grid, path: Path) -> None:
    if grid is not None:
        points, truth = grid.points, grid.truth
    else:
        points, truth = uniform_grid(problem.domain, problem.defaults.grid), {}
    if len(points) > FIELD_EXPORT_LIMIT:
        logger.info(f"Skipping field export of {len(points)} points")
        return
    predicted = predict(config, params, points)
    columns = list(problem.domain.labels)
    columns += [f"{name}_model" for name in predicted] + [f"{name}_true" for name in truth]
    rows = []
    for i in range(len(points)):
        row = {label: points[i, j] for j, label in enumerate(problem.domain.labels)}
        row.update({f"{name}_model": values[i] for name, values in predicted.items()})
        row.update({f"{name}_true": values[i] for name, values in truth.items()})
        rows.append(row)
    write_rows(path, columns, rows)


def run_single(config: ExperimentConfig, seed: int, out_dir: Path) -> Dict[str, Any]:
    """Train one seed of one configuration; returns its summary row"""
    started = time.perf_counter()
    rid = run_id(config, seed)
    run_dir = Path(out_dir) / rid
    run_dir.mkdir(parents=True, exist_ok=True)
    sigma = config.resolved_sigma()
    lam = config.resolved_lam()
    iterations = config.resolved_iterations()
    logger.info(f"Run {rid}: {iterations} iterations")

    problem = get_problem(config.problem)
    if config.mode.scenario is not None:
        data_rng = spawn_streams(seed)[DATA_STREAM]
        observations = sample_observations(problem, config.mode.scenario, data_rng)
        problem = make_inverse_variant(problem, observations)

    network = build_network_config(
        config.variant, config.resolved_architecture(), sigma, config.activation, config.init
    )
    settings = get_settings()
    grid = reference_grid(problem, settings.cache_dir) if problem.has_truth else None

    row: Dict[str, Any] = {
        "run_id": rid,
        "problem": config.problem,
        "variant": config.variant,
        "sigma": sigma,
        "lambda": lam,
        "seed": seed,
        "scale": config.scale.value,
        "iters": iterations,
        "mse": math.nan,
        "loss_pde": math.nan,
        "loss_ic": math.nan,
        "loss_bc": math.nan,
        "loss_data": math.nan,
        "physics_estimate": "",
        "status": "ok",
    }
    meta: Dict[str, Any] = {
        "config": json.loads(config.model_dump_json(by_alias=True)),
        "seed": seed,
        "network": json.loads(network.model_dump_json()),
        "mode": problem.mode,
    }
    history: Sequence[Any] = []
    result: Optional[TrainResult] = None
    try:
        result = train(
            network, problem, config.loss_spec(problem), config.train_config(problem, seed), grid
        )
        history = result.history
    except DivergenceError as e:
        logger.error(f"Run {rid} diverged at iteration {e.iteration}")
        row["status"] = "diverged"
        meta["failure"] = e.to_dict()
        history = e.history

    if result is not None:
        params = result.params
        estimates = params.physics_values()
        if estimates:
            row["physics_estimate"] = ";".join(f"{k}={v!r}" for k, v in sorted(estimates.items()))
        if result.final is not None:
            row.update(
                loss_pde=result.final.pde,
                loss_ic=result.final.ic,
                loss_bc=result.final.bc,
                loss_data=result.final.data,
            )
        meta["weight_displacement"] = result.weight_displacement
        meta["physics_estimates"] = estimates
        meta["updates"] = result.updates
        meta["skipped_evaluations"] = result.skipped
        if grid is not None:
            row["mse"] = result.test_mse
        else:
            points = uniform_grid(problem.domain, problem.defaults.grid)
            meta["residual_rms"] = evaluate_residual_rms(network, params, problem, points)
            row["status"] = "no_reference"
        if config.export_field:
            _export_field(network, params, problem, grid, run_dir / "field.csv")

    write_rows(run_dir / "history.csv", HISTORY_COLUMNS, _history_rows(history))
    row["wall_seconds"] = time.perf_counter() - started
    meta["summary"] = row
    (run_dir / "run.json").write_text(json.dumps(meta, indent=2, default=str))
    logger.info(f"Run {rid} finished: status={row['status']} mse={row['mse']}")
    return row


def _failed_row(config: ExperimentConfig, seed: int, error: Exception) -> Dict[str, Any]:
    return {
        "run_id": run_id(config, seed),
        "problem": config.problem,
        "variant": config.variant,
        "sigma": config.resolved_sigma(),
        "lambda": config.resolved_lam(),
        "seed": seed,
        "scale": config.scale.value,
        "iters": config.resolved_iterations(),
        "mse": math.nan,
        "status": f"failed: {type(error).__name__}",
    }


def _run_guarded(args: Tuple[ExperimentConfig, int, Path]) -> Dict[str, Any]:
    config, seed, out_dir = args
    try:
        return run_single(config, seed, out_dir)
    except PinnLabError as e:
        logger.error(f"Run {run_id(config, seed)} failed: {e.message}")
        return _failed_row(config, seed, e)
    except Exception as e:
        logger.exception(f"Run {run_id(config, seed)} failed unexpectedly")
        return _failed_row(config, seed, e)


def execute(jobs: List[Tuple[ExperimentConfig, int, Path]], workers: int) -> List[Dict[str, Any]]:
    """Run jobs serially or in a process pool; order of rows follows ``jobs``"""
    if workers <= 1 or len(jobs) <= 1:
        return [_run_guarded(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_guarded, jobs))


def aggregate(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Best finite MSE over seeds for every (problem, variant, sigma, lambda) cell"""
    cells: Dict[Tuple, Dict[str, Any]] = {}
    for row in rows:
        key = (row["problem"], row["variant"], row["sigma"], row["lambda"])
        cell = cells.setdefault(
            key,
            {
                "problem": key[0],
                "variant": key[1],
                "sigma": key[2],
                "lambda": key[3],
                "best_mse": math.nan,
                "best_seed": None,
                "runs": 0,
                "failed": 0,
            },
        )
        cell["runs"] += 1
        mse = row.get("mse")
        if is_missing(mse):
            cell["failed"] += 1
            continue
        if is_missing(cell["best_mse"]) or mse < cell["best_mse"]:
            cell["best_mse"] = mse
            cell["best_seed"] = row["seed"]
    return list(cells.values())


def run_seeds(
    config: ExperimentConfig, out_dir: Optional[Path] = None, workers: Optional[int] = None
) -> SweepResult:
    """Every seed of one configuration, plus summary.csv"""
    out_dir = Path(out_dir or config.out or get_settings().output_dir)
    jobs = [(config, seed, out_dir) for seed in config.seeds]
    rows = execute(jobs, workers or get_settings().workers)
    write_rows(out_dir / "summary.csv", SUMMARY_COLUMNS, rows)
    return SweepResult(rows, aggregate(rows), out_dir)


def run_sweep(
    config: ExperimentConfig, out_dir: Optional[Path] = None, workers: Optional[int] = None
) -> SweepResult:
    """Each sweep value times each seed, then best-per-cell aggregation"""
    if config.sweep is None:
        raise ConfigurationError("Sweep requested without a sweep axis", field="sweep")
    out_dir = Path(out_dir or config.out or get_settings().output_dir)
    values = config.sweep.values()
    axis = config.sweep.axis.value
    jobs = []
    for value in values:
        cell = config.with_values(**{"sigma" if axis == "sigma" else "lam": value, "sweep": None})
        jobs.extend((cell, seed, out_dir) for seed in config.seeds)
    logger.info(f"Sweeping {axis} over {len(values)} values x {len(config.seeds)} seeds")
    rows = execute(jobs, workers or get_settings().workers)
    cells = aggregate(rows)
    write_rows(out_dir / "summary.csv", SUMMARY_COLUMNS, rows)
    write_rows(out_dir / "aggregate.csv", AGGREGATE_COLUMNS, cells)
    (out_dir / "sweep.json").write_text(
        json.dumps({"axis": axis, "values": values, "seeds": list(config.seeds)}, indent=2)
    )
    failed = sum(1 for row in rows if str(row["status"]).startswith(("failed", "diverged")))
    if failed:
        logger.warning(f"{failed} of {len(rows)} sweep runs failed")
    return SweepResult(rows, cells, out_dir)
