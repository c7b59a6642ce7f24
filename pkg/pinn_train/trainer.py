"""Training loop: fresh batch per evaluation, ADAM per accumulation window"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from pinn_network.model import NetworkConfig, ParameterSet, init_parameters
from pinn_pde.catalogue import BatchComposition, PdeProblem
from pinn_train.loss import LossReport, LossSpec, compute_loss
from pinn_train.metrics import ReferenceGrid, evaluate_mse
from pinn_train.optim import AdamState, PlateauSchedule, PlateauState, adam_step, plateau_schedule
from pinn_train.sampling import BatchSampler
from shared.errors import ConfigurationError, DivergenceError
from shared.rng import BATCH_STREAM, INIT_STREAM, spawn_streams

logger = logging.getLogger(__name__)

MAX_NON_FINITE = 3


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int
    lr: float = 1e-3
    schedule: PlateauSchedule = PlateauSchedule()
    accumulation: int = 1
    seed: int = 0
    interior: str = "pool"
    history_every: int = 10
    test_every: int = 1000
    log_every: int = 1000

    @model_validator(mode="after")
    def _check(self) -> "TrainConfig":
        if self.iterations < 0:
            raise ConfigurationError("Iterations must be >= 0", field="iterations", value=self.iterations)
        if not self.lr > 0:
            raise ConfigurationError("Learning rate must be > 0", field="lr", value=self.lr)
        if self.accumulation < 1:
            raise ConfigurationError(
                "Accumulation factor must be >= 1", field="accumulation", value=self.accumulation
            )
        if min(self.history_every, self.test_every, self.log_every) < 1:
            raise ConfigurationError("Reporting intervals must be >= 1")
        return self


@dataclass
class HistoryRow:
    iteration: int
    lr: float
    loss_total: float
    loss_pde: float
    loss_ic: float
    loss_bc: float
    loss_data: float
    test_mse: float = math.nan
    physics: Dict[str, float] = field(default_factory=dict)

    @property
    def physics_scalar_estimates(self) -> str:
        return ";".join(f"{name}={value!r}" for name, value in sorted(self.physics.items()))


@dataclass
class TrainResult:
    params: ParameterSet
    initial_params: ParameterSet
    history: List[HistoryRow]
    final: Optional[LossReport] = None
    test_mse: float = math.nan
    updates: int = 0
    skipped: int = 0

    @property
    def weight_displacement(self) -> float:
        return self.params.weight_norm(self.initial_params)


def _finite(report: LossReport) -> bool:
    return math.isfinite(report.total) and bool(np.all(np.isfinite(report.gradient)))


def train(
    config: NetworkConfig,
    problem: PdeProblem,
    loss_spec: LossSpec,
    train_config: TrainConfig,
    grid: Optional[ReferenceGrid] = None,
    params: Optional[ParameterSet] = None,
) -> TrainResult:
    """Optimise a freshly initialised network (or ``params``) on one problem.

    Deterministic given ``train_config.seed``: parameters come from the
    init stream and every batch from the batch stream.
    """
    streams = spawn_streams(train_config.seed)
    if params is None:
        params = init_parameters(config, streams[INIT_STREAM], problem.trainable_physics())
    initial = params.copy()
    result = TrainResult(params, initial, [])
    if train_config.iterations == 0:
        return result

    composition = BatchComposition(
        pde=loss_spec.n_pde, ic=loss_spec.n_ic, bc=loss_spec.n_bc, data=loss_spec.n_data
    )
    sampler = BatchSampler(problem, composition, streams[BATCH_STREAM], interior=train_config.interior)
    adam = AdamState.zeros(params.size)
    plateau = PlateauState(lr=train_config.lr)
    losses: List[float] = []
    accumulated = np.zeros(params.size)
    pending = 0
    failures = 0
    logger.info(
        f"Training '{problem.name}' ({problem.mode}) for {train_config.iterations} iterations, "
        f"{params.size} parameters, seed {train_config.seed}"
    )

    for iteration in range(1, train_config.iterations + 1):
        report = compute_loss(config, params, problem, loss_spec, sampler.next())
        if not _finite(report):
            failures += 1
            result.skipped += 1
            logger.warning(f"Non-finite loss at iteration {iteration} ({failures} in a row)")
            if failures >= MAX_NON_FINITE:
                logger.error(f"Training diverged at iteration {iteration}")
                raise DivergenceError(
                    f"Loss was non-finite for {failures} consecutive evaluations",
                    iteration=iteration,
                    history=[asdict(row) for row in result.history],
                )
            continue
        failures = 0
        result.final = report
        losses.append(report.total)

        accumulated += report.gradient
        pending += 1
        if pending == train_config.accumulation:
            adam_step(params, accumulated / pending, adam, plateau.lr)
            result.updates += 1
            accumulated[:] = 0.0
            pending = 0
        lr = plateau_schedule(losses, plateau, train_config.schedule)

        last = iteration == train_config.iterations
        if iteration % train_config.history_every == 0 or last:
            test_mse = math.nan
            if grid is not None and (iteration % train_config.test_every == 0 or last):
                test_mse = evaluate_mse(config, params, problem, grid)
            result.history.append(
                HistoryRow(
                    iteration,
                    lr,
                    report.total,
                    report.pde,
                    report.ic,
                    report.bc,
                    report.data,
                    test_mse,
                    params.physics_values(),
                )
            )
        if iteration % train_config.log_every == 0:
            physics = ", ".join(f"{k}={v:.6g}" for k, v in params.physics_values().items())
            logger.info(
                f"[{iteration}] loss={report.total:.4e} pde={report.pde:.3e} ic={report.ic:.3e} "
                f"bc={report.bc:.3e} data={report.data:.3e} lr={lr:.2e} {physics}".rstrip()
            )

    if grid is not None:
        tested = [row.test_mse for row in result.history if math.isfinite(row.test_mse)]
        result.test_mse = tested[-1] if tested else evaluate_mse(config, params, problem, grid)
    return result
