"""Experiment configuration, presets and sweep specification"""
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from pinn_network.variants import VARIANTS
from pinn_pde.catalogue import PROBLEMS, PdeProblem, get_problem
from pinn_train.loss import LossSpec
from pinn_train.optim import PlateauSchedule
from pinn_train.trainer import TrainConfig
from shared.errors import ConfigurationError

logger = logging.getLogger(__name__)

# variants whose default input layer is a Normal(sigma) feature map
BANDWIDTH_VARIANTS = ("sf", "ff", "rf")


class Scale(str, Enum):
    DESK = "desk"
    PAPER = "paper"


class Mode(str, Enum):
    FORWARD = "forward"
    INVERSE_DENSE = "inverse-dense"
    INVERSE_SPARSE = "inverse-sparse"

    @property
    def scenario(self) -> Optional[str]:
        return {Mode.INVERSE_DENSE: "dense", Mode.INVERSE_SPARSE: "sparse"}.get(self)


class SweepAxis(str, Enum):
    SIGMA = "sigma"
    LAMBDA = "lambda"


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    axis: SweepAxis
    low: float
    high: float
    count: int = 25
    log: bool = True

    @model_validator(mode="after")
    def _check(self) -> "SweepSpec":
        if self.count < 1:
            raise ConfigurationError("Sweep count must be >= 1", field="count", value=self.count)
        if self.low > self.high:
            raise ConfigurationError("Sweep range is reversed", field="range", value=(self.low, self.high))
        if self.axis == SweepAxis.SIGMA and not self.low > 0:
            raise ConfigurationError("sigma range must lie in (0, inf)", field="range", value=self.low)
        if self.axis == SweepAxis.LAMBDA and self.low < 1:
            raise ConfigurationError("lambda range must lie in [1, inf)", field="range", value=self.low)
        return self

    @classmethod
    def default(cls, axis: SweepAxis, count: int = 25) -> "SweepSpec":
        low, high = (0.1, 10.0) if axis == SweepAxis.SIGMA else (1.0, 1e6)
        return cls(axis=axis, low=low, high=high, count=count)

    def values(self) -> List[float]:
        if self.count == 1:
            return [float(self.low)]
        if self.log:
            grid = np.logspace(np.log10(self.low), np.log10(self.high), self.count)
        else:
            grid = np.linspace(self.low, self.high, self.count)
        # endpoints exactly as configured
        grid[0], grid[-1] = self.low, self.high
        return [float(v) for v in grid]


class ExperimentConfig(BaseModel):
    """One experiment: a problem, a network variant and how to train it.

    Unset fields fall back to the problem's published defaults.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    problem: str
    variant: str = "sf"
    architecture: Optional[str] = None
    sigma: Optional[float] = None
    lam: Optional[float] = Field(default=None, alias="lambda")
    seeds: Tuple[int, ...] = (0,)
    iterations: Optional[int] = None
    scale: Scale = Scale.DESK
    mode: Mode = Mode.FORWARD
    activation: Optional[str] = None
    init: Optional[str] = None
    lr: Optional[float] = None
    accumulation: int = 1
    patience: int = 1000
    decay: float = 0.5
    history_every: int = 10
    test_every: int = 1000
    log_every: int = 1000
    export_field: bool = True
    sweep: Optional[SweepSpec] = None
    out: Optional[Path] = None

    @model_validator(mode="after")
    def _check(self) -> "ExperimentConfig":
        if self.problem not in PROBLEMS:
            raise ConfigurationError(
                f"Unknown problem '{self.problem}'. Available: {sorted(PROBLEMS)}",
                field="problem",
                value=self.problem,
            )
        if self.variant not in VARIANTS:
            raise ConfigurationError(
                f"Unknown variant '{self.variant}'. Available: {sorted(VARIANTS)}",
                field="variant",
                value=self.variant,
            )
        if not self.seeds:
            raise ConfigurationError("At least one seed is required", field="seeds")
        if self.sigma is not None and not self.sigma > 0:
            raise ConfigurationError("sigma must be > 0", field="sigma", value=self.sigma)
        if self.lam is not None and not self.lam > 0:
            raise ConfigurationError("lambda must be > 0", field="lambda", value=self.lam)
        if self.iterations is not None and self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0", field="iterations", value=self.iterations)
        return self

    def load_problem(self) -> PdeProblem:
        return get_problem(self.problem)

    def resolved_sigma(self) -> Optional[float]:
        if self.sigma is not None:
            return self.sigma
        if self.variant in BANDWIDTH_VARIANTS:
            return self.load_problem().defaults.sigma
        return None

    def resolved_lam(self) -> float:
        return self.lam if self.lam is not None else self.load_problem().defaults.lam

    def resolved_architecture(self) -> str:
        return self.architecture or self.load_problem().defaults.architecture

    def resolved_iterations(self) -> int:
        if self.iterations is not None:
            return self.iterations
        defaults = self.load_problem().defaults
        return defaults.iterations_full if self.scale == Scale.PAPER else defaults.iterations_desk

    def with_values(self, **changes: Any) -> "ExperimentConfig":
        data = self.model_dump(by_alias=True)
        data.update({("lambda" if k == "lam" else k): v for k, v in changes.items()})
        return ExperimentConfig.model_validate(data)

    def loss_spec(self, problem: PdeProblem) -> LossSpec:
        return LossSpec.for_problem(problem, self.resolved_lam())

    def train_config(self, problem: PdeProblem, seed: int) -> TrainConfig:
        return TrainConfig(
            iterations=self.resolved_iterations(),
            lr=self.lr if self.lr is not None else problem.defaults.lr,
            schedule=PlateauSchedule(patience=self.patience, factor=self.decay),
            accumulation=self.accumulation,
            seed=seed,
            history_every=self.history_every,
            test_every=self.test_every,
            log_every=self.log_every,
        )


PRESETS: Dict[str, ExperimentConfig] = {
    name: ExperimentConfig(problem=name) for name in PROBLEMS
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(
            f"Unknown preset '{name}'. Available: {sorted(PRESETS)}", field="preset", value=name
        )
    return PRESETS[name]


def describe_preset(name: str) -> Dict[str, Any]:
    """Published defaults of one preset, resolved against its problem"""
    config = preset(name)
    problem = config.load_problem()
    defaults = problem.defaults
    return {
        "problem": name,
        "description": problem.description,
        "architecture": defaults.architecture,
        "sigma": defaults.sigma,
        "lambda": defaults.lam,
        "lr": defaults.lr,
        "batch": {
            "pde": defaults.batch.pde,
            "ic": defaults.batch.ic,
            "bc": defaults.batch.bc,
            "data": defaults.batch.data,
        },
        "iterations": {"paper": defaults.iterations_full, "desk": defaults.iterations_desk},
        "training_grid": list(defaults.grid),
        "metric": problem.metric,
        "inverse": any(s.invertible for s in problem.physics),
    }


def load_config(path: Path, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """JSON document whose keys are ExperimentConfig fields, then CLI overrides"""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}", field="config", value=str(path))
    if not isinstance(data, dict):
        raise ConfigurationError("Config file must hold a JSON object", field="config", value=str(path))
    data.update(overrides or {})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid config file {path}: {e}", field="config", value=str(path))
