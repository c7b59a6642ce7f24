"""ADAM updates over the flat parameter vector and the reduce-on-plateau schedule"""
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from pinn_network.model import ParameterSet
from shared.errors import ConfigurationError, DivergenceError, UsageError

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8
MIN_LR = 1e-6


@dataclass
class AdamState:
    """First and second moment estimates plus the step counter"""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size))


def adam_step(
    params: ParameterSet, gradient: np.ndarray, state: AdamState, lr: float
) -> Tuple[ParameterSet, AdamState]:
    """One bias-corrected ADAM update, applied in place to trainable entries only"""
    if state.m.shape != params.values.shape or gradient.shape != params.values.shape:
        raise UsageError(
            "Optimizer state does not match the parameter vector",
            expected=params.values.shape,
            actual=(state.m.shape, gradient.shape),
        )
    if not lr > 0:
        raise ConfigurationError("Learning rate must be > 0", field="lr", value=lr)
    if not np.all(np.isfinite(gradient)):
        bad = int(np.count_nonzero(~np.isfinite(gradient)))
        raise DivergenceError(f"Gradient has {bad} non-finite entries", iteration=state.t)

    mask = params.trainable
    g = gradient[mask]
    state.t += 1
    state.m[mask] = BETA1 * state.m[mask] + (1.0 - BETA1) * g
    state.v[mask] = BETA2 * state.v[mask] + (1.0 - BETA2) * g * g
    m_hat = state.m[mask] / (1.0 - BETA1**state.t)
    v_hat = state.v[mask] / (1.0 - BETA2**state.t)
    params.values[mask] -= lr * m_hat / (np.sqrt(v_hat) + EPSILON)
    return params, state


class PlateauSchedule(BaseModel):
    """Decay the learning rate when the loss stops improving"""
    model_config = ConfigDict(frozen=True)

    patience: int = 1000
    factor: float = 0.5
    threshold: float = 1e-3
    min_lr: float = MIN_LR

    @model_validator(mode="after")
    def _check(self) -> "PlateauSchedule":
        if not 0.0 < self.factor < 1.0:
            raise ConfigurationError("Decay factor must be in (0, 1)", field="factor", value=self.factor)
        if self.patience < 1:
            raise ConfigurationError("Patience must be >= 1", field="patience", value=self.patience)
        if self.threshold < 0 or not self.min_lr > 0:
            raise ConfigurationError("Threshold must be >= 0 and min_lr > 0")
        return self


@dataclass
class PlateauState:
    lr: float
    best: float = math.inf
    wait: int = 0
    reductions: int = 0
    seen: int = field(default=0)


def plateau_schedule(
    history: Sequence[float], state: PlateauState, schedule: PlateauSchedule = PlateauSchedule()
) -> float:
    """Consume the losses appended since the last call and return the learning rate.

    A loss improves when it is below best * (1 - threshold). After ``patience``
    evaluations without improvement the rate is multiplied by ``factor``,
    never going below ``min_lr``.
    """
    if not history:
        raise UsageError("Plateau schedule needs a non-empty loss history")
    for loss in history[state.seen :]:
        state.seen += 1
        if not math.isfinite(loss):
            continue
        if loss < state.best * (1.0 - schedule.threshold):
            state.best = loss
            state.wait = 0
            continue
        state.wait += 1
        if state.wait >= schedule.patience:
            state.wait = 0
            if state.lr > schedule.min_lr:
                state.lr = max(state.lr * schedule.factor, schedule.min_lr)
                state.reductions += 1
                logger.info(f"Loss plateaued; learning rate reduced to {state.lr:.3e}")
    return state.lr
