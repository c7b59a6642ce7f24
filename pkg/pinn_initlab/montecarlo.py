"""Monte-Carlo estimates over random initialisations.

Every draw is a fresh ``init_parameters`` call; input gradients of a block of
draws are evaluated together with ``forward_draws``, the draw-batched form of
the network's own jet forward pass.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from pinn_initlab.bounds import bound_prop1, bound_prop3
from pinn_jets.taylor import TWO_PI, jet_activation, jet_seed
from pinn_network.model import (
    FeatureMapKind,
    InitKind,
    InitScheme,
    NetworkConfig,
    ParameterSet,
    build_layout,
    forward_draws,
    init_parameters,
)
from shared.errors import ConfigurationError, UsageError

logger = logging.getLogger(__name__)

MIN_DRAWS = 1000
# float64 entries held per block of simultaneous draws
BLOCK_BUDGET = 1 << 22


@dataclass
class VarianceReport:
    """Empirical var(du/dx) at init, one entry per x, with the matching closed-form bound"""

    x: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    standard_error: np.ndarray
    bound: np.ndarray
    draws: int
    label: str = ""

    def within_bound(self, k: float = 3.0) -> np.ndarray:
        return self.variance <= self.bound + k * self.standard_error


def moment_with_se(samples: np.ndarray, axis: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Sample mean and its standard error"""
    n = samples.shape[axis]
    return samples.mean(axis=axis), samples.std(axis=axis, ddof=1) / math.sqrt(n)


def draw_parameters(
    config: NetworkConfig, sigma: Optional[float], count: int, rng: np.random.Generator
) -> List[ParameterSet]:
    """``count`` independent initialisations; ``sigma`` overrides the input-layer std"""
    has_feature = config.feature != FeatureMapKind.NONE_DIRECT
    if sigma is not None and sigma > 0 and has_feature:
        config = config.model_copy(update={"input_init": InitScheme.normal(sigma)})
    draws = [init_parameters(config, rng) for _ in range(count)]
    if sigma == 0.0 and has_feature:
        for params in draws:
            params.view("feature.W")[...] = 0.0
    return draws


def input_gradients(
    config: NetworkConfig, draws: List[ParameterSet], x: np.ndarray
) -> np.ndarray:
    """du/dx along input 0 at every x for every draw; shape (draws, len(x))"""
    points = np.zeros((len(x), config.input_dim))
    points[:, 0] = x
    (output,) = forward_draws(config, draws, points, 0, 1).values()
    return output.deriv(1)


def _bound(config: NetworkConfig, sigma: Optional[float], x: np.ndarray) -> np.ndarray:
    if sigma == 0.0:
        return np.zeros_like(x)
    hidden_free = not config.trunk and not config.branches[0].widths
    if config.feature == FeatureMapKind.SINUSOIDAL and config.hidden_init.kind == InitKind.XAVIER:
        bandwidth = sigma if sigma is not None else config.input_init.sigma
        if hidden_free and bandwidth:
            return np.asarray(bound_prop3(config.feature_width, bandwidth, x), dtype=np.float64)
    if (
        config.feature == FeatureMapKind.STANDARD_DENSE
        and config.activation == "tanh"
        and config.hidden_init.kind == InitKind.XAVIER
        and sigma is None
        and config.input_init.kind == InitKind.XAVIER
    ):
        return np.full_like(x, bound_prop1(config.feature_width))
    return np.full_like(x, math.nan)


def mc_input_gradient_variance(
    config: NetworkConfig,
    sigma: Optional[float],
    x,
    draws: int,
    rng: np.random.Generator,
    label: str = "",
) -> VarianceReport:
    """var(du/dx) over ``draws`` independent initialisations at each x.

    ``sigma`` overrides the input-layer std (0 gives all-zero input weights);
    None keeps the configuration's input initialiser.
    """
    if draws < MIN_DRAWS:
        raise ConfigurationError(f"Need >= {MIN_DRAWS} draws", field="draws", value=draws)
    if sigma is not None and sigma < 0:
        raise ConfigurationError("sigma must be >= 0", field="sigma", value=sigma)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if len(config.outputs) != 1:
        raise UsageError("Input-gradient variance is defined for single-output networks")
    widths = [config.feature_width, *config.trunk, *config.branches[0].widths]
    per_draw = build_layout(config).size + 4 * len(x) * max(widths)
    block = max(1, min(draws, BLOCK_BUDGET // per_draw))

    parts = []
    remaining = draws
    while remaining > 0:
        count = min(block, remaining)
        parts.append(input_gradients(config, draw_parameters(config, sigma, count, rng), x))
        remaining -= count
    grads = np.concatenate(parts)

    mean = grads.mean(axis=0)
    deviation = (grads - mean) ** 2
    variance, se = moment_with_se(deviation)
    report = VarianceReport(x, mean, variance, se, _bound(config, sigma, x), draws, label)
    logger.debug(f"{label or 'network'}: var(du/dx) at x={x.tolist()} -> {variance.tolist()}")
    return report


def backward_proportion(
    f: str, var_u: float, draws: int, rng: np.random.Generator, normalize: bool = False
) -> Tuple[float, float]:
    """E[f'(u)^2] = var(f'(u)) + E[f'(u)]^2 for u ~ Normal(0, var_u), with its standard error"""
    if not var_u > 0:
        raise ConfigurationError("var_u must be > 0", field="var_u", value=var_u)
    if draws < 1:
        raise ConfigurationError("draws must be >= 1", field="draws", value=draws)
    u = rng.standard_normal(draws) * math.sqrt(var_u)
    slope = jet_activation(jet_seed(u, 1), f).deriv(1)
    samples = slope**2
    if normalize:
        # retained proportion relative to the slope at the origin
        origin = jet_activation(jet_seed(np.zeros(1), 1), f).deriv(1)[0]
        samples = samples / origin**2
    value, se = moment_with_se(samples)
    return float(value), float(se)


def backward_variance_sim(
    f: str, var_u: float, draws: int, rng: np.random.Generator, normalize: bool = False
) -> float:
    return backward_proportion(f, var_u, draws, rng, normalize)[0]


def mc_integrand(
    kind: str, sigma: float, x: float, draws: int, rng: np.random.Generator
) -> Tuple[float, float]:
    """Monte-Carlo E[w^2 sech^4(w x)] ("tanh") or E[(2 pi w)^2 cos^2(2 pi w x)] ("sine")"""
    if not sigma > 0:
        raise ConfigurationError("sigma must be > 0", field="sigma", value=sigma)
    w = rng.standard_normal(draws) * sigma
    if kind == "tanh":
        slope = 1.0 - np.tanh(w * x) ** 2
        samples = w**2 * slope**2
    elif kind == "sine":
        samples = (TWO_PI * w) ** 2 * np.cos(TWO_PI * w * x) ** 2
    else:
        raise ConfigurationError(f"Unknown integrand '{kind}'", field="kind", value=kind)
    value, se = moment_with_se(samples)
    return float(value), float(se)
