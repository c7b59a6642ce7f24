"""Test grids, error metrics, residual diagnostics and synthetic observations"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from pinn_network.model import NetworkConfig, ParameterSet, forward, forward_with_jets
from pinn_pde.catalogue import Observations, PdeProblem, exact_solution, physics_scalars
from pinn_pde.oracles import kdv_reference_solve
from pinn_train.sampling import uniform_grid
from shared.errors import ConfigurationError, UnsupportedError

logger = logging.getLogger(__name__)

METRICS = ("mse", "velocity_average", "velocity_magnitude")
EVAL_CHUNK = 16384
SCENARIOS = ("dense", "sparse")


@dataclass(frozen=True)
class ReferenceGrid:
    """Dense evaluation points and ground-truth field values on them"""

    points: np.ndarray
    truth: Dict[str, np.ndarray]
    source: str

    def __len__(self) -> int:
        return len(self.points)


def reference_grid(problem: PdeProblem, cache_dir: Optional[Path] = None) -> ReferenceGrid:
    """Ground truth on the problem's training-resolution grid, or on the oracle's nodes"""
    if problem.exact is not None:
        points = uniform_grid(problem.domain, problem.defaults.grid)
        return ReferenceGrid(points, exact_solution(problem, points), "exact")
    if problem.oracle == "kdv":
        solution = kdv_reference_solve(cache_dir=cache_dir)
        return ReferenceGrid(solution.points(), {"u": solution.u.ravel()}, "oracle")
    raise UnsupportedError(f"Problem '{problem.name}' has no ground truth", problem=problem.name)


def predict(config: NetworkConfig, params: ParameterSet, points: np.ndarray) -> Dict[str, np.ndarray]:
    """Plain forward pass over a large point set, evaluated in chunks"""
    parts: Dict[str, list] = {}
    for start in range(0, len(points), EVAL_CHUNK):
        for name, values in forward(config, params, points[start : start + EVAL_CHUNK]).items():
            parts.setdefault(name, []).append(np.atleast_1d(values))
    return {name: np.concatenate(chunks) for name, chunks in parts.items()}


def field_error(metric: str, predicted: Dict[str, np.ndarray], truth: Dict[str, np.ndarray]) -> float:
    if metric == "velocity_average":
        return 0.5 * (
            float(np.mean((predicted["u"] - truth["u"]) ** 2))
            + float(np.mean((predicted["v"] - truth["v"]) ** 2))
        )
    if metric == "velocity_magnitude":
        # insensitive to the sign of either component
        model = np.hypot(predicted["u"], predicted["v"])
        exact = np.hypot(truth["u"], truth["v"])
        return float(np.mean((model - exact) ** 2))
    if metric != "mse":
        raise ConfigurationError(f"Unknown metric '{metric}'", field="metric", value=metric)
    errors = [np.mean((predicted[name] - truth[name]) ** 2) for name in truth]
    return float(np.mean(errors))


def evaluate_mse(
    config: NetworkConfig, params: ParameterSet, problem: PdeProblem, grid: Optional[ReferenceGrid]
) -> float:
    """Problem metric of the model against ground truth on the test grid"""
    if grid is None or not grid.truth:
        raise UnsupportedError(f"Problem '{problem.name}' has no ground truth", problem=problem.name)
    return field_error(problem.metric, predict(config, params, grid.points), grid.truth)


def evaluate_residual_rms(
    config: NetworkConfig, params: ParameterSet, problem: PdeProblem, points: np.ndarray
) -> Dict[str, float]:
    """RMS of every governing-equation residual over a point set"""
    scalars = physics_scalars(problem, params.physics_values())
    sums = dict.fromkeys(problem.equations, 0.0)
    for start in range(0, len(points), EVAL_CHUNK):
        chunk = points[start : start + EVAL_CHUNK]
        jets = {name: {} for name in problem.fields}
        for label, order in problem.orders.items():
            outputs, _ = forward_with_jets(config, params, chunk, problem.domain.index(label), order)
            for name, jet in outputs.items():
                jets[name][label] = jet
        for name, residual in zip(problem.equations, problem.residual(jets, scalars, chunk)):
            sums[name] += float(np.sum(residual.value**2))
    return {name: float(np.sqrt(total / len(points))) for name, total in sums.items()}


def sample_observations(problem: PdeProblem, scenario: str, rng: np.random.Generator) -> Observations:
    """Noise-free observations of the observed fields for inverse training"""
    if scenario not in SCENARIOS:
        raise ConfigurationError(f"Unknown observation scenario '{scenario}'", value=scenario)
    if problem.exact is None:
        raise UnsupportedError(
            f"Problem '{problem.name}' has no analytic solution to observe", problem=problem.name
        )
    if not problem.observed_fields:
        raise UnsupportedError(f"Problem '{problem.name}' has no observed fields", problem=problem.name)
    domain = problem.domain
    defaults = problem.defaults
    if scenario == "dense":
        points = uniform_grid(domain, defaults.grid)
    else:
        if defaults.sparse_observations < 1:
            raise UnsupportedError(
                f"Problem '{problem.name}' has no sparse observation scenario", problem=problem.name
            )
        lower, upper = np.array(domain.lower), np.array(domain.upper)
        points = lower + (upper - lower) * rng.random((defaults.sparse_observations, domain.dim))
        if defaults.sparse_time_ramp and domain.is_transient:
            axis = domain.index(domain.time_label)
            # density proportional to elapsed time
            ramp = np.sqrt(rng.random(defaults.sparse_observations))
            points[:, axis] = lower[axis] + (upper[axis] - lower[axis]) * ramp
    values = exact_solution(problem, points)
    logger.info(f"Sampled {len(points)} {scenario} observations for '{problem.name}'")
    return Observations(
        points, {name: values[name] for name in problem.observed_fields}, scenario=scenario
    )
