"""Collocation sampling and per-evaluation training batches"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import qmc

from pinn_pde.catalogue import PdeProblem
from pinn_pde.domain import ConditionPoints, Domain, Location, sample_location
from pinn_pde.catalogue import BatchComposition
from shared.errors import ConfigurationError

logger = logging.getLogger(__name__)

SAMPLING_METHODS = ("uniform_grid", "latin_hypercube")


def uniform_grid(domain: Domain, counts: Sequence[int]) -> np.ndarray:
    """Inclusive tensor grid, one row per node, last label varying fastest"""
    if len(counts) != domain.dim or any(c < 1 for c in counts):
        raise ConfigurationError(
            "Grid needs one positive count per domain label", field="counts", value=tuple(counts)
        )
    axes = [
        np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2.0])
        for lo, hi, n in zip(domain.lower, domain.upper, counts)
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def latin_hypercube(domain: Domain, count: int, rng: np.random.Generator) -> np.ndarray:
    """One point per axis-aligned stratum in every dimension"""
    sampler = qmc.LatinHypercube(d=domain.dim, seed=rng)
    return qmc.scale(sampler.random(count), domain.lower, domain.upper)


def sample_collocation(
    domain: Domain,
    count: Union[int, Sequence[int]],
    method: str = "latin_hypercube",
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Interior collocation points by uniform grid (counts per label) or Latin hypercube"""
    if method == "uniform_grid":
        counts = (count,) * domain.dim if isinstance(count, (int, np.integer)) else tuple(count)
        return uniform_grid(domain, counts)
    if method != "latin_hypercube":
        raise ConfigurationError(
            f"Unknown sampling method '{method}'", field="method", value=method
        )
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise ConfigurationError("Collocation count must be >= 1", field="count", value=count)
    if rng is None:
        raise ConfigurationError("Latin hypercube sampling needs a random generator")
    return latin_hypercube(domain, int(count), rng)


@dataclass
class Batch:
    """Points for one loss evaluation"""

    interior: np.ndarray
    conditions: Dict[Location, ConditionPoints] = field(default_factory=dict)
    data_points: Optional[np.ndarray] = None
    data_values: Optional[Dict[str, np.ndarray]] = None


class _EpochPool:
    """Draw rows without replacement, reshuffling once the pool is exhausted"""

    def __init__(self, size: int, rng: np.random.Generator):
        self.size = size
        self.rng = rng
        self._order = rng.permutation(size)
        self._cursor = 0

    def take(self, count: int) -> np.ndarray:
        picked: List[np.ndarray] = []
        while count > 0:
            if self._cursor >= self.size:
                self._order = self.rng.permutation(self.size)
                self._cursor = 0
            chunk = self._order[self._cursor : self._cursor + count]
            self._cursor += len(chunk)
            count -= len(chunk)
            picked.append(chunk)
        return np.concatenate(picked) if picked else np.zeros(0, dtype=int)


class BatchSampler:
    """Fresh batch per evaluation.

    Interior points come from the training grid ("pool", without replacement per
    epoch) or from a Latin hypercube ("lhs"). Condition locations are sampled
    uniformly; specs sharing a location share points. Observations, when the
    problem carries them, are drawn without replacement per epoch.
    """

    def __init__(
        self,
        problem: PdeProblem,
        batch: BatchComposition,
        rng: np.random.Generator,
        interior: str = "pool",
    ):
        if interior not in ("pool", "lhs"):
            raise ConfigurationError(f"Unknown interior sampling '{interior}'", value=interior)
        self.problem = problem
        self.batch = batch
        self.rng = rng
        self.interior = interior
        self._grid: Optional[np.ndarray] = None
        self._pool: Optional[_EpochPool] = None
        if interior == "pool" and batch.pde > 0:
            self._grid = uniform_grid(problem.domain, problem.defaults.grid)
            self._pool = _EpochPool(len(self._grid), rng)
        self._data_pool: Optional[_EpochPool] = None
        if problem.observations is not None and batch.data > 0:
            self._data_pool = _EpochPool(len(problem.observations), rng)

    def _locations(self) -> Dict[Location, int]:
        counts: Dict[Location, int] = {}
        for spec in self.problem.conditions:
            count = self.batch.ic if spec.group == "ic" else self.batch.bc
            counts.setdefault(spec.location, count)
        return counts

    def next(self) -> Batch:
        domain = self.problem.domain
        if self.batch.pde == 0:
            interior = np.zeros((0, domain.dim))
        elif self._pool is not None:
            interior = self._grid[self._pool.take(self.batch.pde)]
        else:
            interior = latin_hypercube(domain, self.batch.pde, self.rng)

        conditions: Dict[Location, ConditionPoints] = {}
        for location, count in self._locations().items():
            if count > 0:
                conditions[location] = sample_location(domain, location, count, self.rng)

        data_points = data_values = None
        if self._data_pool is not None:
            observations = self.problem.observations
            rows = self._data_pool.take(self.batch.data)
            data_points = observations.points[rows]
            data_values = {name: values[rows] for name, values in observations.values.items()}
        return Batch(interior, conditions, data_points, data_values)
