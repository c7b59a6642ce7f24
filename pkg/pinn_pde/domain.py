"""Problem domains, condition locations and condition specifications"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from shared.errors import ConfigurationError, UsageError

logger = logging.getLogger(__name__)


class Domain(BaseModel):
    """Axis-aligned box; the time axis, when present, is labelled ``time_label``"""
    model_config = ConfigDict(frozen=True)

    labels: Tuple[str, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    time_label: Optional[str] = None

    @model_validator(mode="after")
    def _check_bounds(self) -> "Domain":
        if not (len(self.labels) == len(self.lower) == len(self.upper)) or not self.labels:
            raise ConfigurationError("Domain labels and bounds must have equal, non-zero length")
        for label, lo, hi in zip(self.labels, self.lower, self.upper):
            if not lo < hi:
                raise ConfigurationError(
                    f"Degenerate domain along '{label}': lower must be < upper",
                    field=label,
                    value=(lo, hi),
                )
        if self.time_label is not None and self.time_label not in self.labels:
            raise ConfigurationError("Time label is not a domain label", value=self.time_label)
        return self

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def is_transient(self) -> bool:
        return self.time_label is not None

    @property
    def space_labels(self) -> Tuple[str, ...]:
        return tuple(label for label in self.labels if label != self.time_label)

    def index(self, label: str) -> int:
        if label not in self.labels:
            raise UsageError(f"Unknown domain label '{label}'", expected=self.labels, actual=label)
        return self.labels.index(label)

    def width(self, label: str) -> float:
        i = self.index(label)
        return self.upper[i] - self.lower[i]

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= np.array(self.lower)) & (points <= np.array(self.upper)), axis=1)


class LocationKind(str, Enum):
    BOUNDARY = "boundary"  # every spatial face, over the whole time span
    INITIAL = "initial"  # the t = lower slice
    PERIODIC = "periodic"  # opposing faces along one label, paired point by point


@dataclass(frozen=True)
class Location:
    kind: LocationKind
    label: Optional[str] = None


@dataclass
class ConditionPoints:
    """Sampled condition points; ``partner`` holds the opposing face of a periodic pair"""

    points: np.ndarray
    normals: Optional[np.ndarray] = None
    partner: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.points)


def sample_location(
    domain: Domain, location: Location, count: int, rng: np.random.Generator
) -> ConditionPoints:
    """Uniform continuous sample of a condition location"""
    lower = np.array(domain.lower)
    upper = np.array(domain.upper)
    space = [domain.index(label) for label in domain.space_labels]

    if location.kind == LocationKind.BOUNDARY and len(space) == 1 and not domain.is_transient:
        # a 1-D steady boundary is exactly its two end points
        points = np.array([[domain.lower[0]], [domain.upper[0]]])
        return ConditionPoints(points, normals=np.array([[-1.0], [1.0]]))

    if count < 1:
        raise ConfigurationError("Condition sample count must be >= 1", field="count", value=count)
    points = lower + (upper - lower) * rng.random((count, domain.dim))

    if location.kind == LocationKind.INITIAL:
        if not domain.is_transient:
            raise ConfigurationError("Initial conditions need a time axis")
        points[:, domain.index(domain.time_label)] = domain.lower[domain.index(domain.time_label)]
        return ConditionPoints(points)

    if location.kind == LocationKind.PERIODIC:
        axis = domain.index(location.label)
        partner = points.copy()
        points[:, axis] = lower[axis]
        partner[:, axis] = upper[axis]
        return ConditionPoints(points, partner=partner)

    faces = [(axis, side) for axis in space for side in (0, 1)]
    measure = np.array(
        [np.prod([upper[o] - lower[o] for o in space if o != axis] or [1.0]) for axis, _ in faces]
    )
    choice = rng.choice(len(faces), size=count, p=measure / measure.sum())
    normals = np.zeros((count, domain.dim))
    for i, (axis, side) in enumerate(faces):
        hit = choice == i
        points[hit, axis] = upper[axis] if side else lower[axis]
        normals[hit, axis] = 1.0 if side else -1.0
    return ConditionPoints(points, normals=normals)


class ConditionKind(str, Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    INITIAL_VALUE = "initial_value"
    INITIAL_TIME_DERIVATIVE = "initial_time_derivative"
    PERIODIC_PAIR = "periodic_pair"


# target(points, normals) -> values
Target = Callable[[np.ndarray, Optional[np.ndarray]], np.ndarray]


@dataclass(frozen=True)
class ConditionSpec:
    """One initial or boundary condition on one output field.

    ``order`` is the derivative order matched across a periodic pair.
    """

    kind: ConditionKind
    field: str
    location: Location
    target: Optional[Target] = None
    order: int = 0

    def __post_init__(self) -> None:
        if self.kind == ConditionKind.PERIODIC_PAIR:
            if self.location.kind != LocationKind.PERIODIC:
                raise ConfigurationError("Periodic pairs bind a periodic location")
        elif self.target is None:
            raise ConfigurationError(f"{self.kind.value} condition on '{self.field}' needs a target")
        if self.kind in (ConditionKind.INITIAL_VALUE, ConditionKind.INITIAL_TIME_DERIVATIVE):
            if self.location.kind != LocationKind.INITIAL:
                raise ConfigurationError("Initial conditions live on the initial slice")

    @property
    def group(self) -> str:
        if self.kind in (ConditionKind.INITIAL_VALUE, ConditionKind.INITIAL_TIME_DERIVATIVE):
            return "ic"
        return "bc"

    @property
    def jet_order(self) -> int:
        """Jet order this condition needs along its differentiated label"""
        if self.kind in (ConditionKind.NEUMANN, ConditionKind.INITIAL_TIME_DERIVATIVE):
            return 1
        return self.order if self.kind == ConditionKind.PERIODIC_PAIR else 0
