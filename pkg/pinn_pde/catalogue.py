"""Benchmark problem catalogue.

Every closed-form solution is written once in jet arithmetic so the same
function yields field values (order-0 coordinates) and, through seeded
coordinates, the derivatives used to check residuals and to build Neumann
targets.
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from pinn_jets.taylor import Jet, constant, cos, exp, expm1, sin
from pinn_pde.domain import (
    ConditionKind,
    ConditionSpec,
    Domain,
    Location,
    LocationKind,
)
from pinn_pde.residuals import (
    FieldJets,
    Scalar,
    coordinate_jets,
    residual_convdiff,
    residual_helmholtz,
    residual_kdv,
    residual_ns_steady,
    residual_ns_transient,
    residual_wave,
)
from shared.errors import ConfigurationError, UnsupportedError, UsageError

logger = logging.getLogger(__name__)

PI = np.pi

# coords (label -> jet) -> fields (name -> jet)
ExactSolution = Callable[[Mapping[str, Jet]], Dict[str, Jet]]
# (field jets, physics scalars, points) -> one residual jet per equation
ResidualOperator = Callable[[FieldJets, Mapping[str, Scalar], np.ndarray], List[Jet]]


@dataclass(frozen=True)
class PhysicsScalar:
    """Named coefficient of the governing equations"""

    name: str
    value: float
    invertible: bool = False
    initial_guess: Optional[float] = None
    trainable: bool = False


@dataclass(frozen=True)
class BatchComposition:
    pde: int
    ic: int = 0
    bc: int = 0
    data: int = 0

    def __post_init__(self) -> None:
        if min(self.pde, self.ic, self.bc, self.data) < 0:
            raise ConfigurationError("Batch counts must be >= 0", value=dataclasses.astuple(self))


@dataclass(frozen=True)
class ProblemDefaults:
    architecture: str
    sigma: float
    lam: float
    batch: BatchComposition
    iterations_full: int
    iterations_desk: int
    lr: float
    grid: Tuple[int, ...]
    inverse_batch: Optional[BatchComposition] = None
    sparse_observations: int = 0
    # sparse samples concentrate at later times (density proportional to t)
    sparse_time_ramp: bool = False


@dataclass(frozen=True)
class Observations:
    """Observed field values at points of the domain (noise-free)"""

    points: np.ndarray
    values: Dict[str, np.ndarray]
    scenario: str = "dense"

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class PdeProblem:
    name: str
    domain: Domain
    fields: Tuple[str, ...]
    equations: Tuple[str, ...]
    # jet order per domain label needed by the residual
    orders: Dict[str, int]
    residual: ResidualOperator
    conditions: Tuple[ConditionSpec, ...]
    physics: Tuple[PhysicsScalar, ...]
    defaults: ProblemDefaults
    exact: Optional[ExactSolution] = None
    oracle: Optional[str] = None
    metric: str = "mse"
    observed_fields: Tuple[str, ...] = ()
    mode: str = "forward"
    observations: Optional[Observations] = None
    description: str = ""

    @property
    def has_truth(self) -> bool:
        return self.exact is not None or self.oracle is not None

    @property
    def batch(self) -> BatchComposition:
        if self.mode == "inverse" and self.defaults.inverse_batch is not None:
            return self.defaults.inverse_batch
        return self.defaults.batch

    def physics_value(self, name: str) -> float:
        for scalar in self.physics:
            if scalar.name == name:
                return scalar.value
        raise UsageError(f"Problem '{self.name}' has no physics scalar '{name}'")

    def trainable_physics(self) -> Dict[str, Tuple[float, bool]]:
        """Scalars that live in the parameter vector: name -> (initial value, trainable)"""
        return {
            s.name: (s.initial_guess if s.initial_guess is not None else s.value, True)
            for s in self.physics
            if s.trainable
        }


# --- exact solutions -------------------------------------------------------


def _convdiff_exact(v: float, k: float, length: float) -> ExactSolution:
    ratio = v / k
    scale = 1.0 / np.expm1(ratio * length)

    def solution(coords: Mapping[str, Jet]) -> Dict[str, Jet]:
        return {"u": expm1(coords["x"] * ratio) * scale}

    return solution


def _wave_exact(c: float) -> ExactSolution:
    def solution(coords: Mapping[str, Jet]) -> Dict[str, Jet]:
        x, t = coords["x"], coords["t"]
        first = sin(x * PI) * cos(t * (c * PI))
        second = sin(x * (4.0 * PI)) * cos(t * (4.0 * c * PI))
        return {"u": first + second * 0.5}

    return solution


def _taylor_green_exact(inv_re: float) -> ExactSolution:
    def solution(coords: Mapping[str, Jet]) -> Dict[str, Jet]:
        x, y, t = coords["x"], coords["y"], coords["t"]
        decay = exp(t * (-2.0 * PI**2 * inv_re))
        u = -(cos(x * PI) * sin(y * PI)) * decay
        v = sin(x * PI) * cos(y * PI) * decay
        p = (cos(x * (2.0 * PI)) + cos(y * (2.0 * PI))) * exp(t * (-4.0 * PI**2 * inv_re)) * -0.25
        return {"u": u, "v": v, "p": p}

    return solution


def _helmholtz_exact(coords: Mapping[str, Jet]) -> Dict[str, Jet]:
    return {"u": sin(coords["x"] * PI) * sin(coords["y"] * (6.0 * PI))}


# --- helpers over exact solutions ------------------------------------------


def _evaluate_exact(exact: ExactSolution, labels: Sequence[str], points: np.ndarray) -> Dict[str, np.ndarray]:
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    coords = {label: constant(points[:, i], 0) for i, label in enumerate(labels)}
    return {name: jet.value for name, jet in exact(coords).items()}


def _exact_target(exact: ExactSolution, labels: Sequence[str], name: str):
    def target(points: np.ndarray, normals: Optional[np.ndarray] = None) -> np.ndarray:
        return _evaluate_exact(exact, labels, points)[name]

    return target


def _exact_normal_derivative(exact: ExactSolution, labels: Sequence[str], name: str):
    def target(points: np.ndarray, normals: Optional[np.ndarray] = None) -> np.ndarray:
        if normals is None:
            raise UsageError("Neumann targets need boundary normals")
        out = np.zeros(len(points))
        for i, label in enumerate(labels):
            if not np.any(normals[:, i]):
                continue
            jets = exact(coordinate_jets(points, tuple(labels), label, 1))
            out = out + normals[:, i] * jets[name].deriv(1)
        return out

    return target


def _zero(points: np.ndarray, normals: Optional[np.ndarray] = None) -> np.ndarray:
    return np.zeros(len(points))


def _cavity_lid(points: np.ndarray, normals: Optional[np.ndarray] = None) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    # the two top corners belong to the no-slip walls
    return np.where((y >= 1.0) & (x > 0.0) & (x < 1.0), 1.0, 0.0)


# --- residual operators per problem ----------------------------------------


def _convdiff_residual(jets: FieldJets, scalars: Mapping[str, Scalar], points: np.ndarray) -> List[Jet]:
    return [residual_convdiff(jets["u"]["x"], scalars["v"], scalars["k"])]


def _wave_residual(jets: FieldJets, scalars: Mapping[str, Scalar], points: np.ndarray) -> List[Jet]:
    return [residual_wave(jets["u"]["t"], jets["u"]["x"], scalars["c"])]


def _helmholtz_residual(jets: FieldJets, scalars: Mapping[str, Scalar], points: np.ndarray) -> List[Jet]:
    return [residual_helmholtz(jets["u"]["x"], jets["u"]["y"], (points[:, 0], points[:, 1]))]


def _kdv_residual(jets: FieldJets, scalars: Mapping[str, Scalar], points: np.ndarray) -> List[Jet]:
    return [residual_kdv(jets["u"]["t"], jets["u"]["x"], scalars["nu"])]


def _ns_transient_residual(jets: FieldJets, scalars: Mapping[str, Scalar], points: np.ndarray) -> List[Jet]:
    return residual_ns_transient(jets, scalars["inv_re"])


def _ns_steady_residual(jets: FieldJets, scalars: Mapping[str, Scalar], points: np.ndarray) -> List[Jet]:
    return residual_ns_steady(jets, scalars["inv_re"])


NS_EQUATIONS = ("continuity", "momentum_x", "momentum_y")

# --- catalogue -------------------------------------------------------------


def convdiff() -> PdeProblem:
    v, k = 50.0, 1.0
    domain = Domain(labels=("x",), lower=(0.0,), upper=(1.0,))
    exact = _convdiff_exact(v, k, 1.0)
    boundary = Location(LocationKind.BOUNDARY)
    return PdeProblem(
        name="convdiff",
        domain=domain,
        fields=("u",),
        equations=("convection_diffusion",),
        orders={"x": 2},
        residual=_convdiff_residual,
        conditions=(
            ConditionSpec(ConditionKind.DIRICHLET, "u", boundary, _exact_target(exact, ("x",), "u")),
        ),
        physics=(PhysicsScalar("v", v), PhysicsScalar("k", k)),
        defaults=ProblemDefaults(
            architecture="(x)-32-10-10-10-(u)",
            sigma=0.5,
            lam=500.0,
            batch=BatchComposition(pde=499, bc=1),
            iterations_full=50_000,
            iterations_desk=20_000,
            lr=5e-3,
            grid=(5000,),
        ),
        exact=exact,
        description="1D steady convection-diffusion, v=50, k=1",
    )


def cavity() -> PdeProblem:
    domain = Domain(labels=("x", "y"), lower=(0.0, 0.0), upper=(1.0, 1.0))
    walls = Location(LocationKind.BOUNDARY)
    return PdeProblem(
        name="cavity",
        domain=domain,
        fields=("u", "v", "p"),
        equations=NS_EQUATIONS,
        orders={"x": 2, "y": 2},
        residual=_ns_steady_residual,
        conditions=(
            ConditionSpec(ConditionKind.DIRICHLET, "u", walls, _cavity_lid),
            ConditionSpec(ConditionKind.DIRICHLET, "v", walls, _zero),
        ),
        physics=(PhysicsScalar("inv_re", 1.0 / 400.0),),
        defaults=ProblemDefaults(
            architecture="(x,y)-64-20-20-20-[20-20-20-(u),20-20-20-(v),20-20-20-(p)]",
            sigma=1.0,
            lam=1.0,
            batch=BatchComposition(pde=475, bc=25),
            iterations_full=200_000,
            iterations_desk=20_000,
            lr=1e-3,
            grid=(52, 52),
        ),
        metric="velocity_average",
        description="Lid-driven cavity, steady incompressible flow at Re=400",
    )


def wave1d() -> PdeProblem:
    c = 2.0
    domain = Domain(labels=("x", "t"), lower=(0.0, 0.0), upper=(2.0, 1.0), time_label="t")
    exact = _wave_exact(c)
    labels = domain.labels
    initial = Location(LocationKind.INITIAL)
    return PdeProblem(
        name="wave1d",
        domain=domain,
        fields=("u",),
        equations=("wave",),
        orders={"x": 2, "t": 2},
        residual=_wave_residual,
        conditions=(
            ConditionSpec(ConditionKind.INITIAL_VALUE, "u", initial, _exact_target(exact, labels, "u")),
            ConditionSpec(ConditionKind.INITIAL_TIME_DERIVATIVE, "u", initial, _zero),
            ConditionSpec(ConditionKind.DIRICHLET, "u", Location(LocationKind.BOUNDARY), _zero),
        ),
        physics=(PhysicsScalar("c", c, invertible=True, initial_guess=1.0),),
        defaults=ProblemDefaults(
            architecture="(x,t)-64-50-50-50-(u)",
            sigma=2.5,
            lam=180.0,
            batch=BatchComposition(pde=450, ic=40, bc=10),
            iterations_full=200_000,
            iterations_desk=50_000,
            lr=5e-3,
            grid=(256, 256),
            inverse_batch=BatchComposition(pde=450, data=50),
            sparse_observations=200,
            sparse_time_ramp=True,
        ),
        exact=exact,
        observed_fields=("u",),
        description="1D wave equation, c=2",
    )


def taylor_green() -> PdeProblem:
    inv_re = 0.01
    domain = Domain(
        labels=("x", "y", "t"), lower=(0.5, 0.5, 0.0), upper=(4.5, 4.5, 10.0), time_label="t"
    )
    exact = _taylor_green_exact(inv_re)
    labels = domain.labels
    initial = Location(LocationKind.INITIAL)
    walls = Location(LocationKind.BOUNDARY)
    return PdeProblem(
        name="taylor-green",
        domain=domain,
        fields=("u", "v", "p"),
        equations=NS_EQUATIONS,
        orders={"x": 2, "y": 2, "t": 1},
        residual=_ns_transient_residual,
        conditions=(
            ConditionSpec(ConditionKind.INITIAL_VALUE, "u", initial, _exact_target(exact, labels, "u")),
            ConditionSpec(ConditionKind.INITIAL_VALUE, "v", initial, _exact_target(exact, labels, "v")),
            ConditionSpec(ConditionKind.INITIAL_VALUE, "p", initial, _exact_target(exact, labels, "p")),
            ConditionSpec(ConditionKind.DIRICHLET, "u", walls, _exact_target(exact, labels, "u")),
            ConditionSpec(ConditionKind.DIRICHLET, "v", walls, _exact_target(exact, labels, "v")),
            ConditionSpec(
                ConditionKind.NEUMANN, "p", walls, _exact_normal_derivative(exact, labels, "p")
            ),
        ),
        physics=(PhysicsScalar("inv_re", inv_re, invertible=True, initial_guess=0.05),),
        defaults=ProblemDefaults(
            architecture="(x,y,t)-64-50-50-50-[50-50-50-(u),50-50-50-(v),50-50-50-(p)]",
            sigma=0.68,
            lam=1.0,
            batch=BatchComposition(pde=450, ic=40, bc=10),
            iterations_full=100_000,
            iterations_desk=20_000,
            lr=5e-3,
            grid=(101, 101, 51),
            inverse_batch=BatchComposition(pde=450, data=50),
            sparse_observations=600,
        ),
        exact=exact,
        metric="velocity_magnitude",
        observed_fields=("u", "v"),
        description="2D Taylor-Green vortex, Re=100, rho=1",
    )


def kdv() -> PdeProblem:
    domain = Domain(labels=("x", "t"), lower=(-1.0, 0.0), upper=(1.0, 1.25), time_label="t")
    periodic = Location(LocationKind.PERIODIC, "x")

    def initial(points: np.ndarray, normals: Optional[np.ndarray] = None) -> np.ndarray:
        return np.cos(PI * points[:, 0])

    return PdeProblem(
        name="kdv",
        domain=domain,
        fields=("u",),
        equations=("kdv",),
        orders={"x": 3, "t": 1},
        residual=_kdv_residual,
        conditions=(
            ConditionSpec(ConditionKind.INITIAL_VALUE, "u", Location(LocationKind.INITIAL), initial),
            ConditionSpec(ConditionKind.PERIODIC_PAIR, "u", periodic, order=0),
            ConditionSpec(ConditionKind.PERIODIC_PAIR, "u", periodic, order=1),
        ),
        physics=(PhysicsScalar("nu", 0.0005),),
        defaults=ProblemDefaults(
            architecture="(x,t)-64-50-50-50-(u)",
            sigma=1.0,
            lam=180.0,
            batch=BatchComposition(pde=480, ic=10, bc=10),
            iterations_full=100_000,
            iterations_desk=20_000,
            lr=5e-3,
            grid=(257, 251),
        ),
        oracle="kdv",
        description="1D KdV from cos(pi x), nu=0.0005, periodic",
    )


def helmholtz2d() -> PdeProblem:
    domain = Domain(labels=("x", "y"), lower=(-1.0, -1.0), upper=(1.0, 1.0))
    return PdeProblem(
        name="helmholtz2d",
        domain=domain,
        fields=("u",),
        equations=("helmholtz",),
        orders={"x": 2, "y": 2},
        residual=_helmholtz_residual,
        conditions=(ConditionSpec(ConditionKind.DIRICHLET, "u", Location(LocationKind.BOUNDARY), _zero),),
        physics=(),
        defaults=ProblemDefaults(
            architecture="(x,y)-64-20-20-20-(u)",
            sigma=2.5,
            lam=1000.0,
            batch=BatchComposition(pde=450, bc=50),
            iterations_full=100_000,
            iterations_desk=50_000,
            lr=5e-3,
            grid=(256, 256),
        ),
        exact=_helmholtz_exact,
        description="2D Helmholtz with source (1 - pi^2 - 36 pi^2) sin(pi x) sin(6 pi y)",
    )


PROBLEMS: Dict[str, Callable[[], PdeProblem]] = {
    "convdiff": convdiff,
    "cavity": cavity,
    "wave1d": wave1d,
    "taylor-green": taylor_green,
    "kdv": kdv,
    "helmholtz2d": helmholtz2d,
}


def get_problem(name: str) -> PdeProblem:
    if name not in PROBLEMS:
        raise ConfigurationError(
            f"Unknown problem '{name}'. Available: {sorted(PROBLEMS)}", field="problem", value=name
        )
    return PROBLEMS[name]()


def physics_scalars(problem: PdeProblem, trainable: Optional[Mapping[str, Jet]] = None) -> Dict[str, Scalar]:
    """Fixed physics values, with trainable ones replaced by their parameter jets"""
    scalars: Dict[str, Scalar] = {s.name: s.value for s in problem.physics}
    for name, jet in (trainable or {}).items():
        scalars[name] = jet
    return scalars


def exact_solution(problem: PdeProblem, point: np.ndarray) -> Dict[str, np.ndarray]:
    """Closed-form field values at one point (d,) or a batch (N, d)"""
    if problem.exact is None:
        raise UnsupportedError(f"Problem '{problem.name}' has no analytic solution", problem=problem.name)
    point = np.asarray(point, dtype=np.float64)
    values = _evaluate_exact(problem.exact, problem.domain.labels, point)
    if point.ndim == 1:
        return {name: value[0] for name, value in values.items()}
    return values


def exact_residuals(problem: PdeProblem, points: np.ndarray) -> List[np.ndarray]:
    """Residuals of the analytic solution at interior points"""
    if problem.exact is None:
        raise UnsupportedError(f"Problem '{problem.name}' has no analytic solution", problem=problem.name)
    points = np.atleast_2d(points)
    order = max(problem.orders.values())
    jets: Dict[str, Dict[str, Jet]] = {name: {} for name in problem.fields}
    for label in problem.orders:
        fields = problem.exact(coordinate_jets(points, problem.domain.labels, label, order))
        for name, jet in fields.items():
            jets[name][label] = jet
    scalars = physics_scalars(problem)
    return [r.value for r in problem.residual(jets, scalars, points)]


def make_inverse_variant(problem: PdeProblem, observations: Observations) -> PdeProblem:
    """Data-driven variant: invertible scalars become trainable, IC/BC terms are dropped"""
    if not any(s.invertible for s in problem.physics):
        raise UnsupportedError(
            f"Problem '{problem.name}' has no physics scalar designated for inversion",
            problem=problem.name,
        )
    if observations is None or len(observations) == 0:
        raise ConfigurationError("Inverse problems need at least one observation", field="observations")
    missing = [name for name in problem.observed_fields if name not in observations.values]
    if missing:
        raise ConfigurationError(f"Observations lack fields {missing}", field="observations")
    physics = tuple(
        dataclasses.replace(s, trainable=True) if s.invertible else s for s in problem.physics
    )
    return dataclasses.replace(
        problem, physics=physics, conditions=(), mode="inverse", observations=observations
    )
