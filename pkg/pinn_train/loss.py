"""Loss assembly: data, PDE residual, initial and boundary terms.

total = L_data + L_pde / lambda + lambda_ic * L_ic + lambda_bc * L_bc

Each term is a mean of squared mismatches, accumulated in jet arithmetic on one
adjoint record so a single reverse sweep yields the gradient of the total with
respect to every network weight and trainable physics scalar.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from pinn_jets.tape import AdjointRecord, param_gradient
from pinn_jets.taylor import Jet, mean, partial, scale, shift, square
from pinn_network.model import NetworkConfig, ParameterSet, forward_with_jets, physics_jets
from pinn_pde.catalogue import PdeProblem, physics_scalars
from pinn_pde.domain import ConditionKind, ConditionPoints, ConditionSpec
from pinn_train.sampling import Batch
from shared.errors import ConfigurationError, UsageError

logger = logging.getLogger(__name__)

TERMS = ("pde", "ic", "bc", "data")


class LossSpec(BaseModel):
    """Term weights and per-evaluation point counts"""
    model_config = ConfigDict(frozen=True)

    lam: float = 1.0
    lambda_ic: float = 1.0
    lambda_bc: float = 1.0
    use_data: bool = False
    n_pde: int = 0
    n_ic: int = 0
    n_bc: int = 0
    n_data: int = 0

    @model_validator(mode="after")
    def _check(self) -> "LossSpec":
        if not self.lam > 0:
            raise ConfigurationError("lambda must be > 0", field="lam", value=self.lam)
        if self.lambda_ic < 0 or self.lambda_bc < 0:
            raise ConfigurationError("Condition weights must be >= 0", field="lambda_ic/lambda_bc")
        counts = (self.n_pde, self.n_ic, self.n_bc, self.n_data)
        if min(counts) < 0:
            raise ConfigurationError("Batch counts must be >= 0", field="batch", value=counts)
        if not any(self.active(term) for term in TERMS):
            raise ConfigurationError("Loss has no active term", field="batch", value=counts)
        return self

    def active(self, term: str) -> bool:
        if term == "data":
            return self.use_data and self.n_data > 0
        return getattr(self, f"n_{term}") > 0

    @classmethod
    def for_problem(cls, problem: PdeProblem, lam: float) -> "LossSpec":
        batch = problem.batch
        return cls(
            lam=lam,
            use_data=problem.mode == "inverse",
            n_pde=batch.pde,
            n_ic=batch.ic,
            n_bc=batch.bc,
            n_data=batch.data,
        )


@dataclass
class LossReport:
    total: float
    pde: float
    ic: float
    bc: float
    data: float
    gradient: np.ndarray
    equations: Dict[str, float] = field(default_factory=dict)

    def terms(self) -> Dict[str, float]:
        return {"pde": self.pde, "ic": self.ic, "bc": self.bc, "data": self.data}


class _Evaluator:
    """Caches network passes per (point set, seeded label, order) on one record"""

    def __init__(self, config: NetworkConfig, params: ParameterSet, problem: PdeProblem, record: AdjointRecord):
        self.config = config
        self.params = params
        self.problem = problem
        self.record = record
        self._cache: Dict[Tuple[int, str, int], Dict[str, Jet]] = {}

    def outputs(self, points: np.ndarray, label: str, order: int) -> Dict[str, Jet]:
        key = (id(points), label, order)
        if key not in self._cache:
            dim = self.problem.domain.index(label)
            self._cache[key], _ = forward_with_jets(
                self.config, self.params, points, dim, order, self.record
            )
        return self._cache[key]


def _condition_mismatch(spec: ConditionSpec, where: ConditionPoints, evaluator: _Evaluator) -> Jet:
    domain = evaluator.problem.domain
    first = domain.labels[0]
    if spec.kind in (ConditionKind.DIRICHLET, ConditionKind.INITIAL_VALUE):
        value = partial(evaluator.outputs(where.points, first, 0)[spec.field], 0)
        return shift(value, -spec.target(where.points, where.normals))
    if spec.kind == ConditionKind.INITIAL_TIME_DERIVATIVE:
        rate = partial(evaluator.outputs(where.points, domain.time_label, 1)[spec.field], 1)
        return shift(rate, -spec.target(where.points, where.normals))
    if spec.kind == ConditionKind.NEUMANN:
        flux: Optional[Jet] = None
        for label in domain.space_labels:
            column = where.normals[:, domain.index(label)]
            if not np.any(column):
                continue
            term = scale(partial(evaluator.outputs(where.points, label, 1)[spec.field], 1), column)
            flux = term if flux is None else flux + term
        if flux is None:
            raise UsageError("Neumann condition sampled without boundary normals")
        return shift(flux, -spec.target(where.points, where.normals))
    # periodic pair: derivative of the given order must agree across the faces
    label = spec.location.label
    left = partial(evaluator.outputs(where.points, label, spec.order)[spec.field], spec.order)
    right = partial(evaluator.outputs(where.partner, label, spec.order)[spec.field], spec.order)
    return left - right


def compute_loss(
    config: NetworkConfig,
    params: ParameterSet,
    problem: PdeProblem,
    loss_spec: LossSpec,
    batch: Batch,
    mode: Optional[str] = None,
) -> LossReport:
    """Per-term losses, weighted total and the gradient of the total"""
    mode = mode or problem.mode
    if mode != problem.mode:
        raise UsageError("Loss mode does not match the problem variant", expected=problem.mode, actual=mode)
    record = AdjointRecord(params.size)
    evaluator = _Evaluator(config, params, problem, record)
    scalars = physics_scalars(problem, physics_jets(params, record))
    terms: Dict[str, Jet] = {}
    equations: Dict[str, float] = {}

    if loss_spec.active("pde"):
        if len(batch.interior) == 0:
            raise ConfigurationError("PDE term is active but the batch has no interior points")
        jets = {name: {} for name in problem.fields}
        for label, order in problem.orders.items():
            for name, jet in evaluator.outputs(batch.interior, label, order).items():
                jets[name][label] = jet
        residuals = problem.residual(jets, scalars, batch.interior)
        pde: Optional[Jet] = None
        for name, residual in zip(problem.equations, residuals):
            term = mean(square(residual))
            equations[name] = float(term.value)
            pde = term if pde is None else pde + term
        terms["pde"] = pde

    for group in ("ic", "bc"):
        specs = [s for s in problem.conditions if s.group == group]
        if not specs or not loss_spec.active(group):
            continue
        total: Optional[Jet] = None
        for spec in specs:
            where = batch.conditions.get(spec.location)
            if where is None or len(where) == 0:
                raise ConfigurationError(
                    f"{group.upper()} term is active but the batch has no points for '{spec.field}'"
                )
            term = mean(square(_condition_mismatch(spec, where, evaluator)))
            total = term if total is None else total + term
        terms[group] = total

    if mode == "inverse" and loss_spec.active("data"):
        if batch.data_points is None or len(batch.data_points) == 0:
            raise ConfigurationError("Data term is active but the batch has no observations")
        outputs = evaluator.outputs(batch.data_points, problem.domain.labels[0], 0)
        data: Optional[Jet] = None
        for name in problem.observed_fields:
            term = mean(square(shift(partial(outputs[name], 0), -batch.data_values[name])))
            data = term if data is None else data + term
        terms["data"] = data

    weights = {
        "data": 1.0,
        "pde": 1.0 / loss_spec.lam,
        "ic": loss_spec.lambda_ic,
        "bc": loss_spec.lambda_bc,
    }
    total_jet: Optional[Jet] = None
    for term in ("data", "pde", "ic", "bc"):
        if term not in terms:
            continue
        weighted = scale(terms[term], weights[term])
        total_jet = weighted if total_jet is None else total_jet + weighted
    if total_jet is None:
        raise ConfigurationError("No loss term could be evaluated for this batch")

    if total_jet.record is record:
        record.set_output(total_jet)
        gradient = param_gradient(record)
    else:
        gradient = np.zeros(params.size)

    values = {term: float(jet.value) for term, jet in terms.items()}
    return LossReport(
        total=float(total_jet.value),
        pde=values.get("pde", 0.0),
        ic=values.get("ic", 0.0),
        bc=values.get("bc", 0.0),
        data=values.get("data", 0.0),
        gradient=gradient,
        equations=equations,
    )
