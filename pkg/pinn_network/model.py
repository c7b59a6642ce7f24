"""Network configuration, parameter layout, initialisation and forward passes.

Layers use the row-vector convention ``h @ W + b`` with ``W`` of shape
``(fan_in, fan_out)``. All trainable numbers live in one flat float64 vector;
per-layer arrays are reshaped views into it.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from pinn_jets.tape import AdjointRecord
from pinn_jets.taylor import Jet, MAX_ORDER
from pinn_jets import taylor
from pinn_network.architecture import Architecture, BranchSpec, parse_architecture
from shared.errors import ConfigurationError, UsageError

logger = logging.getLogger(__name__)

HIDDEN_ACTIVATIONS = ("tanh", "sin", "sigmoid")


class FeatureMapKind(str, Enum):
    STANDARD_DENSE = "standard_dense"
    SINUSOIDAL = "sinusoidal"
    FOURIER_PAIRS = "fourier_pairs"
    RANDOM_FROZEN = "random_frozen"
    NONE_DIRECT = "none_direct"


class InitKind(str, Enum):
    XAVIER = "xavier"
    HE = "he"
    NORMAL = "normal"


class InitScheme(BaseModel):
    """Weight initialiser; biases are always zero"""
    model_config = ConfigDict(frozen=True)

    kind: InitKind
    sigma: Optional[float] = None

    @model_validator(mode="after")
    def _check_sigma(self) -> "InitScheme":
        if self.kind == InitKind.NORMAL and (self.sigma is None or not self.sigma > 0):
            raise ConfigurationError(
                "Normal initialisation needs a positive sigma", field="sigma", value=self.sigma
            )
        return self

    @classmethod
    def xavier(cls) -> "InitScheme":
        return cls(kind=InitKind.XAVIER)

    @classmethod
    def he(cls) -> "InitScheme":
        return cls(kind=InitKind.HE)

    @classmethod
    def normal(cls, sigma: float) -> "InitScheme":
        return cls(kind=InitKind.NORMAL, sigma=sigma)

    def std(self, fan_in: int, fan_out: int) -> float:
        if self.kind == InitKind.XAVIER:
            return float(np.sqrt(2.0 / (fan_in + fan_out)))
        if self.kind == InitKind.HE:
            return float(np.sqrt(2.0 / fan_in))
        return float(self.sigma)


class NetworkConfig(BaseModel):
    """Feature map, shared trunk and per-output branches"""
    model_config = ConfigDict(frozen=True)

    inputs: Tuple[str, ...]
    feature: FeatureMapKind
    feature_width: int
    trunk: Tuple[int, ...] = ()
    branches: Tuple[BranchSpec, ...]
    activation: str = "tanh"
    hidden_init: InitScheme = InitScheme(kind=InitKind.XAVIER)
    input_init: InitScheme = InitScheme(kind=InitKind.XAVIER)

    @model_validator(mode="after")
    def _check(self) -> "NetworkConfig":
        if not self.inputs:
            raise ConfigurationError("Network needs at least one input", field="inputs")
        if not self.branches:
            raise ConfigurationError("Network needs at least one output branch", field="branches")
        widths = [self.feature_width, *self.trunk]
        for branch in self.branches:
            widths.extend(branch.widths)
            if not branch.outputs:
                raise ConfigurationError(f"Branch '{branch.name}' has no outputs", field="branches")
        if any(w < 1 for w in widths):
            raise ConfigurationError("All layer widths must be >= 1", field="widths", value=widths)
        if self.feature in (FeatureMapKind.FOURIER_PAIRS, FeatureMapKind.RANDOM_FROZEN):
            if self.feature_width % 2:
                raise ConfigurationError(
                    "Fourier feature maps need an even feature width",
                    field="feature_width",
                    value=self.feature_width,
                )
        if self.activation not in HIDDEN_ACTIVATIONS:
            raise ConfigurationError(
                f"Hidden activation must be one of {HIDDEN_ACTIVATIONS}",
                field="activation",
                value=self.activation,
            )
        return self

    @classmethod
    def from_architecture(
        cls,
        arch: Architecture,
        feature: FeatureMapKind,
        activation: str = "tanh",
        hidden_init: Optional[InitScheme] = None,
        input_init: Optional[InitScheme] = None,
    ) -> "NetworkConfig":
        trunk = arch.trunk
        width = arch.feature_width
        if feature == FeatureMapKind.NONE_DIRECT:
            # no feature layer: the first width opens the trunk
            trunk = (width,) + trunk
            width = len(arch.inputs)
        return cls(
            inputs=arch.inputs,
            feature=feature,
            feature_width=width,
            trunk=trunk,
            branches=arch.branches,
            activation=activation,
            hidden_init=hidden_init or InitScheme.xavier(),
            input_init=input_init or InitScheme.xavier(),
        )

    @property
    def input_dim(self) -> int:
        return len(self.inputs)

    @property
    def outputs(self) -> Tuple[str, ...]:
        return tuple(name for branch in self.branches for name in branch.outputs)


@dataclass(frozen=True)
class ParameterBlock:
    name: str
    shape: Tuple[int, ...]
    offset: int
    trainable: bool = True

    @property
    def size(self) -> int:
        return int(np.prod(self.shape)) if self.shape else 1


@dataclass(frozen=True)
class ParameterLayout:
    blocks: Tuple[ParameterBlock, ...]

    @property
    def size(self) -> int:
        return sum(block.size for block in self.blocks)

    def block(self, name: str) -> ParameterBlock:
        for block in self.blocks:
            if block.name == name:
                return block
        raise UsageError(f"Unknown parameter block '{name}'")

    def names(self) -> List[str]:
        return [block.name for block in self.blocks]

    def slice(self, name: str) -> slice:
        block = self.block(name)
        return slice(block.offset, block.offset + block.size)


@dataclass
class ParameterSet:
    """Flat parameter vector with per-layer views and a trainable mask"""

    layout: ParameterLayout
    values: np.ndarray
    trainable: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if self.values.shape != (self.layout.size,):
            raise UsageError(
                "Parameter vector does not match layout",
                expected=self.layout.size,
                actual=self.values.shape,
            )
        mask = np.zeros(self.layout.size, dtype=bool)
        for block in self.layout.blocks:
            mask[block.offset : block.offset + block.size] = block.trainable
        self.trainable = mask

    @property
    def size(self) -> int:
        return self.layout.size

    def view(self, name: str) -> np.ndarray:
        block = self.layout.block(name)
        return self.values[block.offset : block.offset + block.size].reshape(block.shape)

    def physics_names(self) -> List[str]:
        return [b.name[len("phys.") :] for b in self.layout.blocks if b.name.startswith("phys.")]

    def physics(self, name: str) -> float:
        return float(self.view(f"phys.{name}"))

    def physics_values(self) -> Dict[str, float]:
        return {name: self.physics(name) for name in self.physics_names()}

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.layout, self.values.copy())

    def weight_norm(self, other: "ParameterSet") -> float:
        """Euclidean distance between trainable network weights of two sets"""
        mask = self.trainable.copy()
        for block in self.layout.blocks:
            if block.name.startswith("phys."):
                mask[block.offset : block.offset + block.size] = False
        return float(np.linalg.norm(self.values[mask] - other.values[mask]))


def _dense_layers(config: NetworkConfig) -> List[Tuple[str, int, int]]:
    """(prefix, fan_in, fan_out) of every dense layer after the feature map"""
    layers = []
    width = config.feature_width
    for i, out in enumerate(config.trunk):
        layers.append((f"trunk.{i}", width, out))
        width = out
    for branch in config.branches:
        b_width = width
        for i, out in enumerate(branch.widths):
            layers.append((f"branch.{branch.name}.{i}", b_width, out))
            b_width = out
        layers.append((f"branch.{branch.name}.out", b_width, len(branch.outputs)))
    return layers


def build_layout(
    config: NetworkConfig, physics: Sequence[Tuple[str, bool]] = ()
) -> ParameterLayout:
    """Block layout: feature layer, trunk, branches, then named physics scalars"""
    blocks: List[ParameterBlock] = []
    offset = 0

    def push(name: str, shape: Tuple[int, ...], trainable: bool = True) -> None:
        nonlocal offset
        blocks.append(ParameterBlock(name, shape, offset, trainable))
        offset += int(np.prod(shape)) if shape else 1

    if config.feature != FeatureMapKind.NONE_DIRECT:
        n_map = config.feature_width
        if config.feature in (FeatureMapKind.FOURIER_PAIRS, FeatureMapKind.RANDOM_FROZEN):
            n_map //= 2
        frozen = config.feature == FeatureMapKind.RANDOM_FROZEN
        push("feature.W", (config.input_dim, n_map), not frozen)
        push("feature.b", (n_map,), not frozen)
    for prefix, fan_in, fan_out in _dense_layers(config):
        push(f"{prefix}.W", (fan_in, fan_out))
        push(f"{prefix}.b", (fan_out,))
    for name, trainable in physics:
        push(f"phys.{name}", (), trainable)
    return ParameterLayout(tuple(blocks))


def init_layer(
    fan_in: int, fan_out: int, scheme: InitScheme, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Weight matrix drawn from the scheme plus a zero bias"""
    if fan_in < 1 or fan_out < 1:
        raise ConfigurationError(
            "Layer fan-in and fan-out must be >= 1", field="fan", value=(fan_in, fan_out)
        )
    std = scheme.std(fan_in, fan_out)
    weight = rng.standard_normal((fan_in, fan_out)) * std
    return weight, np.zeros(fan_out)


def init_parameters(
    config: NetworkConfig,
    rng: np.random.Generator,
    physics: Optional[Dict[str, Tuple[float, bool]]] = None,
) -> ParameterSet:
    """Draw a fresh parameter set; physics maps name -> (initial value, trainable)"""
    physics = physics or {}
    layout = build_layout(config, [(name, flag) for name, (_, flag) in physics.items()])
    params = ParameterSet(layout, np.zeros(layout.size))
    if config.feature != FeatureMapKind.NONE_DIRECT:
        shape = layout.block("feature.W").shape
        weight, _ = init_layer(shape[0], shape[1], config.input_init, rng)
        params.view("feature.W")[...] = weight
    for prefix, fan_in, fan_out in _dense_layers(config):
        weight, _ = init_layer(fan_in, fan_out, config.hidden_init, rng)
        params.view(f"{prefix}.W")[...] = weight
    for name, (value, _) in physics.items():
        params.view(f"phys.{name}")[...] = value
    return params


def _hidden(config: NetworkConfig, z: np.ndarray) -> np.ndarray:
    return taylor.PRIMAL[config.activation](z)


def feature_map_apply(
    kind: FeatureMapKind, w1: Optional[np.ndarray], b1: Optional[np.ndarray], x: np.ndarray
) -> np.ndarray:
    """Input feature map gamma(x)"""
    if kind == FeatureMapKind.NONE_DIRECT:
        return np.asarray(x, dtype=np.float64)
    z = x @ w1 + b1
    if kind == FeatureMapKind.STANDARD_DENSE:
        return np.tanh(z)
    s = z * taylor.TWO_PI
    if kind == FeatureMapKind.SINUSOIDAL:
        return np.sin(s)
    return np.concatenate([np.sin(s), np.cos(s)], axis=-1)


def _as_batch(config: NetworkConfig, x: np.ndarray) -> Tuple[np.ndarray, bool]:
    x = np.ascontiguousarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != config.input_dim:
        raise UsageError(
            "Input dimension does not match network inputs",
            expected=config.input_dim,
            actual=x.shape[-1] if x.ndim else None,
        )
    return x, single


def _check_params(config: NetworkConfig, params: ParameterSet) -> None:
    expected = build_layout(config, [(n, True) for n in params.physics_names()])
    if [b.shape for b in expected.blocks] != [b.shape for b in params.layout.blocks]:
        raise UsageError("Parameter set was not built for this network configuration")


def forward(config: NetworkConfig, params: ParameterSet, x: np.ndarray) -> Dict[str, np.ndarray]:
    """Plain evaluation: named outputs, shape (N,) for a batch or scalars for one point"""
    x, single = _as_batch(config, x)
    _check_params(config, params)
    if config.feature == FeatureMapKind.NONE_DIRECT:
        h = x
    else:
        h = feature_map_apply(config.feature, params.view("feature.W"), params.view("feature.b"), x)
    for i in range(len(config.trunk)):
        h = _hidden(config, h @ params.view(f"trunk.{i}.W") + params.view(f"trunk.{i}.b"))
    outputs: Dict[str, np.ndarray] = {}
    for branch in config.branches:
        hb = h
        for i in range(len(branch.widths)):
            prefix = f"branch.{branch.name}.{i}"
            hb = _hidden(config, hb @ params.view(f"{prefix}.W") + params.view(f"{prefix}.b"))
        prefix = f"branch.{branch.name}.out"
        out = hb @ params.view(f"{prefix}.W") + params.view(f"{prefix}.b")
        for column, name in enumerate(branch.outputs):
            outputs[name] = out[0, column] if single else out[:, column]
    return outputs


def bind_parameters(params: ParameterSet, record: AdjointRecord) -> Dict[str, Jet]:
    """Order-0 jets of every parameter block, created once per record.

    Trainable blocks become leaves of the record; frozen blocks are constants.
    """
    key = ("parameters", id(params))
    if key in record.cache:
        return record.cache[key]
    jets: Dict[str, Jet] = {}
    for block in params.layout.blocks:
        value = params.view(block.name)
        if block.trainable:
            jets[block.name] = record.leaf(value, block.offset, block.name)
        else:
            jets[block.name] = Jet(np.asarray(value, dtype=np.float64).reshape((1,) + block.shape).copy())
    record.cache[key] = jets
    return jets


def physics_jets(params: ParameterSet, record: AdjointRecord) -> Dict[str, Jet]:
    bound = bind_parameters(params, record)
    return {name: bound[f"phys.{name}"] for name in params.physics_names()}


def input_jet(x: np.ndarray, seeded_dim: int, order: int) -> Jet:
    """Jet of a batch of input points seeded along one input dimension"""
    if order < 0 or order > MAX_ORDER:
        raise ConfigurationError(
            f"Jet order must be in [0, {MAX_ORDER}]", field="order", value=order
        )
    coeffs = np.zeros((order + 1,) + x.shape)
    coeffs[0] = x
    if order >= 1:
        coeffs[1][..., seeded_dim] = 1.0
    return Jet(coeffs)


def _jet_stack(config: NetworkConfig, p: Dict[str, Jet], h: Jet) -> Dict[str, Jet]:
    """Feature map, trunk and branches on an input jet; ``p`` holds order-0 parameter jets"""
    if config.feature != FeatureMapKind.NONE_DIRECT:
        z = taylor.linear(h, p["feature.W"], p["feature.b"])
        if config.feature == FeatureMapKind.STANDARD_DENSE:
            h = taylor.tanh(z)
        else:
            s = taylor.scale(z, taylor.TWO_PI)
            if config.feature == FeatureMapKind.SINUSOIDAL:
                h = taylor.sin(s)
            else:
                h = taylor.concat([taylor.sin(s), taylor.cos(s)])
    for i in range(len(config.trunk)):
        z = taylor.linear(h, p[f"trunk.{i}.W"], p[f"trunk.{i}.b"])
        h = taylor.jet_activation(z, config.activation)
    outputs: Dict[str, Jet] = {}
    for branch in config.branches:
        hb = h
        for i in range(len(branch.widths)):
            prefix = f"branch.{branch.name}.{i}"
            hb = taylor.jet_activation(
                taylor.linear(hb, p[f"{prefix}.W"], p[f"{prefix}.b"]), config.activation
            )
        prefix = f"branch.{branch.name}.out"
        out = taylor.linear(hb, p[f"{prefix}.W"], p[f"{prefix}.b"])
        for column, name in enumerate(branch.outputs):
            outputs[name] = taylor.take(out, column)
    return outputs


def forward_with_jets(
    config: NetworkConfig,
    params: ParameterSet,
    x: np.ndarray,
    seeded_dim: int,
    order: int,
    record: Optional[AdjointRecord] = None,
) -> Tuple[Dict[str, Jet], AdjointRecord]:
    """Named output jets along one seeded input dimension, recorded for gradients"""
    x, _ = _as_batch(config, x)
    _check_params(config, params)
    if not 0 <= seeded_dim < config.input_dim:
        raise UsageError(
            "Seeded dimension out of range", expected=config.input_dim, actual=seeded_dim
        )
    if record is None:
        record = AdjointRecord(params.size)
    elif record.n_params != params.size:
        raise UsageError("Adjoint record sized for another parameter set")
    p = bind_parameters(params, record)
    return _jet_stack(config, p, input_jet(x, seeded_dim, order)), record


def forward_draws(
    config: NetworkConfig,
    draws: Sequence[ParameterSet],
    x: np.ndarray,
    seeded_dim: int,
    order: int,
) -> Dict[str, Jet]:
    """Output jets of many parameter sets at once, shape (draws, points) per output.

    Evaluates the same layer stack as ``forward_with_jets`` with every parameter
    block stacked along a leading draw axis. Nothing is recorded.
    """
    x, _ = _as_batch(config, x)
    if not draws:
        raise UsageError("Need at least one parameter set")
    if not 0 <= seeded_dim < config.input_dim:
        raise UsageError(
            "Seeded dimension out of range", expected=config.input_dim, actual=seeded_dim
        )
    _check_params(config, draws[0])
    if any(params.layout != draws[0].layout for params in draws):
        raise UsageError("Parameter sets do not share one layout")
    p: Dict[str, Jet] = {}
    for block in draws[0].layout.blocks:
        if block.name.startswith("phys."):
            continue
        stacked = np.stack([params.view(block.name) for params in draws])
        if len(block.shape) == 1:
            # biases broadcast over the point axis
            stacked = stacked[:, None, :]
        p[block.name] = Jet(stacked[None])
    points = np.broadcast_to(x, (len(draws),) + x.shape)
    return _jet_stack(config, p, input_jet(points, seeded_dim, order))


def config_from_string(
    text: str,
    feature: FeatureMapKind,
    activation: str = "tanh",
    hidden_init: Optional[InitScheme] = None,
    input_init: Optional[InitScheme] = None,
) -> NetworkConfig:
    return NetworkConfig.from_architecture(
        parse_architecture(text), feature, activation, hidden_init, input_init
    )
