"""Named network variants: feature map, hidden activation and initialiser"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional

from pinn_network.architecture import parse_architecture
from pinn_network.model import FeatureMapKind, InitKind, InitScheme, NetworkConfig
from shared.errors import ConfigurationError

logger = logging.getLogger(__name__)

# input-layer std for feature-mapped variants when no bandwidth is given
DEFAULT_SIGMA = 1.0


@dataclass(frozen=True)
class VariantSpec:
    feature: FeatureMapKind
    activation: str
    hidden_init: InitKind


VARIANTS: Dict[str, VariantSpec] = {
    "standard": VariantSpec(FeatureMapKind.STANDARD_DENSE, "tanh", InitKind.XAVIER),
    "sf": VariantSpec(FeatureMapKind.SINUSOIDAL, "tanh", InitKind.XAVIER),
    "ff": VariantSpec(FeatureMapKind.FOURIER_PAIRS, "tanh", InitKind.XAVIER),
    "rf": VariantSpec(FeatureMapKind.RANDOM_FROZEN, "tanh", InitKind.XAVIER),
    "siren": VariantSpec(FeatureMapKind.SINUSOIDAL, "sin", InitKind.HE),
}


def get_variant(name: str) -> VariantSpec:
    if name not in VARIANTS:
        raise ConfigurationError(
            f"Unknown variant '{name}'. Available: {sorted(VARIANTS)}", field="variant", value=name
        )
    return VARIANTS[name]


def input_init_for(variant: str, sigma: Optional[float]) -> InitScheme:
    """An explicit bandwidth always means Normal(sigma) on W1, for every variant"""
    if sigma is not None:
        return InitScheme.normal(sigma)
    if variant == "standard":
        return InitScheme.xavier()
    if variant == "siren":
        return InitScheme.he()
    return InitScheme.normal(DEFAULT_SIGMA)


def build_network_config(
    variant: str,
    architecture: str,
    sigma: Optional[float] = None,
    activation: Optional[str] = None,
    init: Optional[str] = None,
) -> NetworkConfig:
    """Network for a variant, optionally overriding hidden activation and initialiser"""
    spec = get_variant(variant)
    hidden_kind = spec.hidden_init
    if init is not None:
        try:
            hidden_kind = InitKind(init)
        except ValueError:
            raise ConfigurationError(f"Unknown initialiser '{init}'", field="init", value=init)
        if hidden_kind == InitKind.NORMAL:
            raise ConfigurationError(
                "Hidden layers use 'xavier' or 'he'", field="init", value=init
            )
    return NetworkConfig.from_architecture(
        parse_architecture(architecture),
        spec.feature,
        activation=activation or spec.activation,
        hidden_init=InitScheme(kind=hidden_kind),
        input_init=input_init_for(variant, sigma),
    )
