"""Residual operators built from per-dimension jets.

Each operator takes output jets seeded along one input label, reads the raw
derivatives it needs as order-0 jets and returns order-0 residual jets, so the
result stays differentiable with respect to network parameters and trainable
physics scalars.
"""
import logging
from typing import Dict, List, Mapping, Tuple, Union

import numpy as np

from pinn_jets.taylor import Jet, constant, jet_seed, mul, partial, scale, shift

logger = logging.getLogger(__name__)

Scalar = Union[float, Jet]
# field -> seeded label -> jet
FieldJets = Mapping[str, Mapping[str, Jet]]

PI = np.pi


def helmholtz_source(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (1.0 - PI**2 - (6.0 * PI) ** 2) * np.sin(PI * x) * np.sin(6.0 * PI * y)


def _times(c: Scalar, r: Jet) -> Jet:
    if isinstance(c, Jet):
        return mul(c, r)
    return scale(r, float(c))


def _square(c: Scalar) -> Scalar:
    if isinstance(c, Jet):
        return mul(c, c)
    return float(c) ** 2


def residual_convdiff(u_x: Jet, v: Scalar, k: Scalar) -> Jet:
    """v u_x - k u_xx"""
    return _times(v, partial(u_x, 1)) - _times(k, partial(u_x, 2))


def residual_wave(u_t: Jet, u_x: Jet, c: Scalar) -> Jet:
    """u_tt - c^2 u_xx"""
    return partial(u_t, 2) - _times(_square(c), partial(u_x, 2))


def residual_helmholtz(u_x: Jet, u_y: Jet, point: Tuple[np.ndarray, np.ndarray]) -> Jet:
    """u_xx + u_yy + u - q(x, y)"""
    x, y = point
    lap = partial(u_x, 2) + partial(u_y, 2)
    return shift(lap + partial(u_x, 0), -helmholtz_source(np.asarray(x), np.asarray(y)))


def residual_kdv(u_t: Jet, u_x: Jet, nu: Scalar) -> Jet:
    """u_t + u u_x + nu u_xxx"""
    u = partial(u_x, 0)
    return partial(u_t, 1) + mul(u, partial(u_x, 1)) + _times(nu, partial(u_x, 3))


def _momentum(
    jets: FieldJets, field: str, pressure_label: str, inv_re: Scalar, transient: bool
) -> Jet:
    u = partial(jets["u"]["x"], 0)
    v = partial(jets["v"]["x"], 0)
    f_x = jets[field]["x"]
    f_y = jets[field]["y"]
    convection = mul(u, partial(f_x, 1)) + mul(v, partial(f_y, 1))
    diffusion = partial(f_x, 2) + partial(f_y, 2)
    out = convection - _times(inv_re, diffusion) + partial(jets["p"][pressure_label], 1)
    if transient:
        out = partial(jets[field]["t"], 1) + out
    return out


def residual_ns_transient(jets: FieldJets, inv_re: Scalar) -> List[Jet]:
    """Continuity, x- and y-momentum of transient incompressible flow (rho = 1)"""
    continuity = partial(jets["u"]["x"], 1) + partial(jets["v"]["y"], 1)
    return [
        continuity,
        _momentum(jets, "u", "x", inv_re, transient=True),
        _momentum(jets, "v", "y", inv_re, transient=True),
    ]


def residual_ns_steady(jets: FieldJets, inv_re: Scalar) -> List[Jet]:
    """Continuity, x- and y-momentum of steady incompressible flow (rho = 1)"""
    continuity = partial(jets["u"]["x"], 1) + partial(jets["v"]["y"], 1)
    return [
        continuity,
        _momentum(jets, "u", "x", inv_re, transient=False),
        _momentum(jets, "v", "y", inv_re, transient=False),
    ]


def coordinate_jets(
    points: np.ndarray, labels: Tuple[str, ...], seeded: str, order: int
) -> Dict[str, Jet]:
    """Coordinates as jets: the seeded label varies, the others are constants"""
    points = np.atleast_2d(points)
    return {
        label: jet_seed(points[:, i], order) if label == seeded else constant(points[:, i], order)
        for i, label in enumerate(labels)
    }
