"""Closed-form bounds and expectations for the input gradient at initialisation.

Notation: n is the hidden width, sigma the std of the input-layer weights and
x the input location. Sinusoidal features are sin(2 pi (w x + b)).
"""
import logging
import math
from typing import Tuple

import numpy as np
from scipy import integrate
from scipy.stats import norm

from shared.errors import ConfigurationError, OracleError

logger = logging.getLogger(__name__)

TWO_PI_SQ = 2.0 * math.pi**2
QUAD_TOL = 1e-10
# integrate over [0, SPAN * sigma]; the Gaussian tail beyond is below double precision
SPAN = 8.0


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ConfigurationError("sigma must be > 0", field="sigma", value=sigma)


def _width_factor(n: int) -> float:
    if n < 1:
        raise ConfigurationError("Width must be >= 1", field="n", value=n)
    return 2.0 * n / (n + 1)


def bound_prop1(n: int) -> float:
    """Upper bound on var(du/dx) for a tanh network under Xavier initialisation"""
    return _width_factor(n) * (2.0 / (n + 1))


def expected_sine_integrand(sigma: float, x):
    """E[(2 pi w)^2 cos^2(2 pi w x)] for w ~ Normal(0, sigma^2), in closed form"""
    _check_sigma(sigma)
    x = np.asarray(x, dtype=np.float64)
    a = 8.0 * math.pi**2 * sigma**2 * x**2
    return TWO_PI_SQ * sigma**2 * (1.0 + np.exp(-a) * (1.0 - 2.0 * a))


def bound_prop3(n: int, sigma: float, x):
    """var(du/dx) of a one-hidden-layer sinusoidal-feature network (upper bound when deeper)"""
    return _width_factor(n) * expected_sine_integrand(sigma, x)


def _sech(z: float) -> float:
    e = math.exp(-abs(z))
    return 2.0 * e / (1.0 + e * e)


def expected_tanh_integrand(sigma: float, x: float) -> float:
    """E[w^2 sech^4(w x)] for w ~ Normal(0, sigma^2) by adaptive quadrature"""
    _check_sigma(sigma)
    x = abs(float(x))
    if x == 0.0:
        return sigma**2
    upper = SPAN * sigma
    density = 1.0 / (sigma * math.sqrt(2.0 * math.pi))

    def integrand(w: float) -> float:
        return w * w * _sech(w * x) ** 4 * density * math.exp(-0.5 * (w / sigma) ** 2)

    # sech^4(w x) varies on the scale 1/x; give the adaptive scheme those breakpoints
    breaks = [b / x for b in (1.0, 4.0, 16.0) if b / x < upper]
    result = integrate.quad(
        integrand,
        0.0,
        upper,
        epsabs=QUAD_TOL,
        epsrel=QUAD_TOL,
        limit=200,
        points=breaks or None,
        full_output=1,
    )
    value, error = result[0], result[1]
    # a fourth element carries the failure message
    if len(result) > 3:
        raise OracleError(
            f"Quadrature did not converge for sigma={sigma}, x={x}", oracle="tanh_integrand", residual=error
        )
    # even integrand
    return 2.0 * value


def tanh_integrand_bound(sigma: float, x: float) -> float:
    """1 / (sigma sqrt(2 pi) |x|^3), valid for x != 0"""
    _check_sigma(sigma)
    x = abs(float(x))
    if x == 0.0:
        return math.inf
    return 1.0 / (sigma * math.sqrt(2.0 * math.pi) * x**3)


def freq_coverage_probability(
    n_features: int, sigma: float, target_w: float, rel_tol: float = 0.1
) -> Tuple[float, float]:
    """Chance that one (or at least one of n) Normal(0, sigma^2) weights lands near +-target_w"""
    _check_sigma(sigma)
    if not 0.0 < rel_tol < 1.0:
        raise ConfigurationError("rel_tol must be in (0, 1)", field="rel_tol", value=rel_tol)
    if n_features < 1:
        raise ConfigurationError("n_features must be >= 1", field="n_features", value=n_features)
    low = abs(target_w) * (1.0 - rel_tol) / sigma
    high = abs(target_w) * (1.0 + rel_tol) / sigma
    single = float(2.0 * (norm.sf(low) - norm.sf(high)))
    at_least_one = float(-np.expm1(n_features * np.log1p(-single))) if single < 1.0 else 1.0
    return single, at_least_one


def sin_backward_closed_form(var_u: float) -> float:
    """var(cos u) + E[cos u]^2 = E[cos^2 u] for u ~ Normal(0, var_u)"""
    if not var_u > 0:
        raise ConfigurationError("var_u must be > 0", field="var_u", value=var_u)
    return 0.5 * (1.0 + math.exp(-2.0 * var_u))
