"""Reference solvers used as ground truth.

- ``kdv_reference_solve``: Fourier pseudo-spectral KdV on a periodic interval,
  2/3 de-aliasing, exponential time differencing RK4 with contour-integral
  coefficients. The result is checked against a run with doubled modes and
  halved time step, then cached to an ``.npz`` file keyed by its parameters.
- ``convdiff_fd_reference``: second-order central differences for the steady
  convection-diffusion two-point boundary value problem, solved as a banded
  system.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.linalg import solve_banded

from shared.errors import ConfigurationError, OracleError

logger = logging.getLogger(__name__)

KDV_NU = 0.0005
KDV_T_END = 1.25
KDV_MODES = 512
KDV_DT = 1e-4
KDV_SAMPLES = 251
CONTOUR_POINTS = 32
CONVERGENCE_RMS = 1e-6
MASS_TOLERANCE = 1e-8


@dataclass(frozen=True)
class KdvSolution:
    """u[s, j] at time t[s] and node x[j] of the periodic grid on [-1, 1)"""

    x: np.ndarray
    t: np.ndarray
    u: np.ndarray
    meta: Dict[str, Any]

    def mass(self) -> np.ndarray:
        """Integral of u over the period at every saved time"""
        return self.u.mean(axis=1) * 2.0

    def points(self) -> np.ndarray:
        """Grid nodes as (x, t) rows, x fastest"""
        xx, tt = np.meshgrid(self.x, self.t)
        return np.column_stack([xx.ravel(), tt.ravel()])


def _etdrk4_coefficients(linear: np.ndarray, dt: float) -> Tuple[np.ndarray, ...]:
    circle = np.exp(2j * np.pi * (np.arange(1, CONTOUR_POINTS + 1) - 0.5) / CONTOUR_POINTS)
    lr = dt * linear[:, None] + circle[None, :]
    q = dt * ((np.exp(lr / 2.0) - 1.0) / lr).mean(axis=1)
    f1 = dt * ((-4.0 - lr + np.exp(lr) * (4.0 - 3.0 * lr + lr**2)) / lr**3).mean(axis=1)
    f2 = dt * ((2.0 + lr + np.exp(lr) * (-2.0 + lr)) / lr**3).mean(axis=1)
    f3 = dt * ((-4.0 - 3.0 * lr - lr**2 + np.exp(lr) * (4.0 - lr)) / lr**3).mean(axis=1)
    return q, f1, f2, f3


def _kdv_march(
    modes: int, dt: float, t_end: float, nu: float, samples: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    steps = int(round(t_end / dt))
    if steps % (samples - 1):
        raise ConfigurationError(
            "Time step must divide the sampling interval", field="dt", value=dt
        )
    every = steps // (samples - 1)

    x = -1.0 + 2.0 * np.arange(modes) / modes
    n = np.arange(modes // 2 + 1)
    k = np.pi * n
    keep = n < modes / 3.0
    linear = 1j * nu * k**3
    nonlinear_factor = -0.5j * k * keep

    def nonlinear(v: np.ndarray) -> np.ndarray:
        u = np.fft.irfft(v, n=modes)
        return nonlinear_factor * np.fft.rfft(u * u)

    e = np.exp(dt * linear)
    e2 = np.exp(dt * linear / 2.0)
    q, f1, f2, f3 = _etdrk4_coefficients(linear, dt)

    v = np.fft.rfft(np.cos(np.pi * x))
    saved = [np.fft.irfft(v, n=modes)]
    for step in range(1, steps + 1):
        nv = nonlinear(v)
        a = e2 * v + q * nv
        na = nonlinear(a)
        b = e2 * v + q * na
        nb = nonlinear(b)
        c = e2 * a + q * (2.0 * nb - nv)
        nc = nonlinear(c)
        v = e * v + nv * f1 + 2.0 * (na + nb) * f2 + nc * f3
        if step % every == 0:
            saved.append(np.fft.irfft(v, n=modes))
    u = np.array(saved)
    u[0] = np.cos(np.pi * x)
    t = np.linspace(0.0, t_end, samples)
    if not np.all(np.isfinite(u)):
        raise OracleError("KdV march produced non-finite values", oracle="kdv")
    return x, t, u


def _cache_path(cache_dir: Path, meta: Dict[str, Any]) -> Path:
    key = "_".join(f"{name}{meta[name]}" for name in sorted(meta))
    return cache_dir / f"kdv_{key}.npz"


def kdv_reference_solve(
    modes: int = KDV_MODES,
    t_end: float = KDV_T_END,
    nu: float = KDV_NU,
    dt: float = KDV_DT,
    samples: int = KDV_SAMPLES,
    check_convergence: bool = True,
    cache_dir: Optional[Path] = None,
    refresh: bool = False,
) -> KdvSolution:
    """KdV u_t + u u_x + nu u_xxx = 0 from cos(pi x), periodic on [-1, 1]"""
    meta = {"modes": modes, "dt": dt, "nu": nu, "t_end": t_end, "samples": samples}
    path = _cache_path(Path(cache_dir), meta) if cache_dir is not None else None
    if path is not None and path.exists() and not refresh:
        with np.load(path) as data:
            stored = json.loads(str(data["meta"]))
            if stored == meta:
                logger.info(f"Loaded KdV reference from {path}")
                return KdvSolution(data["x"], data["t"], data["u"], stored)
        logger.warning(f"KdV cache {path} does not match parameters, recomputing")

    logger.info(f"Solving KdV reference: {modes} modes, dt={dt}, nu={nu}")
    x, t, u = _kdv_march(modes, dt, t_end, nu, samples)
    solution = KdvSolution(x, t, u, meta)

    drift = float(np.max(np.abs(solution.mass() - solution.mass()[0])))
    if drift > MASS_TOLERANCE:
        raise OracleError(f"KdV mass drift {drift:.3e} exceeds tolerance", oracle="kdv", residual=drift)

    if check_convergence:
        _, _, fine = _kdv_march(2 * modes, dt / 2.0, t_end, nu, samples)
        rms = float(np.sqrt(np.mean((fine[:, ::2] - u) ** 2)))
        logger.info(f"KdV refinement RMS difference: {rms:.3e}")
        if rms > CONVERGENCE_RMS:
            raise OracleError(
                f"KdV reference not converged under refinement (RMS {rms:.3e})",
                oracle="kdv",
                residual=rms,
            )
        meta = dict(meta, refinement_rms=rms)
        solution = KdvSolution(x, t, u, meta)

    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez(path, x=x, t=t, u=u, meta=json.dumps({k: meta[k] for k in sorted(meta) if k != "refinement_rms"}))
        logger.info(f"Cached KdV reference at {path}")
    return solution


def convdiff_fd_reference(
    nodes: int = 100_001, v: float = 50.0, k: float = 1.0, length: float = 1.0
) -> Tuple[np.ndarray, np.ndarray]:
    """v u' - k u'' = 0 on [0, length], u(0) = 0, u(length) = 1"""
    if nodes < 3:
        raise ConfigurationError("Finite-difference oracle needs >= 3 nodes", field="nodes", value=nodes)
    x = np.linspace(0.0, length, nodes)
    h = x[1] - x[0]
    m = nodes - 2
    lower = -k / h**2 - v / (2.0 * h)
    diag = 2.0 * k / h**2
    upper = -k / h**2 + v / (2.0 * h)
    bands = np.zeros((3, m))
    bands[0, 1:] = upper
    bands[1, :] = diag
    bands[2, :-1] = lower
    rhs = np.zeros(m)
    rhs[-1] = -upper * 1.0
    u = np.empty(nodes)
    u[0], u[-1] = 0.0, 1.0
    u[1:-1] = solve_banded((1, 1), bands, rhs)
    return x, u
