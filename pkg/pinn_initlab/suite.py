"""Proposition check matrix: CSV tables plus optional SVG charts"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from pinn_initlab.bounds import (
    bound_prop3,
    expected_sine_integrand,
    expected_tanh_integrand,
    freq_coverage_probability,
    sin_backward_closed_form,
    tanh_integrand_bound,
)
from pinn_initlab.montecarlo import backward_proportion, mc_input_gradient_variance, mc_integrand
from pinn_network.variants import build_network_config
from shared.csv_io import write_rows
from shared.errors import ConfigurationError
from shared.plotting import line_chart
from shared.rng import spawn_streams

logger = logging.getLogger(__name__)

VARIANCE_COLUMNS = [
    "n",
    "sigma",
    "x",
    "variant",
    "activation",
    "empirical",
    "standard_error",
    "bound",
    "draws",
    "within_bound",
]
SECTIONS = ("prop1", "prop3", "tanh_integrand", "sine_integrand", "backward", "coverage")


def _logspace(low: float, high: float, count: int) -> Tuple[float, ...]:
    return tuple(float(v) for v in np.logspace(np.log10(low), np.log10(high), count))


class PropositionMatrix(BaseModel):
    """Grid of cells for every check; an empty grid switches its section off"""
    model_config = ConfigDict(frozen=True)

    prop1_widths: Tuple[int, ...] = (16, 64, 256)
    prop1_x: Tuple[float, ...] = (0.0, 0.5, 1.0)
    prop1_draws: int = 10_000
    prop3_width: int = 64
    prop3_sigmas: Tuple[float, ...] = (0.5, 1.0, 2.0)
    prop3_x: Tuple[float, ...] = (0.0, 0.3, 1.0)
    prop3_draws: int = 100_000
    integrand_sigmas: Tuple[float, ...] = _logspace(0.1, 100.0, 13)
    integrand_x: Tuple[float, ...] = (0.5, 1.0, 2.0)
    integrand_draws: int = 100_000
    backward_variances: Tuple[float, ...] = _logspace(1e-3, 10.0, 9)
    activations: Tuple[str, ...] = ("tanh", "sin", "sigmoid")
    backward_draws: int = 100_000
    normalize_backward: bool = True
    coverage_sigmas: Tuple[float, ...] = _logspace(0.1, 10.0, 25)
    coverage_features: int = 64
    coverage_target: float = 3.0
    coverage_rel_tol: float = 0.1
    seed: int = 0
    # restricts the run to these sections when set
    sections: Optional[Tuple[str, ...]] = None

    @model_validator(mode="after")
    def _check(self) -> "PropositionMatrix":
        for name in ("prop1_draws", "prop3_draws", "integrand_draws", "backward_draws"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1", field=name, value=getattr(self, name))
        unknown = [name for name in self.sections or () if name not in SECTIONS]
        if unknown:
            raise ConfigurationError(
                f"Unknown sections {unknown}. Available: {list(SECTIONS)}", field="sections", value=unknown
            )
        return self

    def active(self) -> List[str]:
        grids = {
            "prop1": self.prop1_widths and self.prop1_x,
            "prop3": self.prop3_sigmas and self.prop3_x,
            "tanh_integrand": self.integrand_sigmas and self.integrand_x,
            "sine_integrand": self.integrand_sigmas and self.integrand_x,
            "backward": self.backward_variances and self.activations,
            "coverage": self.coverage_sigmas,
        }
        wanted = self.sections if self.sections is not None else SECTIONS
        return [name for name in SECTIONS if grids[name] and name in wanted]


def _variance_rows(report, n: int, sigma, variant: str, activation: str) -> List[Dict]:
    within = report.within_bound()
    return [
        {
            "n": n,
            "sigma": sigma,
            "x": float(report.x[i]),
            "variant": variant,
            "activation": activation,
            "empirical": float(report.variance[i]),
            "standard_error": float(report.standard_error[i]),
            "bound": float(report.bound[i]),
            "draws": report.draws,
            "within_bound": bool(within[i]),
        }
        for i in range(len(report.x))
    ]


def _prop1(matrix: PropositionMatrix, rng: np.random.Generator) -> List[Dict]:
    rows = []
    for n in matrix.prop1_widths:
        config = build_network_config("standard", f"(x)-{n}-{n}-{n}-(u)")
        report = mc_input_gradient_variance(
            config, None, matrix.prop1_x, matrix.prop1_draws, rng, label=f"tanh-xavier n={n}"
        )
        rows.extend(_variance_rows(report, n, None, "standard", "tanh"))
    return rows


def _prop3(matrix: PropositionMatrix, rng: np.random.Generator) -> List[Dict]:
    rows = []
    n = matrix.prop3_width
    for sigma in matrix.prop3_sigmas:
        config = build_network_config("sf", f"(x)-{n}-(u)", sigma=sigma)
        report = mc_input_gradient_variance(
            config, sigma, matrix.prop3_x, matrix.prop3_draws, rng, label=f"sf n={n} sigma={sigma}"
        )
        rows.extend(_variance_rows(report, n, sigma, "sf", "tanh"))
    return rows


def _tanh_integrand(matrix: PropositionMatrix, rng: np.random.Generator) -> List[Dict]:
    rows = []
    for x in matrix.integrand_x:
        for sigma in matrix.integrand_sigmas:
            mc, se = mc_integrand("tanh", sigma, x, matrix.integrand_draws, rng)
            rows.append(
                {
                    "sigma": sigma,
                    "x": x,
                    "quadrature": expected_tanh_integrand(sigma, x),
                    "bound": tanh_integrand_bound(sigma, x),
                    "mc": mc,
                    "mc_se": se,
                }
            )
    return rows


def _sine_integrand(matrix: PropositionMatrix, rng: np.random.Generator) -> List[Dict]:
    rows = []
    for x in matrix.integrand_x:
        for sigma in matrix.integrand_sigmas:
            mc, se = mc_integrand("sine", sigma, x, matrix.integrand_draws, rng)
            rows.append(
                {
                    "sigma": sigma,
                    "x": x,
                    "closed_form": float(expected_sine_integrand(sigma, x)),
                    "mc": mc,
                    "mc_se": se,
                }
            )
    return rows


def _backward(matrix: PropositionMatrix, rng: np.random.Generator) -> List[Dict]:
    rows = []
    for activation in matrix.activations:
        for var_u in matrix.backward_variances:
            value, se = backward_proportion(
                activation, var_u, matrix.backward_draws, rng, normalize=matrix.normalize_backward
            )
            rows.append(
                {
                    "activation": activation,
                    "var_u": var_u,
                    "value": value,
                    "standard_error": se,
                    "normalized": matrix.normalize_backward,
                    "closed_form": sin_backward_closed_form(var_u) if activation == "sin" else None,
                }
            )
    return rows


def _coverage(matrix: PropositionMatrix, rng: np.random.Generator) -> List[Dict]:
    rows = []
    for sigma in matrix.coverage_sigmas:
        single, at_least_one = freq_coverage_probability(
            matrix.coverage_features, sigma, matrix.coverage_target, matrix.coverage_rel_tol
        )
        rows.append(
            {
                "sigma": sigma,
                "n_features": matrix.coverage_features,
                "target_w": matrix.coverage_target,
                "rel_tol": matrix.coverage_rel_tol,
                "single": single,
                "at_least_one": at_least_one,
            }
        )
    return rows


_RUNNERS = {
    "prop1": _prop1,
    "prop3": _prop3,
    "tanh_integrand": _tanh_integrand,
    "sine_integrand": _sine_integrand,
    "backward": _backward,
    "coverage": _coverage,
}

_COLUMNS = {
    "prop1": VARIANCE_COLUMNS,
    "prop3": VARIANCE_COLUMNS,
    "tanh_integrand": ["sigma", "x", "quadrature", "bound", "mc", "mc_se"],
    "sine_integrand": ["sigma", "x", "closed_form", "mc", "mc_se"],
    "backward": ["activation", "var_u", "value", "standard_error", "normalized", "closed_form"],
    "coverage": ["sigma", "n_features", "target_w", "rel_tol", "single", "at_least_one"],
}


def _group(rows: List[Dict], key: str, x: str, y: str) -> Dict[str, Tuple[List[float], List[float]]]:
    series: Dict[str, Tuple[List[float], List[float]]] = {}
    for row in rows:
        xs, ys = series.setdefault(f"{key}={row[key]}", ([], []))
        xs.append(row[x])
        ys.append(row[y])
    return series


def _charts(tables: Dict[str, List[Dict]], out_dir: Path) -> Dict[str, Path]:
    charts: Dict[str, Path] = {}
    if "prop1" in tables:
        series = _group(tables["prop1"], "x", "n", "empirical")
        bounds = sorted({(row["n"], row["bound"]) for row in tables["prop1"]})
        series["bound"] = ([b[0] for b in bounds], [b[1] for b in bounds])
        charts["prop1"] = line_chart(
            out_dir / "prop1.svg", series, "width n", "var(du/dx)", logx=True, logy=True, markers=True
        )
    if "prop3" in tables:
        series = _group(tables["prop3"], "sigma", "x", "empirical")
        for sigma in sorted({row["sigma"] for row in tables["prop3"]}):
            grid = np.linspace(0.0, max(row["x"] for row in tables["prop3"]), 101)
            n = tables["prop3"][0]["n"]
            series[f"bound sigma={sigma}"] = (grid, bound_prop3(n, sigma, grid))
        charts["prop3"] = line_chart(out_dir / "prop3.svg", series, "x", "var(du/dx)", logy=True, markers=True)
    if "tanh_integrand" in tables:
        charts["tanh_integrand"] = line_chart(
            out_dir / "tanh_integrand.svg",
            _group(tables["tanh_integrand"], "x", "sigma", "quadrature"),
            "sigma",
            "E[w^2 sech^4(wx)]",
            logx=True,
            logy=True,
        )
    if "sine_integrand" in tables:
        charts["sine_integrand"] = line_chart(
            out_dir / "sine_integrand.svg",
            _group(tables["sine_integrand"], "x", "sigma", "closed_form"),
            "sigma",
            "E[(2 pi w)^2 cos^2(2 pi w x)]",
            logx=True,
            logy=True,
        )
    if "backward" in tables:
        charts["backward"] = line_chart(
            out_dir / "backward.svg",
            _group(tables["backward"], "activation", "var_u", "value"),
            "var(u)",
            "var(f') + E[f']^2",
            logx=True,
            markers=True,
        )
    if "coverage" in tables:
        rows = tables["coverage"]
        charts["coverage"] = line_chart(
            out_dir / "coverage.svg",
            {
                "single": ([r["sigma"] for r in rows], [r["single"] for r in rows]),
                "at least one": ([r["sigma"] for r in rows], [r["at_least_one"] for r in rows]),
            },
            "sigma",
            "probability",
            title=f"|w| within {rows[0]['rel_tol']:.0%} of {rows[0]['target_w']}",
            logx=True,
        )
    return charts


def run_proposition_suite(
    matrix: PropositionMatrix, out_dir: Path, plots: bool = True
) -> Dict[str, Path]:
    """Run every active section, write one CSV per section and return their paths"""
    sections = matrix.active()
    if not sections:
        raise ConfigurationError("Proposition matrix is empty: nothing to run")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    streams = dict(zip(SECTIONS, spawn_streams(matrix.seed, len(SECTIONS))))

    tables: Dict[str, List[Dict]] = {}
    outputs: Dict[str, Path] = {}
    for name in sections:
        logger.info(f"Running proposition section '{name}'")
        tables[name] = _RUNNERS[name](matrix, streams[name])
        outputs[name] = write_rows(out_dir / f"{name}.csv", _COLUMNS[name], tables[name])

    protocol = out_dir / "protocol.json"
    protocol.write_text(json.dumps({"sections": sections, **matrix.model_dump()}, indent=2))
    outputs["protocol"] = protocol
    if plots:
        for name, path in _charts(tables, out_dir).items():
            outputs[f"{name}_chart"] = path
    logger.info(f"Proposition suite wrote {len(outputs)} files to {out_dir}")
    return outputs
