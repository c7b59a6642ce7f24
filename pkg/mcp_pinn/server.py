"""PINN Lab MCP Server - Using FastMCP"""
import asyncio
import logging
import os
import sys
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# MCP SDK imports
from mcp.server import FastMCP

# Add the project root to Python path
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from pinn_cli.config import PRESETS, ExperimentConfig, describe_preset
from pinn_cli.runner import run_single
from pinn_initlab.bounds import (
    bound_prop1,
    bound_prop3,
    expected_sine_integrand,
    expected_tanh_integrand,
    freq_coverage_probability,
    tanh_integrand_bound,
)
from pinn_initlab.montecarlo import mc_input_gradient_variance
from pinn_network.variants import build_network_config
from shared.errors import PinnLabError, handle_error, log_and_raise_error
from shared.rng import make_rng
from shared.settings import configure_logging, get_settings

# Load environment variables
load_dotenv()
configure_logging()
logger = logging.getLogger(__name__)

# tool-side cap so one call stays interactive
MAX_TOOL_ITERATIONS = 20_000


class PropositionBoundsInput(BaseModel):
    """Input schema for the closed-form bounds tool"""
    n: int = Field(ge=1, description="Hidden width n")
    sigma: float = Field(gt=0, description="Input-layer bandwidth")
    x: List[float] = Field(min_length=1, description="Input locations")


class FrequencyCoverageInput(BaseModel):
    """Input schema for the frequency coverage tool"""
    n_features: int = Field(ge=1, description="Number of sinusoidal features")
    sigma: float = Field(gt=0, description="Input-layer bandwidth")
    target_w: float = Field(gt=0, description="Frequency |w| to cover")
    rel_tol: float = Field(default=0.1, gt=0, lt=1, description="Relative band around target_w")


class InputGradientVarianceInput(BaseModel):
    """Input schema for the Monte-Carlo variance tool"""
    variant: str = Field(default="sf", description="Network variant, e.g. 'standard' or 'sf'")
    width: int = Field(default=64, ge=1, le=1024, description="Width of every hidden layer")
    hidden_layers: int = Field(default=0, ge=0, le=8, description="Layers after the feature layer")
    sigma: Optional[float] = Field(default=None, ge=0, description="Input std; None keeps the variant default")
    x: List[float] = Field(default=[0.0, 0.5, 1.0], min_length=1, description="Input locations")
    draws: int = Field(default=10_000, ge=1000, le=200_000, description="Independent initialisations")
    seed: int = Field(default=0, description="RNG seed")


class RunExperimentInput(BaseModel):
    """Input schema for the training tool"""
    problem: str = Field(description="Preset name, e.g. 'convdiff'")
    variant: str = Field(default="sf", description="Network variant")
    sigma: Optional[float] = Field(default=None, gt=0, description="Input-layer bandwidth")
    lam: Optional[float] = Field(default=None, gt=0, description="PDE loss divisor lambda")
    iterations: int = Field(default=1000, ge=0, le=MAX_TOOL_ITERATIONS, description="Training iterations")
    mode: str = Field(default="forward", description="forward, inverse-dense or inverse-sparse")
    seed: int = Field(default=0, description="RNG seed")


# Create FastMCP server
app = FastMCP("PINN Lab")


@app.tool("list_presets")
async def list_presets() -> Dict[str, Any]:
    """Published defaults of every benchmark problem.

    Returns:
        Dictionary keyed by preset name
    """
    try:
        return {"presets": {name: describe_preset(name) for name in PRESETS}}
    except PinnLabError as e:
        return {"error": handle_error(e)}


@app.tool("proposition_bounds")
async def proposition_bounds(n: int, sigma: float, x: List[float]) -> Dict[str, Any]:
    """Closed-form input-gradient variance bounds at initialisation.

    Args:
        n: hidden width
        sigma: input-layer bandwidth
        x: input locations

    Returns:
        Dictionary with the tanh-Xavier bound, the one-layer sinusoidal bound and
        both first-layer integrands at every x
    """
    try:
        data = PropositionBoundsInput(n=n, sigma=sigma, x=x)
        return {
            "n": data.n,
            "sigma": data.sigma,
            "tanhXavierBound": bound_prop1(data.n),
            "points": [
                {
                    "x": value,
                    "sinusoidalBound": float(bound_prop3(data.n, data.sigma, value)),
                    "sineIntegrand": float(expected_sine_integrand(data.sigma, value)),
                    "tanhIntegrand": expected_tanh_integrand(data.sigma, value),
                    "tanhIntegrandBound": tanh_integrand_bound(data.sigma, value),
                }
                for value in data.x
            ],
        }
    except (PinnLabError, ValueError) as e:
        return {"error": handle_error(e)}
    except Exception as e:
        log_and_raise_error(PinnLabError(f"Failed to evaluate bounds: {e}"), "Proposition Bounds")


@app.tool("frequency_coverage")
async def frequency_coverage(
    n_features: int, sigma: float, target_w: float, rel_tol: float = 0.1
) -> Dict[str, Any]:
    """Probability that a Normal(sigma) feature frequency lands near target_w.

    Args:
        n_features: number of sinusoidal features
        sigma: input-layer bandwidth
        target_w: frequency to cover, e.g. 3 for sin(6 pi y)
        rel_tol: relative band, default 0.1

    Returns:
        Dictionary with the per-feature and at-least-one probabilities
    """
    try:
        data = FrequencyCoverageInput(
            n_features=n_features, sigma=sigma, target_w=target_w, rel_tol=rel_tol
        )
        single, at_least_one = freq_coverage_probability(
            data.n_features, data.sigma, data.target_w, data.rel_tol
        )
        return {**data.model_dump(), "single": single, "atLeastOne": at_least_one}
    except (PinnLabError, ValueError) as e:
        return {"error": handle_error(e)}


@app.tool("input_gradient_variance")
async def input_gradient_variance(
    variant: str = "sf",
    width: int = 64,
    hidden_layers: int = 0,
    sigma: Optional[float] = None,
    x: Optional[List[float]] = None,
    draws: int = 10_000,
    seed: int = 0,
) -> Dict[str, Any]:
    """Monte-Carlo var(du/dx) over random initialisations, with its closed-form bound.

    Args:
        variant: network variant
        width: width of every layer
        hidden_layers: dense layers after the feature layer
        sigma: input-layer std; omitted keeps the variant default
        x: input locations
        draws: number of initialisations (>= 1000)
        seed: RNG seed

    Returns:
        Dictionary with empirical variance, standard error and bound per x
    """
    try:
        data = InputGradientVarianceInput(
            variant=variant,
            width=width,
            hidden_layers=hidden_layers,
            sigma=sigma,
            x=x if x is not None else [0.0, 0.5, 1.0],
            draws=draws,
            seed=seed,
        )
        widths = "-".join([str(data.width)] * (1 + data.hidden_layers))
        config = build_network_config(data.variant, f"(x)-{widths}-(u)", sigma=data.sigma or None)
        logger.info(f"Estimating input-gradient variance for {data.variant} with {data.draws} draws")
        report = await asyncio.to_thread(
            mc_input_gradient_variance, config, data.sigma, data.x, data.draws, make_rng(data.seed)
        )
        return {
            "variant": data.variant,
            "draws": report.draws,
            "points": [
                {
                    "x": float(report.x[i]),
                    "variance": float(report.variance[i]),
                    "standardError": float(report.standard_error[i]),
                    "bound": float(report.bound[i]),
                }
                for i in range(len(report.x))
            ],
        }
    except (PinnLabError, ValueError) as e:
        return {"error": handle_error(e)}


@app.tool("run_experiment")
async def run_experiment(
    problem: str,
    variant: str = "sf",
    sigma: Optional[float] = None,
    lam: Optional[float] = None,
    iterations: int = 1000,
    mode: str = "forward",
    seed: int = 0,
) -> Dict[str, Any]:
    """Train one PINN and return its summary row.

    Args:
        problem: preset name
        variant: network variant
        sigma: input-layer bandwidth, preset default when omitted
        lam: PDE loss divisor, preset default when omitted
        iterations: training iterations (capped for interactive use)
        mode: forward, inverse-dense or inverse-sparse
        seed: RNG seed

    Returns:
        Summary row: final MSE, per-term losses, physics estimate and status
    """
    try:
        data = RunExperimentInput(
            problem=problem,
            variant=variant,
            sigma=sigma,
            lam=lam,
            iterations=iterations,
            mode=mode,
            seed=seed,
        )
        config = ExperimentConfig(
            problem=data.problem,
            variant=data.variant,
            sigma=data.sigma,
            lam=data.lam,
            iterations=data.iterations,
            mode=data.mode,
            seeds=(data.seed,),
            export_field=False,
        )
        out_dir = get_settings().output_dir / "mcp"
        logger.info(f"Training {data.problem}/{data.variant} for {data.iterations} iterations")
        return await asyncio.to_thread(run_single, config, data.seed, out_dir)
    except (PinnLabError, ValueError) as e:
        return {"error": handle_error(e)}
    except Exception as e:
        log_and_raise_error(PinnLabError(f"Failed to run experiment: {e}"), "Run Experiment")


def main(port: Optional[int] = None):
    """Main entry point"""
    port = port or get_settings().mcp_port

    logger.info(f"Starting PINN Lab MCP server on port {port}")

    try:
        import uvicorn

        # Use the SSE app from FastMCP
        uvicorn.run(app.sse_app(), host="0.0.0.0", port=port)
    except Exception as e:
        log_and_raise_error(PinnLabError(f"Failed to start server: {e}"), "PINN Lab Server Startup")


if __name__ == "__main__":
    main()
