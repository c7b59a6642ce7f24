"""Command-line entry point: run, sweep, props, report, oracle and serve"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from pinn_cli.config import ExperimentConfig, Mode, Scale, SweepAxis, SweepSpec, load_config
from pinn_cli.report import render_report
from pinn_cli.runner import run_seeds, run_sweep
from pinn_initlab.suite import PropositionMatrix, run_proposition_suite
from pinn_initlab.suite import SECTIONS
from pinn_network.variants import VARIANTS
from pinn_pde.catalogue import PROBLEMS
from pinn_pde.oracles import kdv_reference_solve
from shared.errors import PinnLabError
from shared.settings import configure_logging, get_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2
# statuses counted as a completed run
SUCCESS_STATUSES = ("ok", "no_reference")


def _experiment_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON document of ExperimentConfig fields")
    parser.add_argument("--problem", choices=sorted(PROBLEMS), help="Benchmark problem preset")
    parser.add_argument("--variant", choices=sorted(VARIANTS), help="Network variant (default: sf)")
    parser.add_argument("--arch", dest="architecture", help="Architecture string, e.g. '(x)-50-50-(u)'")
    parser.add_argument("--sigma", type=float, help="Input-layer bandwidth")
    parser.add_argument("--lambda", dest="lam", type=float, help="PDE loss divisor")
    parser.add_argument("--seeds", type=int, nargs="+", help="Seeds, e.g. --seeds 0 1 2")
    parser.add_argument("--iters", dest="iterations", type=int, help="Training iterations")
    parser.add_argument("--mode", choices=[m.value for m in Mode], help="forward or inverse scenario")
    parser.add_argument("--scale", choices=[s.value for s in Scale], help="Iteration preset")
    parser.add_argument("--activation", choices=["tanh", "sin", "sigmoid"], help="Hidden activation")
    parser.add_argument("--init", choices=["xavier", "he"], help="Hidden-layer initialiser")
    parser.add_argument("--lr", type=float, help="Initial learning rate")
    parser.add_argument("--accumulation", type=int, help="Loss evaluations per ADAM update")
    parser.add_argument(
        "--no-field",
        dest="export_field",
        action="store_false",
        default=None,
        help="Skip the field.csv export",
    )
    parser.add_argument("--out", type=Path, help="Results directory")
    parser.add_argument("--workers", type=int, help="Worker processes (default: PINNLAB_WORKERS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfpinn", description="Sinusoidal-feature PINN experiments and initialisation checks"
    )
    parser.add_argument("--log-level", help="Overrides LOG_LEVEL")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="Train one configuration over its seeds")
    _experiment_arguments(run)

    sweep = commands.add_parser("sweep", help="Sweep sigma or lambda over a log grid")
    _experiment_arguments(sweep)
    sweep.add_argument("--axis", choices=[a.value for a in SweepAxis], default="sigma")
    sweep.add_argument("--low", type=float, help="Range start (default 0.1 for sigma, 1 for lambda)")
    sweep.add_argument("--high", type=float, help="Range end (default 10 for sigma, 1e6 for lambda)")
    sweep.add_argument("--count", type=int, default=25, help="Number of sweep values")
    sweep.add_argument("--linear", action="store_true", help="Linear instead of log spacing")

    props = commands.add_parser("props", help="Initialisation variance checks")
    props.add_argument("--out", type=Path, help="Output directory")
    props.add_argument("--sections", nargs="+", choices=list(SECTIONS), help="Subset of sections")
    props.add_argument("--seed", type=int, default=0)
    props.add_argument("--no-plots", dest="plots", action="store_false")

    report = commands.add_parser("report", help="Charts and summary table for a results directory")
    report.add_argument("results", type=Path, nargs="?", help="Results directory")

    oracle = commands.add_parser("oracle", help="Build or refresh the KdV reference cache")
    oracle.add_argument("--cache", type=Path, help="Cache directory (default: PINNLAB_CACHE_DIR)")
    oracle.add_argument("--refresh", action="store_true", help="Recompute even when cached")
    oracle.add_argument(
        "--no-check", dest="check", action="store_false", help="Skip the refinement convergence check"
    )

    serve = commands.add_parser("serve", help="Start the MCP tool server")
    serve.add_argument("--port", type=int, help="Port (default: PINNLAB_MCP_PORT)")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    fields = [
        "problem",
        "variant",
        "architecture",
        "sigma",
        "lam",
        "seeds",
        "iterations",
        "mode",
        "scale",
        "activation",
        "init",
        "lr",
        "accumulation",
        "export_field",
        "out",
    ]
    values = {name: getattr(args, name) for name in fields}
    return {("lambda" if k == "lam" else k): v for k, v in values.items() if v is not None}


def experiment_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = _overrides(args)
    if getattr(args, "command", None) == "sweep":
        axis = SweepAxis(args.axis)
        default = SweepSpec.default(axis, args.count)
        overrides["sweep"] = SweepSpec(
            axis=axis,
            low=args.low if args.low is not None else default.low,
            high=args.high if args.high is not None else default.high,
            count=args.count,
            log=not args.linear,
        )
    if args.config is not None:
        return load_config(args.config, overrides)
    return ExperimentConfig.model_validate(overrides)


def _report_rows(rows: List[Dict[str, Any]]) -> int:
    for row in rows:
        print(f"{row['run_id']}: status={row['status']} mse={row['mse']}")
    completed = [row for row in rows if row["status"] in SUCCESS_STATUSES]
    if rows and not completed:
        logger.error("Every run failed")
        return EXIT_RUN_FAILURE
    return EXIT_OK


def _command(args: argparse.Namespace) -> int:
    settings = get_settings()
    if args.command == "run":
        result = run_seeds(experiment_from_args(args), workers=args.workers)
        return _report_rows(result.rows)
    if args.command == "sweep":
        result = run_sweep(experiment_from_args(args), workers=args.workers)
        print(f"Wrote {result.out_dir / 'summary.csv'} and {result.out_dir / 'aggregate.csv'}")
        return _report_rows(result.rows)
    if args.command == "props":
        sections = tuple(args.sections) if args.sections else None
        matrix = PropositionMatrix(seed=args.seed, sections=sections)
        out = args.out or settings.output_dir / "props"
        for name, path in run_proposition_suite(matrix, out, plots=args.plots).items():
            print(f"{name}: {path}")
        return EXIT_OK
    if args.command == "report":
        for name, path in render_report(args.results or settings.output_dir).items():
            print(f"{name}: {path}")
        return EXIT_OK
    if args.command == "oracle":
        solution = kdv_reference_solve(
            cache_dir=args.cache or settings.cache_dir,
            refresh=args.refresh,
            check_convergence=args.check,
        )
        print(f"KdV reference: {len(solution.x)} nodes x {len(solution.t)} times, meta={solution.meta}")
        return EXIT_OK
    if args.command == "serve":
        from mcp_pinn.server import main as serve

        serve(port=args.port)
        return EXIT_OK
    raise PinnLabError(f"Unknown command '{args.command}'")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return _command(args)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG_ERROR
    except PinnLabError as e:
        logger.error(f"{e.error_code}: {e.message}")
        return EXIT_CONFIG_ERROR
    except Exception:
        logger.exception("Command failed")
        return EXIT_RUN_FAILURE


if __name__ == "__main__":
    sys.exit(main())
