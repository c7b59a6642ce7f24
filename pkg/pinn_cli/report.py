"""SVG charts and a plain-text table from a results directory"""
import logging
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from pinn_cli.runner import SUMMARY_COLUMNS
from shared.errors import ConfigurationError
from shared.plotting import line_chart

logger = logging.getLogger(__name__)

LOSS_TERMS = ("loss_total", "loss_pde", "loss_ic", "loss_bc", "loss_data")
AXES = ("sigma", "lambda")


def _read(path: Path, required: List[str]) -> Optional[pd.DataFrame]:
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError, OSError) as e:
        logger.warning(f"Skipping malformed CSV {path}: {e}")
        return None
    missing = [column for column in required if column not in frame.columns]
    if missing:
        logger.warning(f"Skipping {path}: missing columns {missing}")
        return None
    return frame


def _history_chart(path: Path, frame: pd.DataFrame) -> Optional[Path]:
    series = {}
    for term in LOSS_TERMS:
        values = pd.to_numeric(frame[term], errors="coerce")
        if values.notna().any() and (values > 0).any():
            series[term] = (frame["iteration"].to_numpy(), values.to_numpy())
    if not series:
        logger.warning(f"No finite losses in {path}")
        return None
    return line_chart(
        path.with_name("loss_history.svg"),
        series,
        "iteration",
        "loss",
        title=path.parent.name,
        logy=True,
    )


def _sweep_axis(frame: pd.DataFrame) -> Optional[str]:
    for axis in AXES:
        if pd.to_numeric(frame[axis], errors="coerce").nunique() > 1:
            return axis
    return None


def _axis_chart(path: Path, frame: pd.DataFrame, axis: str) -> Path:
    frame = frame.assign(
        mse=pd.to_numeric(frame["mse"], errors="coerce"),
        **{axis: pd.to_numeric(frame[axis], errors="coerce")},
    )
    # best MSE over seeds at every axis value, one series per variant
    best = frame.groupby(["variant", axis])["mse"].min().reset_index()
    series = {
        variant: (group[axis].to_numpy(), group["mse"].to_numpy())
        for variant, group in best.groupby("variant")
    }
    problems = ", ".join(sorted(frame["problem"].astype(str).unique()))
    return line_chart(
        path.with_name(f"mse_vs_{axis}.svg"),
        series,
        axis,
        "best MSE over seeds",
        title=problems,
        logx=True,
        logy=True,
        markers=True,
    )


def render_report(results_dir: Path) -> Dict[str, Path]:
    """Loss-history charts per run, MSE-vs-axis charts per sweep and summary.txt"""
    results_dir = Path(results_dir)
    if not results_dir.is_dir():
        raise ConfigurationError(
            f"Results directory {results_dir} does not exist", field="results", value=str(results_dir)
        )
    outputs: Dict[str, Path] = {}

    for path in sorted(results_dir.rglob("history.csv")):
        frame = _read(path, ["iteration", *LOSS_TERMS])
        if frame is None or frame.empty:
            continue
        chart = _history_chart(path, frame)
        if chart is not None:
            outputs[f"history:{path.parent.relative_to(results_dir)}"] = chart

    summaries = []
    for path in sorted(results_dir.rglob("summary.csv")):
        frame = _read(path, SUMMARY_COLUMNS)
        if frame is None or frame.empty:
            continue
        summaries.append(frame)
        axis = _sweep_axis(frame)
        if axis is not None:
            outputs[f"{axis}:{path.parent.relative_to(results_dir)}"] = _axis_chart(path, frame, axis)

    if summaries:
        table = pd.concat(summaries, ignore_index=True)
        text = table[SUMMARY_COLUMNS].to_string(index=False, float_format=lambda v: f"{v:.4g}")
        summary = results_dir / "summary.txt"
        summary.write_text(text + "\n")
        outputs["summary"] = summary
    else:
        logger.warning(f"No usable summary.csv under {results_dir}")
    logger.info(f"Report wrote {len(outputs)} files under {results_dir}")
    return outputs

