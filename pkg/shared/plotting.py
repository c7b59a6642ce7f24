"""Minimal SVG line charts (polylines, optional log axes, legend)"""
import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

logger = logging.getLogger(__name__)

Series = Tuple[Sequence[float], Sequence[float]]


def line_chart(
    path: Path,
    series: Mapping[str, Series],
    xlabel: str,
    ylabel: str,
    title: Optional[str] = None,
    logx: bool = False,
    logy: bool = False,
    markers: bool = False,
) -> Path:
    """One polyline per named series, saved as SVG"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        for label, (x, y) in series.items():
            x = np.asarray(x, dtype=np.float64)
            y = np.asarray(y, dtype=np.float64)
            keep = np.isfinite(x) & np.isfinite(y)
            if logy:
                keep &= y > 0
            if logx:
                keep &= x > 0
            ax.plot(x[keep], y[keep], marker="o" if markers else None, markersize=3, label=label)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg")
    finally:
        plt.close(fig)
    logger.debug(f"Wrote chart {path}")
    return path
