"""CSV tables with round-trippable numeric formatting.

Cells are formatted here and written with pandas; floats use ``repr`` (the shortest
string that parses back to the same double), so a read-then-write keeps the bytes.
"""
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

Value = Union[int, float, str, bool, None]


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def parse_value(text: str) -> Value:
    """Inverse of ``format_value`` for the types the lab writes"""
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def write_rows(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    """Write dict rows under a fixed column order; missing keys become empty cells"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cells = [[format_value(row.get(column)) for column in columns] for row in rows]
    frame = pd.DataFrame(cells, columns=list(columns), dtype=object)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.debug(f"Wrote {path} ({len(frame)} rows)")
    return path


def read_rows(path: Path) -> Tuple[List[str], List[Dict[str, Value]]]:
    """Columns and typed rows of a table written by ``write_rows``"""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise ValueError(f"{path} is empty") from exc
    short = frame.isna().any(axis=1)
    if short.any():
        line = int(np.flatnonzero(short.to_numpy())[0]) + 2
        raise ValueError(f"{path}:{line} has fewer cells than the {len(frame.columns)} columns")
    rows = [
        {column: parse_value(cell) for column, cell in record.items()}
        for record in frame.to_dict("records")
    ]
    return list(frame.columns), rows


def is_missing(value: Value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))
