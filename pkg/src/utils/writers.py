"""
Deterministic CSV and JSON artifacts.

CSV floats use 17 significant digits; JSON floats use Python's shortest
round-trip repr. Neither carries timestamps, so repeated runs on the same
inputs write identical bytes.
"""

import csv
import json
import logging
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

import numpy as np

from ..constants import OutputConstants
from ..curvature.abreu import CurvatureProfile
from ..flow.calabi_flow import FlowReport
from ..geometry.grid import Grid
from ..potential.potential import SmoothPart

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ["t", "energy", "distance", "defect", "min_eig", "dt"]


def format_float(value: Optional[float]) -> str:
    if value is None:
        return ""
    return OutputConstants.FLOAT_FORMAT.format(float(value))


def _plain(value: Any) -> Any:
    """numpy scalars and arrays to plain JSON types."""
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _ensure_parent(path: Path) -> None:
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)


def write_json(path: Union[str, Path], data: Any) -> None:
    path = Path(path)
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_plain)
        f.write("\n")
    logger.info("Wrote %s", path)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence[Optional[float]]]) -> None:
    path = Path(path)
    _ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) for v in row])
    logger.info("Wrote %s", path)


def write_curvature_csv(path: Union[str, Path], grid: Grid, profile: CurvatureProfile) -> None:
    """One row per node: x_1..x_d, S, theta, residual."""
    header = [f"x_{i + 1}" for i in range(grid.dim)] + ["S", "theta", "residual"]
    theta = profile.theta(grid.nodes)
    rows = (
        list(grid.nodes[k]) + [profile.scalar.values[k], theta[k], profile.residual[k]]
        for k in range(grid.size)
    )
    write_csv(path, header, rows)


def write_series_csv(path: Union[str, Path], report: FlowReport) -> None:
    """Flow monitors at every accepted step; absent monitors are left empty."""
    rows = (
        [r.t, r.calabi_energy, r.l2_distance_to_reference, r.separability_defect, r.min_hessian_eigenvalue, r.dt]
        for r in report.records
    )
    write_csv(path, SERIES_COLUMNS, rows)


def write_smooth_csv(path: Union[str, Path], f: SmoothPart) -> None:
    """Node coordinates and values of f in grid order."""
    grid = f.grid
    header = [f"x_{i + 1}" for i in range(grid.dim)] + ["f"]
    write_csv(path, header, (list(grid.nodes[k]) + [f.values[k]] for k in range(grid.size)))


def read_smooth_csv(path: Union[str, Path], grid: Grid) -> SmoothPart:
    """Inverse of write_smooth_csv; node order must match the grid."""
    with open(path, "r", newline="", encoding="utf-8") as f:
        rows: List[List[str]] = list(csv.reader(f))
    values = np.array([float(row[-1]) for row in rows[1:]])
    return SmoothPart(grid=grid, values=values)


def series_path(out: Union[str, Path]) -> Path:
    """Default series path next to a report: report.json -> report_series.csv."""
    out = Path(out)
    return out.with_name(out.stem + OutputConstants.SERIES_SUFFIX)


def correction_path(out: Union[str, Path]) -> Path:
    """report.json -> report_correction.csv."""
    out = Path(out)
    return out.with_name(out.stem + OutputConstants.CORRECTION_SUFFIX)
