"""
Smooth perturbations of the Guillemin potential that vanish on the boundary.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from ..exceptions import RejectedInputError
from ..geometry.grid import Grid
from ..potential.potential import SmoothPart

logger = logging.getLogger(__name__)


def bubble(grid: Grid) -> np.ndarray:
    """Product of all facet values at the nodes; zero on every facet of P."""
    return np.prod(grid.polytope.evaluate(grid.nodes), axis=1)


def polynomial_perturbation(
    grid: Grid,
    amplitude: float,
    coeffs: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """amplitude * prod_k l_k(x) * (c_0 + sum_i c_i x_i).

    Default coefficients are all 1, which on the unit square gives the
    nonseparable amplitude * x(1-x) y(1-y) (1 + x + y).
    """
    d = grid.dim
    if coeffs is None:
        coeffs = [1.0] * (d + 1)
    if len(coeffs) != d + 1:
        raise RejectedInputError(f"Polynomial perturbation needs {d + 1} coefficients, got {len(coeffs)}")
    c = np.asarray(coeffs, dtype=float)
    return amplitude * bubble(grid) * (c[0] + grid.nodes @ c[1:])


def bump_perturbation(
    grid: Grid,
    amplitude: float,
    coeffs: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """amplitude * (prod_k l_k(x))**p with p = coeffs[0] (default 2)."""
    power = 2.0 if not coeffs else float(coeffs[0])
    if power < 1.0:
        raise RejectedInputError(f"Bump power must be at least 1, got {power}")
    return amplitude * bubble(grid) ** power


_KINDS: Dict[str, Callable[[Grid, float, Optional[Sequence[float]]], np.ndarray]] = {
    "polynomial": polynomial_perturbation,
    "bump": bump_perturbation,
}


def available_kinds() -> List[str]:
    return list(_KINDS.keys())


def build_perturbation(
    grid: Grid,
    kind: str = "polynomial",
    amplitude: float = 0.01,
    coeffs: Optional[Sequence[float]] = None,
) -> SmoothPart:
    """Perturbation of the given kind as a smooth correction on the grid."""
    if kind not in _KINDS:
        raise RejectedInputError(f"Unknown perturbation kind: {kind}. Available kinds: {available_kinds()}")
    values = _KINDS[kind](grid, amplitude, coeffs)
    logger.debug("Built %s perturbation, amplitude %g, max |f| %.3e", kind, amplitude, float(np.max(np.abs(values))))
    return SmoothPart(grid=grid, values=values)
