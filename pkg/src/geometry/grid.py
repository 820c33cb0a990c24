"""Cell-centered grids on polytopes and the midpoint-rule inner product."""

import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr

from ..constants import ErrorMessages, GridConstants, ToleranceConstants
from ..exceptions import GridError, UnsupportedGridError
from .polytope import DelzantPolytope

logger = logging.getLogger(__name__)


class Grid(BaseModel):
    """Cell centers of a uniform lattice over the bounding box that lie strictly inside P.

    Nodes are stored in lexicographic (C) order of their cell multi-indices;
    every node-indexed field in the package follows this order.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    polytope: DelzantPolytope
    n_per_axis: Tuple[int, ...]
    lower: np.ndarray
    spacing: np.ndarray
    mask: np.ndarray
    index: np.ndarray
    cells: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    _stencils: Optional[object] = PrivateAttr(default=None)
    _factors: Optional[tuple] = PrivateAttr(default=None)

    @property
    def dim(self) -> int:
        return self.polytope.dim

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def min_spacing(self) -> float:
        return float(np.min(self.spacing))

    @property
    def is_full_box(self) -> bool:
        """True when every cell of the bounding lattice is a node."""
        return bool(np.all(self.mask))

    @property
    def stencils(self):
        """Finite-difference operators of this grid, built on first use."""
        if self._stencils is None:
            from .stencils import StencilSet

            self._stencils = StencilSet(self)
        return self._stencils

    def factor_grids(self) -> Tuple["Grid", "Grid"]:
        """Factor grids of a product grid, built on first use."""
        if self._factors is None:
            self._factors = tensor_factors(self)
        return self._factors

    def check_field(self, field: np.ndarray) -> np.ndarray:
        """Return field as a float array, raising GridError on a length mismatch."""
        values = np.asarray(field, dtype=float)
        if values.shape != (self.size,):
            raise GridError(f"{ErrorMessages.FIELD_LENGTH}: got {values.shape}, expected ({self.size},)")
        return values

    def matches(self, other: "Grid") -> bool:
        """Same polytope, lattice and node set."""
        return (
            self.polytope.same_as(other.polytope)
            and self.n_per_axis == other.n_per_axis
            and np.allclose(self.lower, other.lower, rtol=0, atol=ToleranceConstants.TENSOR_MATCH)
            and np.allclose(self.spacing, other.spacing, rtol=0, atol=ToleranceConstants.TENSOR_MATCH)
            and self.mask.shape == other.mask.shape
            and bool(np.all(self.mask == other.mask))
        )

    def evaluate(self, func) -> np.ndarray:
        """Sample func(points) -> values at the nodes."""
        return self.check_field(func(self.nodes))


class Moments(BaseModel):
    """Quadrature values of vol, first moments and second moments of a grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    volume: float
    first: np.ndarray
    second: np.ndarray


def _grid_on_lattice(
    polytope: DelzantPolytope,
    n_per_axis: Sequence[int],
    lower: np.ndarray,
    spacing: np.ndarray,
) -> Grid:
    shape = tuple(int(n) for n in n_per_axis)
    axes = [lower[a] + (np.arange(shape[a]) + 0.5) * spacing[a] for a in range(polytope.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=1)

    tolerance = GridConstants.INTERIOR_TOLERANCE * float(np.max(spacing))
    inside = np.all(polytope.evaluate(centers) > tolerance, axis=1)
    if not np.any(inside):
        raise GridError(f"{ErrorMessages.NO_NODES} (cells per axis {list(shape)})")

    mask = inside.reshape(shape)
    index = np.full(shape, -1, dtype=np.int64)
    index[mask] = np.arange(int(inside.sum()))
    nodes = centers[inside]
    weights = np.full(nodes.shape[0], float(np.prod(spacing)))

    return Grid(
        polytope=polytope,
        n_per_axis=shape,
        lower=np.asarray(lower, dtype=float),
        spacing=np.asarray(spacing, dtype=float),
        mask=mask,
        index=index,
        cells=np.argwhere(mask),
        nodes=nodes,
        weights=weights,
    )


def build_grid(polytope: DelzantPolytope, n: Union[int, Sequence[int]]) -> Grid:
    """Cell-centered grid with n cells per axis over the bounding box of P.

    Only centers strictly inside P are kept, so every facet value is positive
    at every node and the Guillemin logarithms stay finite.
    """
    n_per_axis = [int(n)] * polytope.dim if np.isscalar(n) else [int(k) for k in n]
    if len(n_per_axis) != polytope.dim:
        raise GridError(f"Expected {polytope.dim} cell counts, got {len(n_per_axis)}")
    if min(n_per_axis) < GridConstants.MIN_CELLS_PER_AXIS:
        raise GridError(f"Need at least {GridConstants.MIN_CELLS_PER_AXIS} cells per axis, got {n_per_axis}")

    lower, upper = polytope.bounding_box()
    spacing = (upper - lower) / np.asarray(n_per_axis, dtype=float)
    grid = _grid_on_lattice(polytope, n_per_axis, lower, spacing)
    logger.debug("Built grid with %d nodes, cells per axis %s", grid.size, list(grid.n_per_axis))
    return grid


def tensor_factors(grid: Grid) -> Tuple[Grid, Grid]:
    """Factor grids whose tensor product is the given product grid, node for node.

    Node k of the product grid is node (k // N2, k % N2) of the factors.
    """
    polytope = grid.polytope
    if not polytope.is_product:
        raise UnsupportedGridError(ErrorMessages.NOT_A_PRODUCT)
    block1, block2 = polytope.block(1), polytope.block(2)
    if tuple(block1) + tuple(block2) != tuple(range(polytope.dim)):
        raise UnsupportedGridError(f"{ErrorMessages.NON_TENSOR_GRID}: blocks are not contiguous")

    d1 = len(block1)
    factors = []
    for which, axes in ((1, slice(0, d1)), (2, slice(d1, None))):
        try:
            factors.append(_grid_on_lattice(
                polytope.factor(which),
                grid.n_per_axis[axes],
                grid.lower[axes],
                grid.spacing[axes],
            ))
        except GridError as e:
            raise UnsupportedGridError(f"{ErrorMessages.NON_TENSOR_GRID}: {e}") from e

    first, second = factors
    outer = np.multiply.outer(first.mask, second.mask)
    if outer.shape != grid.mask.shape or not np.array_equal(outer, grid.mask):
        raise UnsupportedGridError(ErrorMessages.NON_TENSOR_GRID)
    if first.size * second.size != grid.size:
        raise UnsupportedGridError(ErrorMessages.NON_TENSOR_GRID)
    return first, second


def integrate(grid: Grid, field: np.ndarray) -> float:
    """Midpoint rule: sum_i w_i field_i (numpy pairwise summation, fixed order)."""
    values = grid.check_field(field)
    return float(np.sum(grid.weights * values))


def inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """Discrete L2 inner product of two node fields."""
    return integrate(grid, grid.check_field(a) * grid.check_field(b))


def moments(polytope: DelzantPolytope, grid: Grid) -> Moments:
    """Quadrature volume, first moments and second moments of P on the grid."""
    if not polytope.same_as(grid.polytope):
        raise GridError(f"{ErrorMessages.GRID_MISMATCH}: grid was built on another polytope")
    x = grid.nodes
    d = grid.dim
    first = np.array([integrate(grid, x[:, i]) for i in range(d)])
    second = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            second[i, j] = second[j, i] = integrate(grid, x[:, i] * x[:, j])
    return Moments(volume=integrate(grid, np.ones(grid.size)), first=first, second=second)
