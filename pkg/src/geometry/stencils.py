"""Sparse finite-difference operators on cell-centered grids.

Line stencils follow one policy for every derivative:
centered 3-point where both neighbours are nodes, otherwise one-sided
3-point (forward, then backward). All are exact on quadratics. Nodes where no
line stencil fits along an axis get a least-squares quadratic fit over nearby
nodes, which is exact on quadratics as well. Mixed partials are the
symmetrized product of first-derivative operators.
"""

import itertools
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import sparse

from ..constants import ErrorMessages, GridConstants
from ..exceptions import StencilError

logger = logging.getLogger(__name__)

# (offsets, first-derivative weights * h, second-derivative weights * h**2)
_CENTERED = ((-1, 0, 1), (-0.5, 0.0, 0.5), (1.0, -2.0, 1.0))
_FORWARD = ((0, 1, 2), (-1.5, 2.0, -0.5), (1.0, -2.0, 1.0))
_BACKWARD = ((-2, -1, 0), (0.5, -2.0, 1.5), (1.0, -2.0, 1.0))


class StencilSet:
    """First- and second-derivative operators of one grid, as CSR matrices."""

    def __init__(self, grid):
        self.grid = grid
        self.dim = grid.dim
        self.fallback_nodes: List[int] = []
        self._fit_cache = {}

        d = self.dim
        self.first = [self._line_operator(axis, order=1) for axis in range(d)]
        self.second: List[List[Optional[sparse.csr_matrix]]] = [[None] * d for _ in range(d)]
        for a in range(d):
            self.second[a][a] = self._line_operator(a, order=2)
            for b in range(a + 1, d):
                mixed = 0.5 * (self.first[a] @ self.first[b] + self.first[b] @ self.first[a])
                self.second[a][b] = self.second[b][a] = mixed.tocsr()

        if self.fallback_nodes:
            logger.warning(
                "Least-squares stencil fallback used at %d of %d nodes",
                len(set(self.fallback_nodes)), grid.size,
            )

    def _neighbour(self, cell: np.ndarray, axis: int, shift: int) -> int:
        target = cell.copy()
        target[axis] += shift
        if target[axis] < 0 or target[axis] >= self.grid.n_per_axis[axis]:
            return -1
        return int(self.grid.index[tuple(target)])

    def _line_stencil(self, cell: np.ndarray, axis: int, order: int) -> Optional[Tuple[List[int], Tuple[float, ...]]]:
        h = self.grid.spacing[axis]
        for offsets, first, second in (_CENTERED, _FORWARD, _BACKWARD):
            ids = [self._neighbour(cell, axis, s) for s in offsets]
            if min(ids) >= 0:
                weights = first if order == 1 else second
                return ids, tuple(w / h ** order for w in weights)
        return None

    def _line_operator(self, axis: int, order: int) -> sparse.csr_matrix:
        grid = self.grid
        rows: List[int] = []
        cols: List[int] = []
        data: List[float] = []
        for node, cell in enumerate(grid.cells):
            stencil = self._line_stencil(cell, axis, order)
            if stencil is None:
                ids, weights = self._fitted_stencil(node, axis, order)
                self.fallback_nodes.append(node)
            else:
                ids, weights = stencil
            rows.extend([node] * len(ids))
            cols.extend(ids)
            data.extend(weights)
        return sparse.csr_matrix((data, (rows, cols)), shape=(grid.size, grid.size))

    def _fitted_stencil(self, node: int, axis: int, order: int) -> Tuple[List[int], np.ndarray]:
        """Weights of the derivative of the least-squares quadratic through nearby nodes."""
        ids, pinv = self._quadratic_fit(node)
        d = self.dim
        h = self.grid.spacing
        functional = np.zeros(pinv.shape[0])
        if order == 1:
            functional[1 + axis] = 1.0 / h[axis]
        else:
            # basis: 1, s_a, then s_a * s_b for a <= b in lexicographic order
            position = 1 + d + sum(d - k for k in range(axis))
            functional[position] = 2.0 / h[axis] ** 2
        return ids, pinv.T @ functional

    def _quadratic_fit(self, node: int) -> Tuple[List[int], np.ndarray]:
        if node in self._fit_cache:
            return self._fit_cache[node]
        grid = self.grid
        d = self.dim
        cell = grid.cells[node]
        n_basis = 1 + d + d * (d + 1) // 2
        for radius in GridConstants.FALLBACK_RADII:
            ids = []
            for shift in itertools.product(range(-radius, radius + 1), repeat=d):
                target = cell + np.array(shift)
                if np.any(target < 0) or np.any(target >= np.array(grid.n_per_axis)):
                    continue
                k = int(grid.index[tuple(target)])
                if k >= 0:
                    ids.append(k)
            scaled = (grid.nodes[ids] - grid.nodes[node]) / grid.spacing
            columns = [np.ones(len(ids))] + [scaled[:, a] for a in range(d)]
            columns += [scaled[:, a] * scaled[:, b] for a in range(d) for b in range(a, d)]
            design = np.stack(columns, axis=1)
            if len(ids) >= n_basis and np.linalg.matrix_rank(design) == n_basis:
                self._fit_cache[node] = (ids, np.linalg.pinv(design))
                return self._fit_cache[node]
        raise StencilError(ErrorMessages.STENCIL_DOES_NOT_FIT, grid.nodes[node])

    def derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        return self.first[axis] @ values

    def second_derivative(self, values: np.ndarray, a: int, b: int) -> np.ndarray:
        return self.second[a][b] @ values

    def hessian(self, values: np.ndarray) -> np.ndarray:
        """Per-node (d, d) matrices of second differences of a node field."""
        d = self.dim
        out = np.empty((values.shape[0], d, d))
        for a in range(d):
            for b in range(a, d):
                out[:, a, b] = out[:, b, a] = self.second[a][b] @ values
        return out

    def double_divergence(self, matrices: np.ndarray) -> np.ndarray:
        """sum_{j,k} d_j d_k M^{jk} for a per-node symmetric matrix field."""
        d = self.dim
        total = np.zeros(matrices.shape[0])
        for a in range(d):
            total += self.second[a][a] @ matrices[:, a, a]
            for b in range(a + 1, d):
                total += 2.0 * (self.second[a][b] @ matrices[:, a, b])
        return total
