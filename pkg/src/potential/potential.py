"""Symplectic potentials u = u_G + f on a grid, Hessian fields and positivity."""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from ..constants import ErrorMessages
from ..exceptions import DomainError, GridError
from ..geometry.grid import Grid, integrate
from ..geometry.polytope import DelzantPolytope

logger = logging.getLogger(__name__)


class GuilleminEvaluation(BaseModel):
    """Exact value and Hessian of the Guillemin potential at one point."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: float
    hessian: np.ndarray


class GuilleminPart(BaseModel):
    """u_G(x) = 1/2 sum_k l_k(x) log l_k(x), differentiated in closed form."""

    model_config = ConfigDict(frozen=True)

    polytope: DelzantPolytope

    def _facet_values(self, points: np.ndarray) -> np.ndarray:
        values = self.polytope.evaluate(np.atleast_2d(points))
        bad = np.any(values <= 0, axis=1)
        if np.any(bad):
            point = np.atleast_2d(points)[int(np.argmax(bad))]
            raise DomainError(f"{ErrorMessages.OUTSIDE_POLYTOPE}: {point.tolist()}")
        return values

    def value(self, points: np.ndarray) -> np.ndarray:
        ell = self._facet_values(points)
        return 0.5 * np.sum(ell * np.log(ell), axis=1)

    def hessian(self, points: np.ndarray) -> np.ndarray:
        """1/2 sum_k n_k n_k^T / l_k(x) for each point, shape (m, d, d)."""
        ell = self._facet_values(points)
        normals = self.polytope.normals
        return 0.5 * np.einsum("mk,ki,kj->mij", 1.0 / ell, normals, normals)


class SmoothPart(BaseModel):
    """Node values of the smooth correction f on a grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    values: np.ndarray

    @field_validator("values")
    @classmethod
    def _finite(cls, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.ndim != 1:
            raise ValueError("Smooth part values must be a flat node array")
        if not np.all(np.isfinite(values)):
            raise ValueError("Smooth part has non-finite node values")
        return values

    def model_post_init(self, __context) -> None:
        self.grid.check_field(self.values)

    @classmethod
    def zeros(cls, grid: Grid) -> "SmoothPart":
        return cls(grid=grid, values=np.zeros(grid.size))

    @classmethod
    def from_function(cls, grid: Grid, func) -> "SmoothPart":
        return cls(grid=grid, values=grid.evaluate(func))

    def mean(self) -> float:
        """Quadrature mean of f over P."""
        return integrate(self.grid, self.values) / integrate(self.grid, np.ones(self.grid.size))


class SymplecticPotential(BaseModel):
    """u = u_G + f sampled on a grid of its polytope."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    polytope: DelzantPolytope
    grid: Grid
    guillemin: GuilleminPart
    smooth: SmoothPart

    def model_post_init(self, __context) -> None:
        if not self.grid.polytope.same_as(self.polytope):
            raise GridError(f"{ErrorMessages.GRID_MISMATCH}: grid was built on another polytope")
        if not self.smooth.grid.matches(self.grid):
            raise GridError(f"{ErrorMessages.GRID_MISMATCH}: smooth part lives on another grid")

    @property
    def correction(self) -> np.ndarray:
        return self.smooth.values

    def with_correction(self, values: np.ndarray) -> "SymplecticPotential":
        """Same Guillemin part, new smooth correction."""
        # grid and polytope were checked when self was built
        return SymplecticPotential.model_construct(
            polytope=self.polytope,
            grid=self.grid,
            guillemin=self.guillemin,
            smooth=SmoothPart(grid=self.grid, values=values),
        )

    def mean_free(self) -> "SymplecticPotential":
        """Subtract the mean of f; constants change neither the metric nor S."""
        return self.with_correction(self.correction - self.smooth.mean())

    def values(self) -> np.ndarray:
        """Full potential u_G + f at the nodes."""
        return self.guillemin.value(self.grid.nodes) + self.correction


class HessianField(BaseModel):
    """Per-node symmetric d x d matrices."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    matrices: np.ndarray


class PositivityReport(BaseModel):
    is_positive: bool
    min_eigenvalue: float
    worst_node: List[float]


def guillemin_eval(polytope: DelzantPolytope, x: np.ndarray) -> GuilleminEvaluation:
    """Exact value and Hessian of the Guillemin potential at an interior point."""
    part = GuilleminPart(polytope=polytope)
    point = np.asarray(x, dtype=float).reshape(1, polytope.dim)
    return GuilleminEvaluation(value=float(part.value(point)[0]), hessian=part.hessian(point)[0])


def guillemin_potential(polytope: DelzantPolytope, grid: Grid) -> SymplecticPotential:
    """The canonical potential: Guillemin part with f = 0."""
    return SymplecticPotential(
        polytope=polytope,
        grid=grid,
        guillemin=GuilleminPart(polytope=polytope),
        smooth=SmoothPart.zeros(grid),
    )


def make_product_potential(
    u1: SymplecticPotential,
    u2: SymplecticPotential,
    f: SmoothPart,
) -> SymplecticPotential:
    """u(x, y) = u_1(x) + u_2(y) + f(x, y) on the product grid of f.

    The Guillemin part of a product polytope is the sum of the factor
    Guillemin parts, so only the corrections need combining.
    """
    grid = f.grid
    polytope = grid.polytope
    if not polytope.is_product:
        raise GridError(ErrorMessages.NOT_A_PRODUCT)
    first, second = grid.factor_grids()
    if not u1.grid.matches(first) or not u2.grid.matches(second):
        raise GridError(f"{ErrorMessages.GRID_MISMATCH}: factor potentials do not tile the product grid")

    lifted = (u1.correction[:, None] + u2.correction[None, :]).ravel()
    return SymplecticPotential(
        polytope=polytope,
        grid=grid,
        guillemin=GuilleminPart(polytope=polytope),
        smooth=SmoothPart(grid=grid, values=lifted + f.values),
    )


def hessian_field(u: SymplecticPotential, exact: Optional[np.ndarray] = None) -> HessianField:
    """Exact Guillemin Hessian plus finite-difference Hessian of f at every node.

    `exact` may carry a precomputed Guillemin Hessian of u's grid; the flow
    passes it in since it never changes along a run.
    """
    grid = u.grid
    if exact is None:
        exact = u.guillemin.hessian(grid.nodes)
    return HessianField(grid=grid, matrices=exact + grid.stencils.hessian(u.correction))


def positivity_report(field: HessianField) -> PositivityReport:
    """Smallest eigenvalue over all nodes and where it occurs."""
    eigenvalues = np.linalg.eigvalsh(field.matrices)
    smallest = eigenvalues[:, 0]
    worst = int(np.argmin(smallest))
    min_eigenvalue = float(smallest[worst])
    return PositivityReport(
        is_positive=min_eigenvalue > 0.0,
        min_eigenvalue=min_eigenvalue,
        worst_node=field.grid.nodes[worst].tolist(),
    )
