"""Abreu's scalar curvature, the extremal affine function and the Calabi energy."""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..constants import ErrorMessages, ToleranceConstants
from ..exceptions import ProjectionError, SingularHessianError
from ..geometry.grid import Grid, Moments, integrate, moments
from ..potential.potential import HessianField, SymplecticPotential, hessian_field

logger = logging.getLogger(__name__)


class ScalarField(BaseModel):
    """Node values of a scalar field on a grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    values: np.ndarray


class AffineFunction(BaseModel):
    """theta(x) = constant + sum_i linear_i x_i, evaluated exactly."""

    constant: float
    linear: List[float]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.constant + points @ np.asarray(self.linear, dtype=float)


class CurvatureProfile(BaseModel):
    """S, theta and the residual S - theta at every node."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    scalar: ScalarField
    theta: AffineFunction
    residual: np.ndarray
    energy: float


def inverse_hessian(field: HessianField) -> np.ndarray:
    """Per-node inverse U = (D^2 u)^-1, refusing nodes where the Hessian is singular."""
    matrices = field.matrices
    eigenvalues = np.linalg.eigvalsh(matrices)
    magnitude = np.abs(eigenvalues)
    singular = magnitude.min(axis=1) <= ToleranceConstants.SINGULAR_HESSIAN * magnitude.max(axis=1)
    if np.any(singular):
        node = field.grid.nodes[int(np.argmax(singular))]
        raise SingularHessianError(ErrorMessages.SINGULAR_HESSIAN, node)
    inverse = np.linalg.inv(matrices)
    return 0.5 * (inverse + np.swapaxes(inverse, 1, 2))


def curvature_from_hessian(field: HessianField) -> ScalarField:
    """S = -sum_{j,k} d_j d_k U^{jk} with the grid's difference stencils."""
    grid = field.grid
    inverse = inverse_hessian(field)
    return ScalarField(grid=grid, values=-grid.stencils.double_divergence(inverse))


def scalar_curvature(u: SymplecticPotential) -> ScalarField:
    """Abreu's scalar curvature of u at every node."""
    return curvature_from_hessian(hessian_field(u))


def project_affine(scalar: ScalarField, grid: Grid, grid_moments: Optional[Moments] = None) -> AffineFunction:
    """L2 projection onto affine functions through the (d+1) x (d+1) normal equations.

    The residual is orthogonal to 1, x_1, ..., x_d in the grid inner product.
    """
    if grid_moments is None:
        grid_moments = moments(grid.polytope, grid)
    values = grid.check_field(scalar.values)
    d = grid.dim

    normal = np.empty((d + 1, d + 1))
    normal[0, 0] = grid_moments.volume
    normal[0, 1:] = normal[1:, 0] = grid_moments.first
    normal[1:, 1:] = grid_moments.second
    rhs = np.empty(d + 1)
    rhs[0] = integrate(grid, values)
    for i in range(d):
        rhs[1 + i] = integrate(grid, values * grid.nodes[:, i])

    singular = np.linalg.svd(normal, compute_uv=False)
    if singular[-1] <= ToleranceConstants.PROJECTION_RCOND * singular[0]:
        raise ProjectionError(f"{ErrorMessages.SINGULAR_NORMAL_EQUATIONS} ({grid.size} nodes)")
    coefficients = np.linalg.solve(normal, rhs)
    return AffineFunction(constant=float(coefficients[0]), linear=[float(c) for c in coefficients[1:]])


def residual_energy(grid: Grid, scalar: ScalarField, grid_moments: Optional[Moments] = None) -> Tuple[AffineFunction, np.ndarray, float]:
    """theta, S - theta and the integral of (S - theta)^2."""
    theta = project_affine(scalar, grid, grid_moments)
    residual = scalar.values - theta(grid.nodes)
    return theta, residual, integrate(grid, residual ** 2)


def curvature_profile(u: SymplecticPotential, grid_moments: Optional[Moments] = None) -> CurvatureProfile:
    scalar = scalar_curvature(u)
    theta, residual, energy = residual_energy(u.grid, scalar, grid_moments)
    return CurvatureProfile(scalar=scalar, theta=theta, residual=residual, energy=energy)


def calabi_energy(u: SymplecticPotential) -> float:
    """Integral of (S - theta)^2; zero iff S is discretely affine."""
    return curvature_profile(u).energy
