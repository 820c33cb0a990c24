"""Fiber averages, the projection onto separable potentials and the class M.

All integrals use the grid's midpoint inner product, so the minimizer
inequality and the Pythagoras identity hold at every resolution, not only in
the limit. Averages are the plain fiber averages

    f_1(x) = 1/vol(P_2) int_{P_2} f(x, y) dy,   f_2(y) = 1/vol(P_1) int_{P_1} f(x, y) dx,

so f_1 + f_2 reproduces f exactly when f is separable and mean free. For
separable f with mean m they give f + m, so separability itself is measured
by the residual f - f_1 - f_2 + m, which vanishes exactly on separable f.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..constants import ErrorMessages, ToleranceConstants
from ..exceptions import GridError
from ..geometry.grid import Grid, integrate
from ..potential.potential import SmoothPart, SymplecticPotential

logger = logging.getLogger(__name__)


class SeparablePart(BaseModel):
    """Pair (g_1 on the P_1 grid, g_2 on the P_2 grid) lifting to g_1(x) + g_2(y)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    first_grid: Grid
    second_grid: Grid
    first: np.ndarray
    second: np.ndarray

    def model_post_init(self, __context) -> None:
        self.first_grid.check_field(self.first)
        self.second_grid.check_field(self.second)

    def lift(self) -> np.ndarray:
        """Node values of g_1 + g_2 on the product grid (tensor order)."""
        return (self.first[:, None] + self.second[None, :]).ravel()

    def integrals(self) -> Tuple[float, float]:
        return integrate(self.first_grid, self.first), integrate(self.second_grid, self.second)

    def shifted(self, first_shift: float = 0.0, second_shift: float = 0.0) -> "SeparablePart":
        return self.model_copy(update={
            "first": self.first + first_shift,
            "second": self.second + second_shift,
        })


class SeparableProjection(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    v: SymplecticPotential
    parts: SeparablePart


class MembershipReport(BaseModel):
    is_member: bool
    separability_residual: float
    integral_gap_1: float
    integral_gap_2: float


class MinimizerCheck(BaseModel):
    """Distances from u to its projection and to constrained competitors."""

    distance_to_projection: float
    competitor_distances: List[float]
    offsets_from_projection: List[float]
    max_pythagoras_residual: float
    holds: bool


def _fiber_grids(grid: Grid) -> Tuple[Grid, Grid]:
    return grid.factor_grids()


def fiber_average(f: SmoothPart, block: int) -> np.ndarray:
    """Average of f over the other factor, at every node of factor `block` (1 or 2)."""
    first, second = _fiber_grids(f.grid)
    table = f.values.reshape(first.size, second.size)
    if block == 1:
        volume = float(np.sum(second.weights))
        return np.sum(table * second.weights[None, :], axis=1) / volume
    if block == 2:
        volume = float(np.sum(first.weights))
        return np.sum(table * first.weights[:, None], axis=0) / volume
    raise ValueError(f"Block must be 1 or 2, got {block}")


def separable_parts(f: SmoothPart) -> SeparablePart:
    """Fiber averages (f_1, f_2) of a correction on a product grid."""
    first, second = _fiber_grids(f.grid)
    return SeparablePart(
        first_grid=first,
        second_grid=second,
        first=fiber_average(f, 1),
        second=fiber_average(f, 2),
    )


def canonical_split(f: SmoothPart) -> SeparablePart:
    """Split a correction into parts with equal means.

    g_1 + g_2 only determines (g_1, g_2) up to moving a constant from one
    part to the other; this picks the representative with mean(g_1) = mean(g_2).
    """
    parts = separable_parts(f)
    mean = f.mean()
    return parts.shifted(-0.5 * mean, -0.5 * mean)


def project_separable(u: SymplecticPotential) -> SeparableProjection:
    """v = u_G + f_1(x) + f_2(y): same Guillemin part, separable correction."""
    parts = separable_parts(u.smooth)
    return SeparableProjection(v=u.with_correction(parts.lift()), parts=parts)


def l2_distance(u: SymplecticPotential, w: SymplecticPotential) -> float:
    """Integral of (u - w)^2; the Guillemin parts cancel, so only corrections enter."""
    if not u.grid.matches(w.grid):
        raise GridError(ErrorMessages.GRID_MISMATCH)
    if not u.guillemin.polytope.same_as(w.guillemin.polytope):
        raise GridError(ErrorMessages.DIFFERENT_GUILLEMIN)
    return integrate(u.grid, (u.correction - w.correction) ** 2)


def separability_defect(f: SmoothPart) -> float:
    """Integral of (f - f_1 - f_2 + mean(f))^2, zero exactly when f is separable.

    For mean-free f this is the squared distance to the separable projection;
    otherwise that distance exceeds the defect by mean(f)^2 vol(P).
    """
    return integrate(f.grid, (f.values - separable_parts(f).lift() + f.mean()) ** 2)


def in_M(
    w: SymplecticPotential,
    reference_parts: SeparablePart,
    parts: Optional[SeparablePart] = None,
) -> MembershipReport:
    """Check that w is separable and its parts carry the integrals of the reference parts.

    When `parts` is not given, w's correction is split canonically
    (equal means), which is the representative closest to both constraints.
    """
    energy = integrate(w.grid, w.correction ** 2)
    residual = separability_defect(w.smooth)
    candidate = parts if parts is not None else canonical_split(w.smooth)

    own_1, own_2 = candidate.integrals()
    ref_1, ref_2 = reference_parts.integrals()
    gap_1, gap_2 = abs(own_1 - ref_1), abs(own_2 - ref_2)

    tolerance = ToleranceConstants.MEMBERSHIP
    is_member = (
        residual <= tolerance * (1.0 + energy)
        and gap_1 <= tolerance * (1.0 + abs(ref_1))
        and gap_2 <= tolerance * (1.0 + abs(ref_2))
    )
    return MembershipReport(
        is_member=bool(is_member),
        separability_residual=residual,
        integral_gap_1=gap_1,
        integral_gap_2=gap_2,
    )


def _random_profile(grid: Grid, rng: np.random.Generator, scale: float) -> np.ndarray:
    """Random cubic polynomial plus sine bumps in the grid's normalized coordinates."""
    lower, upper = grid.polytope.bounding_box()
    s = (grid.nodes - lower) / (upper - lower)
    values = np.full(grid.size, rng.normal())
    for axis in range(grid.dim):
        coefficients = rng.normal(size=3)
        values += sum(c * s[:, axis] ** (k + 1) for k, c in enumerate(coefficients))
        for mode in range(1, 4):
            values += rng.normal() / mode ** 2 * np.sin(mode * np.pi * s[:, axis])
    return scale * values


def sample_competitors(
    u: SymplecticPotential,
    count: int,
    rng: np.random.Generator,
    scale: Optional[float] = None,
) -> List[SeparablePart]:
    """Smooth random (g_1, g_2) shifted so their integrals equal those of (f_1, f_2).

    Competitors without the integral constraints (for instance the mean-removed
    split f_1 + f_2 - mean(f)) lie outside M and are never produced.
    """
    reference = separable_parts(u.smooth)
    if scale is None:
        scale = max(float(np.max(np.abs(u.correction))), 1e-3)
    first_grid, second_grid = reference.first_grid, reference.second_grid
    first_volume = integrate(first_grid, np.ones(first_grid.size))
    second_volume = integrate(second_grid, np.ones(second_grid.size))
    ref_1, ref_2 = reference.integrals()

    competitors = []
    for _ in range(count):
        g1 = _random_profile(first_grid, rng, scale)
        g2 = _random_profile(second_grid, rng, scale)
        g1 = g1 + (ref_1 - integrate(first_grid, g1)) / first_volume
        g2 = g2 + (ref_2 - integrate(second_grid, g2)) / second_volume
        competitors.append(SeparablePart(
            first_grid=first_grid, second_grid=second_grid, first=g1, second=g2,
        ))
    return competitors


def minimizer_check(u: SymplecticPotential, competitors: List[SeparablePart]) -> MinimizerCheck:
    """Compare dist(u, v) with dist(u, w) for every competitor w in M.

    Also measures the Pythagoras identity
    dist(u, w) = dist(u, v) + int (f_1 + f_2 - g_1 - g_2)^2.
    """
    projection = project_separable(u)
    base = l2_distance(u, projection.v)
    lifted_v = projection.parts.lift()

    distances, offsets, residuals = [], [], []
    for parts in competitors:
        w = u.with_correction(parts.lift())
        distance = l2_distance(u, w)
        offset = integrate(u.grid, (lifted_v - parts.lift()) ** 2)
        distances.append(distance)
        offsets.append(offset)
        residuals.append(abs(distance - base - offset) / max(distance, 1e-300))

    holds = all(d >= base - 1e-12 for d in distances)
    return MinimizerCheck(
        distance_to_projection=base,
        competitor_distances=distances,
        offsets_from_projection=offsets,
        max_pythagoras_residual=max(residuals, default=0.0),
        holds=holds,
    )
