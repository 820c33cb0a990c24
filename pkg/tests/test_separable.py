import numpy as np
import pytest

from src.exceptions import GridError, UnsupportedGridError
from src.geometry.grid import build_grid, integrate
from src.geometry.polytope import build_product, interval, simplex, square
from src.potential.potential import SmoothPart, guillemin_potential, hessian_field, positivity_report
from src.separable.projection import (
    SeparablePart,
    canonical_split,
    fiber_average,
    in_M,
    l2_distance,
    minimizer_check,
    project_separable,
    sample_competitors,
    separability_defect,
    separable_parts,
)


@pytest.fixture
def square_grid():
    """Sixteen-cell-per-axis grid on the unit square."""
    return build_grid(square(), 16)


@pytest.fixture
def perturbed(square_grid):
    """Mean-free nonseparable perturbation of the product Fubini-Study potential."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    f = 0.01 * x * (1 - x) * y * (1 - y) * (1 + x + y)
    return guillemin_potential(square(), square_grid).with_correction(f).mean_free()


def test_fiber_averages_of_xy(square_grid):
    """Test f_1 = x/2, f_2 = y/2 for f = xy."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    f = SmoothPart(grid=square_grid, values=x * y)
    first, second = square_grid.factor_grids()

    np.testing.assert_allclose(fiber_average(f, 1), first.nodes[:, 0] / 2)
    np.testing.assert_allclose(fiber_average(f, 2), second.nodes[:, 0] / 2)


def test_defect_of_xy():
    """Test that the defect of xy approaches 1/144 and its distance to P(xy) approaches 5/72."""
    grid = build_grid(square(), 32)
    x, y = grid.nodes[:, 0], grid.nodes[:, 1]
    u = guillemin_potential(square(), grid).with_correction(x * y)

    defect = separability_defect(u.smooth)

    assert defect == pytest.approx(1.0 / 144.0, rel=1e-2)
    assert l2_distance(u, project_separable(u).v) == pytest.approx(5.0 / 72.0, rel=1e-3)


def test_projection_distance_equals_defect(perturbed):
    """Test that dist(u, v) is the separability defect of f."""
    v = project_separable(perturbed).v

    assert l2_distance(perturbed, v) == pytest.approx(separability_defect(perturbed.smooth), rel=1e-12)


def test_distance_exceeds_defect_by_mean_squared(square_grid):
    """Test dist(u, v) = defect + mean^2 vol when f has a mean."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    u = guillemin_potential(square(), square_grid).with_correction(0.01 * x * (1 - x) * y * (1 - y))
    mean = u.smooth.mean()

    distance = l2_distance(u, project_separable(u).v)

    assert mean > 1e-4
    assert distance == pytest.approx(separability_defect(u.smooth) + mean ** 2, rel=1e-10)


def test_separable_mean_free_data_has_zero_defect(square_grid):
    """Test that g(x) + h(y) with zero mean projects to itself."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    u = guillemin_potential(square(), square_grid).with_correction(np.sin(3 * x) + y ** 3).mean_free()

    v = project_separable(u).v

    assert separability_defect(u.smooth) < 1e-28
    np.testing.assert_allclose(v.correction, u.correction, atol=1e-14)


@pytest.mark.parametrize("values", [
    lambda x, y: x + y ** 2 + 1.0,
    lambda x, y: x ** 2 + y,
    lambda x, y: np.exp(x) - 3.0 * np.cos(y),
])
def test_separable_data_with_mean_has_zero_defect(square_grid, values):
    """Test that separable data has zero defect whatever its mean."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    f = SmoothPart(grid=square_grid, values=values(x, y))
    norm = integrate(square_grid, f.values ** 2)

    assert abs(f.mean()) > 0.1
    assert separability_defect(f) <= 1e-12 * norm


def test_nonseparable_data_with_mean_has_positive_defect(square_grid):
    """Test that adding a constant to xy leaves its defect unchanged."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    plain = SmoothPart(grid=square_grid, values=x * y)
    shifted = SmoothPart(grid=square_grid, values=x * y + 5.0)

    assert separability_defect(plain) > 1e-3
    assert separability_defect(shifted) == pytest.approx(separability_defect(plain), rel=1e-10)


def test_projection_is_idempotent(perturbed):
    """Test P(P(u)) = P(u) node-wise on mean-free data."""
    once = project_separable(perturbed).v
    twice = project_separable(once).v

    np.testing.assert_allclose(twice.correction, once.correction, rtol=0, atol=1e-12)


def test_projection_keeps_guillemin_part(perturbed):
    """Test that the projection only replaces the smooth correction."""
    v = project_separable(perturbed).v

    assert v.guillemin.polytope.same_as(perturbed.guillemin.polytope)
    assert v.grid.matches(perturbed.grid)


def test_projection_preserves_positivity(square_grid):
    """Test that projecting randomized valid potentials keeps them valid."""
    rng = np.random.default_rng(7)
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    base = guillemin_potential(square(), square_grid)
    checked = 0
    for _ in range(40):
        a, b, c = rng.normal(size=3)
        amplitude = 0.05 * rng.uniform(0.1, 1.0)
        f = amplitude * (a * x ** 2 * y + b * np.sin(np.pi * x) * np.cos(np.pi * y) + c * (x * y) ** 2)
        u = base.with_correction(f)
        if not positivity_report(hessian_field(u)).is_positive:
            continue
        checked += 1
        assert positivity_report(hessian_field(project_separable(u).v)).is_positive
    assert checked > 30


def test_parts_lift_in_tensor_order(square_grid):
    """Test that the lift of (f_1, f_2) is f_1(x) + f_2(y) node for node."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    parts = separable_parts(SmoothPart(grid=square_grid, values=x * y))

    np.testing.assert_allclose(parts.lift(), x / 2 + y / 2)


def test_canonical_split_equal_means(square_grid):
    """Test that the canonical split moves half the mean into each part."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    f = SmoothPart(grid=square_grid, values=x + 2 * y + 1)

    parts = canonical_split(f)

    np.testing.assert_allclose(parts.lift(), f.values, atol=1e-13)
    integral_1, integral_2 = parts.integrals()
    assert integral_1 == pytest.approx(integral_2)


def test_projection_is_member_of_M(perturbed):
    """Test that v lies in M with the integrals of (f_1, f_2)."""
    projection = project_separable(perturbed)

    report = in_M(projection.v, projection.parts)

    assert report.is_member
    assert report.separability_residual < 1e-20


def test_projection_is_member_of_M_with_mean(square_grid):
    """Test that v lies in M when the correction of u has a nonzero mean."""
    x, y = square_grid.nodes[:, 0], square_grid.nodes[:, 1]
    u = guillemin_potential(square(), square_grid).with_correction(0.01 * x * (1 - x) * y * (1 - y))
    projection = project_separable(u)

    report = in_M(projection.v, projection.parts)

    assert u.smooth.mean() > 1e-4
    assert report.is_member
    assert report.separability_residual < 1e-24
    assert report.integral_gap_1 < 1e-15
    assert report.integral_gap_2 < 1e-15


def test_member_with_mean_zero_change(perturbed):
    """Test that adding a mean-zero function of x keeps w in M."""
    reference = separable_parts(perturbed.smooth)
    first = reference.first_grid.nodes[:, 0]
    parts = SeparablePart(
        first_grid=reference.first_grid,
        second_grid=reference.second_grid,
        first=reference.first + (first - 0.5),
        second=reference.second,
    )
    w = perturbed.with_correction(parts.lift())

    assert in_M(w, reference, parts=parts).is_member


def test_not_member_when_integral_moves(perturbed):
    """Test that shifting g_1 by a constant leaves M."""
    reference = separable_parts(perturbed.smooth)
    parts = reference.shifted(1.0, 0.0)
    w = perturbed.with_correction(parts.lift())

    report = in_M(w, reference, parts=parts)

    assert not report.is_member
    assert report.integral_gap_1 == pytest.approx(1.0)


def test_not_member_when_nonseparable(perturbed):
    """Test that a nonseparable potential is not in M."""
    reference = separable_parts(perturbed.smooth)

    assert not in_M(perturbed, reference).is_member


def test_minimizer_inequality_and_pythagoras(perturbed):
    """Test dist(u, v) <= dist(u, w) for constrained competitors."""
    rng = np.random.default_rng(20240101)
    competitors = sample_competitors(perturbed, 25, rng)

    check = minimizer_check(perturbed, competitors)

    assert check.holds
    assert all(d >= check.distance_to_projection for d in check.competitor_distances)
    assert check.max_pythagoras_residual <= 1e-10
    assert all(o > 0 for o in check.offsets_from_projection)


def test_projection_as_competitor_gives_equality(perturbed):
    """Test that w = v attains the minimum."""
    parts = separable_parts(perturbed.smooth)

    check = minimizer_check(perturbed, [parts])

    assert check.competitor_distances[0] == pytest.approx(check.distance_to_projection, rel=1e-12)
    assert check.offsets_from_projection[0] == pytest.approx(0.0, abs=1e-24)


def test_competitors_satisfy_integral_constraints(perturbed):
    """Test that sampled parts carry the integrals of (f_1, f_2)."""
    reference = separable_parts(perturbed.smooth)
    ref_1, ref_2 = reference.integrals()

    for parts in sample_competitors(perturbed, 5, np.random.default_rng(3)):
        integral_1, integral_2 = parts.integrals()
        assert integral_1 == pytest.approx(ref_1, abs=1e-12)
        assert integral_2 == pytest.approx(ref_2, abs=1e-12)


def test_clipped_factor_product():
    """Test fiber averages on an interval times a triangle."""
    polytope = build_product(interval(), simplex(2))
    grid = build_grid(polytope, 4)
    x = grid.nodes[:, 0]
    f = SmoothPart(grid=grid, values=x * grid.nodes[:, 1])

    first_average = fiber_average(f, 1)
    _, second = grid.factor_grids()
    mean_y = integrate(second, second.nodes[:, 0]) / integrate(second, np.ones(second.size))

    np.testing.assert_allclose(first_average, grid.factor_grids()[0].nodes[:, 0] * mean_y)


def test_fiber_average_needs_product():
    """Test that a simplex grid has no fiber averages."""
    grid = build_grid(simplex(2), 4)

    with pytest.raises(UnsupportedGridError):
        fiber_average(SmoothPart.zeros(grid), 1)


def test_distance_needs_same_grid(perturbed):
    """Test that potentials on different grids are not compared."""
    other = guillemin_potential(square(), build_grid(square(), 8))

    with pytest.raises(GridError, match="do not match"):
        l2_distance(perturbed, other)
