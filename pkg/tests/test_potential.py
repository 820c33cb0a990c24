import numpy as np
import pytest
from pydantic import ValidationError

from src.exceptions import DomainError, GridError
from src.geometry.grid import build_grid
from src.geometry.polytope import interval, simplex, square
from src.potential.potential import (
    GuilleminPart,
    SmoothPart,
    SymplecticPotential,
    guillemin_eval,
    guillemin_potential,
    hessian_field,
    make_product_potential,
    positivity_report,
)


@pytest.fixture
def interval_grid():
    """Eight-cell grid on [0, 1]."""
    return build_grid(interval(), 8)


def test_guillemin_on_interval():
    """Test value and Hessian of the Fubini-Study potential at the midpoint."""
    result = guillemin_eval(interval(), np.array([0.5]))

    assert result.value == pytest.approx(0.5 * np.log(0.5))
    np.testing.assert_allclose(result.hessian, [[2.0]])


def test_guillemin_on_simplex():
    """Test the Guillemin Hessian at the simplex barycenter."""
    result = guillemin_eval(simplex(2), np.array([1.0 / 3.0, 1.0 / 3.0]))

    np.testing.assert_allclose(result.hessian, [[3.0, 1.5], [1.5, 3.0]])


def test_guillemin_outside_polytope():
    """Test that boundary and exterior points are refused."""
    with pytest.raises(DomainError, match="open polytope"):
        guillemin_eval(interval(), np.array([1.0]))
    with pytest.raises(DomainError):
        GuilleminPart(polytope=square()).value(np.array([[0.5, 1.5]]))


def test_guillemin_potential_has_zero_correction(interval_grid):
    """Test that the canonical potential has f = 0."""
    u = guillemin_potential(interval(), interval_grid)

    assert np.all(u.correction == 0.0)
    np.testing.assert_allclose(u.values(), GuilleminPart(polytope=interval()).value(interval_grid.nodes))


def test_hessian_field_of_guillemin(interval_grid):
    """Test that the Hessian field of u_G is the exact Hessian 1 / (2 x (1 - x))."""
    u = guillemin_potential(interval(), interval_grid)
    x = interval_grid.nodes[:, 0]

    field = hessian_field(u)

    np.testing.assert_allclose(field.matrices[:, 0, 0], 1.0 / (2 * x * (1 - x)))


def test_positivity_of_guillemin(interval_grid):
    """Test that the Guillemin potential passes the positivity check."""
    report = positivity_report(hessian_field(guillemin_potential(interval(), interval_grid)))

    assert report.is_positive
    assert report.min_eigenvalue == pytest.approx(1.0 / (2 * 0.4375 * 0.5625))


def test_positivity_fails_for_concave_correction():
    """Test that f = -2 x^2 breaks convexity at the midpoint."""
    grid = build_grid(interval(), 5)
    u = guillemin_potential(interval(), grid).with_correction(-2.0 * grid.nodes[:, 0] ** 2)

    report = positivity_report(hessian_field(u))

    assert not report.is_positive
    assert report.min_eigenvalue == pytest.approx(-2.0, abs=1e-9)
    assert report.worst_node == pytest.approx([0.5])


def test_product_potential_on_square():
    """Test u_1(x) + u_2(y) + f on the unit square."""
    grid = build_grid(square(), 8)
    first, second = grid.factor_grids()
    u1 = guillemin_potential(interval(), first)
    u2 = guillemin_potential(interval(), second)
    f = SmoothPart.from_function(grid, lambda p: 0.01 * p[:, 0] * (1 - p[:, 0]) * p[:, 1] * (1 - p[:, 1]))

    u = make_product_potential(u1, u2, f)

    np.testing.assert_allclose(u.correction, f.values)
    assert positivity_report(hessian_field(u)).is_positive


def test_product_potential_lifts_factor_corrections():
    """Test that factor corrections are lifted in tensor order."""
    grid = build_grid(square(), (3, 4))
    first, second = grid.factor_grids()
    u1 = guillemin_potential(interval(), first).with_correction(np.arange(3.0))
    u2 = guillemin_potential(interval(), second).with_correction(10.0 * np.arange(4.0))

    u = make_product_potential(u1, u2, SmoothPart.zeros(grid))

    assert u.correction[0 * 4 + 2] == pytest.approx(20.0)
    assert u.correction[2 * 4 + 1] == pytest.approx(12.0)


def test_product_potential_needs_product():
    """Test that a simplex grid is refused."""
    grid = build_grid(simplex(2), 4)
    u = guillemin_potential(interval(), build_grid(interval(), 4))

    with pytest.raises(GridError, match="product"):
        make_product_potential(u, u, SmoothPart.zeros(grid))


def test_smooth_part_rejects_non_finite(interval_grid):
    """Test that NaN node values are refused."""
    values = np.zeros(interval_grid.size)
    values[3] = np.nan

    with pytest.raises(ValidationError, match="non-finite"):
        SmoothPart(grid=interval_grid, values=values)


def test_smooth_part_length(interval_grid):
    """Test that a correction of the wrong length is refused."""
    with pytest.raises(GridError):
        SmoothPart(grid=interval_grid, values=np.zeros(3))


def test_potential_grid_mismatch(interval_grid):
    """Test that the correction must live on the potential's grid."""
    other = build_grid(interval(), 4)

    with pytest.raises(GridError, match="another grid"):
        SymplecticPotential(
            polytope=interval(),
            grid=interval_grid,
            guillemin=GuilleminPart(polytope=interval()),
            smooth=SmoothPart.zeros(other),
        )


def test_mean_free(interval_grid):
    """Test that mean_free removes the quadrature mean of f only."""
    u = guillemin_potential(interval(), interval_grid).with_correction(interval_grid.nodes[:, 0] + 3.0)

    v = u.mean_free()

    assert v.smooth.mean() == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(v.correction - u.correction, -3.5)


def _interior_hessian_errors(n):
    """Max |FD Hessian - exact Hessian| of the Guillemin values at nodes with every l_k >= 1/4."""
    grid = build_grid(square(), n)
    evaluations = [guillemin_eval(square(), node) for node in grid.nodes]
    values = np.array([e.value for e in evaluations])
    exact = np.stack([e.hessian for e in evaluations])
    errors = np.max(np.abs(grid.stencils.hessian(values) - exact), axis=(1, 2))
    inside = np.min(square().evaluate(grid.nodes), axis=1) >= 0.25
    return {tuple(np.round(node, 12)): error for node, error in zip(grid.nodes[inside], errors[inside])}


def test_guillemin_hessian_matches_finite_differences():
    """Test that differences of u_G converge to the exact Hessian at second order."""
    # every node of the 8-cell grid is also a node of the 24-cell grid
    coarse, fine = _interior_hessian_errors(8), _interior_hessian_errors(24)

    assert len(coarse) == 16
    for node, error in coarse.items():
        assert fine[node] <= 1e-2
        assert fine[node] * 6 <= error
