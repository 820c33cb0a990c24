import numpy as np
import pytest

from src.exceptions import StencilError
from src.geometry.grid import build_grid
from src.geometry.polytope import interval, simplex, square


def test_line_stencils_exact_on_quadratics():
    """Test first and second differences of x^2 at interior and boundary nodes."""
    grid = build_grid(interval(), 8)
    x = grid.nodes[:, 0]
    stencils = grid.stencils

    np.testing.assert_allclose(stencils.derivative(x ** 2, 0), 2 * x, atol=1e-12)
    np.testing.assert_allclose(stencils.second_derivative(x ** 2, 0, 0), 2.0, atol=1e-10)
    assert stencils.fallback_nodes == []


def test_boundary_rows_are_one_sided():
    """Test that the end nodes of a line use forward and backward stencils."""
    grid = build_grid(interval(), 8)
    first = grid.stencils.first[0].toarray()
    h = 1.0 / 8.0

    np.testing.assert_allclose(first[0, :3], np.array([-1.5, 2.0, -0.5]) / h)
    np.testing.assert_allclose(first[-1, -3:], np.array([0.5, -2.0, 1.5]) / h)
    np.testing.assert_allclose(first[3, 2:5], np.array([-0.5, 0.0, 0.5]) / h)


def test_hessian_of_quadratic_on_square():
    """Test the full Hessian, mixed partials included, of a quadratic."""
    grid = build_grid(square(), 6)
    x, y = grid.nodes[:, 0], grid.nodes[:, 1]
    q = x ** 2 + 3 * x * y - y ** 2

    hessian = grid.stencils.hessian(q)

    np.testing.assert_allclose(hessian[:, 0, 0], 2.0, atol=1e-9)
    np.testing.assert_allclose(hessian[:, 0, 1], 3.0, atol=1e-9)
    np.testing.assert_allclose(hessian[:, 1, 0], 3.0, atol=1e-9)
    np.testing.assert_allclose(hessian[:, 1, 1], -2.0, atol=1e-9)


def test_fallback_fit_on_simplex_corners():
    """Test that nodes without a line stencil still differentiate quadratics exactly."""
    grid = build_grid(simplex(2), 8)
    x, y = grid.nodes[:, 0], grid.nodes[:, 1]
    q = 2 * x ** 2 - x * y + 0.5 * y ** 2 + x

    hessian = grid.stencils.hessian(q)

    assert len(grid.stencils.fallback_nodes) > 0
    np.testing.assert_allclose(hessian[:, 0, 0], 4.0, atol=1e-8)
    np.testing.assert_allclose(hessian[:, 0, 1], -1.0, atol=1e-8)
    np.testing.assert_allclose(hessian[:, 1, 1], 1.0, atol=1e-8)


def test_double_divergence_of_polynomial_field():
    """Test sum_jk d_j d_k M^jk for a field with known answer."""
    grid = build_grid(square(), 6)
    x, y = grid.nodes[:, 0], grid.nodes[:, 1]
    matrices = np.zeros((grid.size, 2, 2))
    matrices[:, 0, 0] = x ** 2
    matrices[:, 1, 1] = y ** 2
    matrices[:, 0, 1] = matrices[:, 1, 0] = x * y

    # 2 + 2 + 2 * 1
    np.testing.assert_allclose(grid.stencils.double_divergence(matrices), 6.0, atol=1e-9)


def test_two_nodes_have_no_stencil():
    """Test that a two-node line admits no three-point stencil or fit."""
    grid = build_grid(interval(), 2)

    with pytest.raises(StencilError, match="No difference stencil"):
        grid.stencils


def test_stencils_built_once():
    """Test that the operator set is cached on the grid."""
    grid = build_grid(interval(), 8)

    assert grid.stencils is grid.stencils
