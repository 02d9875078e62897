import numpy as np
import pytest

from elastoscope.core.grid import Grid
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.differential import (
    curl,
    derivative_matrix,
    divergence,
    gradient,
    partial,
    rotated_divergence,
    stress_divergence,
    sym_grad,
)
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


def test_partial_exact_for_quadratics():
    grid = Grid(cells=(6, 9), extents=(1.0, 2.0))
    x, y = grid.coordinates()
    f = 3.0 * x**2 - x * y + 0.5 * y**2
    np.testing.assert_allclose(partial(f, grid, 0), 6.0 * x - y, atol=1e-12)
    np.testing.assert_allclose(partial(f, grid, 1), -x + y, atol=1e-12)


def test_sparse_derivative_matches_partial():
    grid = Grid(cells=(5, 4, 6))
    rng = np.random.default_rng(3)
    f = rng.standard_normal(grid.shape)
    for axis in range(3):
        sparse = (derivative_matrix(grid, axis) @ f.ravel()).reshape(grid.shape)
        np.testing.assert_allclose(sparse, partial(f, grid, axis), atol=1e-12)


def test_sym_grad_of_affine_field():
    grid = Grid.unit(4)
    x, y = grid.coordinates()
    u = VectorField(grid, np.stack([2.0 * x + 3.0 * y, -y + x]))
    strain = sym_grad(u)
    np.testing.assert_allclose(strain.entry(0, 0), 2.0)
    np.testing.assert_allclose(strain.entry(1, 1), -1.0)
    np.testing.assert_allclose(strain.entry(0, 1), 2.0)
    np.testing.assert_allclose(divergence(u).values, 1.0)
    np.testing.assert_allclose(curl(u).values, -2.0)


def test_discrete_curl_grad_and_div_curl_vanish():
    grid = Grid(cells=(6, 5, 7))
    rng = np.random.default_rng(0)
    phi = ScalarField(grid, rng.standard_normal(grid.shape))
    a = VectorField(grid, rng.standard_normal((3, *grid.shape)))
    assert curl(gradient(phi)).max_abs() < 1e-9
    assert divergence(curl(a)).max_abs() < 1e-9


def test_rotated_divergence_annihilates_2d_curl_of_gradient():
    grid = Grid.unit(8)
    rng = np.random.default_rng(1)
    phi = rng.standard_normal(grid.shape)
    # (d1, -d2) . (d2 phi, d1 phi) = 0 for commuting stencils
    v = VectorField(grid, np.stack([partial(phi, grid, 1), partial(phi, grid, 0)]))
    assert rotated_divergence(v).max_abs() < 1e-9
    with pytest.raises(ValueError):
        rotated_divergence(VectorField(Grid.unit(3, dim=3), np.zeros((3, 4, 4, 4))))


def test_stress_divergence_constant_modulus():
    grid = Grid.unit(8)
    x, y = grid.coordinates()
    # u = (x^2, -2xy) is divergence free; 2 div(sym_grad u) = laplacian(u) = (2, 0)
    u = VectorField(grid, np.stack([x**2, -2.0 * x * y]))
    mu = ScalarField(grid, np.ones(grid.shape))
    out = stress_divergence(mu, u)
    np.testing.assert_allclose(out.values[0], 2.0, atol=1e-10)
    np.testing.assert_allclose(out.values[1], 0.0, atol=1e-10)


if __name__ == "__main__":
    test_partial_exact_for_quadratics()
    test_sparse_derivative_matches_partial()
    test_sym_grad_of_affine_field()
    test_discrete_curl_grad_and_div_curl_vanish()
    test_rotated_divergence_annihilates_2d_curl_of_gradient()
    test_stress_divergence_constant_modulus()
    logger.info("All differential tests passed.")
