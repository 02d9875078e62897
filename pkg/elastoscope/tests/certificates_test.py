import numpy as np
import pytest

from elastoscope.core.errors import FieldError
from elastoscope.core.grid import Grid
from elastoscope.interfaces.problems import StokesProblem
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.specs import ExcitationSpec
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.certificates import (
    cert_2d,
    cert_3d,
    cross_symbol,
    fibonacci_sphere,
    shares_eigenvector,
)
from elastoscope.methods.differential import partial
from elastoscope.methods.phantoms import make_excitation
from elastoscope.methods.stability import certificate_pass_rate
from elastoscope.methods.stokes import solve_stokes
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

S1 = np.diag([1.0, -1.0, 0.0])
S2 = np.diag([0.0, 1.0, -1.0])


def _rotation(axis, angle: float) -> np.ndarray:
    k = np.asarray(axis, dtype=float)
    k /= np.linalg.norm(k)
    cross = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * cross + (1.0 - np.cos(angle)) * cross @ cross


def _affine(grid: Grid, strain: np.ndarray) -> VectorField:
    """Field whose symmetric gradient is ``strain`` everywhere."""
    coords = np.stack([x - c for x, c in zip(grid.coordinates(), grid.center)])
    return VectorField(grid, np.einsum("ij,j...->i...", strain, coords))


# S2 rotated about (1, 1, 1) shares no eigenvector with S1
S2_GENERIC = _rotation([1.0, 1.0, 1.0], np.pi / 4) @ S1 @ _rotation([1.0, 1.0, 1.0], np.pi / 4).T


def test_fibonacci_sphere_unit_vectors():
    dirs = fibonacci_sphere(500)
    assert dirs.shape == (500, 3)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0)
    assert np.linalg.norm(dirs.mean(axis=0)) < 1e-2


def test_cross_symbol_vanishes_on_eigenvectors():
    dirs = np.eye(3)
    q = cross_symbol([S1[None], S2[None]], dirs)
    np.testing.assert_allclose(q, 0.0, atol=1e-15)


def test_cert_2d_affine_shear():
    grid = Grid.unit(8)
    x, y = grid.coordinates()
    report = cert_2d(VectorField(grid, np.stack([x, -y])))
    assert report.passed
    assert report.inf == pytest.approx(np.sqrt(2.0))
    assert report.sup == pytest.approx(np.sqrt(2.0))
    assert report.constant == pytest.approx(np.sqrt(2.0))
    assert report.details["inf_normal_strain"] == pytest.approx(1.0)


def test_cert_2d_constant_field_fails():
    grid = Grid.unit(8)
    report = cert_2d(VectorField(grid, np.ones((2, *grid.shape))))
    assert not report.passed
    assert report.inf == 0.0
    assert report.constant is None


def test_cert_2d_needs_2d_field():
    grid = Grid.unit(4, dim=3)
    with pytest.raises(FieldError):
        cert_2d(VectorField(grid, np.zeros((3, *grid.shape))))


def test_cert_2d_matches_dense_recomputation():
    grid = Grid.unit(24)
    mu = ScalarField(grid, np.ones(grid.shape))
    F = make_excitation(ExcitationSpec(kind="shear"), grid)
    u1 = solve_stokes(StokesProblem(mu=mu, boundary=F)).u
    d = [[partial(u1.values[i], grid, j) for j in range(2)] for i in range(2)]
    sxy = 0.5 * (d[0][1] + d[1][0])
    frob = np.sqrt(d[0][0] ** 2 + d[1][1] ** 2 + 2.0 * sxy**2)
    report = cert_2d(u1)
    assert report.inf == pytest.approx(frob.min(), rel=1e-12)
    assert report.sup == pytest.approx(frob.max(), rel=1e-12)
    assert report.passed


def test_cert_3d_common_eigenvector_fails():
    grid = Grid.unit(3, dim=3)
    assert shares_eigenvector(S1, S2)
    report = cert_3d(_affine(grid, S1), _affine(grid, S2), samples=512, refine_nodes=4)
    assert report.inf <= 1e-6
    assert not report.passed


def test_cert_3d_generic_pair_passes():
    grid = Grid.unit(3, dim=3)
    assert not shares_eigenvector(S1, S2_GENERIC)
    report = cert_3d(_affine(grid, S1), _affine(grid, S2_GENERIC), samples=1024, refine_nodes=4)
    assert report.passed
    brute = cross_symbol([S1[None], S2_GENERIC[None]], fibonacci_sphere(100_000)).min()
    assert report.inf <= brute + 1e-9
    assert report.details["sampled_inf"] >= report.inf


def test_cert_3d_rotation_invariance():
    grid = Grid.unit(3, dim=3)
    q = _rotation([0.3, -1.0, 0.4], 1.1)
    base = cert_3d(_affine(grid, S1), _affine(grid, S2_GENERIC), samples=1024, refine_nodes=4)
    turned = cert_3d(
        _affine(grid, q @ S1 @ q.T),
        _affine(grid, q @ S2_GENERIC @ q.T),
        samples=1024,
        refine_nodes=4,
    )
    assert turned.inf == pytest.approx(base.inf, abs=1e-6)


def test_cert_3d_more_samples_never_worse():
    grid = Grid.unit(3, dim=3)
    coarse = cert_3d(_affine(grid, S1), _affine(grid, S2_GENERIC), samples=512, refine_nodes=2)
    fine = cert_3d(_affine(grid, S1), _affine(grid, S2_GENERIC), samples=4096, refine_nodes=2)
    assert fine.inf <= coarse.inf + 1e-6


def test_cert_3d_zero_strain():
    grid = Grid.unit(3, dim=3)
    zero = VectorField(grid, np.zeros((3, *grid.shape)))
    report = cert_3d(zero, zero, samples=64, refine_nodes=1)
    assert report.inf == 0.0 and report.sup == 0.0
    assert not report.passed


def test_pass_rate_report_counts():
    grid = Grid.unit(12)
    mu = ScalarField(grid, np.ones(grid.shape))
    report = certificate_pass_rate(grid, mu, draws=3, seed=1)
    assert report.draws == 3
    assert 0 <= report.passes <= 3
    assert report.rate == pytest.approx(report.passes / 3)
    assert len(report.infs) == 3


if __name__ == "__main__":
    test_fibonacci_sphere_unit_vectors()
    test_cross_symbol_vanishes_on_eigenvectors()
    test_cert_2d_affine_shear()
    test_cert_2d_constant_field_fails()
    test_cert_2d_needs_2d_field()
    test_cert_2d_matches_dense_recomputation()
    test_cert_3d_common_eigenvector_fails()
    test_cert_3d_generic_pair_passes()
    test_cert_3d_rotation_invariance()
    test_cert_3d_more_samples_never_worse()
    test_cert_3d_zero_strain()
    test_pass_rate_report_counts()
    logger.info("All certificate tests passed.")
