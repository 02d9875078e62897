import numpy as np
import pytest

from elastoscope.core.errors import InvalidProblem
from elastoscope.core.grid import Grid
from elastoscope.interfaces.problems import InverseProblem, MeasurementChannel, StokesProblem
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.specs import ExcitationSpec, Inclusion, PhantomSpec
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.adjoint import evaluate_J, gradient_J, misfit_and_gradient, solve_adjoint
from elastoscope.methods.landweber import project
from elastoscope.methods.phantoms import make_excitation, make_phantom
from elastoscope.methods.stokes import StokesOperator, solve_stokes
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

OMEGA = 1.0


def _inverse_problem(grid: Grid, specs: list[ExcitationSpec], scale: float = 1.0) -> InverseProblem:
    """Data computed on the reconstruction grid itself (no refinement)."""
    center = list(grid.center)
    phantom = PhantomSpec(inclusions=[Inclusion(center=center, radius=0.15, contrast=0.2)])
    mu_true = make_phantom(phantom, grid)
    channels = []
    for spec in specs:
        F = make_excitation(spec, grid) * scale
        sol = solve_stokes(StokesProblem(mu=mu_true, omega=OMEGA, boundary=F))
        channels.append(MeasurementChannel(boundary=F, measured=sol.u))
    return InverseProblem(
        grid=grid,
        channels=tuple(channels),
        mu_trace=mu_true,
        omega=OMEGA,
        mu_true=mu_true,
        two_channel=grid.dim == 3 and len(channels) == 2,
    )


def _background(ip: InverseProblem) -> ScalarField:
    return project(np.ones(ip.grid.shape), ip)


def _smooth_direction(grid: Grid, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    x, y = grid.coordinates()
    out = np.zeros(grid.shape)
    for k in range(1, 4):
        for m in range(1, 4):
            out += rng.standard_normal() * np.sin(k * np.pi * x) * np.sin(m * np.pi * y)
    out[grid.boundary_mask] = 0.0
    return out


def test_misfit_vanishes_at_truth():
    ip = _inverse_problem(Grid.unit(12), [ExcitationSpec(kind="shear")])
    evaluation = misfit_and_gradient(ip.mu_true, ip)
    assert evaluation.value < 1e-20
    assert evaluation.gradient.max_abs() < 1e-8


def test_misfit_matches_trapezoid_sum():
    grid = Grid.unit(12)
    ip = _inverse_problem(grid, [ExcitationSpec(kind="shear")])
    mu = _background(ip)
    u = solve_stokes(StokesProblem(mu=mu, omega=OMEGA, boundary=ip.channels[0].boundary,
                                   mu_ref=ip.mu_ref)).u
    residual = u.values - ip.channels[0].measured.values
    expected = 0.5 * np.sum(grid.trapezoid_weights * np.sum(residual**2, axis=0))
    assert evaluate_J(mu, ip) == pytest.approx(expected, rel=1e-10)


def _check_central_differences(n: int, directions: int, h: float) -> None:
    grid = Grid.unit(n)
    ip = _inverse_problem(grid, [ExcitationSpec(kind="shear")])
    mu = _background(ip)
    evaluation = misfit_and_gradient(mu, ip)
    assert evaluation.gradient.boundary_max_abs() == 0.0
    np.testing.assert_array_equal(gradient_J(mu, ip).values, evaluation.gradient.values)
    for seed in range(directions):
        d = _smooth_direction(grid, seed)
        d *= 0.1 / np.max(np.abs(d))
        plus = evaluate_J(mu.with_values(mu.values + h * d), ip)
        minus = evaluate_J(mu.with_values(mu.values - h * d), ip)
        fd = (plus - minus) / (2.0 * h)
        analytic = float(np.sum(grid.trapezoid_weights * evaluation.gradient.values * d))
        logger.info(f"direction {seed}: fd {fd:.8e} analytic {analytic:.8e}")
        assert analytic == pytest.approx(fd, rel=1e-3)


def test_gradient_matches_central_differences():
    _check_central_differences(16, directions=5, h=1e-4)


@pytest.mark.slow
def test_gradient_matches_central_differences_at_full_resolution():
    _check_central_differences(64, directions=10, h=1e-5)


def test_gradient_scales_quadratically_with_data():
    grid = Grid.unit(10)
    specs = [ExcitationSpec(kind="shear")]
    ip1 = _inverse_problem(grid, specs)
    ip3 = _inverse_problem(grid, specs, scale=3.0)
    mu = _background(ip1)
    g1 = misfit_and_gradient(mu, ip1).gradient
    g3 = misfit_and_gradient(mu, ip3).gradient
    np.testing.assert_allclose(g3.values, 9.0 * g1.values, rtol=1e-7, atol=1e-12 * g3.max_abs())


def test_adjoint_pairing_is_symmetric():
    grid = Grid.unit(10)
    x, y = grid.coordinates()
    mu = ScalarField(grid, 1.0 + 0.2 * x * y)
    op = StokesOperator(mu, OMEGA, mu_ref=1.0)
    rng = np.random.default_rng(5)
    s1 = VectorField(grid, rng.standard_normal((2, *grid.shape)))
    s2 = VectorField(grid, rng.standard_normal((2, *grid.shape)))
    v1 = solve_adjoint(mu, s1, OMEGA, mu_ref=1.0, operator=op).u
    v2 = solve_adjoint(mu, s2, OMEGA, mu_ref=1.0, operator=op).u
    assert v1.boundary_max_abs() == 0.0
    left = float(np.sum(s1.values * v2.values))
    right = float(np.sum(s2.values * v1.values))
    assert left == pytest.approx(right, rel=1e-9)


def test_zero_residual_gives_zero_adjoint():
    grid = Grid.unit(8)
    mu = ScalarField(grid, np.ones(grid.shape))
    adj = solve_adjoint(mu, VectorField(grid, np.zeros((2, *grid.shape))), OMEGA)
    assert adj.u.max_abs() == 0.0


def test_two_channel_gradient_is_sum_of_channels():
    grid = Grid.unit(6, dim=3)
    specs = [ExcitationSpec(kind="shear", axes=(0, 1)), ExcitationSpec(kind="shear", axes=(1, 2))]
    ip = _inverse_problem(grid, specs)
    assert ip.two_channel
    mu = _background(ip)
    both = misfit_and_gradient(mu, ip)
    parts = [misfit_and_gradient(mu, ip.with_channels((ch,))) for ch in ip.channels]
    assert both.value == pytest.approx(sum(p.value for p in parts), rel=1e-10)
    np.testing.assert_allclose(
        both.gradient.values,
        parts[0].gradient.values + parts[1].gradient.values,
        rtol=1e-8,
        atol=1e-12 * both.gradient.max_abs(),
    )


def test_inadmissible_modulus_rejected():
    ip = _inverse_problem(Grid.unit(8), [ExcitationSpec(kind="shear")])
    too_soft = ScalarField(ip.grid, np.full(ip.grid.shape, 0.5 * ip.mu_min))
    with pytest.raises(InvalidProblem):
        evaluate_J(too_soft, ip)


if __name__ == "__main__":
    test_misfit_vanishes_at_truth()
    test_misfit_matches_trapezoid_sum()
    test_gradient_matches_central_differences()
    test_gradient_scales_quadratically_with_data()
    test_adjoint_pairing_is_symmetric()
    test_zero_residual_gives_zero_adjoint()
    test_two_channel_gradient_is_sum_of_channels()
    test_inadmissible_modulus_rejected()
    logger.info("All adjoint tests passed.")
