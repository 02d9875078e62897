import numpy as np
import pytest

from elastoscope.core.errors import ContrastViolation, InvalidProblem
from elastoscope.core.grid import Grid
from elastoscope.interfaces.specs import ExcitationSpec, Inclusion, PhantomSpec
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.differential import divergence
from elastoscope.methods.phantoms import (
    add_noise,
    bump_pairs,
    bump_profile,
    make_excitation,
    make_phantom,
    synthesize_measurements,
)
from elastoscope.methods.stokes import compatibility_flux
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


@pytest.mark.parametrize("profile", ["gaussian", "mollifier", "smooth_disk"])
def test_bump_profile_peaks_at_center(profile):
    grid = Grid.unit(20)
    inc = Inclusion(center=[0.5, 0.5], radius=0.2, contrast=1.0, profile=profile)
    bump = bump_profile(inc, grid.coordinates())
    assert bump[10, 10] == pytest.approx(1.0)
    assert bump.min() >= 0.0 and bump.max() <= 1.0 + 1e-12


def test_mollifier_has_compact_support():
    grid = Grid.unit(20)
    inc = Inclusion(center=[0.5, 0.5], radius=0.2, contrast=1.0, profile="mollifier")
    bump = bump_profile(inc, grid.coordinates())
    assert np.all(bump[grid.boundary_mask] == 0.0)
    assert bump[0:5, :].max() == 0.0


def test_phantom_values():
    grid = Grid.unit(20)
    spec = PhantomSpec(
        background=2.0, inclusions=[Inclusion(center=[0.5, 0.5], radius=0.1, contrast=0.2)]
    )
    mu = make_phantom(spec, grid)
    assert mu.values[10, 10] == pytest.approx(2.4)
    assert mu.min() >= 2.0


def test_phantom_too_soft_rejected():
    grid = Grid.unit(10)
    spec = PhantomSpec(
        background=1.0,
        inclusions=[Inclusion(center=[0.5, 0.5], radius=0.2, contrast=-0.95)],
        mu_min=0.1,
    )
    with pytest.raises(ContrastViolation):
        make_phantom(spec, grid)


def test_random_inclusions_deterministic_per_seed():
    grid = Grid.unit(16)
    spec = PhantomSpec(random_inclusions=3, seed=7)
    a = make_phantom(spec, grid)
    b = make_phantom(spec, grid)
    c = make_phantom(spec.model_copy(update={"seed": 8}), grid)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_bump_pairs_share_trace():
    grid = Grid.unit(16)
    pairs = bump_pairs(grid, 1.5, [0.1, 0.3], count=2, seed=0)
    assert len(pairs) == 4
    mask = grid.boundary_mask
    for amp, mu1, mu2 in pairs:
        assert amp in (0.1, 0.3)
        np.testing.assert_array_equal(mu1.values[mask], mu2.values[mask])
        assert mu1.max() == pytest.approx(1.5 * (1.0 + amp), rel=0.05)
        assert np.all(mu2.values == 1.5)


def test_shear_excitation_is_traceless():
    grid = Grid.unit(8)
    F = make_excitation(ExcitationSpec(kind="shear", amplitude=2.0), grid)
    x, y = grid.coordinates()
    np.testing.assert_allclose(F.values[0], 2.0 * (x - 0.5))
    np.testing.assert_allclose(F.values[1], -2.0 * (y - 0.5))
    assert abs(compatibility_flux(F)[0]) < 1e-12


def test_diagonal_shear_excitation():
    grid = Grid.unit(8)
    F = make_excitation(ExcitationSpec(kind="diagonal-shear", amplitude=2.0), grid)
    x, y = grid.coordinates()
    np.testing.assert_allclose(F.values[0], 2.0 * (y - 0.5))
    np.testing.assert_allclose(F.values[1], 2.0 * (x - 0.5))
    np.testing.assert_allclose(divergence(F).values, 0.0, atol=1e-12)
    assert abs(compatibility_flux(F)[0]) < 1e-12


def test_rotation_excitation_rigid():
    grid = Grid.unit(8)
    F = make_excitation(ExcitationSpec(kind="rotation"), grid)
    np.testing.assert_allclose(divergence(F).values, 0.0, atol=1e-12)
    assert abs(compatibility_flux(F)[0]) < 1e-12


@pytest.mark.parametrize("dim", [2, 3])
def test_random_solenoidal_excitation(dim):
    grid = Grid.unit(12 if dim == 2 else 8, dim=dim)
    spec = ExcitationSpec(kind="random-solenoidal", modes=2, seed=4, amplitude=0.5)
    F = make_excitation(spec, grid)
    assert F.max_abs() == pytest.approx(0.5)
    assert abs(compatibility_flux(F)[0]) < 1e-10
    again = make_excitation(spec, grid)
    np.testing.assert_array_equal(F.values, again.values)


def test_random_solenoidal_needs_resolution():
    with pytest.raises(InvalidProblem):
        make_excitation(ExcitationSpec(kind="random-solenoidal", modes=4), Grid.unit(4))


def test_excitation_axes_must_exist():
    with pytest.raises(InvalidProblem):
        make_excitation(ExcitationSpec(kind="shear", axes=(0, 2)), Grid.unit(4))


def test_add_noise_level_and_determinism():
    grid = Grid.unit(40)
    x, y = grid.coordinates()
    u = VectorField(grid, np.stack([np.sin(np.pi * x), np.cos(np.pi * y)]))
    assert add_noise(u, 0.0) is u
    noisy = add_noise(u, 0.05, seed=2)
    again = add_noise(u, 0.05, seed=2)
    np.testing.assert_array_equal(noisy.values, again.values)
    observed = np.sqrt(np.mean((noisy.values - u.values) ** 2))
    assert observed == pytest.approx(0.05 * u.rms(), rel=0.1)
    with pytest.raises(InvalidProblem):
        add_noise(u, -0.1)


def test_synthesize_measurements_metadata():
    grid = Grid.unit(8)
    phantom = PhantomSpec(inclusions=[Inclusion(center=[0.5, 0.5], radius=0.15, contrast=0.2)])
    ip = synthesize_measurements(
        phantom, [ExcitationSpec(kind="shear")], grid, refine=2, noise_level=0.01, noise_seed=3
    )
    assert ip.grid == grid
    assert len(ip.channels) == 1
    assert not ip.two_channel
    assert ip.metadata["refine"] == 2
    assert ip.metadata["noise_level"] == 0.01
    assert len(ip.metadata["mu_true_sha256"]) == 64
    channel = ip.channels[0]
    assert channel.measured.values.shape == (2, *grid.shape)
    with pytest.raises(InvalidProblem):
        synthesize_measurements(phantom, [], grid)


if __name__ == "__main__":
    for profile in ("gaussian", "mollifier", "smooth_disk"):
        test_bump_profile_peaks_at_center(profile)
    test_mollifier_has_compact_support()
    test_phantom_values()
    test_phantom_too_soft_rejected()
    test_random_inclusions_deterministic_per_seed()
    test_bump_pairs_share_trace()
    test_shear_excitation_is_traceless()
    test_diagonal_shear_excitation()
    test_rotation_excitation_rigid()
    test_random_solenoidal_excitation(2)
    test_random_solenoidal_excitation(3)
    test_random_solenoidal_needs_resolution()
    test_excitation_axes_must_exist()
    test_add_noise_level_and_determinism()
    test_synthesize_measurements_metadata()
    logger.info("All phantom tests passed.")
