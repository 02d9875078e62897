# ------------------------------------------------------------------
# Synthetic phantoms, boundary excitations and measurement synthesis
# ------------------------------------------------------------------

import itertools
from typing import Optional, Sequence

import numpy as np

from elastoscope.config import DATA_REFINE_FACTOR, DEFAULT_MU_MAX, DEFAULT_OMEGA
from elastoscope.core.errors import ContrastViolation, InvalidProblem
from elastoscope.core.grid import Grid
from elastoscope.interfaces.problems import InverseProblem, MeasurementChannel, StokesProblem
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.specs import ExcitationSpec, Inclusion, PhantomSpec
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.address import field_fingerprint
from elastoscope.methods.stokes import StokesOperator, solve_stokes
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


# --- phantoms ---


def _smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""

    def f(s):
        out = np.zeros_like(s)
        pos = s > 0
        out[pos] = np.exp(-1.0 / s[pos])
        return out

    a, b = f(t), f(1.0 - t)
    return a / (a + b)


def bump_profile(inc: Inclusion, coords: Sequence[np.ndarray]) -> np.ndarray:
    """Profile of one inclusion, peak value 1 at its center."""
    if len(inc.center) != len(coords):
        raise InvalidProblem(
            f"inclusion center {inc.center} does not match grid dimension {len(coords)}"
        )
    r2 = sum((x - c) ** 2 for x, c in zip(coords, inc.center))
    dist = np.sqrt(r2)
    if inc.profile == "gaussian":
        return np.exp(-r2 / inc.radius**2)
    if inc.profile == "mollifier":
        t = np.clip(dist / inc.radius, 0.0, 1.0)
        out = np.zeros_like(dist)
        inside = t < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - t[inside] ** 2))
        return out
    return _smooth_step((inc.radius + inc.width - dist) / inc.width)


def _random_inclusions(spec: PhantomSpec, grid: Grid) -> list[Inclusion]:
    rng = np.random.default_rng(spec.seed)
    lo = np.asarray(grid.origin) + 0.25 * np.asarray(grid.extents)
    span = 0.5 * np.asarray(grid.extents)
    return [
        Inclusion(
            center=(lo + span * rng.random(grid.dim)).tolist(),
            radius=spec.random_radius,
            contrast=spec.random_contrast,
            profile="mollifier",
        )
        for _ in range(spec.random_inclusions)
    ]


def make_phantom(spec: PhantomSpec, grid: Grid) -> ScalarField:
    """``mu = background * (1 + sum_k contrast_k * profile_k)``; deterministic per seed."""
    coords = grid.coordinates()
    relative = np.zeros(grid.shape)
    for inc in list(spec.inclusions) + _random_inclusions(spec, grid):
        relative += inc.contrast * bump_profile(inc, coords)
    values = spec.background * (1.0 + relative)
    low = float(values.min())
    if low < spec.mu_min:
        raise ContrastViolation(
            f"Inclusions push mu to {low:.4g}, below mu_min = {spec.mu_min}",
            minimum=low,
            mu_min=spec.mu_min,
        )
    logger.debug(f"[-] Phantom on {grid.cells}: range [{low:.4g}, {values.max():.4g}]")
    return ScalarField(grid, values, name="mu")


def bump_pairs(
    grid: Grid,
    background: float,
    amplitudes: Sequence[float],
    count: int,
    seed: int = 0,
    radius: float = 0.2,
) -> list[tuple[float, ScalarField, ScalarField]]:
    """
    ``count`` pairs per amplitude: ``mu2`` constant, ``mu1 = mu2 (1 + a * bump)``
    with a compactly supported bump so that both share the boundary trace.
    """
    rng = np.random.default_rng(seed)
    mu2 = ScalarField(grid, np.full(grid.shape, float(background)), name="mu2")
    coords = grid.coordinates()
    lo = np.asarray(grid.origin) + radius + 0.05 * np.asarray(grid.extents)
    span = np.asarray(grid.extents) - 2.0 * (lo - np.asarray(grid.origin))
    centers = [lo + span * rng.random(grid.dim) for _ in range(count)]
    pairs = []
    for amp, center in itertools.product(amplitudes, centers):
        inc = Inclusion(center=center.tolist(), radius=radius, contrast=amp, profile="mollifier")
        values = background * (1.0 + amp * bump_profile(inc, coords))
        pairs.append((float(amp), ScalarField(grid, values, name="mu1"), mu2))
    return pairs


# --- excitations ---


def _affine_excitation(spec: ExcitationSpec, grid: Grid) -> np.ndarray:
    a, b = spec.axes
    if max(a, b) >= grid.dim:
        raise InvalidProblem(f"axes {spec.axes} do not exist in {grid.dim}D")
    coords = grid.coordinates()
    c = grid.center
    out = np.zeros((grid.dim, *grid.shape))
    if spec.kind == "shear":
        out[a] = spec.amplitude * (coords[a] - c[a])
        out[b] = -spec.amplitude * (coords[b] - c[b])
    elif spec.kind == "diagonal-shear":
        out[a] = spec.amplitude * (coords[b] - c[b])
        out[b] = spec.amplitude * (coords[a] - c[a])
    else:
        out[a] = -spec.amplitude * (coords[b] - c[b])
        out[b] = spec.amplitude * (coords[a] - c[a])
    return out


def _wave_vectors(dim: int, modes: int) -> np.ndarray:
    # one representative of every +-k pair with max |k_i| <= modes
    ks = []
    for k in itertools.product(range(-modes, modes + 1), repeat=dim):
        nz = [v for v in k if v != 0]
        if nz and nz[0] > 0:
            ks.append(k)
    return np.asarray(ks, dtype=float)


def _random_potential_gradient(
    rng: np.random.Generator, grid: Grid, ks: np.ndarray
) -> np.ndarray:
    """Gradient of ``sum_k a_k cos(2 pi k.x~) + b_k sin(2 pi k.x~)``, shape ``(d, *shape)``."""
    coords = grid.coordinates()
    scaled = [(x - o) / length for x, o, length in zip(coords, grid.origin, grid.extents)]
    decay = 1.0 / np.linalg.norm(ks, axis=1)
    a = rng.standard_normal(len(ks)) * decay
    b = rng.standard_normal(len(ks)) * decay
    grad = np.zeros((grid.dim, *grid.shape))
    for k, ak, bk in zip(ks, a, b):
        phase = 2.0 * np.pi * sum(ki * x for ki, x in zip(k, scaled))
        dphase = -ak * np.sin(phase) + bk * np.cos(phase)
        for i in range(grid.dim):
            grad[i] += dphase * 2.0 * np.pi * k[i] / grid.extents[i]
    return grad


def random_solenoidal_excitation(spec: ExcitationSpec, grid: Grid) -> VectorField:
    """
    ``w = curl(potential)`` sampled on the whole grid; its boundary nodes are
    the excitation F. The potential is periodic on the box, so every face
    carries zero net flux under the trapezoidal rule.
    """
    rng = np.random.default_rng(spec.seed)
    if spec.modes >= min(grid.cells):
        raise InvalidProblem(f"{spec.modes} modes are not resolved on {grid.cells}")
    ks = _wave_vectors(grid.dim, spec.modes)
    if grid.dim == 2:
        g = _random_potential_gradient(rng, grid, ks)
        w = np.stack([g[1], -g[0]])
    else:
        g = [_random_potential_gradient(rng, grid, ks) for _ in range(3)]
        w = np.stack(
            [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]]
        )
    peak = float(np.max(np.abs(w)))
    if peak > 0.0:
        w *= spec.amplitude / peak
    return VectorField(grid, w, name=spec.label or f"F_seed{spec.seed}")


def make_excitation(spec: ExcitationSpec, grid: Grid) -> VectorField:
    if spec.kind == "random-solenoidal":
        return random_solenoidal_excitation(spec, grid)
    return VectorField(grid, _affine_excitation(spec, grid), name=spec.label or f"F_{spec.kind}")


# --- measurements ---


def add_noise(u: VectorField, level: float, seed: int = 0) -> VectorField:
    """I.i.d. Gaussian noise with standard deviation ``level * rms(u)``."""
    if level < 0:
        raise InvalidProblem(f"noise level must be non-negative, got {level}")
    if level == 0:
        return u
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(u.values.shape) * (level * u.rms())
    return u.with_values(u.values + noise)


def synthesize_measurements(
    phantom: PhantomSpec,
    excitations: Sequence[ExcitationSpec],
    grid: Grid,
    omega: float = DEFAULT_OMEGA,
    refine: int = DATA_REFINE_FACTOR,
    noise_level: float = 0.0,
    noise_seed: int = 0,
    mu_max: float = DEFAULT_MU_MAX,
    two_channel: Optional[bool] = None,
) -> InverseProblem:
    """
    Solve the forward problem for the phantom on ``grid.refine(refine)``,
    restrict by injection to ``grid`` and add noise per channel.
    """
    if not excitations:
        raise InvalidProblem("at least one excitation is required")
    fine = grid.refine(refine) if refine > 1 else grid
    mu_fine = make_phantom(phantom, fine)
    mu = make_phantom(phantom, grid)
    op = StokesOperator(mu_fine, omega, float(np.mean(mu.boundary_values())))
    channels = []
    for i, exc in enumerate(excitations):
        boundary_fine = make_excitation(exc, fine)
        sol = solve_stokes(
            StokesProblem(mu=mu_fine, omega=omega, boundary=boundary_fine, mu_ref=op.mu_ref),
            operator=op,
        )
        measured = add_noise(sol.u.restrict(grid), noise_level, noise_seed + i)
        channels.append(MeasurementChannel(boundary=make_excitation(exc, grid), measured=measured))
        logger.info(f"[-] Channel {i} ({exc.kind}) synthesized on {fine.cells}")
    if two_channel is None:
        two_channel = grid.dim == 3 and len(channels) == 2
    return InverseProblem(
        grid=grid,
        channels=tuple(channels),
        mu_trace=mu,
        omega=omega,
        mu_min=phantom.mu_min,
        mu_max=mu_max,
        mu_true=mu,
        two_channel=two_channel,
        metadata={
            "refine": refine,
            "noise_level": noise_level,
            "noise_seed": noise_seed,
            "phantom_seed": phantom.seed,
            "excitation_seeds": [e.seed for e in excitations],
            "mu_true_sha256": field_fingerprint(mu),
        },
    )
