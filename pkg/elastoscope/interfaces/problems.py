from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from elastoscope.config import DEFAULT_MU_MAX, DEFAULT_MU_MIN, DEFAULT_OMEGA
from elastoscope.core.errors import FieldError, InvalidProblem
from elastoscope.core.grid import Grid
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.vector import VectorField


def _same_grid(grid: Grid, *fields: Optional[ScalarField | VectorField]) -> None:
    for f in fields:
        if f is not None and f.grid != grid:
            raise FieldError(f"Field '{f.name}' is not on the problem grid")


@dataclass(frozen=True)
class StokesProblem:
    """
    Time-harmonic Stokes problem
    ``omega^2 u + 2 div(mu sym_grad u) + grad p = f``, ``div u = 0``,
    ``u = F`` on the boundary, ``mean(p) = 0``.

    :param mu: Shear modulus, strictly positive
    :param omega: Angular frequency
    :param boundary: Full-grid VectorField; only its boundary nodes are read
    :param body_force: Optional interior load f
    :param mu_ref: Reference modulus scaling the pressure stabilization
        (defaults to the mean of mu on the boundary)
    :param mu_min: Lower admissibility bound checked at construction
    """

    mu: ScalarField
    omega: float = DEFAULT_OMEGA
    boundary: Optional[VectorField] = None
    body_force: Optional[VectorField] = None
    mu_ref: Optional[float] = None
    mu_min: float = 0.0

    def __post_init__(self) -> None:
        _same_grid(self.grid, self.boundary, self.body_force)
        if not np.isfinite(self.omega):
            raise InvalidProblem(f"omega must be finite, got {self.omega}")
        if self.mu.min() <= 0.0 or self.mu.min() < self.mu_min:
            raise InvalidProblem(
                f"mu must exceed mu_min={self.mu_min} everywhere (min {self.mu.min():.4g})",
                mu_min=self.mu_min,
            )
        if self.mu_ref is None:
            object.__setattr__(self, "mu_ref", float(np.mean(self.mu.boundary_values())))
        if self.mu_ref <= 0.0:
            raise InvalidProblem(f"mu_ref must be positive, got {self.mu_ref}")

    @property
    def grid(self) -> Grid:
        return self.mu.grid

    def boundary_values(self) -> np.ndarray:
        if self.boundary is None:
            return np.zeros((self.grid.dim, *self.grid.shape))
        return self.boundary.values


@dataclass(frozen=True)
class ElasticityProblem(StokesProblem):
    """
    Full time-harmonic elasticity
    ``grad(lambda div u) + omega^2 u + 2 div(mu sym_grad u) = f``, ``u = F``.
    """

    lam: Optional[ScalarField] = None
    lam_min: float = 0.0

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.lam is None:
            raise InvalidProblem("ElasticityProblem requires a lambda field")
        _same_grid(self.grid, self.lam)
        if self.lam.min() <= 0.0 or self.lam.min() < self.lam_min:
            raise InvalidProblem(
                f"lambda must exceed lambda_min={self.lam_min} (min {self.lam.min():.4g})"
            )

    def satisfies_limit_precondition(self) -> bool:
        """``2 max(mu) < 3 min(lambda)``."""
        return 2.0 * self.mu.max() < 3.0 * self.lam.min()


@dataclass(frozen=True)
class StokesSolution:
    """
    Paired (u, p) with the problem that produced it and solver metadata.
    """

    u: VectorField
    p: ScalarField
    problem: StokesProblem
    residual_norm: float
    near_resonance: bool = False
    condition_estimate: float = float("nan")
    multiplier: float = 0.0
    divergence_norm: float = 0.0


@dataclass(frozen=True)
class MeasurementChannel:
    """One boundary excitation and the interior displacement measured for it."""

    boundary: VectorField
    measured: VectorField

    def __post_init__(self) -> None:
        if self.boundary.grid != self.measured.grid:
            raise FieldError("Boundary data and measurement must share a grid")


@dataclass(frozen=True)
class InverseProblem:
    """
    Data and constraints for reconstructing mu.

    :param channels: One or more (F, u_m) pairs; exactly two in 3D two-channel mode
    :param mu_trace: Known boundary values of mu (full-grid field, boundary nodes read)
    :param mu_true: Ground truth when synthetic
    """

    grid: Grid
    channels: tuple[MeasurementChannel, ...]
    mu_trace: ScalarField
    omega: float = DEFAULT_OMEGA
    mu_min: float = DEFAULT_MU_MIN
    mu_max: float = DEFAULT_MU_MAX
    mu_true: Optional[ScalarField] = None
    two_channel: bool = False
    mu_ref: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise InvalidProblem("InverseProblem needs at least one measurement channel")
        for ch in self.channels:
            _same_grid(self.grid, ch.boundary, ch.measured)
        _same_grid(self.grid, self.mu_trace, self.mu_true)
        if self.mu_min <= 0.0 or self.mu_max <= self.mu_min:
            raise InvalidProblem(
                f"admissible bounds must satisfy 0 < mu_min < mu_max, got [{self.mu_min}, {self.mu_max}]"
            )
        if self.two_channel and (self.grid.dim != 3 or len(self.channels) != 2):
            raise InvalidProblem("two-channel mode needs d = 3 and exactly two channels")
        if self.mu_ref is None:
            object.__setattr__(self, "mu_ref", float(np.mean(self.mu_trace.boundary_values())))

    def with_channels(self, channels: tuple[MeasurementChannel, ...]) -> "InverseProblem":
        return InverseProblem(
            grid=self.grid,
            channels=channels,
            mu_trace=self.mu_trace,
            omega=self.omega,
            mu_min=self.mu_min,
            mu_max=self.mu_max,
            mu_true=self.mu_true,
            two_channel=self.two_channel and len(channels) == 2,
            mu_ref=self.mu_ref,
            metadata=dict(self.metadata),
        )
