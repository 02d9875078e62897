# ------------------------------------------------------------------
# Misfit functional, adjoint state and Frechet derivative
# ------------------------------------------------------------------

from dataclasses import dataclass
from typing import Optional

import numpy as np

from elastoscope.core.errors import InvalidProblem
from elastoscope.interfaces.problems import InverseProblem, StokesProblem, StokesSolution
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.stokes import StokesOperator, solve_stokes
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

# Relative slack when checking mu against its admissible bounds
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class MisfitEvaluation:
    """J, its gradient density and the states that produced them."""

    value: float
    gradient: Optional[ScalarField]
    states: tuple[StokesSolution, ...]
    adjoints: tuple[StokesSolution, ...]

    @property
    def gradient_norm(self) -> float:
        return 0.0 if self.gradient is None else self.gradient.l2_norm()


def _check_admissible(mu: ScalarField, ip: InverseProblem) -> None:
    if mu.grid != ip.grid:
        raise InvalidProblem("mu is not on the inverse problem grid")
    lo = ip.mu_min * (1.0 - _BOUND_SLACK)
    hi = ip.mu_max * (1.0 + _BOUND_SLACK)
    if mu.min() < lo or mu.max() > hi:
        raise InvalidProblem(
            f"mu range [{mu.min():.4g}, {mu.max():.4g}] outside [{ip.mu_min}, {ip.mu_max}]"
        )


def _misfit(u: VectorField, measured: VectorField) -> tuple[float, VectorField]:
    residual = u - measured
    return 0.5 * residual.l2_norm() ** 2, residual


def solve_adjoint(
    mu: ScalarField,
    residual: VectorField,
    omega: float,
    mu_ref: Optional[float] = None,
    operator: Optional[StokesOperator] = None,
) -> StokesSolution:
    """
    Adjoint Stokes problem ``2 div(mu sym_grad v) + omega^2 v + grad q = residual``
    with ``v = 0`` on the boundary and zero-mean q.

    The discrete operator is symmetric, so the adjoint reuses the forward
    factorization when ``operator`` is given.
    """
    if residual.grid != mu.grid:
        raise InvalidProblem("residual and mu must share a grid")
    prob = StokesProblem(mu=mu, omega=omega, body_force=residual, mu_ref=mu_ref)
    return solve_stokes(prob, operator=operator)


def misfit_and_gradient(
    mu: ScalarField, ip: InverseProblem, need_gradient: bool = True
) -> MisfitEvaluation:
    """
    Evaluate J and (optionally) its gradient with one factorization shared by
    every channel's forward and adjoint solve.

    The gradient is the exact derivative of the discrete J: with ``L(mu)``
    linear in mu, ``dJ/dmu_k = -v . (dL/dmu_k) u`` summed over channels,
    divided by the quadrature weight of node k so that
    ``<DJ, dmu> = sum_k w_k g_k dmu_k``. It approximates
    ``2 sym_grad(v) : sym_grad(u)``. Boundary nodes are zeroed (fixed trace).
    """
    _check_admissible(mu, ip)
    op = StokesOperator(mu, ip.omega, ip.mu_ref)
    value = 0.0
    states, adjoints = [], []
    pairing = np.zeros(ip.grid.shape)
    for ch in ip.channels:
        state = solve_stokes(
            StokesProblem(mu=mu, omega=ip.omega, boundary=ch.boundary, mu_ref=ip.mu_ref),
            operator=op,
        )
        j, residual = _misfit(state.u, ch.measured)
        value += j
        states.append(state)
        if not need_gradient:
            continue
        adj = solve_adjoint(mu, residual, ip.omega, mu_ref=ip.mu_ref, operator=op)
        adjoints.append(adj)
        pairing += op.stress_pairing(state.u.values, adj.u.values)

    gradient = None
    if need_gradient:
        grid = ip.grid
        density = -pairing * grid.cell_volume / grid.trapezoid_weights
        density[grid.boundary_mask] = 0.0
        gradient = ScalarField(grid, density, name="dJ")
    logger.debug(f"[-] J = {value:.6e} over {len(ip.channels)} channel(s)")
    return MisfitEvaluation(value, gradient, tuple(states), tuple(adjoints))


def evaluate_J(mu: ScalarField, ip: InverseProblem) -> float:
    """``1/2 sum_channels ||u(mu) - u_m||^2`` with trapezoidal quadrature."""
    return misfit_and_gradient(mu, ip, need_gradient=False).value


def gradient_J(mu: ScalarField, ip: InverseProblem) -> ScalarField:
    evaluation = misfit_and_gradient(mu, ip, need_gradient=True)
    return evaluation.gradient
