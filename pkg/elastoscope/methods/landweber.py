# ------------------------------------------------------------------
# Safeguarded Landweber iteration
# ------------------------------------------------------------------

from typing import Literal, Optional

import numpy as np

from elastoscope.config import (
    AUTO_STEP_FACTOR,
    LANDWEBER_N_MAX,
    LANDWEBER_STOP_TOL,
    SNAPSHOT_STRIDE,
    SOBOLEV_EPS,
    STEP_FLOOR_FRACTION,
    STEP_GROWTH_FACTOR,
    STEP_GROWTH_INTERVAL,
)
from elastoscope.core.errors import (
    ElastoscopeError,
    InvalidProblem,
    ReconstructionAborted,
    StalledStep,
)
from elastoscope.interfaces.problems import InverseProblem
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.trace import ReconstructionTrace
from elastoscope.methods.adjoint import MisfitEvaluation, misfit_and_gradient
from elastoscope.methods.history import record_iterate
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

_TRACE_MATCH_TOL = 1e-12


def project(values: np.ndarray, ip: InverseProblem) -> ScalarField:
    """Clip to ``[mu_min, mu_max]`` and overwrite boundary nodes with the known trace."""
    out = np.clip(values, ip.mu_min, ip.mu_max)
    mask = ip.grid.boundary_mask
    out[mask] = ip.mu_trace.values[mask]
    return ScalarField(ip.grid, out, name="mu")


def _check_start(mu0: ScalarField, ip: InverseProblem) -> None:
    if mu0.grid != ip.grid:
        raise InvalidProblem("mu0 is not on the inverse problem grid")
    if mu0.min() < ip.mu_min or mu0.max() > ip.mu_max:
        raise InvalidProblem(
            f"mu0 range [{mu0.min():.4g}, {mu0.max():.4g}] is not admissible "
            f"[{ip.mu_min}, {ip.mu_max}]"
        )
    mismatch = float(np.max(np.abs(mu0.boundary_values() - ip.mu_trace.boundary_values())))
    if mismatch > _TRACE_MATCH_TOL * max(1.0, ip.mu_trace.max_abs()):
        raise InvalidProblem(f"mu0 does not match the known boundary trace ({mismatch:.3e})")


def _evaluate(mu: ScalarField, ip: InverseProblem, trace: ReconstructionTrace) -> MisfitEvaluation:
    try:
        return misfit_and_gradient(mu, ip)
    except ElastoscopeError as exc:
        trace.status = "aborted"
        logger.error(f"[!!] Solve failed inside Landweber: {exc.kind}: {exc.message}")
        raise ReconstructionAborted(
            f"{exc.kind} during reconstruction: {exc.message}", trace=trace, cause_kind=exc.kind
        ) from exc


def _minimal_error_step(evaluation: MisfitEvaluation) -> float:
    norm = evaluation.gradient_norm
    return AUTO_STEP_FACTOR * evaluation.value / norm**2 if norm > 0 else 1.0


def landweber_run(
    ip: InverseProblem,
    mu0: ScalarField,
    sigma: float | Literal["auto"] | None = None,
    n_max: int = LANDWEBER_N_MAX,
    stop_tol: float = LANDWEBER_STOP_TOL,
    snapshot_stride: int = SNAPSHOT_STRIDE,
    eps: float = SOBOLEV_EPS,
    discrepancy_tol: Optional[float] = None,
    raise_on_stall: bool = False,
) -> ReconstructionTrace:
    """
    Projected Landweber iteration ``mu <- P(mu - sigma DJ[mu])``.

    Parameters
    ----------
    ip : InverseProblem
        Data channels, admissible bounds and boundary trace of mu.
    mu0 : ScalarField
        Admissible start matching the boundary trace.
    sigma : float or "auto"
        Fixed step ceiling. "auto" (or None) recomputes
        ``AUTO_STEP_FACTOR * J / ||DJ||^2`` at every iterate; ``trace.sigma0``
        holds its value at mu0.
    n_max : int
        Maximum number of accepted updates.
    stop_tol : float
        Stop when the L2 norm of DJ drops to this value (checked before the
        first update as well).
    snapshot_stride : int
        Keep every ``stride``-th iterate in ``trace.snapshots`` (0 = none).
    eps : float
        Order offset of the H^(1/2+eps) error column.
    discrepancy_tol : float, optional
        Also stop once J falls to this value.
    raise_on_stall : bool
        Raise StalledStep (carrying the trace) instead of returning with
        status "stalled".

    Returns
    -------
    ReconstructionTrace
        Every accepted iterate; ``final_mu`` holds the last one.

    Notes
    -----
    Each iteration starts from a step ceiling: the fixed ``sigma`` when one is
    given, otherwise ``AUTO_STEP_FACTOR * J / ||DJ||^2`` at the current
    iterate, which with a factor of 2 is the step minimizing the linearized
    error along ``-DJ``. The step is a fraction of that ceiling: a trial step
    that would increase J is rejected and the fraction halved; after
    STEP_GROWTH_INTERVAL consecutive accepted steps it grows by
    STEP_GROWTH_FACTOR, never beyond 1. A fraction below STEP_FLOOR_FRACTION
    stalls the run.
    """
    _check_start(mu0, ip)
    trace = ReconstructionTrace()
    mu = project(mu0.values, ip)
    current = _evaluate(mu, ip, trace)
    grad_norm = current.gradient_norm

    auto = sigma is None or sigma == "auto"
    if auto:
        sigma0 = _minimal_error_step(current)
    else:
        sigma0 = float(sigma)
        if sigma0 <= 0:
            raise InvalidProblem(f"step size must be positive, got {sigma0}")
    trace.sigma0 = sigma0
    step = sigma0

    def record(n: int, backtracks: int) -> None:
        record_iterate(
            trace,
            n=n,
            mu=mu,
            J=current.value,
            sigma=step,
            grad_norm=current.gradient_norm,
            backtracks=backtracks,
            mu_true=ip.mu_true,
            eps=eps,
            stride=snapshot_stride,
        )

    record(0, 0)
    logger.info(
        f"[*] Landweber start: J {current.value:.6e}, |g| {grad_norm:.3e}, sigma0 {sigma0:.3e}"
    )

    def finish(status: str) -> ReconstructionTrace:
        trace.status = status
        trace.final_mu = mu
        last = trace.last
        rel = "" if last.rel_err_l2 is None else f", rel err {last.rel_err_l2:.4e}"
        logger.info(f"[*] Landweber {status} after {last.n} iterations: J {last.J:.6e}{rel}")
        return trace

    if grad_norm <= stop_tol:
        return finish("converged")
    if discrepancy_tol is not None and current.value <= discrepancy_tol:
        return finish("discrepancy")

    fraction, streak = 1.0, 0
    for n in range(1, n_max + 1):
        ceiling = _minimal_error_step(current) if auto else sigma0
        backtracks = 0
        while True:
            step = fraction * ceiling
            candidate = project(mu.values - step * current.gradient.values, ip)
            trial = _evaluate(candidate, ip, trace)
            if trial.value <= current.value:
                break
            fraction *= 0.5
            backtracks += 1
            streak = 0
            if fraction < STEP_FLOOR_FRACTION:
                logger.warning(f"[!!] Step size {fraction * ceiling:.3e} below floor at iterate {n}")
                finish("stalled")
                if raise_on_stall:
                    raise StalledStep(
                        f"Step size fell below {STEP_FLOOR_FRACTION:.0e} of its ceiling at iterate {n}",
                        trace=trace,
                        iterate=n,
                    )
                return trace
        mu, current = candidate, trial
        streak += 1
        record(n, backtracks)
        if streak >= STEP_GROWTH_INTERVAL:
            fraction = min(fraction * STEP_GROWTH_FACTOR, 1.0)
            streak = 0
        if current.gradient_norm <= stop_tol:
            return finish("converged")
        if discrepancy_tol is not None and current.value <= discrepancy_tol:
            return finish("discrepancy")
    return finish("max_iterations")
