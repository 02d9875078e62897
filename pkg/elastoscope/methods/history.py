# ------------------------------------------------------------------
# Iterate History
# ------------------------------------------------------------------

from typing import Optional

from elastoscope.core.errors import NonzeroTrace
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.trace import ReconstructionTrace, TraceRecord
from elastoscope.methods.norms import h_s_norm
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


def error_norms(
    mu: ScalarField, mu_true: Optional[ScalarField], eps: float
) -> tuple[Optional[float], Optional[float], Optional[float]]:
    """(L2 error, relative L2 error, H^(1/2+eps) error) against the truth, if known."""
    if mu_true is None:
        return None, None, None
    diff = mu - mu_true
    err = diff.l2_norm()
    scale = mu_true.l2_norm()
    rel = err / scale if scale > 0 else None
    try:
        err_hs = h_s_norm(diff, 0.5 + eps)
    except NonzeroTrace:
        logger.debug("[-] Iterate trace differs from the truth; H^s error skipped")
        err_hs = None
    return err, rel, err_hs


def snapshot(trace: ReconstructionTrace, n: int, mu: ScalarField) -> None:
    """Keep a copy of iterate ``n``."""
    trace.snapshots[n] = mu.with_values(mu.values, name=f"mu_{n:04d}")
    logger.debug(f"Snapshot saved for iterate {n}")


def record_iterate(
    trace: ReconstructionTrace,
    *,
    n: int,
    mu: ScalarField,
    J: float,
    sigma: float,
    grad_norm: float,
    backtracks: int,
    mu_true: Optional[ScalarField],
    eps: float,
    stride: int,
) -> TraceRecord:
    """Append an accepted iterate and snapshot it when ``n`` hits the stride."""
    err, rel, err_hs = error_norms(mu, mu_true, eps)
    record = TraceRecord(
        n=n,
        J=J,
        sigma=sigma,
        grad_norm=grad_norm,
        err_l2=err,
        rel_err_l2=rel,
        err_hs=err_hs,
        backtracks=backtracks,
    )
    trace.append(record)
    if stride > 0 and n % stride == 0:
        snapshot(trace, n, mu)
    rel_text = "" if rel is None else f", rel err {rel:.4e}"
    logger.debug(f"[-] iterate {n}: J {J:.6e}, |g| {grad_norm:.3e}, sigma {sigma:.3e}{rel_text}")
    return record
