import numpy as np
import pytest

from elastoscope.core.errors import InvalidProblem
from elastoscope.core.grid import Grid
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.specs import ExcitationSpec, Inclusion, PhantomSpec
from elastoscope.interfaces.trace import ReconstructionTrace, TraceRecord
from elastoscope.methods.adjoint import evaluate_J
from elastoscope.methods.landweber import landweber_run, project
from elastoscope.methods.phantoms import synthesize_measurements
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

PHANTOM = PhantomSpec(inclusions=[Inclusion(center=[0.5, 0.5], radius=0.15, contrast=0.2)])


def _problem(n: int):
    return synthesize_measurements(PHANTOM, [ExcitationSpec(kind="shear")], Grid.unit(n), refine=1)


def _background(ip) -> ScalarField:
    return project(np.ones(ip.grid.shape), ip)


def test_start_at_truth_converges_immediately():
    ip = _problem(12)
    trace = landweber_run(ip, ip.mu_true, n_max=10)
    assert trace.status == "converged"
    assert len(trace) == 1
    assert trace.last.err_l2 == 0.0


def test_misfit_never_increases():
    ip = _problem(16)
    trace = landweber_run(ip, _background(ip), n_max=15, snapshot_stride=1)
    J = trace.values("J")
    assert np.all(np.diff(J) <= 0.0)
    assert J[-1] < J[0]
    assert trace.status in ("max_iterations", "converged", "discrepancy")
    assert trace.final_mu is not None
    logger.info(f"J {J[0]:.4e} -> {J[-1]:.4e}, rel err {trace.last.rel_err_l2:.4e}")


def test_iterates_stay_admissible_with_fixed_trace():
    ip = _problem(12)
    trace = landweber_run(ip, _background(ip), n_max=6, snapshot_stride=1)
    mask = ip.grid.boundary_mask
    assert sorted(trace.snapshots) == [r.n for r in trace.records]
    for mu in trace.snapshots.values():
        assert mu.min() >= ip.mu_min and mu.max() <= ip.mu_max
        np.testing.assert_array_equal(mu.values[mask], ip.mu_trace.values[mask])


def test_oversized_step_backtracks():
    ip = _problem(12)
    start = _background(ip)
    auto = landweber_run(ip, start, n_max=0)
    assert auto.status == "max_iterations"
    trace = landweber_run(ip, start, sigma=100.0 * auto.sigma0, n_max=4)
    assert trace.values("backtracks").sum() > 0
    assert np.all(np.diff(trace.values("J")) <= 0.0)


def test_discrepancy_stop():
    ip = _problem(12)
    start = _background(ip)
    J0 = landweber_run(ip, start, n_max=0).last.J
    trace = landweber_run(ip, start, n_max=50, discrepancy_tol=0.9 * J0)
    assert trace.status == "discrepancy"
    assert trace.last.J <= 0.9 * J0


def test_invalid_start_rejected():
    ip = _problem(8)
    with pytest.raises(InvalidProblem):
        landweber_run(ip, ScalarField(ip.grid, np.full(ip.grid.shape, 1e3)))
    shifted = ScalarField(ip.grid, np.full(ip.grid.shape, 1.5))
    with pytest.raises(InvalidProblem):
        landweber_run(ip, shifted)
    with pytest.raises(InvalidProblem):
        landweber_run(ip, _background(ip), sigma=-1.0)


def test_trace_rejects_out_of_order_records():
    trace = ReconstructionTrace()
    trace.append(TraceRecord(n=0, J=1.0, sigma=1.0, grad_norm=1.0))
    with pytest.raises(ValueError):
        trace.append(TraceRecord(n=0, J=0.5, sigma=1.0, grad_norm=1.0))
    with pytest.raises(ValueError):
        trace.append(TraceRecord(n=1, J=float("nan"), sigma=1.0, grad_norm=1.0))


@pytest.mark.slow
def test_reconstruction_reduces_error_fivefold():
    # data from a twice finer grid; the two shears see complementary directions of mu
    channels = [ExcitationSpec(kind="shear"), ExcitationSpec(kind="diagonal-shear")]
    ip = synthesize_measurements(PHANTOM, channels, Grid.unit(64), refine=2)
    noise = evaluate_J(ip.mu_true, ip)
    assert noise > 0.0
    trace = landweber_run(ip, _background(ip), n_max=500, discrepancy_tol=4.0 * noise)
    rel = trace.values("rel_err_l2")
    logger.info(
        f"relative error {rel[0]:.4e} -> {rel[-1]:.4e} after {trace.last.n} iterations ({trace.status})"
    )
    assert np.all(np.diff(trace.values("J")) <= 0.0)
    assert np.all(np.diff(rel) <= 1e-6 * rel[0])
    assert rel[-1] <= rel[0] / 5.0
    assert trace.status in ("discrepancy", "max_iterations", "converged")


if __name__ == "__main__":
    test_start_at_truth_converges_immediately()
    test_misfit_never_increases()
    test_iterates_stay_admissible_with_fixed_trace()
    test_oversized_step_backtracks()
    test_discrepancy_stop()
    test_invalid_start_rejected()
    test_trace_rejects_out_of_order_records()
    logger.info("All landweber tests passed.")
