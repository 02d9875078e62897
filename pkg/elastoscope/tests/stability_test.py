import numpy as np
import pytest

from elastoscope.config import DEFAULT_OMEGA
from elastoscope.core.errors import DegenerateInput, InvalidProblem
from elastoscope.core.grid import Grid
from elastoscope.core.reports import StabilityRow
from elastoscope.interfaces.problems import StokesProblem
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.specs import ExcitationSpec
from elastoscope.methods.norms import NormSpec
from elastoscope.methods.phantoms import bump_pairs, make_excitation
from elastoscope.methods.residual import build_map, kernel_probe
from elastoscope.methods.stability import certificate_pass_rate, stability_experiment, summarize
from elastoscope.methods.stokes import solve_stokes
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

GRID = Grid.unit(16)


def _pairs(amplitudes=(0.05, 0.1)):
    triples = bump_pairs(GRID, 1.0, list(amplitudes), count=1, seed=2)
    return [(mu1, mu2) for _, mu1, mu2 in triples], [amp for amp, _, _ in triples]


def _shear():
    return make_excitation(ExcitationSpec(kind="shear"), GRID)


def test_rows_and_summary():
    pairs, amps = _pairs()
    rows, summary = stability_experiment(pairs, [_shear()], amplitudes=amps)
    assert len(rows) == 2
    for row in rows:
        assert not row.degenerate
        assert row.lhs > 0.0 and row.rhs > 0.0
        assert row.ratio == pytest.approx(row.lhs / row.rhs)
        assert row.certificate_pass
    assert summary.rows == 2
    assert summary.degenerate_rows == 0
    assert sorted(summary.per_amplitude_max) == ["0.05", "0.1"]
    assert summary.max_ratio >= summary.min_ratio
    assert summary.spread == pytest.approx(summary.max_ratio / summary.min_ratio)
    logger.info(f"ratios {[round(r.ratio, 4) for r in rows]}")


def test_ratio_scales_inversely_with_excitation():
    pairs, amps = _pairs((0.1,))
    F = _shear()
    rows1, _ = stability_experiment(pairs, [F], amplitudes=amps)
    rows3, _ = stability_experiment(pairs, [F * 3.0], amplitudes=amps)
    assert rows3[0].rhs == pytest.approx(3.0 * rows1[0].rhs, rel=1e-8)
    assert rows3[0].ratio * 3.0 == pytest.approx(rows1[0].ratio, rel=1e-8)


def test_weighted_norm_variant():
    pairs, amps = _pairs((0.1,))
    rows, summary = stability_experiment(
        pairs, [_shear()], spec=NormSpec.theorem(weight_power=-2), amplitudes=amps
    )
    assert rows[0].ratio is not None and rows[0].ratio > 0.0
    assert summary.order == pytest.approx(NormSpec.theorem().order)


def test_identical_moduli_are_degenerate():
    mu = ScalarField(GRID, np.ones(GRID.shape))
    rows, summary = stability_experiment([(mu, mu)], [_shear()])
    assert rows[0].degenerate
    assert rows[0].ratio is None
    assert summary.degenerate_rows == 1
    assert summary.max_ratio is None and summary.spread is None


def test_input_validation():
    pairs, _ = _pairs()
    with pytest.raises(DegenerateInput):
        stability_experiment([], [_shear()])
    with pytest.raises(InvalidProblem):
        stability_experiment(pairs, [_shear()], amplitudes=[0.1])
    other = ScalarField(Grid.unit(8), np.ones((9, 9)))
    with pytest.raises(InvalidProblem):
        stability_experiment([(other, other)] + pairs, [_shear()])


def test_summarize_groups_by_amplitude():
    rows = [
        StabilityRow(pair_id=0, amplitude=0.1, lhs=1.0, rhs=0.5, ratio=2.0),
        StabilityRow(pair_id=1, amplitude=0.1, lhs=1.0, rhs=0.25, ratio=4.0),
        StabilityRow(pair_id=2, amplitude=0.2, lhs=1.0, rhs=1.0, ratio=1.0, certificate_pass=False),
        StabilityRow(pair_id=3, amplitude=0.2, lhs=0.0, rhs=1.0, degenerate=True),
    ]
    summary = summarize(rows, order=0.51, channels=1)
    assert summary.per_amplitude_max == {"0.1": 4.0, "0.2": 1.0}
    assert summary.max_ratio == 4.0 and summary.min_ratio == 1.0
    assert summary.spread == 4.0
    assert summary.degenerate_rows == 1
    assert summary.certificate_failures == 1


def test_pass_rate_is_reproducible():
    mu = ScalarField(GRID, np.ones(GRID.shape))
    a = certificate_pass_rate(GRID, mu, draws=2, seed=11)
    b = certificate_pass_rate(GRID, mu, draws=2, seed=11)
    assert a.infs == b.infs
    assert a.cells == [16, 16]
    with pytest.raises(DegenerateInput):
        certificate_pass_rate(GRID, mu, draws=0)


@pytest.mark.slow
def test_ratio_stays_bounded_as_amplitude_shrinks():
    grid = Grid.unit(32)
    amplitudes = [0.2, 0.1, 0.05]
    triples = bump_pairs(grid, 1.0, amplitudes, count=10, seed=7)
    pairs = [(mu1, mu2) for _, mu1, mu2 in triples]
    F = make_excitation(ExcitationSpec(kind="shear"), grid)
    rows, summary = stability_experiment(pairs, [F], amplitudes=[a for a, _, _ in triples])
    assert summary.rows == 30 and summary.degenerate_rows == 0
    assert summary.certificate_failures == 0
    assert summary.spread < 2.0
    worst = [summary.per_amplitude_max[f"{a:g}"] for a in amplitudes]
    logger.info(f"per-amplitude max ratios {worst}, spread {summary.spread:.3f}")
    assert max(worst) < 2.0 * min(worst)
    assert worst[-1] <= 1.5 * worst[0]

    background = solve_stokes(StokesProblem(mu=pairs[0][1], omega=DEFAULT_OMEGA, boundary=F))
    kernel = kernel_probe(build_map(background.u)).report
    assert kernel.trivial


@pytest.mark.slow
def test_random_excitation_pairs_certify_constant_background_3d():
    grid = Grid.unit(24, dim=3)
    mu = ScalarField(grid, np.ones(grid.shape))
    report = certificate_pass_rate(grid, mu, draws=20, seed=0)
    logger.info(f"3D pass rate {report.passes}/{report.draws}, worst inf {min(report.infs):.3e}")
    assert report.draws == 20
    assert report.rate >= 0.9


if __name__ == "__main__":
    test_rows_and_summary()
    test_ratio_scales_inversely_with_excitation()
    test_weighted_norm_variant()
    test_identical_moduli_are_degenerate()
    test_input_validation()
    test_summarize_groups_by_amplitude()
    test_pass_rate_is_reproducible()
    logger.info("All stability tests passed.")
