# ------------------------------------------------------------------
# Empirical stability ratios and certificate pass rates
# ------------------------------------------------------------------

from typing import Optional, Sequence

import numpy as np

from elastoscope.config import CERT_THRESHOLD, DEFAULT_OMEGA, EXCITATION_MODES
from elastoscope.core.errors import DegenerateInput, InvalidProblem
from elastoscope.core.grid import Grid
from elastoscope.core.reports import CertificateReport, PassRateReport, StabilityRow, StabilitySummary
from elastoscope.interfaces.problems import StokesProblem
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.specs import ExcitationSpec
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.address import field_fingerprint
from elastoscope.methods.certificates import cert_2d, cert_3d
from elastoscope.methods.norms import NormSpec, boundary_weight, h_s_norm, weighted_norm
from elastoscope.methods.phantoms import make_excitation
from elastoscope.methods.stokes import StokesOperator, solve_stokes
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


class _SolveCache:
    """One factorization per distinct mu, keyed by fingerprint."""

    def __init__(self, omega: float, mu_ref: Optional[float]):
        self.omega = omega
        self.mu_ref = mu_ref
        self._ops: dict[str, StokesOperator] = {}

    def solve(self, mu: ScalarField, boundary: VectorField) -> VectorField:
        key = field_fingerprint(mu)
        ref = self.mu_ref if self.mu_ref is not None else float(np.mean(mu.boundary_values()))
        if key not in self._ops:
            self._ops[key] = StokesOperator(mu, self.omega, ref)
        prob = StokesProblem(mu=mu, omega=self.omega, boundary=boundary, mu_ref=ref)
        return solve_stokes(prob, operator=self._ops[key]).u


def _certify(states: list[VectorField]) -> Optional[CertificateReport]:
    if states[0].grid.dim == 2:
        return cert_2d(states[0])
    if len(states) >= 2:
        return cert_3d(states[0], states[1])
    return None


def _rhs_norm(w: VectorField, spec: NormSpec, rho) -> float:
    if spec.weight_power == 0:
        return h_s_norm(w, spec.order + (1.0 if w.grid.dim == 3 else 0.0))
    return weighted_norm(w, spec.weight_power, rho, base="l2" if w.grid.dim == 2 else "h1")


def stability_experiment(
    pairs: Sequence[tuple[ScalarField, ScalarField]],
    excitations: Sequence[VectorField],
    omega: float = DEFAULT_OMEGA,
    spec: Optional[NormSpec] = None,
    amplitudes: Optional[Sequence[float]] = None,
    mu_ref: Optional[float] = None,
) -> tuple[list[StabilityRow], StabilitySummary]:
    """
    Ratios ``||mu1 - mu2||_s / sum_channels ||u1 - u2||_s'`` for every pair.

    Parameters
    ----------
    pairs : list of (mu1, mu2)
        Moduli sharing their boundary trace.
    excitations : list of VectorField
        Boundary data F (one per channel; both channels enter the 3D sum).
    spec : NormSpec
        ``s`` on the left; ``s`` (2D) or ``s + 1`` (3D) on the right, or the
        ``rho^-2`` weighted L2 (2D) / H1 (3D) norm when ``weight_power = -2``.
    amplitudes : list of float, optional
        Label of every pair, used for the per-amplitude maxima.

    Returns
    -------
    (rows, summary)
        Rows with lhs/rhs/ratio and the certificate verdict of the mu2
        background; rows with a vanishing side are flagged degenerate.
    """
    if not pairs or not excitations:
        raise DegenerateInput("stability_experiment needs pairs and excitations")
    spec = spec or NormSpec.theorem()
    amplitudes = list(amplitudes) if amplitudes is not None else [1.0] * len(pairs)
    if len(amplitudes) != len(pairs):
        raise InvalidProblem("one amplitude label per pair is required")
    grid = pairs[0][0].grid
    rho = boundary_weight(grid) if spec.weight_power else None
    cache = _SolveCache(omega, mu_ref)
    cert_cache: dict[str, Optional[CertificateReport]] = {}

    rows = []
    for pid, ((mu1, mu2), amp) in enumerate(zip(pairs, amplitudes)):
        if mu1.grid != grid or mu2.grid != grid:
            raise InvalidProblem(f"pair {pid} is not on the common grid")
        states2 = [cache.solve(mu2, f) for f in excitations]
        states1 = [cache.solve(mu1, f) for f in excitations]
        lhs = h_s_norm(mu1 - mu2, spec.order)
        rhs = sum(_rhs_norm(a - b, spec, rho) for a, b in zip(states1, states2))

        key = field_fingerprint(mu2)
        if key not in cert_cache:
            cert_cache[key] = _certify(states2)
        cert = cert_cache[key]

        degenerate = lhs == 0.0 or rhs == 0.0
        rows.append(
            StabilityRow(
                pair_id=pid,
                amplitude=float(amp),
                lhs=lhs,
                rhs=rhs,
                ratio=None if degenerate else lhs / rhs,
                degenerate=degenerate,
                certificate_pass=cert is not None and cert.passed,
                certificate_inf=0.0 if cert is None else cert.inf,
            )
        )
        logger.debug(f"[-] pair {pid}: lhs {lhs:.4e} rhs {rhs:.4e}")

    summary = summarize(rows, spec.order, len(excitations))
    logger.info(
        f"[*] Stability experiment: {len(rows)} pairs, max ratio {summary.max_ratio}, "
        f"spread {summary.spread}"
    )
    return rows, summary


def summarize(rows: Sequence[StabilityRow], order: float, channels: int) -> StabilitySummary:
    ratios = [r.ratio for r in rows if r.ratio is not None]
    per_amp: dict[str, float] = {}
    for r in rows:
        if r.ratio is not None:
            key = f"{r.amplitude:g}"
            per_amp[key] = max(per_amp.get(key, 0.0), r.ratio)
    hi = max(ratios) if ratios else None
    lo = min(ratios) if ratios else None
    return StabilitySummary(
        max_ratio=hi,
        min_ratio=lo,
        spread=hi / lo if ratios and lo > 0 else None,
        per_amplitude_max=per_amp,
        rows=len(rows),
        degenerate_rows=sum(r.degenerate for r in rows),
        certificate_failures=sum(not r.certificate_pass for r in rows),
        order=order,
        channels=channels,
    )


def certificate_pass_rate(
    grid: Grid,
    mu: ScalarField,
    omega: float = DEFAULT_OMEGA,
    draws: int = 20,
    seed: int = 0,
    modes: int = EXCITATION_MODES,
    threshold: float = CERT_THRESHOLD,
) -> PassRateReport:
    """
    Monte-Carlo frequency of certificate passes for independent random
    solenoidal excitation pairs (one excitation per draw in 2D).
    """
    if draws < 1:
        raise DegenerateInput("draws must be positive")
    if mu.grid != grid:
        raise InvalidProblem("mu is not on the given grid")
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**31 - 1, size=(draws, 2))
    cache = _SolveCache(omega, None)
    infs = []
    passes = 0
    for pair in seeds:
        states = [
            cache.solve(
                mu,
                make_excitation(
                    ExcitationSpec(kind="random-solenoidal", modes=modes, seed=int(s)), grid
                ),
            )
            for s in pair[: 1 if grid.dim == 2 else 2]
        ]
        report = cert_2d(states[0], threshold) if grid.dim == 2 else cert_3d(*states, threshold=threshold)
        infs.append(report.inf)
        passes += int(report.passed)
    rate = passes / draws
    logger.info(f"[*] Certificate pass rate {passes}/{draws} on {grid.cells}")
    return PassRateReport(
        draws=draws, passes=passes, rate=rate, infs=infs, seed=seed, cells=list(grid.cells)
    )
