# ------------------------------------------------------------------
# Boundary symbol roots and Shapiro-Lopatinskii determinants
# ------------------------------------------------------------------

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as P

from elastoscope.config import (
    CONTOUR_POINTS,
    ILL_CONDITIONED_SEPARATION,
    REAL_ROOT_TOL,
    ROOT_MULTIPLICITY_RADIUS,
    SL_DETERMINANT_THRESHOLD,
)
from elastoscope.core.errors import DegenerateInput, HalfPlaneSplitViolation, ZeroCoefficient
from elastoscope.core.reports import RootConditionReport, RootReport
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


def contour_integral(fn, center: complex, radius: float, points: int = CONTOUR_POINTS) -> complex:
    """``(1/2 pi i) * closed integral of fn`` on a circle, periodic trapezoid rule."""
    theta = 2.0 * np.pi * np.arange(points) / points
    e = np.exp(1j * theta)
    z = center + radius * e
    return complex(radius * np.mean(fn(z) * e))


def enclosing_circles(upper: np.ndarray, lower: np.ndarray) -> list[tuple[complex, float]]:
    """
    Circles that together enclose every root in ``upper`` and none in ``lower``.

    A tight upper cluster (spread below a quarter of its distance to the real
    axis) gets one circle; otherwise each upper root gets its own circle of half
    the distance to the nearest other root.
    """
    upper = np.asarray(upper, dtype=complex)
    lower = np.asarray(lower, dtype=complex)
    if upper.size == 0:
        return []
    center = complex(np.mean(upper))
    spread = float(np.max(np.abs(upper - center)))
    height = float(np.min(upper.imag))
    if spread < 0.25 * height:
        return [(center, 0.5 * height)]
    everything = np.concatenate([upper, lower])
    circles = []
    for k, tau in enumerate(upper):
        others = np.delete(everything, k)
        gap = float(np.min(np.abs(others - tau))) if others.size else height
        circles.append((complex(tau), 0.5 * gap))
    return circles


def lopatinskii_matrix(
    upper: np.ndarray, lower: np.ndarray | None = None, points: int = CONTOUR_POINTS
) -> np.ndarray:
    """
    ``M_jk = (1/2 pi i) * closed integral of z^(j+k) / A_plus(z)`` around the
    upper-half-plane roots, ``A_plus(z) = prod (z - tau_upper)``; the
    Dirichlet-trace rows of the boundary problem. ``lower`` defaults to the
    conjugates of ``upper`` (real-coefficient symbols).
    """
    upper = np.asarray(upper, dtype=complex)
    lower = np.conj(upper) if lower is None else np.asarray(lower, dtype=complex)
    m = len(upper)
    circles = enclosing_circles(upper, lower)

    def a_plus(z):
        out = np.ones_like(z)
        for tau in upper:
            out = out * (z - tau)
        return out

    mat = np.zeros((m, m), dtype=complex)
    for j in range(m):
        for k in range(m):
            for center, radius in circles:
                mat[j, k] += contour_integral(
                    lambda z: z ** (j + k) / a_plus(z), center, radius, points
                )
    return mat


def _min_separation(roots: np.ndarray) -> float:
    if len(roots) < 2:
        return 0.0
    diff = np.abs(roots[:, None] - roots[None, :])
    return float(np.min(diff[np.triu_indices(len(roots), k=1)]))


def _classify(roots: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tol = REAL_ROOT_TOL * scale
    return roots.imag > tol, roots.imag < -tol, np.abs(roots.imag) <= tol


def _root_report(roots, upper, lower, real, det, passed, ill, xi_prime) -> RootReport:
    nonreal = np.abs(roots.imag)[~real]
    return RootReport(
        roots=[(float(r.real), float(r.imag)) for r in roots],
        degree=len(roots),
        upper=int(np.sum(upper)),
        lower=int(np.sum(lower)),
        real=int(np.sum(real)),
        min_separation=_min_separation(roots),
        min_abs_imag=float(nonreal.min()) if nonreal.size else None,
        sl_determinant=(float(det.real), float(det.imag)),
        sl_determinant_abs=float(abs(det)),
        passed=passed,
        ill_conditioned=ill,
        xi_prime=[float(x) for x in xi_prime],
    )


def sl_check_2d(coefficient: float, xi2: float = 1.0) -> RootReport:
    """
    Roots of ``2 a (tau^2 + xi2^2)`` (``a`` the normal strain at a boundary point)
    and the contour integral of ``1/(z - tau_upper)`` around the upper root.
    """
    if coefficient == 0.0 or not np.isfinite(coefficient):
        raise ZeroCoefficient(f"Symbol coefficient {coefficient} vanishes", coefficient=coefficient)
    if xi2 == 0.0:
        raise DegenerateInput("tangential frequency must be nonzero")
    a = 2.0 * coefficient
    roots = P.polyroots([a * xi2**2, 0.0, a])
    roots = roots[np.argsort(-roots.imag)]
    upper, lower, real = _classify(roots, abs(xi2))
    det = (
        lopatinskii_matrix(roots[upper], roots[lower])[0, 0]
        if upper.sum() == 1
        else complex(0.0)
    )
    passed = bool(real.sum() == 0 and upper.sum() == 1 and abs(det) > SL_DETERMINANT_THRESHOLD)
    report = _root_report(roots, upper, lower, real, det, passed, False, [xi2])
    logger.debug(f"[-] sl_check_2d a={coefficient:.4g}: det {abs(det):.6f} pass={passed}")
    return report


def boundary_polynomial(
    s1: np.ndarray, s2: np.ndarray, xi_prime, normal_axis: int = 0
) -> Polynomial:
    """
    ``tau -> |(S1 xi) x xi|^2 + |(S2 xi) x xi|^2`` with ``xi`` holding ``tau`` at
    ``normal_axis`` and ``xi_prime`` elsewhere; degree 4 in ``tau``.
    """
    xi_prime = np.asarray(xi_prime, dtype=float)
    entries = []
    it = iter(xi_prime)
    for axis in range(3):
        entries.append(Polynomial([0.0, 1.0]) if axis == normal_axis else Polynomial([next(it)]))
    total = Polynomial([0.0])
    for s in (np.asarray(s1, dtype=float), np.asarray(s2, dtype=float)):
        s_xi = [sum((s[a, b] * entries[b] for b in range(3)), Polynomial([0.0])) for a in range(3)]
        norm_xi = sum((e * e for e in entries), Polynomial([0.0]))
        norm_sxi = sum((c * c for c in s_xi), Polynomial([0.0]))
        quad = sum((entries[a] * s_xi[a] for a in range(3)), Polynomial([0.0]))
        total = total + norm_sxi * norm_xi - quad * quad
    return total


def sl_check_3d(s1: np.ndarray, s2: np.ndarray, xi_prime, normal_axis: int = 0) -> RootReport:
    """
    Companion-matrix roots of the two-measurement boundary polynomial, the 2/2
    half-plane split and the determinant of the Dirichlet-trace rows.

    Raises
    ------
    HalfPlaneSplitViolation
        Real root, non-2/2 split or a characteristic normal direction
        (degree drop); the partial report is attached.
    """
    xi_prime = np.asarray(xi_prime, dtype=float)
    if xi_prime.shape != (2,) or not np.any(xi_prime):
        raise DegenerateInput(f"xi' must be a nonzero 2-vector, got {xi_prime.tolist()}")
    poly = boundary_polynomial(s1, s2, xi_prime, normal_axis)
    coef = np.zeros(5)
    coef[: len(poly.coef)] = poly.coef[:5]
    magnitude = max(float(np.max(np.abs(coef))), np.finfo(float).tiny)
    lead_tol = REAL_ROOT_TOL * magnitude
    trimmed = coef.copy()
    while len(trimmed) > 1 and abs(trimmed[-1]) <= lead_tol:
        trimmed = trimmed[:-1]
    roots = P.polyroots(trimmed) if len(trimmed) > 1 else np.zeros(0, dtype=complex)
    roots = np.asarray(roots, dtype=complex)
    roots = roots[np.lexsort((roots.real, -roots.imag))]

    scale = max(float(np.max(np.abs(roots))) if roots.size else 0.0, float(np.linalg.norm(xi_prime)))
    upper, lower, real = _classify(roots, scale)
    ill = _min_separation(roots) < ILL_CONDITIONED_SEPARATION * scale

    if len(trimmed) != 5 or real.any() or upper.sum() != 2:
        report = _root_report(roots, upper, lower, real, complex(0.0), False, ill, xi_prime)
        reason = (
            "characteristic normal direction" if len(trimmed) != 5
            else f"{int(real.sum())} real root(s)" if real.any()
            else f"{int(upper.sum())}/{int(lower.sum())} split"
        )
        logger.warning(f"[!!] Half-plane split violated at xi'={xi_prime.tolist()}: {reason}")
        raise HalfPlaneSplitViolation(f"Boundary symbol roots: {reason}", report=report)

    det = complex(np.linalg.det(lopatinskii_matrix(roots[upper], roots[lower])))
    passed = abs(det) > SL_DETERMINANT_THRESHOLD
    if ill:
        logger.warning(f"[!!] Nearly repeated symbol roots at xi'={xi_prime.tolist()}")
    return _root_report(roots, upper, lower, real, det, passed, ill, xi_prime)


def root_conditions(
    roots, eps: float, radius: float = ROOT_MULTIPLICITY_RADIUS
) -> RootConditionReport:
    """
    Multiplicity, separation and distance-to-real-axis hypotheses on a root set.

    Roots within ``radius`` of each other form one cluster whose size is the
    multiplicity. Real clusters must be simple, complex ones at most double;
    distinct clusters must be ``eps`` apart and nonreal ones ``eps`` off the
    real axis.
    """
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    roots = np.asarray(list(roots), dtype=complex)
    labels = -np.ones(len(roots), dtype=int)
    clusters: list[list[int]] = []
    for i in range(len(roots)):
        if labels[i] >= 0:
            continue
        labels[i] = len(clusters)
        members, frontier = [i], [i]
        while frontier:
            j = frontier.pop()
            near = np.where((labels < 0) & (np.abs(roots - roots[j]) <= radius))[0]
            labels[near] = labels[i]
            members.extend(near.tolist())
            frontier.extend(near.tolist())
        clusters.append(members)

    centers = np.array([roots[m].mean() for m in clusters], dtype=complex)
    multiplicities = [len(m) for m in clusters]
    failures = []
    for c, mult in zip(centers, multiplicities):
        is_real = abs(c.imag) <= radius
        if is_real and mult > 1:
            failures.append(f"real root {c.real:.6g} has multiplicity {mult}")
        if not is_real and mult > 2:
            failures.append(f"complex root {c:.6g} has multiplicity {mult}")
        if not is_real and abs(c.imag) < eps:
            failures.append(f"root {c:.6g} lies within {eps} of the real axis")
    separation = _min_separation(centers) if len(centers) > 1 else None
    if separation is not None and separation < eps:
        failures.append(f"distinct roots only {separation:.3e} apart")
    nonreal = np.abs(centers.imag)[np.abs(centers.imag) > radius]
    return RootConditionReport(
        passed=not failures,
        multiplicities=multiplicities,
        min_separation=separation,
        min_abs_imag=float(nonreal.min()) if nonreal.size else None,
        failures=failures,
    )
