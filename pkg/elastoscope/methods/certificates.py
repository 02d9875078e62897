# ------------------------------------------------------------------
# Pointwise ellipticity certificates
# ------------------------------------------------------------------

import numpy as np
from scipy.optimize import minimize

from elastoscope.config import (
    CERT_NODE_CHUNK,
    CERT_THRESHOLD,
    SPHERE_REFINE_GTOL,
    SPHERE_REFINE_NODES,
    SPHERE_SAMPLES,
)
from elastoscope.core.errors import FieldError
from elastoscope.core.reports import CertificateReport
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.differential import sym_grad
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


def fibonacci_sphere(samples: int) -> np.ndarray:
    """Quasi-uniform unit vectors on the sphere, shape ``(samples, 3)``."""
    i = np.arange(samples, dtype=float)
    z = 1.0 - 2.0 * (i + 0.5) / samples
    r = np.sqrt(1.0 - z**2)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def cross_symbol(mats: list[np.ndarray], dirs: np.ndarray) -> np.ndarray:
    """
    ``q = sum_S |S xi x xi|^2 = sum_S (|S xi|^2 - (xi . S xi)^2)`` for unit ``xi``.

    ``mats`` holds per-node stacks ``(n, 3, 3)``; ``dirs`` is ``(k, 3)``.
    Returns ``(n, k)``.
    """
    total = np.zeros((mats[0].shape[0], dirs.shape[0]))
    for s in mats:
        s_xi = np.einsum("nab,kb->nka", s, dirs)
        total += np.sum(s_xi**2, axis=-1) - np.einsum("nka,ka->nk", s_xi, dirs) ** 2
    return total


def _q_and_grad(z: np.ndarray, mats: list[np.ndarray], sign: float) -> tuple[float, np.ndarray]:
    # q(z / |z|) and its gradient in z; degree-0 homogeneous
    r2 = float(z @ z)
    p = 0.0
    grad_p = np.zeros(3)
    for s in mats:
        sz = s @ z
        sz2 = float(sz @ sz)
        zsz = float(z @ sz)
        p += sz2 * r2 - zsz**2
        grad_p += 2.0 * (s.T @ sz) * r2 + 2.0 * sz2 * z - 4.0 * zsz * sz
    value = p / r2**2
    grad = grad_p / r2**2 - 4.0 * p * z / r2**3
    return sign * value, sign * grad


def refine_extremum(mats: list[np.ndarray], start: np.ndarray, maximize: bool = False) -> float:
    """Local BFGS polish of q on the sphere from a sampled direction."""
    sign = -1.0 if maximize else 1.0
    res = minimize(
        _q_and_grad,
        start,
        args=(mats, sign),
        jac=True,
        method="BFGS",
        options={"gtol": SPHERE_REFINE_GTOL, "maxiter": 200},
    )
    return float(sign * res.fun)


def _cluster_bases(s: np.ndarray, tol: float) -> list[np.ndarray]:
    vals, vecs = np.linalg.eigh(s)
    scale = max(float(np.max(np.abs(vals))), np.finfo(float).tiny)
    groups, start = [], 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] - vals[k - 1] > tol * scale:
            groups.append(vecs[:, start:k])
            start = k
    return groups


def shares_eigenvector(s1: np.ndarray, s2: np.ndarray, tol: float = 1e-8) -> bool:
    """
    True when symmetric ``s1`` and ``s2`` have a common eigenvector, i.e. some
    eigenspace of ``s1`` meets some eigenspace of ``s2`` (principal angle 0).
    """
    for v in _cluster_bases(np.asarray(s1, dtype=float), tol):
        for u in _cluster_bases(np.asarray(s2, dtype=float), tol):
            cosines = np.linalg.svd(v.T @ u, compute_uv=False)
            if cosines.size and cosines[0] >= 1.0 - tol:
                return True
    return False


def _report(kind, inf, sup, worst, samples, grid, threshold, details) -> CertificateReport:
    inf = max(float(inf), 0.0)
    sup = max(float(sup), inf)
    constant = max(sup, 1.0 / inf) if inf > 0.0 else None
    return CertificateReport(
        kind=kind,
        passed=inf > threshold,
        inf=inf,
        sup=sup,
        constant=constant,
        worst_node=[int(i) for i in worst],
        samples=samples,
        resolution=list(grid.cells),
        threshold=threshold,
        details=details,
    )


def cert_2d(u1: VectorField, threshold: float = CERT_THRESHOLD) -> CertificateReport:
    """
    Frobenius norm of ``sym_grad(u1)`` over all nodes; passes when its infimum
    exceeds ``threshold``. Also reports ``inf |S_xx|`` and the infimum of the
    largest absolute principal strain (the best-rotated normal strain).
    """
    if u1.grid.dim != 2:
        raise FieldError("cert_2d needs a 2D field")
    strain = sym_grad(u1)
    frob = strain.frobenius().values
    flat = int(np.argmin(frob))
    worst = np.unravel_index(flat, frob.shape)
    sxx, syy, sxy = strain.values
    principal = np.abs(0.5 * (sxx + syy)) + np.sqrt(0.25 * (sxx - syy) ** 2 + sxy**2)
    details = {
        "inf_normal_strain": float(np.min(np.abs(sxx))),
        "inf_principal_strain": float(np.min(principal)),
    }
    report = _report("cert_2d", frob.min(), frob.max(), worst, 1, u1.grid, threshold, details)
    logger.info(f"[*] cert_2d inf {report.inf:.4e} sup {report.sup:.4e} pass={report.passed}")
    return report


def cert_3d(
    u1: VectorField,
    u1_tilde: VectorField,
    threshold: float = CERT_THRESHOLD,
    samples: int = SPHERE_SAMPLES,
    refine_nodes: int = SPHERE_REFINE_NODES,
) -> CertificateReport:
    """
    Minimize ``q(x, xi) = |S1 xi x xi|^2 + |S2 xi x xi|^2`` over the unit sphere
    at every node (Fibonacci sampling, then BFGS on the ``refine_nodes`` worst
    nodes) and report the global inf, sup and constant.
    """
    if u1.grid.dim != 3 or u1_tilde.grid != u1.grid:
        raise FieldError("cert_3d needs two 3D fields on the same grid")
    grid = u1.grid
    s1 = sym_grad(u1).node_matrices()
    s2 = sym_grad(u1_tilde).node_matrices()
    dirs = fibonacci_sphere(samples)
    n = grid.node_count
    mins = np.empty(n)
    maxs = np.empty(n)
    arg_min = np.empty(n, dtype=np.int64)
    arg_max = np.empty(n, dtype=np.int64)
    for start in range(0, n, CERT_NODE_CHUNK):
        sl = slice(start, min(start + CERT_NODE_CHUNK, n))
        q = cross_symbol([s1[sl], s2[sl]], dirs)
        mins[sl], arg_min[sl] = q.min(axis=1), q.argmin(axis=1)
        maxs[sl], arg_max[sl] = q.max(axis=1), q.argmax(axis=1)
    sampled_inf = float(np.min(mins))

    for node in np.argsort(mins)[:refine_nodes]:
        mats = [s1[node], s2[node]]
        mins[node] = min(mins[node], refine_extremum(mats, dirs[arg_min[node]]))
    top = int(np.argmax(maxs))
    maxs[top] = max(maxs[top], refine_extremum([s1[top], s2[top]], dirs[arg_max[top]], True))

    worst_flat = int(np.argmin(mins))
    worst = np.unravel_index(worst_flat, grid.shape)
    details = {"sampled_inf": sampled_inf, "refined_nodes": float(refine_nodes)}
    report = _report(
        "cert_3d", mins[worst_flat], maxs.max(), worst, samples, grid, threshold, details
    )
    logger.info(f"[*] cert_3d inf {report.inf:.4e} sup {report.sup:.4e} pass={report.passed}")
    return report
