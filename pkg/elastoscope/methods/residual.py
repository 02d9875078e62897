# ------------------------------------------------------------------
# Pressure-eliminated linearized operators and the kernel probe
# ------------------------------------------------------------------
#
# 2D:  A(dmu) = (d1, -d2) . (2 div(dmu sym_grad u1))
# 3D:  A(dmu) = curl (2 div(dmu sym_grad u1))
#
# Subtracting the momentum equations of two solutions with the same data
# gives A(mu1 - mu2) = g with w = u1 - u2 and
#   3D:  g = -curl(2 div(mu2 sym_grad w)) - omega^2 curl w
#   2D:  g = -(d1,-d2).(2 div(mu2 sym_grad w)) - omega^2 (d1,-d2).w
#            -(d1,-d2).grad(p1 - p2)
# The continuous curl annihilates gradients, so no pressure term survives in
# 3D. verify_identity evaluates g with the solver's own momentum stencils
# (pressure gradient included in both dimensions, where the centered curl of
# G dp vanishes), so two solves cancel exactly and the measured residual is
# the consistency error of the field-level A alone.

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from elastoscope.config import (
    DEFAULT_OMEGA,
    IDENTITY_BOUNDARY_LAYER,
    KERNEL_ARPACK_MAXITER,
    KERNEL_DENSE_LIMIT,
    KERNEL_MAX_NODES,
    KERNEL_TRIVIAL_THRESHOLD,
)
from elastoscope.core.errors import (
    DegenerateInput,
    DiscretizationError,
    FieldError,
    InvalidNormSpec,
    InvalidProblem,
)
from elastoscope.core.field_base import FieldBase
from elastoscope.core.grid import Grid
from elastoscope.core.reports import GBoundReport, IdentityResidual, KernelProbeReport
from elastoscope.interfaces.problems import StokesSolution
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.differential import (
    curl,
    derivative_matrix,
    gradient,
    rotated_divergence,
    stress_divergence,
    sym_grad,
)
from elastoscope.methods.norms import h_s_norm, quadrature_l2
from elastoscope.methods.stokes import discrete_pressure_gradient, discrete_stress_divergence
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


def _outer(v: VectorField) -> FieldBase:
    """The pressure-eliminating first-order operator: rotated divergence or curl."""
    return rotated_divergence(v) if v.grid.dim == 2 else curl(v)


def residual_operator(u1: VectorField, mu: ScalarField) -> FieldBase:
    """Field-level ``A(mu)`` built from the first-derivative field operators."""
    if mu.grid != u1.grid:
        raise FieldError("mu and u1 must share a grid")
    return _outer(stress_divergence(mu, u1))


@dataclass(frozen=True)
class LinearizedMap:
    """
    Sparse matrix of ``mu -> A_{u1} mu`` on C-ordered nodal vectors.

    ``matrix`` has ``node_count`` rows in 2D and ``3 * node_count`` rows in 3D
    (curl components stacked).
    """

    grid: Grid
    background: VectorField
    omega: float
    matrix: sp.csr_matrix


def build_map(u1: VectorField, omega: float = DEFAULT_OMEGA) -> LinearizedMap:
    """Assemble ``A_{u1}`` by composing the sparse first-derivative stencils."""
    grid = u1.grid
    d = grid.dim
    dmat = [derivative_matrix(grid, a) for a in range(d)]
    strain = sym_grad(u1)
    # V_i = sum_j D_j diag(2 S_ij)
    v = [
        sum(dmat[j] @ sp.diags(2.0 * strain.entry(i, j).ravel()) for j in range(d))
        for i in range(d)
    ]
    if d == 2:
        matrix = dmat[0] @ v[0] - dmat[1] @ v[1]
    else:
        matrix = sp.vstack(
            [
                dmat[1] @ v[2] - dmat[2] @ v[1],
                dmat[2] @ v[0] - dmat[0] @ v[2],
                dmat[0] @ v[1] - dmat[1] @ v[0],
            ]
        )
    return LinearizedMap(grid, u1, float(omega), sp.csr_matrix(matrix))


def apply_A(lmap: LinearizedMap, mu: ScalarField) -> FieldBase:
    if mu.grid != lmap.grid:
        raise FieldError("mu is not on the map grid")
    out = lmap.matrix @ mu.values.ravel()
    if lmap.grid.dim == 2:
        return ScalarField(lmap.grid, out.reshape(lmap.grid.shape), name="A_mu")
    return VectorField(lmap.grid, out.reshape(3, *lmap.grid.shape), name="A_mu")


def data_term(w: VectorField, mu2: ScalarField, omega: float, dp: Optional[ScalarField] = None) -> FieldBase:
    """Right-hand side ``g`` of the identity for a displacement difference ``w``."""
    g = -_outer(stress_divergence(mu2, w)) - omega**2 * _outer(w)
    if dp is not None and w.grid.dim == 2:
        g = g - rotated_divergence(gradient(dp))
    return g


def discrete_data_term(w: VectorField, mu2: ScalarField, omega: float, dp: ScalarField) -> FieldBase:
    """``g`` built from the forward solver's stress and pressure-gradient stencils."""
    momentum = discrete_stress_divergence(mu2, w) + w * omega**2 + discrete_pressure_gradient(dp)
    return -_outer(momentum)


def verify_identity(
    sol1: StokesSolution, sol2: StokesSolution, layer: int = IDENTITY_BOUNDARY_LAYER
) -> IdentityResidual:
    """
    Residual ``A_{u1}(mu1 - mu2) - g`` of two solves sharing F, f and omega,
    measured on the sub-box ``layer`` node rings inside the boundary.

    The outer derivative of ``g`` reaches one node further than the momentum
    rows hold, so ``layer`` must be at least 2.
    """
    if layer < 2:
        raise InvalidProblem(f"identity residual needs at least 2 excluded rings, got {layer}")
    p1, p2 = sol1.problem, sol2.problem
    grid = p1.grid
    if p2.grid != grid:
        raise InvalidProblem("solutions live on different grids")
    if p1.omega != p2.omega:
        raise InvalidProblem(f"omega differs between solves ({p1.omega} vs {p2.omega})")
    mask = grid.boundary_mask
    if not np.allclose(p1.boundary_values()[:, mask], p2.boundary_values()[:, mask]):
        raise InvalidProblem("solves use different boundary data")
    f1 = None if p1.body_force is None else p1.body_force.values
    f2 = None if p2.body_force is None else p2.body_force.values
    if (f1 is None) != (f2 is None) or (f1 is not None and not np.allclose(f1, f2)):
        raise InvalidProblem("solves use different body forces")
    if min(grid.shape) - 2 * layer < 2:
        raise DiscretizationError(f"Grid {grid.cells} too small for a {layer}-ring exclusion")

    w = sol1.u - sol2.u
    lhs = residual_operator(sol1.u, p1.mu - p2.mu)
    g = discrete_data_term(w, p2.mu, p1.omega, sol1.p - sol2.p)
    r = lhs - g

    sl = grid.interior_slices(layer)
    abs_l2 = quadrature_l2(r, layer)
    lhs_l2 = quadrature_l2(lhs, layer)
    result = IdentityResidual(
        cells=list(grid.cells),
        abs_l2=abs_l2,
        rel_l2=abs_l2 / lhs_l2 if lhs_l2 > 0.0 else abs_l2,
        max_abs=float(max(np.max(np.abs(c[sl])) for c in r.components())),
        lhs_l2=lhs_l2,
    )
    logger.info(f"[*] Identity residual on {grid.cells}: {abs_l2:.4e} (relative {result.rel_l2:.3e})")
    return result


def identity_order(coarse: IdentityResidual, fine: IdentityResidual) -> float:
    """Observed convergence order between two residual measurements."""
    if coarse.abs_l2 <= 0.0 or fine.abs_l2 <= 0.0:
        raise DegenerateInput("identity residual vanished; order undefined")
    ratio = fine.cells[0] / coarse.cells[0]
    return float(np.log(coarse.abs_l2 / fine.abs_l2) / np.log(ratio))


def g_bound_probe(
    w: VectorField, mu2: ScalarField, order: float, omega: float = DEFAULT_OMEGA
) -> float:
    """
    ``||g||_l / ||w||_(l+3)`` in 3D, ``||g||_l / ||w||_(l+2)`` in 2D, with
    spectral norms of order ``l <= 0``.
    """
    if order > 0:
        raise InvalidNormSpec(f"g bound order must be <= 0, got {order}")
    shift = 3 if w.grid.dim == 3 else 2
    g = data_term(w, mu2, omega)
    denominator = h_s_norm(w, order + shift)
    if denominator == 0.0:
        raise DegenerateInput("w has zero norm; ratio undefined")
    return h_s_norm(g, order, check_trace=False) / denominator


def g_bound_family(
    ws: Sequence[VectorField], mu2: ScalarField, order: float, omega: float = DEFAULT_OMEGA
) -> GBoundReport:
    ratios = [g_bound_probe(w, mu2, order, omega) for w in ws]
    if not ratios:
        raise DegenerateInput("empty w family")
    lo, hi = min(ratios), max(ratios)
    return GBoundReport(order=order, ratios=ratios, max_ratio=hi, spread=hi / lo if lo > 0 else float("inf"))


# ------------------------------------------------------------------
# Kernel probe
# ------------------------------------------------------------------


@dataclass(frozen=True)
class KernelProbe:
    """Smallest singular values (in the report) with their right singular vectors."""

    report: KernelProbeReport
    vectors: np.ndarray


def stacked_operator(maps: Sequence[LinearizedMap]) -> sp.csr_matrix:
    """
    Rows of every map followed by the boundary-trace rows.

    The trace rows are scaled by the infinity norm of the first map so that
    appending further maps leaves them unchanged.
    """
    grid = maps[0].grid
    if any(m.grid != grid for m in maps):
        raise FieldError("all maps must share a grid")
    scale = spla.norm(maps[0].matrix, np.inf) or 1.0
    boundary = np.flatnonzero(grid.boundary_mask.ravel())
    trace = sp.csr_matrix(
        (np.full(boundary.size, scale), (np.arange(boundary.size), boundary)),
        shape=(boundary.size, grid.node_count),
    )
    return sp.vstack([m.matrix for m in maps] + [trace]).tocsr()


def _dense_smallest(a: sp.csr_matrix, k: int) -> tuple[np.ndarray, np.ndarray]:
    _, s, vt = np.linalg.svd(a.toarray(), full_matrices=False)
    order = np.argsort(s)[:k]
    return s[order], vt[order]


def _arpack_smallest(a: sp.csr_matrix, k: int) -> tuple[np.ndarray, np.ndarray, bool]:
    normal = (a.T @ a).tocsc()
    shift = -1e-10 * float(normal.diagonal().max() or 1.0)
    try:
        vals, vecs = spla.eigsh(
            normal, k=k, sigma=shift, which="LM", maxiter=KERNEL_ARPACK_MAXITER
        )
        converged = True
    except spla.ArpackNoConvergence as exc:
        logger.warning(f"[!!] ARPACK returned {len(exc.eigenvalues)} of {k} eigenpairs")
        vals, vecs, converged = exc.eigenvalues, exc.eigenvectors, False
    order = np.argsort(vals)
    return np.sqrt(np.clip(vals[order], 0.0, None)), vecs[:, order].T, converged


def kernel_probe(
    maps: LinearizedMap | Sequence[LinearizedMap],
    k: int = 4,
    threshold: float = KERNEL_TRIVIAL_THRESHOLD,
    method: Literal["auto", "dense", "arpack"] = "auto",
) -> KernelProbe:
    """
    Smallest ``k`` singular values of the stacked operator with trace rows.

    The kernel is declared numerically trivial when ``sigma_1 > threshold * sigma_k``.
    """
    maps = [maps] if isinstance(maps, LinearizedMap) else list(maps)
    if not maps:
        raise DegenerateInput("kernel_probe needs at least one map")
    grid = maps[0].grid
    if grid.node_count > KERNEL_MAX_NODES:
        raise DiscretizationError(
            f"Kernel probe limited to {KERNEL_MAX_NODES} unknowns, grid has {grid.node_count}"
        )
    a = stacked_operator(maps)
    n = a.shape[1]
    k = min(k, n - 1)
    if method == "auto":
        method = "dense" if n <= KERNEL_DENSE_LIMIT else "arpack"
    converged = True
    if method == "dense":
        sigma, vectors = _dense_smallest(a, k)
    else:
        sigma, vectors, converged = _arpack_smallest(a, k)

    trivial = bool(sigma.size and sigma[0] > threshold * sigma[-1])
    report = KernelProbeReport(
        singular_values=[float(s) for s in sigma],
        threshold=threshold,
        trivial=trivial,
        method=method,
        converged=converged,
        unknowns=n,
        rows=a.shape[0],
        channels=len(maps),
    )
    logger.info(
        f"[*] Kernel probe ({method}, {len(maps)} channel(s)): sigma_1 = "
        f"{sigma[0] if sigma.size else float('nan'):.3e}, trivial={trivial}"
    )
    return KernelProbe(report=report, vectors=np.asarray(vectors))
