# ------------------------------------------------------------------
# Time-harmonic Stokes / elasticity forward solver
# ------------------------------------------------------------------
#
# Unknowns: velocity at interior nodes (boundary nodes carry F), pressure at
# every node, plus one multiplier enforcing mean(p) = 0 (Stokes only).
#
#   [ K    G    0 ] [u]   [f + boundary coupling]
#   [ G^T  S   -c ] [p] = [k_b(F)               ]
#   [ 0   -c^T  0 ] [m]   [0                    ]
#
# K = omega^2 I + L(mu), L(mu) the flux-form 2 div(mu sym_grad .) with face
# values of mu averaged arithmetically; G the centered pressure gradient at
# interior nodes; S the pressure stabilization. The matrix is symmetric.
# The mixed elasticity variant replaces the multiplier by diag(c / lambda).

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from elastoscope.config import (
    COMPATIBILITY_TOL,
    ITERATIVE_MAX_ITER,
    ITERATIVE_RESIDUAL_TOL,
    NEAR_RESONANCE_FRACTION,
    PRESSURE_STABILIZATION,
    REFINEMENT_SWEEPS,
    RESONANCE_CONDITION_CAP,
    SOLVER_RESIDUAL_TOL,
    STOKES_LIMIT_FLOOR_FACTOR,
    STOKES_LIMIT_RATE_TOL,
)
from elastoscope.core.errors import (
    DegenerateInput,
    IncompatibleBoundaryData,
    InsufficientResolution,
    InvalidProblem,
    NearResonance,
    SingularSystem,
)
from elastoscope.core.grid import Grid
from elastoscope.core.reports import StokesLimitReport
from elastoscope.interfaces.problems import ElasticityProblem, StokesProblem, StokesSolution
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.differential import divergence
from elastoscope.methods.norms import quadrature_h1, quadrature_l2
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


@dataclass(frozen=True)
class StressStencil:
    """
    mu-independent description of L(mu): every term contributes
    ``coefs[t] * mu[nodes[t]] * u_full[cols[t]]`` to momentum row ``rows[t]``.
    Rows and columns index full velocity dofs ``component * N + node``.
    """

    rows: np.ndarray
    cols: np.ndarray
    nodes: np.ndarray
    coefs: np.ndarray


@dataclass(frozen=True)
class SaddleLayout:
    """Grid-only pieces of the saddle-point system, cached per grid."""

    grid: Grid
    interior: np.ndarray  # flat indices of interior nodes
    unknown_of_dof: np.ndarray  # full velocity dof -> unknown index, -1 on boundary
    stencil: StressStencil
    row_unknown: np.ndarray  # unknown index of each stencil row
    col_unknown: np.ndarray  # unknown index of each stencil column (-1 if boundary)
    gradient: sp.csr_matrix  # (d * Ni, N)
    boundary_divergence: sp.csr_matrix  # (N, d * N), k_b = B @ F_full
    laplacian: sp.csr_matrix  # graph Laplacian on pressure nodes
    volume_fraction: np.ndarray  # trapezoid weight / cell volume

    @property
    def n_velocity(self) -> int:
        return self.grid.dim * self.interior.size

    @property
    def n_nodes(self) -> int:
        return self.grid.node_count


def _shift(idx: np.ndarray, axis: int, step: int) -> np.ndarray:
    out = idx.copy()
    out[axis] += step
    return out


def _stress_stencil(grid: Grid, interior: np.ndarray) -> StressStencil:
    d, n, h = grid.dim, grid.node_count, grid.spacing
    x = np.array(np.unravel_index(interior, grid.shape))
    rows, cols, nodes, coefs = [], [], [], []

    def flat(idx: np.ndarray) -> np.ndarray:
        return np.ravel_multi_index(tuple(idx), grid.shape)

    def add(ci: int, cj: int, col_idx: np.ndarray, node_idx: np.ndarray, coef: float) -> None:
        rows.append(ci * n + interior)
        cols.append(cj * n + flat(col_idx))
        nodes.append(flat(node_idx))
        coefs.append(np.full(interior.size, coef))

    for i in range(d):
        for j in range(d):
            # d_j(mu d_j u_i), doubled when j == i; face mu = arithmetic mean
            w = (2.0 if i == j else 1.0) / h[j] ** 2
            for s in (1, -1):
                nb = _shift(x, j, s)
                for m in (x, nb):
                    add(i, i, nb, m, 0.5 * w)
                    add(i, i, x, m, -0.5 * w)
            if j == i:
                continue
            # d_j(mu d_i u_j), centered in both directions
            for s in (1, -1):
                node = _shift(x, j, s)
                for t in (1, -1):
                    add(i, j, _shift(node, i, t), node, s * t / (4.0 * h[i] * h[j]))

    return StressStencil(
        rows=np.concatenate(rows),
        cols=np.concatenate(cols),
        nodes=np.concatenate(nodes),
        coefs=np.concatenate(coefs),
    )


def _gradient_matrix(grid: Grid, interior: np.ndarray) -> sp.csr_matrix:
    d, h = grid.dim, grid.spacing
    x = np.array(np.unravel_index(interior, grid.shape))
    ni = interior.size
    rows, cols, vals = [], [], []
    for i in range(d):
        row = i * ni + np.arange(ni)
        for s in (1, -1):
            rows.append(row)
            cols.append(np.ravel_multi_index(tuple(_shift(x, i, s)), grid.shape))
            vals.append(np.full(ni, s / (2.0 * h[i])))
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(d * ni, grid.node_count),
    ).tocsr()


def _boundary_divergence_matrix(grid: Grid) -> sp.csr_matrix:
    """
    Known part of the continuity rows from boundary velocities.

    Interior rows use the centered divergence; face rows use half of the
    half-cell flux balance (one-sided normal, centered tangential); edge and
    corner rows carry no velocity terms.
    """
    d, n, h, shape = grid.dim, grid.node_count, grid.spacing, grid.shape
    on_boundary = grid.boundary_mask.ravel()
    count = grid.boundary_axis_count.ravel()
    rows, cols, vals = [], [], []

    interior = np.flatnonzero(count == 0)
    y = np.array(np.unravel_index(interior, shape))
    for i in range(d):
        for s in (1, -1):
            z = np.ravel_multi_index(tuple(_shift(y, i, s)), shape)
            hit = on_boundary[z]
            rows.append(interior[hit])
            cols.append(i * n + z[hit])
            vals.append(np.full(int(hit.sum()), s / (2.0 * h[i])))

    faces = np.flatnonzero(count == 1)
    yf = np.array(np.unravel_index(faces, shape))
    for a in range(d):
        for edge, s_in in ((0, 1), (shape[a] - 1, -1)):
            sel = faces[yf[a] == edge]
            if sel.size == 0:
                continue
            ys = np.array(np.unravel_index(sel, shape))
            rows.append(sel)
            cols.append(a * n + sel)
            vals.append(np.full(sel.size, -s_in / (2.0 * h[a])))
            for t in range(d):
                if t == a:
                    continue
                for s in (1, -1):
                    rows.append(sel)
                    cols.append(t * n + np.ravel_multi_index(tuple(_shift(ys, t, s)), shape))
                    vals.append(np.full(sel.size, 0.5 * s / (2.0 * h[t])))

    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, d * n),
    ).tocsr()


def _graph_laplacian(grid: Grid) -> sp.csr_matrix:
    lap = sp.csr_matrix((grid.node_count, grid.node_count))
    for axis, n in enumerate(grid.shape):
        main = np.full(n, 2.0)
        main[0] = main[-1] = 1.0
        path = sp.diags([main, -np.ones(n - 1), -np.ones(n - 1)], [0, 1, -1], format="csr")
        factors = [path if a == axis else sp.identity(m, format="csr") for a, m in enumerate(grid.shape)]
        term = factors[0]
        for f in factors[1:]:
            term = sp.kron(term, f, format="csr")
        lap = lap + term
    return lap.tocsr()


@lru_cache(maxsize=8)
def saddle_layout(grid: Grid) -> SaddleLayout:
    grid.require_stencil()
    t0 = time.perf_counter()
    n = grid.node_count
    interior = np.flatnonzero(grid.interior_mask.ravel())
    unknown_of_dof = np.full(grid.dim * n, -1, dtype=np.int64)
    for i in range(grid.dim):
        unknown_of_dof[i * n + interior] = i * interior.size + np.arange(interior.size)
    stencil = _stress_stencil(grid, interior)
    layout = SaddleLayout(
        grid=grid,
        interior=interior,
        unknown_of_dof=unknown_of_dof,
        stencil=stencil,
        row_unknown=unknown_of_dof[stencil.rows],
        col_unknown=unknown_of_dof[stencil.cols],
        gradient=_gradient_matrix(grid, interior),
        boundary_divergence=_boundary_divergence_matrix(grid),
        laplacian=_graph_laplacian(grid),
        volume_fraction=(grid.trapezoid_weights / grid.cell_volume).ravel(),
    )
    logger.debug(
        f"[-] Saddle layout for {grid.cells}: {layout.n_velocity} velocity, "
        f"{n} pressure unknowns ({time.perf_counter() - t0:.3f}s)"
    )
    return layout


def compatibility_flux(boundary: VectorField) -> tuple[float, float]:
    """
    Trapezoidal net outward flux of ``F`` through the box faces.

    Returns
    -------
    tuple[float, float]
        (net flux, integral of |F.n|) for relative comparison.
    """
    grid = boundary.grid
    net = 0.0
    scale = 0.0
    for a in range(grid.dim):
        others = [b for b in range(grid.dim) if b != a]
        w = grid.trapezoid_weights_1d(others[0])
        for b in others[1:]:
            w = np.multiply.outer(w, grid.trapezoid_weights_1d(b))
        comp = boundary.values[a]
        low = np.take(comp, 0, axis=a)
        high = np.take(comp, -1, axis=a)
        net += float(np.sum(w * high) - np.sum(w * low))
        scale += float(np.sum(w * np.abs(high)) + np.sum(w * np.abs(low)))
    return net, scale


class StokesOperator:
    """
    Assembled saddle-point operator for one (mu, omega) pair.

    Factorized once; every channel, the adjoint and the gradient assembly
    reuse the factorization.
    """

    def __init__(
        self,
        mu: ScalarField,
        omega: float,
        mu_ref: float,
        lam: Optional[ScalarField] = None,
        stabilization: float = PRESSURE_STABILIZATION,
    ):
        self.grid = mu.grid
        self.layout = saddle_layout(self.grid)
        self.mu = mu
        self.omega = float(omega)
        self.mu_ref = float(mu_ref)
        self.lam = lam
        self.elastic = lam is not None
        lay = self.layout
        nv, n = lay.n_velocity, lay.n_nodes

        st = lay.stencil
        vals = st.coefs * mu.values.ravel()[st.nodes]
        inner = lay.col_unknown >= 0
        self._boundary_terms = ~inner
        self._stencil_values = vals
        k = sp.coo_matrix(
            (vals[inner], (lay.row_unknown[inner], lay.col_unknown[inner])), shape=(nv, nv)
        ).tocsr()
        k = k + self.omega**2 * sp.identity(nv, format="csr")

        stab = (stabilization / mu_ref) * lay.laplacian
        g = lay.gradient
        if self.elastic:
            lower = stab + sp.diags(lay.volume_fraction / lam.values.ravel())
            self.matrix = sp.bmat([[k, g], [g.T, lower]], format="csc")
        else:
            c = sp.csr_matrix(lay.volume_fraction.reshape(-1, 1))
            self.matrix = sp.bmat([[k, g, None], [g.T, stab, -c], [None, -c.T, None]], format="csc")
        self.size = self.matrix.shape[0]
        self._factorize()

    # ------------------------------------------------------------------

    def _factorize(self) -> None:
        t0 = time.perf_counter()
        try:
            self._lu = spla.splu(self.matrix)
        except RuntimeError as exc:
            raise SingularSystem(f"Sparse factorization failed: {exc}", size=self.size) from exc
        self.condition_estimate = self._estimate_condition()
        logger.debug(
            f"[-] Factorized {self.size} unknowns in {time.perf_counter() - t0:.3f}s "
            f"(cond ~ {self.condition_estimate:.3e})"
        )
        if not np.isfinite(self.condition_estimate) or self.condition_estimate > RESONANCE_CONDITION_CAP:
            raise NearResonance(
                f"Condition estimate {self.condition_estimate:.3e} exceeds cap "
                f"{RESONANCE_CONDITION_CAP:.1e}; omega^2 = {self.omega**2:.6g} is near a "
                "discrete eigenvalue",
                condition=float(self.condition_estimate),
                omega=self.omega,
            )
        self.near_resonance = (
            self.condition_estimate > RESONANCE_CONDITION_CAP * NEAR_RESONANCE_FRACTION
        )

    def _estimate_condition(self) -> float:
        inverse = spla.LinearOperator(
            self.matrix.shape,
            matvec=self._lu.solve,
            rmatvec=lambda b: self._lu.solve(b, trans="T"),
            dtype=float,
        )
        try:
            return float(spla.onenormest(self.matrix) * spla.onenormest(inverse))
        except (ValueError, RuntimeError) as exc:
            logger.warning(f"[!!] Condition estimate failed: {exc}")
            return float("inf")

    def solve_system(self, rhs: np.ndarray) -> tuple[np.ndarray, float]:
        """Solve ``A x = rhs`` to the residual contract; returns (x, relative residual)."""
        scale = float(np.linalg.norm(rhs))
        if scale == 0.0:
            return np.zeros_like(rhs), 0.0
        x = self._lu.solve(rhs)
        rel = float(np.linalg.norm(rhs - self.matrix @ x)) / scale
        sweeps = 0
        while rel > ITERATIVE_RESIDUAL_TOL and sweeps < REFINEMENT_SWEEPS:
            x = x + self._lu.solve(rhs - self.matrix @ x)
            rel = float(np.linalg.norm(rhs - self.matrix @ x)) / scale
            sweeps += 1
        if rel > SOLVER_RESIDUAL_TOL:
            logger.info(f"[*] Direct solve residual {rel:.2e}; falling back to GMRES")
            precond = spla.LinearOperator(self.matrix.shape, matvec=self._lu.solve, dtype=float)
            x, info = spla.gmres(
                self.matrix, rhs, x0=x, M=precond, rtol=ITERATIVE_RESIDUAL_TOL,
                maxiter=ITERATIVE_MAX_ITER,
            )
            rel = float(np.linalg.norm(rhs - self.matrix @ x)) / scale
            if rel > SOLVER_RESIDUAL_TOL:
                raise SingularSystem(
                    f"Residual {rel:.2e} above {SOLVER_RESIDUAL_TOL:.0e} after GMRES (info={info})",
                    residual=rel,
                )
        return x, rel

    # ------------------------------------------------------------------

    def momentum_boundary_load(self, boundary: np.ndarray) -> np.ndarray:
        """``-L(mu)[interior, boundary] @ F`` in unknown ordering."""
        lay = self.layout
        sel = self._boundary_terms
        cols = lay.stencil.cols[sel]
        weights = -self._stencil_values[sel] * boundary.ravel()[cols]
        return np.bincount(lay.row_unknown[sel], weights=weights, minlength=lay.n_velocity)

    def build_rhs(self, boundary: np.ndarray, body_force: Optional[np.ndarray]) -> np.ndarray:
        lay = self.layout
        momentum = self.momentum_boundary_load(boundary)
        if body_force is not None:
            momentum = momentum + np.concatenate(
                [body_force[i].ravel()[lay.interior] for i in range(self.grid.dim)]
            )
        continuity = lay.boundary_divergence @ boundary.ravel()
        parts = [momentum, continuity]
        if not self.elastic:
            parts.append(np.zeros(1))
        return np.concatenate(parts)

    def unpack(self, x: np.ndarray, boundary: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
        """Split a solution vector into full-grid u, p and the multiplier."""
        lay = self.layout
        d, n, ni = self.grid.dim, lay.n_nodes, lay.interior.size
        u = boundary.reshape(d, n).copy()
        for i in range(d):
            u[i, lay.interior] = x[i * ni : (i + 1) * ni]
        p = x[lay.n_velocity : lay.n_velocity + n]
        multiplier = 0.0 if self.elastic else float(x[-1])
        return u.reshape(d, *self.grid.shape), p.reshape(self.grid.shape), multiplier

    def solve_fields(
        self, boundary: np.ndarray, body_force: Optional[np.ndarray] = None
    ) -> tuple[np.ndarray, np.ndarray, float, float]:
        x, rel = self.solve_system(self.build_rhs(boundary, body_force))
        u, p, m = self.unpack(x, boundary)
        return u, p, m, rel

    def stress_pairing(self, u_full: np.ndarray, v_full: np.ndarray) -> np.ndarray:
        """
        Nodal sensitivity ``sum_t coef_t v[row_t] u[col_t]`` accumulated at the
        mu node of every term, i.e. ``v . (dL/dmu_k) u`` for every node k.
        """
        st = self.layout.stencil
        weights = st.coefs * v_full.ravel()[st.rows] * u_full.ravel()[st.cols]
        return np.bincount(st.nodes, weights=weights, minlength=self.layout.n_nodes).reshape(
            self.grid.shape
        )


def discrete_stress_divergence(mu: ScalarField, u: VectorField) -> VectorField:
    """
    The momentum rows' ``2 div(mu sym_grad u)`` at interior nodes.

    Boundary values of ``u`` enter through the stencil; the result is zero on
    boundary nodes.
    """
    if mu.grid != u.grid:
        raise InvalidProblem("mu and u must share a grid")
    st = saddle_layout(mu.grid).stencil
    weights = st.coefs * mu.values.ravel()[st.nodes] * u.values.ravel()[st.cols]
    out = np.bincount(st.rows, weights=weights, minlength=u.values.size)
    return VectorField(mu.grid, out.reshape(u.values.shape), name="stress_div")


def discrete_pressure_gradient(p: ScalarField) -> VectorField:
    """The centered pressure gradient ``G p`` of the momentum rows; zero on boundary nodes."""
    grid = p.grid
    lay = saddle_layout(grid)
    out = np.zeros((grid.dim, grid.node_count))
    out[:, lay.interior] = (lay.gradient @ p.values.ravel()).reshape(grid.dim, -1)
    return VectorField(grid, out.reshape(grid.dim, *grid.shape), name="grad_p")


def _check_compatible(boundary: Optional[VectorField]) -> None:
    if boundary is None:
        return
    net, scale = compatibility_flux(boundary)
    if abs(net) > COMPATIBILITY_TOL * max(scale, np.finfo(float).tiny):
        raise IncompatibleBoundaryData(
            f"Boundary data carries net flux {net:.3e} (relative {abs(net) / scale:.3e})",
            flux=net,
            scale=scale,
        )


def _solution(
    prob: StokesProblem, op: StokesOperator, u: np.ndarray, p: np.ndarray, m: float, rel: float
) -> StokesSolution:
    grid = prob.grid
    u_field = VectorField(grid, u, name="u")
    div = divergence(u_field)
    return StokesSolution(
        u=u_field,
        p=ScalarField(grid, p, name="p"),
        problem=prob,
        residual_norm=rel,
        near_resonance=op.near_resonance,
        condition_estimate=op.condition_estimate,
        multiplier=m,
        divergence_norm=quadrature_l2(div, layer=1),
    )


def solve_stokes(prob: StokesProblem, operator: Optional[StokesOperator] = None) -> StokesSolution:
    """
    Solve the time-harmonic Stokes problem.

    Parameters
    ----------
    prob : StokesProblem
        mu, omega, Dirichlet data F and optional body force.
    operator : StokesOperator, optional
        Pre-factorized operator for the same (mu, omega) to reuse.

    Returns
    -------
    StokesSolution
        u equal to F on boundary nodes, zero-mean p, residual metadata.
    """
    _check_compatible(prob.boundary)
    op = operator or StokesOperator(prob.mu, prob.omega, prob.mu_ref)
    force = None if prob.body_force is None else prob.body_force.values
    u, p, m, rel = op.solve_fields(prob.boundary_values(), force)
    sol = _solution(prob, op, u, p, m, rel)
    logger.debug(
        f"[-] Stokes solve on {prob.grid.cells}: residual {rel:.2e}, "
        f"div {sol.divergence_norm:.2e}, near_resonance={sol.near_resonance}"
    )
    return sol


def solve_elasticity_full(prob: ElasticityProblem) -> StokesSolution:
    """Elasticity solve returning displacement and the pressure ``lambda div u``."""
    op = StokesOperator(prob.mu, prob.omega, prob.mu_ref, lam=prob.lam)
    force = None if prob.body_force is None else prob.body_force.values
    u, p, m, rel = op.solve_fields(prob.boundary_values(), force)
    sol = _solution(prob, op, u, p, m, rel)
    logger.debug(f"[-] Elasticity solve on {prob.grid.cells}: residual {rel:.2e}")
    return sol


def solve_elasticity(prob: ElasticityProblem) -> VectorField:
    return solve_elasticity_full(prob).u


def verify_stokes_limit(
    lambdas: Sequence[float],
    mu: ScalarField,
    omega: float,
    boundary: VectorField,
    body_force: Optional[VectorField] = None,
) -> StokesLimitReport:
    """
    Least-squares slope of ``log ||u_lambda - u||_H1`` against ``log lambda``.

    Both solutions share every stencil, so the gap measures the incompressible
    limit and not a discretization mismatch.
    """
    values = [float(v) for v in lambdas]
    if len(values) < 2:
        raise DegenerateInput("Need at least two lambda values for a slope")
    if len(set(values)) != len(values):
        raise DegenerateInput(f"Repeated lambda values {values}: slope undefined")
    if any(v <= 0 for v in values):
        raise InvalidProblem("lambda values must be positive")
    if 2.0 * mu.max() >= 3.0 * min(values):
        raise InvalidProblem(
            f"2 max(mu) = {2 * mu.max():.4g} must stay below 3 min(lambda) = {3 * min(values):.4g}"
        )
    grid = mu.grid
    ref = solve_stokes(StokesProblem(mu=mu, omega=omega, boundary=boundary, body_force=body_force))
    u_norm = quadrature_h1(ref.u)
    gaps, residuals = [], [ref.residual_norm]
    for lam in values:
        prob = ElasticityProblem(
            mu=mu,
            omega=omega,
            boundary=boundary,
            body_force=body_force,
            mu_ref=ref.problem.mu_ref,
            lam=ScalarField(grid, np.full(grid.shape, lam), name="lambda"),
        )
        sol = solve_elasticity_full(prob)
        residuals.append(sol.residual_norm)
        gaps.append(quadrature_h1(sol.u - ref.u))
        logger.info(f"[-] lambda={lam:.3g}: H1 gap {gaps[-1]:.4e}")

    floor = max(max(residuals), np.finfo(float).eps) * max(u_norm, 1.0)
    if min(gaps) < STOKES_LIMIT_FLOOR_FACTOR * floor:
        raise InsufficientResolution(
            f"Smallest gap {min(gaps):.3e} is within {STOKES_LIMIT_FLOOR_FACTOR}x of the "
            f"solver noise floor {floor:.3e}",
            gaps=gaps,
            floor=floor,
        )
    slope = float(np.polyfit(np.log(values), np.log(gaps), 1)[0])
    report = StokesLimitReport(
        lambdas=values,
        gaps=gaps,
        slope=slope,
        low_confidence=len(values) < 3,
        meets_theoretical_rate=slope <= -0.5 + STOKES_LIMIT_RATE_TOL,
        in_acceptance_band=abs(slope + 0.5) <= STOKES_LIMIT_RATE_TOL,
        noise_floor=floor,
        cells=list(grid.cells),
    )
    logger.info(f"[*] Stokes limit slope {slope:.3f} over lambda={values}")
    if not report.in_acceptance_band:
        logger.warning(
            f"[!!] Stokes limit slope {slope:.3f} lies outside -0.5 +- {STOKES_LIMIT_RATE_TOL}"
        )
    return report
