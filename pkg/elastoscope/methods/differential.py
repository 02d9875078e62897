# ------------------------------------------------------------------
# Second-order discrete differential operators
# ------------------------------------------------------------------

from functools import lru_cache, reduce

import numpy as np
import scipy.sparse as sp

from elastoscope.core.grid import Grid
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.tensor import INDEX_PAIRS, SymTensorField
from elastoscope.interfaces.vector import VectorField


def partial(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """
    First derivative along ``axis`` of a nodal array of ``grid.shape``.

    Centered differences in the interior, one-sided second-order stencils on
    the two boundary layers (``np.gradient`` with ``edge_order=2``). Exact for
    quadratics along the axis.
    """
    grid.require_stencil()
    return np.gradient(values, grid.spacing[axis], axis=axis, edge_order=2)


def jacobian(u: VectorField) -> np.ndarray:
    """``J[i, j] = d u_i / d x_j`` with shape ``(d, d, *grid.shape)``."""
    d = u.grid.dim
    return np.stack(
        [np.stack([partial(u.values[i], u.grid, j) for j in range(d)]) for i in range(d)]
    )


def gradient(f: ScalarField) -> VectorField:
    return VectorField(
        f.grid,
        np.stack([partial(f.values, f.grid, j) for j in range(f.grid.dim)]),
        name=f"grad_{f.name}",
    )


def sym_grad(u: VectorField) -> SymTensorField:
    """Symmetric gradient ``(grad u + grad u^T) / 2`` in symmetric storage."""
    jac = jacobian(u)
    pairs = INDEX_PAIRS[u.grid.dim]
    values = np.stack([0.5 * (jac[i, j] + jac[j, i]) for i, j in pairs])
    return SymTensorField(u.grid, values, name=f"strain_{u.name}")


def divergence(u: VectorField) -> ScalarField:
    values = sum(partial(u.values[i], u.grid, i) for i in range(u.grid.dim))
    return ScalarField(u.grid, values, name=f"div_{u.name}")


def curl(u: VectorField) -> VectorField | ScalarField:
    """
    Vector curl in 3D. In 2D the scalar rotation ``d1 u2 - d2 u1`` is returned
    as a ScalarField.
    """
    g = u.grid
    if g.dim == 2:
        rot = partial(u.values[1], g, 0) - partial(u.values[0], g, 1)
        return ScalarField(g, rot, name=f"curl_{u.name}")
    c0 = partial(u.values[2], g, 1) - partial(u.values[1], g, 2)
    c1 = partial(u.values[0], g, 2) - partial(u.values[2], g, 0)
    c2 = partial(u.values[1], g, 0) - partial(u.values[0], g, 1)
    return VectorField(g, np.stack([c0, c1, c2]), name=f"curl_{u.name}")


def rotated_divergence(v: VectorField) -> ScalarField:
    """The 2D operator ``(d1, -d2) . v``."""
    if v.grid.dim != 2:
        raise ValueError("rotated_divergence is defined in 2D only")
    values = partial(v.values[0], v.grid, 0) - partial(v.values[1], v.grid, 1)
    return ScalarField(v.grid, values, name=f"rotdiv_{v.name}")


def tensor_divergence(t: SymTensorField) -> VectorField:
    """Row-wise divergence ``(div T)_i = sum_j d_j T_ij``."""
    g = t.grid
    values = np.stack(
        [sum(partial(t.entry(i, j), g, j) for j in range(g.dim)) for i in range(g.dim)]
    )
    return VectorField(g, values, name=f"div_{t.name}")


def stress_divergence(mu: ScalarField, u: VectorField) -> VectorField:
    """``2 div(mu sym_grad(u))`` composed from first-derivative stencils."""
    strain = sym_grad(u)
    stress = SymTensorField(u.grid, 2.0 * mu.values[None] * strain.values, name="stress")
    return tensor_divergence(stress)


# ------------------------------------------------------------------
# Sparse equivalents (same stencils as ``partial``)
# ------------------------------------------------------------------


def derivative_matrix_1d(n: int, h: float) -> sp.csr_matrix:
    """Matrix of ``np.gradient(f, h, edge_order=2)`` on ``n`` nodes."""
    if n < 3:
        raise ValueError(f"need at least 3 nodes, got {n}")
    rows = [0, 0, 0, n - 1, n - 1, n - 1]
    cols = [0, 1, 2, n - 1, n - 2, n - 3]
    vals = [-3.0, 4.0, -1.0, 3.0, -4.0, 1.0]
    inner = np.arange(1, n - 1)
    rows += list(inner) + list(inner)
    cols += list(inner + 1) + list(inner - 1)
    vals += [1.0] * (n - 2) + [-1.0] * (n - 2)
    mat = sp.coo_matrix((np.asarray(vals) / (2.0 * h), (rows, cols)), shape=(n, n))
    return mat.tocsr()


@lru_cache(maxsize=32)
def derivative_matrix(grid: Grid, axis: int) -> sp.csr_matrix:
    """Derivative along ``axis`` acting on C-ordered flattened nodal arrays."""
    grid.require_stencil()
    factors = [
        derivative_matrix_1d(n, grid.spacing[a]) if a == axis else sp.identity(n, format="csr")
        for a, n in enumerate(grid.shape)
    ]
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), factors)
