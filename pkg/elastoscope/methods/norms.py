# ------------------------------------------------------------------
# Sobolev, fractional and boundary-weighted norms on grid fields
# ------------------------------------------------------------------

from dataclasses import dataclass

import numpy as np
from scipy.fft import dstn

from elastoscope.config import (
    BOUNDARY_WEIGHT_EXPONENT,
    MAX_SOBOLEV_ORDER,
    SOBOLEV_EPS,
    TRACE_TOL,
    WEIGHTED_BOUNDARY_LAYER,
    WEIGHTED_FIELD_CAP,
)
from elastoscope.core.errors import (
    DiscretizationError,
    InvalidNormSpec,
    NonzeroTrace,
    UnboundedWeightedField,
)
from elastoscope.core.field_base import FieldBase
from elastoscope.core.grid import Grid
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.methods.differential import partial
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)


@dataclass(frozen=True)
class NormSpec:
    """
    Order, boundary-weight power and epsilon of a stability norm.

    :param order: Sobolev order s, |s| <= MAX_SOBOLEV_ORDER
    :param weight_power: 0 (unweighted) or -2 (rho^-2 weighting)
    :param eps: epsilon in (0, 1)
    """

    order: float
    weight_power: int = 0
    eps: float = SOBOLEV_EPS

    def __post_init__(self) -> None:
        if not np.isfinite(self.order) or abs(self.order) > MAX_SOBOLEV_ORDER:
            raise InvalidNormSpec(f"|s| must be <= {MAX_SOBOLEV_ORDER}, got {self.order}")
        if self.weight_power not in (0, -2):
            raise InvalidNormSpec(f"weight power must be 0 or -2, got {self.weight_power}")
        if not 0.0 < self.eps < 1.0:
            raise InvalidNormSpec(f"eps must lie in (0, 1), got {self.eps}")

    @classmethod
    def theorem(cls, eps: float = SOBOLEV_EPS, weight_power: int = 0) -> "NormSpec":
        """The order 1/2 + eps used by the stability estimates."""
        return cls(order=0.5 + eps, weight_power=weight_power, eps=eps)


@dataclass(frozen=True)
class BoundaryWeight:
    """Boundary defining function rho: positive inside, zero on boundary nodes."""

    rho: ScalarField
    exponent: int = BOUNDARY_WEIGHT_EXPONENT


def boundary_weight(grid: Grid, exponent: int = BOUNDARY_WEIGHT_EXPONENT) -> BoundaryWeight:
    """
    Smooth minimum of per-axis distances to the boundary.

    Each axis contributes ``d_i = (x - a)(b - x)/(b - a)``, which equals the
    distance to the nearer face to first order and is smooth across the
    midline; the minimum is smoothed as ``(sum d_i^-q)^(-1/q)``. The result
    vanishes linearly at the boundary and is C-infinity inside.
    """
    dists = []
    for x, a, length in zip(grid.coordinates(), grid.origin, grid.extents):
        dists.append((x - a) * (a + length - x) / length)
    dists = np.stack(dists)
    rho = np.zeros(grid.shape)
    inside = np.all(dists > 0.0, axis=0)
    rho[inside] = np.sum(dists[:, inside] ** (-float(exponent)), axis=0) ** (-1.0 / exponent)
    return BoundaryWeight(ScalarField(grid, rho, name="rho"), exponent=exponent)


# --- quadrature norms ---


def subgrid(grid: Grid, layer: int) -> Grid:
    """Grid of the sub-box obtained by dropping ``layer`` node rings."""
    if layer == 0:
        return grid
    if any(n - 2 * layer < 2 for n in grid.shape):
        raise DiscretizationError(f"Grid {grid.shape} too small to drop {layer} layers")
    h = grid.spacing
    return Grid(
        cells=tuple(c - 2 * layer for c in grid.cells),
        extents=tuple(e - 2 * layer * hi for e, hi in zip(grid.extents, h)),
        origin=tuple(o + layer * hi for o, hi in zip(grid.origin, h)),
    )


def _quadrature(arrays: list[np.ndarray], grid: Grid, layer: int) -> float:
    sub = subgrid(grid, layer)
    sl = grid.interior_slices(layer)
    w = sub.trapezoid_weights
    return float(sum(np.sum(w * a[sl] ** 2) for a in arrays))


def quadrature_l2(f: FieldBase, layer: int = 0) -> float:
    """Trapezoidal L2 norm, optionally on the sub-box ``layer`` nodes inside."""
    return float(np.sqrt(_quadrature(f.components(), f.grid, layer)))


def quadrature_h1(f: FieldBase, layer: int = 0) -> float:
    """Trapezoidal H1 norm ``sqrt(||f||^2 + ||grad f||^2)``."""
    grads = [partial(c, f.grid, a) for c in f.components() for a in range(f.grid.dim)]
    total = _quadrature(f.components(), f.grid, layer) + _quadrature(grads, f.grid, layer)
    return float(np.sqrt(total))


# --- spectral norms ---


def _check_trace(f: FieldBase) -> None:
    scale = f.max_abs()
    if scale == 0.0:
        return
    trace = f.boundary_max_abs()
    if trace > TRACE_TOL * scale:
        raise NonzeroTrace(
            f"Field '{f.name}' has boundary values {trace:.3e} (scale {scale:.3e}); "
            "fractional norms need zero trace",
            trace=trace,
            scale=scale,
        )


def sine_coefficients(values: np.ndarray, grid: Grid) -> np.ndarray:
    """
    Coefficients ``a_k`` of ``f = sum_k a_k prod_i sin(pi k_i (x_i - o_i) / L_i)``
    from the interior nodal values (DST-I on every axis).
    """
    interior = values[grid.interior_slices(1)]
    return dstn(interior, type=1) / float(np.prod(grid.cells))


def dirichlet_eigenvalues(grid: Grid) -> np.ndarray:
    """Continuous Dirichlet Laplacian eigenvalues matching ``sine_coefficients``."""
    lam = np.zeros(tuple(n - 2 for n in grid.shape))
    for axis, (c, length) in enumerate(zip(grid.cells, grid.extents)):
        k = np.arange(1, c, dtype=float)
        view = [1] * grid.dim
        view[axis] = c - 1
        lam = lam + ((k * np.pi / length) ** 2).reshape(view)
    return lam


def h_s_norm(f: FieldBase, s: float, check_trace: bool = True) -> float:
    """
    Spectral Sobolev norm ``||f||_s^2 = sum_k (1 + Lambda_k)^s |a_k|^2 prod(L_i / 2)``.

    Parameters
    ----------
    f : ScalarField | VectorField
        Field extended by zero outside the domain (components summed).
    s : float
        Order; negative orders give the discrete dual norm.
    check_trace : bool
        Raise NonzeroTrace for fractional ``s`` when boundary values are not
        negligible relative to the field scale.

    Returns
    -------
    float
        The norm. ``s = 0`` reproduces the trapezoidal L2 norm of zero-trace
        fields exactly.
    """
    if abs(s) > MAX_SOBOLEV_ORDER:
        raise InvalidNormSpec(f"|s| must be <= {MAX_SOBOLEV_ORDER}, got {s}")
    grid = f.grid
    grid.require_stencil()
    if check_trace and not float(s).is_integer():
        _check_trace(f)
    weight = (1.0 + dirichlet_eigenvalues(grid)) ** s
    volume = float(np.prod([length / 2.0 for length in grid.extents]))
    total = 0.0
    for comp in f.components():
        coeffs = sine_coefficients(comp, grid)
        total += float(np.sum(weight * coeffs**2))
    return float(np.sqrt(total * volume))


def weighted_norm(
    f: FieldBase,
    power: int,
    rho: BoundaryWeight,
    base: str = "l2",
    layer: int = WEIGHTED_BOUNDARY_LAYER,
) -> float:
    """
    Norm of ``rho^power * f`` on the sub-box ``layer`` nodes inside the boundary.

    Parameters
    ----------
    f : ScalarField | VectorField
        Field decaying at the boundary.
    power : int
        Exponent applied to rho (typically -2).
    rho : BoundaryWeight
        Boundary defining function on the same grid.
    base : {"l2", "h1"}
        Base norm evaluated by trapezoidal quadrature.

    Returns
    -------
    float
        Weighted norm value.
    """
    grid = f.grid
    if rho.rho.grid != grid:
        raise ValueError("rho and f must share a grid")
    if base not in ("l2", "h1"):
        raise ValueError(f"base must be 'l2' or 'h1', got {base!r}")
    sl = grid.interior_slices(layer)
    sub = subgrid(grid, layer)
    weight = rho.rho.values[sl] ** float(power)
    weighted = [c[sl] * weight for c in f.components()]

    ring = sub.boundary_mask
    edge_max = max(float(np.max(np.abs(w[ring]))) for w in weighted)
    if edge_max > WEIGHTED_FIELD_CAP:
        raise UnboundedWeightedField(
            f"Weighted field reaches {edge_max:.3e} next to the excluded layer "
            f"(cap {WEIGHTED_FIELD_CAP:.1e})",
            value=edge_max,
        )

    w = sub.trapezoid_weights
    total = float(sum(np.sum(w * a**2) for a in weighted))
    if base == "h1":
        for a in weighted:
            for axis in range(grid.dim):
                total += float(np.sum(w * partial(a, sub, axis) ** 2))
    return float(np.sqrt(total))
