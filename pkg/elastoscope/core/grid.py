from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from elastoscope.config import MAX_GRID_NODES, MIN_NODES_PER_AXIS
from elastoscope.core.errors import DiscretizationError


@dataclass(frozen=True)
class Grid:
    """
    Uniform node-centred Cartesian grid on a rectangle (2D) or box (3D).

    Nodes sit at ``origin + i * spacing`` for ``i = 0..cells``, so every axis
    carries ``cells + 1`` nodes and the outermost nodes lie on the boundary.
    Array layout is ``indexing="ij"``: axis 0 is x, axis 1 is y, axis 2 is z.

    :param cells: Cells per axis (positive integers)
    :type cells: tuple[int, ...]
    :param extents: Side lengths of the domain
    :type extents: tuple[float, ...]
    :param origin: Lower corner (defaults to zeros)
    :type origin: tuple[float, ...]
    """

    cells: tuple[int, ...]
    extents: tuple[float, ...] = ()
    origin: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        cells = tuple(int(c) for c in self.cells)
        dim = len(cells)
        if dim not in (2, 3):
            raise DiscretizationError(f"Grid dimension must be 2 or 3, got {dim}")
        extents = tuple(float(e) for e in self.extents) if self.extents else (1.0,) * dim
        origin = tuple(float(o) for o in self.origin) if self.origin else (0.0,) * dim
        if len(extents) != dim or len(origin) != dim:
            raise DiscretizationError(
                f"cells, extents and origin must agree in length: {cells}, {extents}, {origin}"
            )
        if any(c <= 0 for c in cells):
            raise DiscretizationError(f"cells must be positive, got {cells}")
        if any(not np.isfinite(e) or e <= 0.0 for e in extents):
            raise DiscretizationError(f"extents must be positive, got {extents}")
        nodes = int(np.prod([c + 1 for c in cells]))
        if nodes > MAX_GRID_NODES:
            raise DiscretizationError(
                f"Grid with {nodes} nodes exceeds MAX_GRID_NODES={MAX_GRID_NODES}"
            )
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def unit(cls, n: int, dim: int = 2) -> "Grid":
        """Unit square/cube with ``n`` cells per axis."""
        return cls(cells=(n,) * dim)

    # ------------------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.cells)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extents, self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.origin) + 0.5 * np.asarray(self.extents)

    def axes(self) -> list[np.ndarray]:
        """1D node coordinates per axis."""
        return [
            o + h * np.arange(n, dtype=float)
            for o, h, n in zip(self.origin, self.spacing, self.shape)
        ]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Nodal coordinate arrays, one per axis, each of ``shape``."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            index: list[slice | int] = [slice(None)] * self.dim
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True
        mask.setflags(write=False)
        return mask

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    @cached_property
    def boundary_axis_count(self) -> np.ndarray:
        """Number of axes along which each node sits on the boundary (0 = interior)."""
        count = np.zeros(self.shape, dtype=np.int64)
        for axis, n in enumerate(self.shape):
            idx = np.arange(n)
            on_edge = ((idx == 0) | (idx == n - 1)).astype(np.int64)
            view = [1] * self.dim
            view[axis] = n
            count += on_edge.reshape(view)
        count.setflags(write=False)
        return count

    def trapezoid_weights_1d(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        w = np.full(n, self.spacing[axis])
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        """Tensor-product trapezoidal quadrature weights, one per node."""
        w = self.trapezoid_weights_1d(0)
        for axis in range(1, self.dim):
            w = np.multiply.outer(w, self.trapezoid_weights_1d(axis))
        w.setflags(write=False)
        return w

    def interior_slices(self, layer: int = 1) -> tuple[slice, ...]:
        """Slices selecting nodes at least ``layer`` nodes away from the boundary."""
        return tuple(slice(layer, n - layer) for n in self.shape)

    def require_stencil(self, minimum: int = MIN_NODES_PER_AXIS) -> None:
        if min(self.shape) < minimum:
            raise DiscretizationError(
                f"Grid {self.shape} needs at least {minimum} nodes per axis"
            )

    def refine(self, factor: int) -> "Grid":
        if factor < 1:
            raise DiscretizationError(f"refinement factor must be >= 1, got {factor}")
        return Grid(
            cells=tuple(c * factor for c in self.cells),
            extents=self.extents,
            origin=self.origin,
        )
