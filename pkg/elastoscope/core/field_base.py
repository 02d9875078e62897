from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Self

import numpy as np

from elastoscope.core.errors import FieldError
from elastoscope.core.grid import Grid
from elastoscope.core.protocol import FieldProtocol, NodeArray


@dataclass(frozen=True, eq=False)
class FieldBase(FieldProtocol, ABC):
    """
    FieldBase: Base class for all grid fields (Scalar, Vector, SymTensor).
    Values are copied, validated and frozen at construction.


    :param grid: Grid the values live on
    :type grid: Grid
    :param values: Nodal values, component axis first for multi-component fields
    :type values: NodeArray
    :param name: Label used by writers and logs
    :type name: str
    """

    grid: Grid
    values: NodeArray
    name: str = "field"

    # ------------------------------------------------------------------

    @abstractmethod
    def component_count(self) -> int:
        """Number of values stored per node."""
        ...

    @abstractmethod
    def components(self) -> list[np.ndarray]:
        """Per-component nodal arrays of ``grid.shape``."""
        ...

    def expected_shape(self) -> tuple[int, ...]:
        n = self.component_count()
        return self.grid.shape if n == 1 else (n, *self.grid.shape)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        expected = self.expected_shape()
        if values.shape != expected:
            raise FieldError(
                f"{type(self).__name__} '{self.name}' expects shape {expected}, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise FieldError(f"{type(self).__name__} '{self.name}' has non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    # --- arithmetic (returns new fields; never mutates) ---

    def with_values(self, values: np.ndarray, name: str | None = None) -> Self:
        return type(self)(self.grid, values, name=name or self.name)

    def _check_pair(self, other: "FieldBase") -> None:
        if type(other) is not type(self):
            raise FieldError(f"Cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.grid != self.grid:
            raise FieldError("Fields live on different grids")

    def __add__(self, other: Self) -> Self:
        self._check_pair(other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: Self) -> Self:
        self._check_pair(other)
        return self.with_values(self.values - other.values)

    def __neg__(self) -> Self:
        return self.with_values(-self.values)

    def __mul__(self, alpha: float) -> Self:
        return self.with_values(float(alpha) * self.values)

    __rmul__ = __mul__

    # --- reductions ---

    def pointwise_sq(self) -> np.ndarray:
        """Sum of squared components at each node."""
        return sum(c**2 for c in self.components())

    def l2_norm(self) -> float:
        """Trapezoidal L2 norm over the whole grid."""
        return float(np.sqrt(np.sum(self.grid.trapezoid_weights * self.pointwise_sq())))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.pointwise_sq())))

    def boundary_max_abs(self) -> float:
        mask = self.grid.boundary_mask
        return float(max(np.max(np.abs(c[mask])) for c in self.components()))

    def restrict(self, coarse: Grid) -> Self:
        """Injection onto a coarser grid whose nodes are a subset of this grid's nodes."""
        if coarse.extents != self.grid.extents or coarse.origin != self.grid.origin:
            raise FieldError("Restriction requires the same domain")
        factors = [f // c for f, c in zip(self.grid.cells, coarse.cells)]
        if any(f * c != g for f, c, g in zip(factors, coarse.cells, self.grid.cells)):
            raise FieldError(f"{self.grid.cells} is not an integer refinement of {coarse.cells}")
        picks = tuple(slice(None, None, f) for f in factors)
        if self.component_count() > 1:
            picks = (slice(None), *picks)
        return type(self)(coarse, self.values[picks], name=self.name)
