from dataclasses import dataclass

import numpy as np

from elastoscope.core.field_base import FieldBase
from elastoscope.interfaces.scalar import ScalarField

# Storage order of the independent entries of a symmetric tensor
INDEX_PAIRS: dict[int, tuple[tuple[int, int], ...]] = {
    2: ((0, 0), (1, 1), (0, 1)),
    3: ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)),
}


def storage_slot(dim: int, i: int, j: int) -> int:
    """Position of entry (i, j) in symmetric storage."""
    key = (min(i, j), max(i, j))
    return INDEX_PAIRS[dim].index(key)


@dataclass(frozen=True, eq=False)
class SymTensorField(FieldBase):
    """
    A SymTensorField:
    - d(d+1)/2 independent entries per node (strain, symmetric gradient)
    - Storage order 2D: (xx, yy, xy); 3D: (xx, yy, zz, xy, xz, yz)
    """

    name: str = "strain"

    def component_count(self) -> int:
        d = self.grid.dim
        return d * (d + 1) // 2

    def components(self) -> list[np.ndarray]:
        return [self.values[k] for k in range(self.component_count())]

    def entry(self, i: int, j: int) -> np.ndarray:
        return self.values[storage_slot(self.grid.dim, i, j)]

    def full(self) -> np.ndarray:
        """Dense tensor of shape ``(d, d, *grid.shape)``."""
        d = self.grid.dim
        out = np.empty((d, d, *self.grid.shape))
        for k, (i, j) in enumerate(INDEX_PAIRS[d]):
            out[i, j] = self.values[k]
            out[j, i] = self.values[k]
        return out

    def node_matrices(self) -> np.ndarray:
        """Per-node matrices stacked as ``(node_count, d, d)`` in flat node order."""
        d = self.grid.dim
        return np.moveaxis(self.full().reshape(d, d, -1), -1, 0)

    def trace(self) -> ScalarField:
        d = self.grid.dim
        return ScalarField(self.grid, sum(self.values[k] for k in range(d)), name="trace")

    def double_dot(self, other: "SymTensorField") -> ScalarField:
        """Pointwise S:T (off-diagonal entries counted twice)."""
        self._check_pair(other)
        d = self.grid.dim
        prod = self.values * other.values
        return ScalarField(self.grid, prod[:d].sum(axis=0) + 2.0 * prod[d:].sum(axis=0))

    def frobenius(self) -> ScalarField:
        return ScalarField(self.grid, np.sqrt(self.double_dot(self).values), name="frobenius")

    def pointwise_sq(self) -> np.ndarray:
        return self.double_dot(self).values
