from dataclasses import dataclass

import numpy as np

from elastoscope.core.field_base import FieldBase


@dataclass(frozen=True, eq=False)
class VectorField(FieldBase):
    """
    A VectorField:
    - ``grid.dim`` values per node (u, v, F, w = u1 - u2, u_m)
    - Values laid out as ``(dim, *grid.shape)``
    """

    name: str = "vector"

    def component_count(self) -> int:
        return self.grid.dim

    def components(self) -> list[np.ndarray]:
        return [self.values[i] for i in range(self.grid.dim)]
