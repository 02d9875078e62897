from dataclasses import dataclass

import numpy as np

from elastoscope.core.field_base import FieldBase


@dataclass(frozen=True, eq=False)
class ScalarField(FieldBase):
    """
    A ScalarField:
    - One value per node (mu, lambda, p, rho, delta-mu)
    - Values laid out as ``grid.shape``
    """

    name: str = "scalar"

    def component_count(self) -> int:
        return 1

    def components(self) -> list[np.ndarray]:
        return [self.values]

    def min(self) -> float:
        return float(np.min(self.values))

    def max(self) -> float:
        return float(np.max(self.values))

    def boundary_values(self) -> np.ndarray:
        return self.values[self.grid.boundary_mask]

    def mean(self) -> float:
        """Trapezoidal mean over the domain."""
        w = self.grid.trapezoid_weights
        return float(np.sum(w * self.values) / np.sum(w))
