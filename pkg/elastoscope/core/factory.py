from typing import Callable, Optional

import numpy as np

from elastoscope.core.grid import Grid
from elastoscope.interfaces.scalar import ScalarField
from elastoscope.interfaces.vector import VectorField
from elastoscope.methods.address import field_fingerprint
from elastoscope.utils.log_handler import get_logger

logger = get_logger(__name__, source_file=__file__)

FieldType = ScalarField | VectorField


class FieldFactory:
    """Field Factory bound to one Grid.
    Builds fields from arrays, constants or coordinate functions and keeps a
    registry of the fingerprints it produced (written into run manifests).

    :param grid: Grid every produced field lives on
    :type grid: Grid
    :param registry: name -> sha256 fingerprint of every created field
    :type registry: dict[str, str]
    """

    def __init__(self, grid: Grid):
        self.grid = grid
        self.registry: dict[str, str] = {}
        self._counter = 0

    def _next_name(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}{self._counter}"

    def register(self, obj: FieldType) -> FieldType:
        if obj.grid != self.grid:
            raise ValueError("Field does not live on this factory's grid")
        addr = field_fingerprint(obj)
        self.registry[obj.name] = addr
        logger.debug(f"[-] Registered {type(obj).__name__} '{obj.name}' ({addr[:8]}...)")
        return obj

    def scalar(self, values: np.ndarray, name: Optional[str] = None) -> ScalarField:
        return self.register(ScalarField(self.grid, values, name=name or self._next_name("s")))

    def vector(self, values: np.ndarray, name: Optional[str] = None) -> VectorField:
        return self.register(VectorField(self.grid, values, name=name or self._next_name("v")))

    def constant(self, value: float, name: Optional[str] = None) -> ScalarField:
        return self.scalar(np.full(self.grid.shape, float(value)), name=name)

    def vector_from(
        self, fn: Callable[..., tuple[np.ndarray, ...]], name: Optional[str] = None
    ) -> VectorField:
        """Sample a vector-valued ``fn(x, y[, z]) -> (u_x, u_y[, u_z])`` at every node."""
        coords = self.grid.coordinates()
        parts = [np.broadcast_to(c, self.grid.shape) for c in fn(*coords)]
        if len(parts) != self.grid.dim:
            raise ValueError(f"Expected {self.grid.dim} components, got {len(parts)}")
        return self.vector(np.stack(parts), name=name)
