from typing import TYPE_CHECKING, Protocol

import numpy as np

NodeArray = np.ndarray  # values laid out as (components, *grid.shape) or grid.shape

if TYPE_CHECKING:
    from elastoscope.core.grid import Grid


class FieldProtocol(Protocol):
    """
    A FieldProtocol is the protocol all grid fields follow.


    :param grid: Grid the values live on
    :type grid: Grid
    :param values: Read-only nodal values
    :type values: NodeArray
    :param name: Short label used by writers
    :type name: str
    """

    grid: "Grid"
    values: NodeArray
    name: str

    def component_count(self) -> int: ...

    def components(self) -> list[np.ndarray]: ...
