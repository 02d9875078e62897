from .field_base import FieldBase
from .grid import Grid
from .protocol import FieldProtocol

__all__ = ["Grid", "FieldBase", "FieldProtocol"]
