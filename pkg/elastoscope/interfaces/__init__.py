from .scalar import ScalarField
from .tensor import SymTensorField
from .vector import VectorField

__all__ = ["ScalarField", "VectorField", "SymTensorField"]
