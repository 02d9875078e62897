"""
Declarative descriptions of synthetic phantoms and boundary excitations.
Shared by the generators in ``methods.phantoms`` and the run-config schemas.
"""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from elastoscope.config import DEFAULT_MU_MIN, EXCITATION_MODES


class SpecModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Inclusion(SpecModel):
    """Smooth bump multiplying the background by ``1 + contrast * profile``."""

    center: List[float] = Field(..., description="Bump center, one coordinate per axis")
    radius: float = Field(..., gt=0.0, description="Gaussian scale or support radius")
    contrast: float = Field(..., description="Relative contrast at the peak")
    profile: Literal["gaussian", "mollifier", "smooth_disk"] = "gaussian"
    width: float = Field(
        default=0.05, gt=0.0, description="Transition width of the smooth_disk profile"
    )


class PhantomSpec(SpecModel):
    """
    Shear-modulus phantom: background value plus smooth inclusions.

    ``random_inclusions`` extra mollifier bumps are drawn from ``seed`` with
    centers in the middle half of the box.
    """

    background: float = Field(default=1.0, gt=0.0, description="Background modulus (Pa)")
    inclusions: List[Inclusion] = Field(default_factory=list)
    mu_min: float = Field(default=DEFAULT_MU_MIN, gt=0.0)
    seed: int = 0
    random_inclusions: int = Field(default=0, ge=0)
    random_contrast: float = 0.2
    random_radius: float = Field(default=0.15, gt=0.0)

    @model_validator(mode="after")
    def _positive_background(self) -> "PhantomSpec":
        if self.background < self.mu_min:
            raise ValueError(f"background {self.background} below mu_min {self.mu_min}")
        return self


class ExcitationSpec(SpecModel):
    """
    Divergence-free boundary excitation.

    - shear: ``u_a = A (x_a - c_a)``, ``u_b = -A (x_b - c_b)`` in the axis pair
    - diagonal-shear: ``u_a = A (x_b - c_b)``, ``u_b = A (x_a - c_a)``, the shear
      with principal axes turned by 45 degrees
    - rotation: rigid rotation about the box center in the axis pair
    - random-solenoidal: curl of a random trigonometric stream function (2D)
      or vector potential (3D) with Gaussian coefficients
    """

    kind: Literal["shear", "diagonal-shear", "rotation", "random-solenoidal"] = "shear"
    amplitude: float = 1.0
    modes: int = Field(default=EXCITATION_MODES, ge=1)
    seed: int = 0
    axes: Tuple[int, int] = (0, 1)
    label: Optional[str] = None

    @model_validator(mode="after")
    def _distinct_axes(self) -> "ExcitationSpec":
        if self.axes[0] == self.axes[1] or min(self.axes) < 0 or max(self.axes) > 2:
            raise ValueError(f"axes must be two distinct axis indices, got {self.axes}")
        return self
