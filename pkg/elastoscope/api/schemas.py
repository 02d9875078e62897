"""
Run descriptors for the command-line subcommands.

A run config is a TOML file; every table maps onto one model below and
unknown keys are rejected.
"""

import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from elastoscope.config import (
    CERT_THRESHOLD,
    DATA_REFINE_FACTOR,
    DEFAULT_MU_MAX,
    DEFAULT_OMEGA,
    KERNEL_TRIVIAL_THRESHOLD,
    LANDWEBER_N_MAX,
    LANDWEBER_STOP_TOL,
    REFINE_DATA_GRID,
    SNAPSHOT_STRIDE,
    SOBOLEV_EPS,
    SPHERE_SAMPLES,
)
from elastoscope.core.errors import ConfigError, MissingData
from elastoscope.core.grid import Grid
from elastoscope.interfaces.specs import ExcitationSpec, PhantomSpec


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(Section):
    cells: List[int] = Field(..., min_length=2, max_length=3)
    extents: Optional[List[float]] = None
    origin: Optional[List[float]] = None

    def build(self) -> Grid:
        return Grid(
            cells=tuple(self.cells),
            extents=tuple(self.extents or ()),
            origin=tuple(self.origin or ()),
        )


class PhysicsConfig(Section):
    omega: float = DEFAULT_OMEGA
    mu_max: float = Field(default=DEFAULT_MU_MAX, gt=0.0)


class ForwardConfig(Section):
    """``lam`` switches to the full elasticity solver."""

    lam: Optional[float] = Field(default=None, gt=0.0)
    write_csv: bool = True


class InverseConfig(Section):
    sigma: Union[Literal["auto"], float] = "auto"
    n_max: int = Field(default=LANDWEBER_N_MAX, ge=0)
    stop_tol: float = Field(default=LANDWEBER_STOP_TOL, ge=0.0)
    snapshot_stride: int = Field(default=SNAPSHOT_STRIDE, ge=0)
    eps: float = Field(default=SOBOLEV_EPS, gt=0.0, lt=1.0)
    discrepancy_tol: Optional[float] = Field(default=None, ge=0.0)
    raise_on_stall: bool = False
    noise_level: float = Field(default=0.0, ge=0.0)
    refine_data: bool = REFINE_DATA_GRID
    refine_factor: int = Field(default=DATA_REFINE_FACTOR, ge=1)
    mu0: Literal["background", "truth"] = "background"
    measurements: Optional[List[str]] = Field(
        default=None,
        description="VTK files (one per excitation) holding a vector field 'u'; "
        "synthesized from the phantom when omitted",
    )
    kernel_probe: bool = True
    kernel_k: int = Field(default=4, ge=1)


class CertifyConfig(Section):
    """
    ``source = "solve"`` certifies the solutions for the configured
    excitations; ``"strains"`` certifies constant strain matrices.
    """

    source: Literal["solve", "strains"] = "solve"
    strains: List[List[List[float]]] = Field(default_factory=list)
    threshold: float = Field(default=CERT_THRESHOLD, ge=0.0)
    samples: int = Field(default=SPHERE_SAMPLES, ge=16)
    sl_points: List[List[float]] = Field(
        default_factory=list, description="Tangential frequencies for the 3D boundary check"
    )
    root_eps: float = Field(default=1e-3, gt=0.0)
    pass_rate_draws: int = Field(
        default=0, ge=0, description="Random solenoidal draws for the pass-rate estimate; 0 skips it"
    )

    @model_validator(mode="after")
    def _strain_shapes(self) -> "CertifyConfig":
        for s in self.strains:
            n = len(s)
            if n not in (2, 3) or any(len(row) != n for row in s):
                raise ValueError("strains must be 2x2 or 3x3 matrices")
        if self.source == "strains" and not self.strains:
            raise ValueError("source = 'strains' needs at least one strain matrix")
        return self


class StabilityConfig(Section):
    amplitudes: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05])
    pairs_per_amplitude: int = Field(default=10, ge=1)
    bump_radius: float = Field(default=0.2, gt=0.0)
    eps: float = Field(default=SOBOLEV_EPS, gt=0.0, lt=1.0)
    weight_power: Literal[0, -2] = 0
    kernel_probe: bool = True
    kernel_threshold: float = Field(default=KERNEL_TRIVIAL_THRESHOLD, gt=0.0)
    stokes_limit_lambdas: List[float] = Field(default_factory=list)
    g_bound_order: Optional[float] = Field(default=None, le=0.0)


class RunConfig(Section):
    """Whole run descriptor; the CLI picks the table of its subcommand."""

    grid: GridConfig
    physics: PhysicsConfig = Field(default_factory=PhysicsConfig)
    phantom: PhantomSpec = Field(default_factory=PhantomSpec)
    excitations: List[ExcitationSpec] = Field(
        default_factory=lambda: [ExcitationSpec(kind="shear")]
    )
    forward: ForwardConfig = Field(default_factory=ForwardConfig)
    inverse: InverseConfig = Field(default_factory=InverseConfig)
    certify: CertifyConfig = Field(default_factory=CertifyConfig)
    stability: StabilityConfig = Field(default_factory=StabilityConfig)
    seed: int = 0

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        """Apply a command-line seed to the phantom and every excitation."""
        if seed is None:
            return self
        phantom = self.phantom.model_copy(update={"seed": seed})
        excitations = [e.model_copy(update={"seed": seed + i}) for i, e in enumerate(self.excitations)]
        return self.model_copy(update={"seed": seed, "phantom": phantom, "excitations": excitations})


def load_config(path: Path, seed: Optional[int] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingData(f"Config file not found: {path}", path=str(path))
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}", path=str(path)) from exc
    try:
        cfg = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(
            f"{path}: {exc.error_count()} validation error(s)",
            errors=[
                {"loc": ".".join(str(p) for p in e["loc"]), "msg": e["msg"]} for e in exc.errors()
            ],
        ) from exc
    return cfg.with_seed(seed)


# --- outputs ---


class RunManifest(BaseModel):
    """Everything needed to reproduce a run."""

    command: str
    config_path: str
    config: Dict[str, Any]
    seed: int
    versions: Dict[str, str]
    started_utc: str
    elapsed_s: float
    status: str = "ok"
    outputs: List[str] = Field(default_factory=list)
    fingerprints: Dict[str, str] = Field(default_factory=dict)
    residuals: Dict[str, float] = Field(default_factory=dict)
    details: Dict[str, Any] = Field(default_factory=dict)


class ErrorReport(BaseModel):
    kind: str
    message: str
    details: Dict[str, Any] = Field(default_factory=dict)
    command: Optional[str] = None
    exit_code: int = 2

    @classmethod
    def from_payload(cls, payload: Dict[str, Any], command: Optional[str], code: int) -> "ErrorReport":
        return cls(**payload, command=command, exit_code=code)
