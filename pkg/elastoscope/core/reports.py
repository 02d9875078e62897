"""
Report models returned by the certificate, probe and experiment operations.
All of them export to JSON with stable key names via ``to_json``.
"""

from typing import Any, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ReportModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)

    def to_dict(self) -> dict[str, Any]:
        return self.model_dump(by_alias=True, mode="json")


# --- symbol_certificates ---


class CertificateReport(ReportModel):
    """Pass/fail of one pointwise hypothesis with its extremal constants."""

    kind: Literal["cert_2d", "cert_3d"]
    passed: bool = Field(..., alias="pass")
    inf: float = Field(..., description="Infimum of the certified quantity over all nodes")
    sup: float = Field(..., description="Supremum of the certified quantity over all nodes")
    constant: Optional[float] = Field(
        default=None, alias="C", description="max(sup, 1/inf); null when inf is 0"
    )
    worst_node: List[int] = Field(..., description="Grid index where inf is attained")
    samples: int = Field(..., description="Sphere directions per node (1 for cert_2d)")
    resolution: List[int] = Field(..., description="Cells per axis of the evaluation grid")
    threshold: float
    details: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _ordered(self) -> "CertificateReport":
        if self.inf > self.sup:
            raise ValueError(f"inf {self.inf} exceeds sup {self.sup}")
        return self


class RootReport(ReportModel):
    """Roots of the boundary symbol in the normal frequency at one (x, xi')."""

    roots: List[Tuple[float, float]] = Field(..., description="(re, im) per root")
    degree: int
    upper: int = Field(..., description="Roots with Im > 0")
    lower: int = Field(..., description="Roots with Im < 0")
    real: int = Field(..., description="Roots classified as real")
    min_separation: float = Field(..., ge=0.0)
    min_abs_imag: Optional[float] = Field(
        default=None, description="Smallest |Im| among nonreal roots"
    )
    sl_determinant: Tuple[float, float] = Field(
        default=(0.0, 0.0), description="(re, im) of the boundary-condition determinant"
    )
    sl_determinant_abs: float = 0.0
    passed: bool = Field(..., alias="pass")
    ill_conditioned: bool = False
    xi_prime: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _counts(self) -> "RootReport":
        if len(self.roots) != self.degree:
            raise ValueError("root count must equal the polynomial degree")
        return self


class RootConditionReport(ReportModel):
    passed: bool = Field(..., alias="pass")
    multiplicities: List[int]
    min_separation: Optional[float] = None
    min_abs_imag: Optional[float] = None
    failures: List[str] = Field(default_factory=list)


# --- residual_operators ---


class KernelProbeReport(ReportModel):
    singular_values: List[float] = Field(..., description="Ascending smallest singular values")
    threshold: float
    trivial: bool = Field(..., description="sigma_1 > threshold * sigma_k")
    method: Literal["dense", "arpack"]
    converged: bool = True
    unknowns: int
    rows: int
    channels: int


class IdentityResidual(ReportModel):
    cells: List[int]
    abs_l2: float
    rel_l2: float
    max_abs: float
    lhs_l2: float


class GBoundReport(ReportModel):
    order: float
    ratios: List[float]
    max_ratio: float
    spread: float = Field(..., description="max ratio / min ratio")


# --- stokes_solver ---


class StokesLimitReport(ReportModel):
    lambdas: List[float]
    gaps: List[float] = Field(..., description="||u_lambda - u||_H1 per lambda")
    slope: float
    low_confidence: bool
    meets_theoretical_rate: bool = Field(
        ..., description="gap decays at least as fast as lambda^(-1/2), within tolerance"
    )
    in_acceptance_band: bool = Field(
        ..., description="slope within tolerance of -1/2 on both sides"
    )
    noise_floor: float
    cells: List[int]


# --- stability_norms ---


class StabilityRow(ReportModel):
    pair_id: int
    amplitude: float
    lhs: float
    rhs: float
    ratio: Optional[float] = None
    degenerate: bool = False
    certificate_pass: bool = True
    certificate_inf: float = 0.0


class StabilitySummary(ReportModel):
    max_ratio: Optional[float]
    min_ratio: Optional[float]
    spread: Optional[float]
    per_amplitude_max: dict[str, float]
    rows: int
    degenerate_rows: int
    certificate_failures: int
    order: float
    channels: int


class PassRateReport(ReportModel):
    draws: int
    passes: int
    rate: float
    infs: List[float]
    seed: int
    cells: List[int]
