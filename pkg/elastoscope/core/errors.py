"""
Exception hierarchy shared by every module.

Each error exposes a stable ``kind`` (its class name) so the CLI can emit
machine-readable error JSON without string matching.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional

if TYPE_CHECKING:
    from elastoscope.core.reports import RootReport
    from elastoscope.interfaces.trace import ReconstructionTrace


class ElastoscopeError(Exception):
    """Base class for all domain errors."""

    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details: dict[str, Any] = details

    @property
    def kind(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "message": self.message, "details": self.details}


# --- grid_fields ---


class DiscretizationError(ElastoscopeError):
    """Grid too small (or too large) for the requested stencil."""


class FieldError(ElastoscopeError):
    """Field values of the wrong shape, non-finite, or on mismatched grids."""


# --- stokes_solver ---


class InvalidProblem(ElastoscopeError):
    """Problem invariants (positivity, bounds, channel counts) violated."""


class IncompatibleBoundaryData(InvalidProblem):
    """Boundary data carries net flux, so no incompressible solution exists."""


class NearResonance(ElastoscopeError):
    """Condition estimate of the assembled operator exceeds the configured cap."""


class SingularSystem(ElastoscopeError):
    """Sparse factorization failed or the residual contract could not be met."""


class InsufficientResolution(ElastoscopeError):
    """Measured gaps are too close to the solver noise floor."""


class DegenerateInput(ElastoscopeError):
    """Input makes the requested quantity undefined (repeated values, zero norms)."""


# --- adjoint_landweber ---


class StalledStep(ElastoscopeError):
    """Safeguarded step size dropped below its floor."""

    def __init__(
        self, message: str, trace: Optional["ReconstructionTrace"] = None, **details: Any
    ) -> None:
        super().__init__(message, **details)
        self.trace = trace


class ReconstructionAborted(ElastoscopeError):
    """A forward or adjoint solve failed inside the iteration."""

    def __init__(
        self,
        message: str,
        trace: Optional["ReconstructionTrace"] = None,
        cause_kind: str = "",
        **details: Any,
    ) -> None:
        super().__init__(message, cause_kind=cause_kind, **details)
        self.trace = trace


# --- symbol_certificates ---


class ZeroCoefficient(ElastoscopeError):
    """Principal symbol coefficient vanishes at the boundary point."""


class HalfPlaneSplitViolation(ElastoscopeError):
    """Symbol roots do not split 2/2 between the half-planes (or a real root exists)."""

    def __init__(
        self, message: str, report: Optional["RootReport"] = None, **details: Any
    ) -> None:
        super().__init__(message, **details)
        self.report = report


# --- stability_norms ---


class NonzeroTrace(ElastoscopeError):
    """Fractional norm requested for a field that does not vanish on the boundary."""


class UnboundedWeightedField(ElastoscopeError):
    """Weighted field exceeds the configured cap next to the excluded boundary layer."""


class InvalidNormSpec(ElastoscopeError):
    """Norm order or epsilon outside the supported range."""


# --- phantoms_io ---


class ContrastViolation(ElastoscopeError):
    """Phantom inclusions push mu below its admissible minimum."""


class MissingData(ElastoscopeError):
    """A referenced measurement or field file is absent or unreadable."""


# --- cli ---


class ConfigError(ElastoscopeError):
    """Run descriptor failed to parse or validate."""
