from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from elastoscope.interfaces.scalar import ScalarField

TRACE_COLUMNS = (
    "n",
    "J",
    "sigma",
    "grad_norm",
    "err_l2",
    "rel_err_l2",
    "err_hs",
    "backtracks",
)


@dataclass(frozen=True)
class TraceRecord:
    """One accepted iterate of the reconstruction."""

    n: int
    J: float
    sigma: float
    grad_norm: float
    err_l2: Optional[float] = None
    rel_err_l2: Optional[float] = None
    err_hs: Optional[float] = None
    backtracks: int = 0

    def as_row(self) -> list[float | int | str]:
        return [("" if v is None else v) for v in (getattr(self, c) for c in TRACE_COLUMNS)]


@dataclass
class ReconstructionTrace:
    """
    Append-only record of a Landweber run.

    :param records: Accepted iterates, strictly increasing ``n``
    :param snapshots: Iterates kept at the configured stride, keyed by ``n``
    :param status: running | converged | discrepancy | max_iterations | stalled | aborted
    """

    records: list[TraceRecord] = field(default_factory=list)
    snapshots: dict[int, ScalarField] = field(default_factory=dict)
    status: str = "running"
    sigma0: float = 0.0
    final_mu: Optional[ScalarField] = None

    def append(self, record: TraceRecord) -> None:
        if self.records and record.n <= self.records[-1].n:
            raise ValueError(
                f"Trace indices must increase: {record.n} after {self.records[-1].n}"
            )
        if not np.isfinite(record.J):
            raise ValueError(f"Non-finite J at iterate {record.n}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def last(self) -> TraceRecord:
        return self.records[-1]

    def values(self, column: str) -> np.ndarray:
        return np.array(
            [np.nan if getattr(r, column) is None else getattr(r, column) for r in self.records],
            dtype=float,
        )
