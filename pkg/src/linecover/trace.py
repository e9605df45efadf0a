"""Run records and stopping rules shared by both control laws."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class StopRule:
    """When to end a run.

    ``tol`` bounds the squared position error sum(x_i - x_i*)^2 against the
    optimal configuration for the run's agent count; the rule fires once the
    criterion has held for ``persist`` consecutive rounds. ``max_rounds``
    always terminates the run.
    """

    tol: float | None = 1e-4
    max_rounds: int = 100_000
    persist: int = 1

    def __post_init__(self):
        if self.tol is not None and not self.tol > 0.0:
            raise DomainError("tol must be positive (or None to disable)")
        if self.max_rounds < 1:
            raise DomainError("max_rounds must be at least 1")
        if self.persist < 1:
            raise DomainError("persist must be at least 1")


@dataclass
class TraceRow:
    t: int
    positions: np.ndarray
    phi: float
    residual_sq: float
    zsum: float | None = None


@dataclass
class ExperimentTrace:
    """Per-round record of one run: positions, coverage, optimality residual.

    Dynamic runs also record the conserved mass total per round. ``t`` is
    strictly increasing; it starts at 0 for fresh runs and at the resume
    round for continuations after agent churn.
    """

    law: str
    metadata: dict
    rows: list[TraceRow] = field(default_factory=list)
    stop_reason: str = ""

    @property
    def final_positions(self) -> np.ndarray:
        return self.rows[-1].positions

    @property
    def final_round(self) -> int:
        return self.rows[-1].t

    @property
    def final_phi(self) -> float:
        return self.rows[-1].phi
