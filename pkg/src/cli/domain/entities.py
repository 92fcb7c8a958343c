"""Domain entities for the replictl CLI."""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from models.errors import InputDataError
from models.hmm import PairedPValues


@dataclass(frozen=True)
class ReadOptions:
    """Column names and clamping policy for paired p-value tables."""

    id_column: str = "id"
    p1_column: str = "p1"
    p2_column: str = "p2"
    p_floor: float = 1e-15
    one_ceiling: float = 1.0 - 1e-16
    sep: Optional[str] = None


@dataclass
class ParseDiagnostics:
    """What the reader skipped or changed while parsing a table."""

    skipped_rows: list[tuple[int, str]] = field(default_factory=list)
    clamped_zeros: int = 0
    clamped_ones: int = 0

    @property
    def is_clean(self) -> bool:
        return not self.skipped_rows and self.clamped_zeros == 0 and self.clamped_ones == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "skipped_rows": [{"line": line, "reason": reason} for line, reason in self.skipped_rows],
            "clamped_zeros": self.clamped_zeros,
            "clamped_ones": self.clamped_ones,
        }


@dataclass
class InputTable:
    """Paired p-values in file order; the order is the chain coordinate."""

    feature_ids: tuple[str, ...]
    p1: np.ndarray
    p2: np.ndarray
    source: Optional[Path] = None
    diagnostics: ParseDiagnostics = field(default_factory=ParseDiagnostics)
    chrom: Optional[tuple[str, ...]] = None
    pos: Optional[np.ndarray] = None

    def __post_init__(self):
        """Validate alignment and id uniqueness."""
        m = len(self.feature_ids)
        if self.p1.shape[0] != m or self.p2.shape[0] != m:
            raise InputDataError(f"{m} feature ids but {self.p1.shape[0]} / {self.p2.shape[0]} p-values")
        if len(set(self.feature_ids)) != m:
            raise InputDataError("feature ids must be unique")
        if (self.chrom is None) != (self.pos is None):
            raise InputDataError("chromosome and position must be given together")

    @property
    def m(self) -> int:
        return len(self.feature_ids)

    @property
    def has_positions(self) -> bool:
        return self.chrom is not None

    def to_paired(self) -> PairedPValues:
        return PairedPValues(self.p1, self.p2, self.feature_ids)

    def _position_order(self) -> np.ndarray:
        chrom = np.asarray(self.chrom, dtype=str)
        numeric = np.array([_chrom_number(c) for c in chrom])
        _, by_name = np.unique(chrom, return_inverse=True)
        return np.lexsort((self.pos, by_name, numeric))

    def appears_unsorted(self) -> bool:
        """True when a chromosome is split into several runs or positions decrease within a run."""
        if not self.has_positions or self.m < 2:
            return False
        chrom = np.asarray(self.chrom, dtype=str)
        boundaries = chrom[1:] != chrom[:-1]
        starts = chrom[np.concatenate(([True], boundaries))]
        if len(set(starts.tolist())) != starts.shape[0]:
            return True
        decreasing = (np.diff(self.pos) < 0) & ~boundaries
        return bool(decreasing.any())

    def sorted_by_position(self) -> "InputTable":
        if not self.has_positions:
            return self
        order = self._position_order()
        return InputTable(
            feature_ids=tuple(self.feature_ids[i] for i in order),
            p1=self.p1[order],
            p2=self.p2[order],
            source=self.source,
            diagnostics=self.diagnostics,
            chrom=tuple(self.chrom[i] for i in order),
            pos=self.pos[order],
        )


def _chrom_number(name: str) -> float:
    stripped = name[3:] if name.lower().startswith("chr") else name
    try:
        return float(stripped)
    except ValueError:
        return float("inf")


@dataclass
class MethodResults:
    """Per-feature output of one testing method, ready to be written as a results table."""

    method: str
    feature_ids: tuple[str, ...]
    p1: np.ndarray
    p2: np.ndarray
    rlis: np.ndarray
    rejected: np.ndarray
    summary: dict[str, Any] = field(default_factory=dict)

    @property
    def rejected_ids(self) -> set[str]:
        return {self.feature_ids[j] for j in np.flatnonzero(self.rejected)}
