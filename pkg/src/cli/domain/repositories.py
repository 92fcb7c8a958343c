"""Repository interfaces for the domain layer."""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any

import pandas as pd

from models.hmm import HmmParams
from processing.em import EmFit
from simulation.harness import EvalReport

from .entities import InputTable, MethodResults, ReadOptions


class PairedTableRepository(ABC):
    """Source of paired p-value tables."""

    @abstractmethod
    def read(self, path: Path, options: ReadOptions) -> InputTable:
        """Parse a delimited table into an InputTable."""


class ResultsRepository(ABC):
    """Sink for per-feature results tables and their JSON sidecars."""

    @abstractmethod
    def write(self, results: MethodResults, out_dir: Path, stem: str) -> Path:
        """Write the table and sidecar; returns the table path."""

    @abstractmethod
    def read(self, path: Path) -> pd.DataFrame:
        """Read a results table back."""

    @abstractmethod
    def write_summary(self, summary: dict[str, Any], out_dir: Path, name: str) -> Path:
        """Write a run-level JSON summary."""


class ParamsRepository(ABC):
    """Storage for fitted or known model parameters."""

    @abstractmethod
    def save_fit(self, fit: EmFit, path: Path) -> None:
        """Write an EmFit as JSON."""

    @abstractmethod
    def load_params(self, path: Path) -> HmmParams:
        """Read HmmParams from JSON."""


class ReportRepository(ABC):
    """Sink for Monte Carlo evaluation reports."""

    @abstractmethod
    def write(self, report: EvalReport, out_dir: Path, suffix: str = "") -> list[Path]:
        """Write long-format and curve CSVs; returns the written paths."""
