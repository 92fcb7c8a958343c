"""Use cases for replicability analysis."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from models.hmm import PairedPValues
from processing.baselines import BaselineMethod, run_baseline
from processing.em import EmConfig, EmFit, fit
from processing.forward_backward import compute_rlis
from processing.replicability import TestOutcome, oracle_test, step_up
from simulation.harness import EvalReport, SimConfig, sweep, sweep_pi1

from ..domain.entities import InputTable, MethodResults, ReadOptions
from ..domain.repositories import ParamsRepository, PairedTableRepository, ReportRepository, ResultsRepository

logger = logging.getLogger(__name__)

RESULTS_STEM = "results"
PARAMS_FILE = "params.json"
SUMMARY_STEM = "summary"


@dataclass
class AnalysisInput:
    """Table as read plus the warnings raised while preparing it."""

    table: InputTable
    data: PairedPValues
    warnings: list[str] = field(default_factory=list)


class LoadInputUseCase:
    """Read a paired table and prepare it as chain-ordered p-values."""

    def __init__(self, table_repo: PairedTableRepository):
        self.table_repo = table_repo

    def execute(self, path: Path, options: ReadOptions, sort_by_position: bool = False) -> AnalysisInput:
        table = self.table_repo.read(path, options)
        warnings = []
        if sort_by_position:
            if table.has_positions:
                table = table.sorted_by_position()
                logger.info("Sorted input rows by (chrom, pos)")
            else:
                warnings.append("--sort-by-position ignored: input has no 'chrom' and 'pos' columns")
        elif table.appears_unsorted():
            warnings.append("input rows are not sorted by (chrom, pos); feature order is used as the chain order")
        for line, reason in table.diagnostics.skipped_rows:
            logger.info(f"Skipped line {line}: {reason}")
        return AnalysisInput(table=table, data=table.to_paired(), warnings=warnings)


def _method_results(method: str, prepared: AnalysisInput, rlis, rejected_mask, summary: dict[str, Any]) -> MethodResults:
    table = prepared.table
    return MethodResults(method, table.feature_ids, table.p1, table.p2, rlis, rejected_mask, summary)


def _outcome_summary(outcome: TestOutcome, prepared: AnalysisInput) -> dict[str, Any]:
    return {**outcome.summary(), "m": prepared.data.m, "input": prepared.table.diagnostics.to_dict()}


class EstimateUseCase:
    """Fit the chain model and store its parameters."""

    def __init__(self, params_repo: ParamsRepository):
        self.params_repo = params_repo

    def execute(self, prepared: AnalysisInput, cfg: EmConfig, out_dir: Path) -> EmFit:
        em_fit = fit(prepared.data, cfg)
        self.params_repo.save_fit(em_fit, Path(out_dir) / PARAMS_FILE)
        return em_fit


class TestUseCase:
    """Fit, compute rLIS and run the step-up procedure."""

    __test__ = False

    def __init__(self, params_repo: ParamsRepository, results_repo: ResultsRepository):
        self.params_repo = params_repo
        self.results_repo = results_repo

    def execute(self, prepared: AnalysisInput, q: float, cfg: EmConfig, out_dir: Path) -> tuple[EmFit, TestOutcome]:
        em_fit = fit(prepared.data, cfg)
        outcome = step_up(compute_rlis(em_fit.params, prepared.data), q)
        summary = _outcome_summary(outcome, prepared)
        summary["converged"] = em_fit.converged
        summary["iterations"] = em_fit.iterations_used
        self.results_repo.write(_method_results("rlis", prepared, outcome.rlis, outcome.rejected_mask(), summary), out_dir, RESULTS_STEM)
        self.params_repo.save_fit(em_fit, Path(out_dir) / PARAMS_FILE)
        return em_fit, outcome


class OracleTestUseCase:
    """Step-up procedure under parameters read from a file."""

    def __init__(self, params_repo: ParamsRepository, results_repo: ResultsRepository):
        self.params_repo = params_repo
        self.results_repo = results_repo

    def execute(self, prepared: AnalysisInput, params_path: Path, q: float, out_dir: Path) -> TestOutcome:
        params = self.params_repo.load_params(params_path)
        outcome = oracle_test(params, prepared.data, q)
        summary = _outcome_summary(outcome, prepared)
        summary["params"] = str(params_path)
        self.results_repo.write(_method_results("rlis", prepared, outcome.rlis, outcome.rejected_mask(), summary), out_dir, RESULTS_STEM)
        return outcome


@dataclass
class CompareSummary:
    q: float
    m: int
    rejections: dict[str, int]
    unique_rlis: int
    files: list[str]

    def to_dict(self) -> dict[str, Any]:
        return {"q": self.q, "m": self.m, "rejections": self.rejections, "unique_rlis": self.unique_rlis, "files": self.files}


class CompareUseCase:
    """Run the chain model and the selected baselines on the same input."""

    def __init__(self, params_repo: ParamsRepository, results_repo: ResultsRepository):
        self.params_repo = params_repo
        self.results_repo = results_repo

    def execute(
        self,
        prepared: AnalysisInput,
        q: float,
        cfg: EmConfig,
        methods: Sequence[BaselineMethod],
        out_dir: Path,
        jump_lambdas: tuple[float, float, float] = (0.5, 0.5, 0.5),
        threads: int = 1,
    ) -> CompareSummary:
        out_dir = Path(out_dir)
        data = prepared.data

        with ThreadPoolExecutor(max_workers=max(threads, 1)) as executor:
            chain_future = executor.submit(fit, data, cfg)
            baseline_futures = {m: executor.submit(run_baseline, m, data, q, jump_lambdas, cfg) for m in methods}
            em_fit = chain_future.result()
            baselines = {m: f.result() for m, f in baseline_futures.items()}

        outcome = step_up(compute_rlis(em_fit.params, data), q)
        files = [self.results_repo.write(_method_results("rlis", prepared, outcome.rlis, outcome.rejected_mask(), _outcome_summary(outcome, prepared)), out_dir, f"{RESULTS_STEM}_rlis")]
        self.params_repo.save_fit(em_fit, out_dir / PARAMS_FILE)

        rejected_elsewhere = set()
        rejections = {"rlis": outcome.num_rejected}
        for method, result in baselines.items():
            mask = result.rejected_mask(data.m)
            aux = {k: v for k, v in result.auxiliary.items() if k != "lfdr"}
            summary = {"q": q, "num_rejected": result.num_rejected, "m": data.m, "auxiliary": aux}
            files.append(self.results_repo.write(_method_results(method.value, prepared, outcome.rlis, mask, summary), out_dir, f"{RESULTS_STEM}_{method.value}"))
            rejected_elsewhere.update(result.rejected.tolist())
            rejections[method.value] = result.num_rejected

        unique = len(set(outcome.rejected.tolist()) - rejected_elsewhere)
        logger.info(f"Compare at q={q}: {rejections}, {unique} rLIS findings made by no other method")
        summary = CompareSummary(q=q, m=data.m, rejections=rejections, unique_rlis=unique, files=[str(p) for p in files])
        summary.files.append(str(self.results_repo.write_summary(summary.to_dict(), out_dir, SUMMARY_STEM)))
        return summary


class SimulateUseCase:
    """Monte Carlo evaluation written as CSV reports."""

    def __init__(self, report_repo: ReportRepository):
        self.report_repo = report_repo

    def execute(
        self,
        cfg: SimConfig,
        methods: Sequence[str],
        out_dir: Path,
        mu_grid: Optional[Sequence[float]] = None,
        pi1_grid: Optional[Sequence[float]] = None,
    ) -> tuple[list[EvalReport], list[Path]]:
        if pi1_grid:
            reports = sweep_pi1(cfg, methods, pi1_grid, mu_grid)
            written = []
            for pi1, report in reports.items():
                written += self.report_repo.write(report, out_dir, suffix=f"_pi1-{pi1:g}")
            return list(reports.values()), written
        report = sweep(cfg, methods, mu_grid)
        return [report], self.report_repo.write(report, out_dir)
