"""Command line interface handlers."""

import argparse
import logging
import tomllib
from pathlib import Path
from typing import Any, Optional

from config.loader import list_presets, load_settings
from config.settings import Settings
from processing.baselines import BaselineMethod
from processing.em import EmConfig
from simulation.harness import default_workers

from ..application.analysis import (
    PARAMS_FILE,
    RESULTS_STEM,
    AnalysisInput,
    CompareUseCase,
    EstimateUseCase,
    LoadInputUseCase,
    OracleTestUseCase,
    SimulateUseCase,
    TestUseCase,
)
from ..domain.entities import ReadOptions
from ..infrastructure.filesystem import (
    FileSystemPairedTableRepository,
    FileSystemParamsRepository,
    FileSystemReportRepository,
    FileSystemResultsRepository,
)
from .presentation import Presenter

logger = logging.getLogger(__name__)


class CommandHandler:
    """Base command handler."""

    def __init__(self, project_root: Path, json_mode: bool = False, no_emoji: bool = False, settings: Optional[Settings] = None):
        self.project_root = project_root
        self.presenter = Presenter(json_mode=json_mode, no_emoji=no_emoji)
        self.settings = settings or Settings()

        # Initialize repositories
        self.table_repo = FileSystemPairedTableRepository()
        self.results_repo = FileSystemResultsRepository()
        self.params_repo = FileSystemParamsRepository()
        self.report_repo = FileSystemReportRepository()

        # Initialize use cases
        self.load_use_case = LoadInputUseCase(self.table_repo)
        self.estimate_use_case = EstimateUseCase(self.params_repo)
        self.test_use_case = TestUseCase(self.params_repo, self.results_repo)
        self.oracle_use_case = OracleTestUseCase(self.params_repo, self.results_repo)
        self.compare_use_case = CompareUseCase(self.params_repo, self.results_repo)
        self.simulate_use_case = SimulateUseCase(self.report_repo)

    def em_config(self, args: argparse.Namespace) -> EmConfig:
        return self.settings.em.to_config(seed=getattr(args, "seed", None))


class InputCommand(CommandHandler):
    """Shared input handling for commands that read a paired table."""

    def read_options(self, args: argparse.Namespace) -> ReadOptions:
        io = self.settings.io
        return ReadOptions(
            id_column=args.id_column or io.id_column,
            p1_column=args.p1_column or io.p1_column,
            p2_column=args.p2_column or io.p2_column,
            p_floor=io.p_floor,
        )

    def load(self, args: argparse.Namespace) -> AnalysisInput:
        prepared = self.load_use_case.execute(Path(args.input), self.read_options(args), sort_by_position=args.sort_by_position)
        for warning in prepared.warnings:
            logger.warning(warning)
            self.presenter.show_warning(warning)
        skipped = len(prepared.table.diagnostics.skipped_rows)
        if skipped:
            self.presenter.show_warning(f"{skipped} rows skipped while reading {args.input} (see the results JSON for line numbers)")
        return prepared


class EstimateCommand(InputCommand):
    """Handler for estimate command."""

    def execute(self, args: argparse.Namespace) -> None:
        prepared = self.load(args)
        fit = self.estimate_use_case.execute(prepared, self.em_config(args), Path(args.out))
        self.presenter.show_fit(fit, str(Path(args.out) / PARAMS_FILE))


class TestCommand(InputCommand):
    """Handler for test command."""

    __test__ = False

    def execute(self, args: argparse.Namespace) -> None:
        prepared = self.load(args)
        fit, outcome = self.test_use_case.execute(prepared, args.q, self.em_config(args), Path(args.out))
        self.presenter.show_outcome(outcome, str(Path(args.out) / f"{RESULTS_STEM}.tsv"), fit)


class OracleTestCommand(InputCommand):
    """Handler for oracle-test command."""

    def execute(self, args: argparse.Namespace) -> None:
        prepared = self.load(args)
        outcome = self.oracle_use_case.execute(prepared, Path(args.params), args.q, Path(args.out))
        self.presenter.show_outcome(outcome, str(Path(args.out) / f"{RESULTS_STEM}.tsv"))


class CompareCommand(InputCommand):
    """Handler for compare command."""

    def execute(self, args: argparse.Namespace) -> None:
        methods = args.methods or self._default_methods()
        lambdas = self.settings.baselines.with_jump_overrides(args.jump_lambda1, args.jump_lambda2, args.jump_lambda3).jump_lambdas
        prepared = self.load(args)
        summary = self.compare_use_case.execute(
            prepared,
            args.q,
            self.em_config(args),
            methods,
            Path(args.out),
            jump_lambdas=lambdas,
            threads=getattr(args, "threads", None) or default_workers(),
        )
        self.presenter.show_compare(summary)

    def _default_methods(self) -> list[BaselineMethod]:
        skipped = BaselineMethod.RADJUST if self.settings.baselines.radjust_adaptive else BaselineMethod.RADJUST_ADAPTIVE
        return [m for m in BaselineMethod if m is not skipped]


class SimulateCommand(CommandHandler):
    """Handler for simulate command."""

    def execute(self, args: argparse.Namespace) -> None:
        sim = self.settings.simulation
        overrides = {
            "m": args.m,
            "replications": args.replications,
            "scenario": args.scenario,
            "mu1": args.mu1,
            "mu2": args.mu2,
            "sigma1": args.sigma1,
            "sigma2": args.sigma2,
            "q_grid": tuple(args.q_grid) if args.q_grid else None,
        }
        cfg = self.settings.sim_config(seed=getattr(args, "seed", None), threads=getattr(args, "threads", None), **overrides)
        methods = args.methods or list(sim.methods)
        mu_grid = args.mu_grid or list(sim.mu_grid)
        pi1_grid = args.pi1_grid or list(sim.pi1_grid)

        reports, files = self.simulate_use_case.execute(cfg, methods, Path(args.out), mu_grid=mu_grid, pi1_grid=pi1_grid)
        self.presenter.show_report(reports, [str(p) for p in files])


class PresetsCommand(CommandHandler):
    """Handler for presets command."""

    def execute(self, args: argparse.Namespace) -> None:
        presets: dict[str, dict[str, Any]] = {}
        for name in list_presets():
            settings = Settings.from_dict(load_settings(preset=name))
            sim = settings.simulation
            presets[name] = {
                "scenario": sim.scenario,
                "m": sim.m,
                "replications": sim.replications,
                "methods": ",".join(sim.methods),
                "mu_grid": ",".join(f"{mu:g}" for mu in sim.mu_grid) or f"{sim.mu1:g}",
                "em.max_iterations": settings.em.max_iterations,
            }
        self.presenter.show_presets(presets)


class VersionCommand(CommandHandler):
    """Handler for version command."""

    def execute(self, args: argparse.Namespace) -> None:
        pyproject_path = self.project_root / "pyproject.toml"
        if not pyproject_path.exists():
            self.presenter.show_error("pyproject.toml not found")
            return

        with open(pyproject_path, "rb") as f:
            poetry = tomllib.load(f).get("tool", {}).get("poetry", {})

        version = poetry.get("version")
        if not version:
            self.presenter.show_error("Version not found in pyproject.toml")
            return
        self.presenter.show_version(poetry.get("name", "replictl"), version, poetry.get("description", ""))
