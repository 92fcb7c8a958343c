"""Presentation layer for displaying information to users."""

import json
import math
import re
from typing import Any, Optional

from processing.em import EmFit
from processing.replicability import TestOutcome
from simulation.harness import EvalReport

from ..application.analysis import CompareSummary


class Colors:
    """Terminal color codes."""

    RED = "\033[0;31m"
    GREEN = "\033[0;32m"
    YELLOW = "\033[1;33m"
    BLUE = "\033[0;34m"
    CYAN = "\033[0;36m"
    MAGENTA = "\033[0;35m"
    NC = "\033[0m"  # No Color


EMOJI_PATTERN = re.compile(
    "["
    "\U0001f300-\U0001f6ff"  # symbols, pictographs, transport
    "\U0001f780-\U0001faff"  # extended symbols
    "\U00002600-\U000027bf"  # miscellaneous symbols and dingbats
    "\U00002139"  # information source
    "\U0000fe00-\U0000fe0f"  # variation selectors
    "]+",
    flags=re.UNICODE,
)


def _json_safe(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class Presenter:
    """Handles presentation of information to users."""

    def __init__(self, json_mode: bool = False, no_emoji: bool = False):
        """Initialize presenter with output mode.

        Args:
            json_mode: If True, outputs JSON instead of colored text with emojis
            no_emoji: If True, removes emojis from text output (ignored when json_mode is True)
        """
        self.json_mode = json_mode
        self.no_emoji = no_emoji and not json_mode

    def _format_output(self, text: str) -> str:
        """Remove emojis from text when no_emoji is set."""
        if not self.no_emoji:
            return text
        return EMOJI_PATTERN.sub("", text).strip()

    def _output_json(self, data: dict[str, Any]) -> None:
        print(json.dumps(data, indent=2, default=str))

    def _print(self, text: str) -> None:
        print(self._format_output(text))

    def show_error(self, message: str) -> None:
        """Show error message."""
        if self.json_mode:
            self._output_json({"status": "error", "message": message})
        else:
            self._print(f"{Colors.RED}❌ Error: {message}{Colors.NC}")

    def show_warning(self, message: str) -> None:
        """Show warning message."""
        if self.json_mode:
            self._output_json({"status": "warning", "message": message})
        else:
            self._print(f"{Colors.YELLOW}⚠️  {message}{Colors.NC}")

    def show_success(self, message: str) -> None:
        """Show success message."""
        if self.json_mode:
            self._output_json({"status": "success", "message": message})
        else:
            self._print(f"{Colors.GREEN}✅ {message}{Colors.NC}")

    def show_info(self, message: str) -> None:
        """Show info message."""
        if self.json_mode:
            self._output_json({"status": "info", "message": message})
        else:
            self._print(f"{Colors.BLUE}ℹ️  {message}{Colors.NC}")

    def _fit_payload(self, fit: EmFit) -> dict[str, Any]:
        return {
            "pi": [round(v, 6) for v in fit.params.pi.pi.tolist()],
            "A": [[round(v, 6) for v in row] for row in fit.params.a.a.tolist()],
            "log_likelihood": fit.log_likelihood,
            "iterations": fit.iterations_used,
            "converged": fit.converged,
        }

    def show_fit(self, fit: EmFit, params_path: str) -> None:
        """Show the fitted chain parameters."""
        if self.json_mode:
            self._output_json({"status": "success", "action": "estimate", "params_file": params_path, "fit": self._fit_payload(fit)})
            return
        state = "converged" if fit.converged else "stopped at the iteration cap"
        self._print(f"{Colors.GREEN}✅ EM {state} after {fit.iterations_used} iterations{Colors.NC}")
        print(f"{Colors.BLUE}   log-likelihood: {fit.log_likelihood:.6f}{Colors.NC}")
        print(f"{Colors.BLUE}   stationary distribution: {', '.join(f'{v:.4f}' for v in fit.params.pi.pi)}{Colors.NC}")
        print(f"{Colors.BLUE}   transition matrix:{Colors.NC}")
        for row in fit.params.a.a:
            print(f"{Colors.CYAN}     {'  '.join(f'{v:.4f}' for v in row)}{Colors.NC}")
        self._print(f"{Colors.GREEN}📄 Parameters written to {params_path}{Colors.NC}")

    def show_outcome(self, outcome: TestOutcome, results_path: str, fit: Optional[EmFit] = None) -> None:
        """Show the rejections of a step-up pass."""
        summary = {k: _json_safe(v) for k, v in outcome.summary().items()}
        if self.json_mode:
            payload = {"status": "success", "action": "test", "results_file": results_path, **summary}
            if fit is not None:
                payload["fit"] = self._fit_payload(fit)
            self._output_json(payload)
            return
        if fit is not None and not fit.converged:
            self.show_warning(f"EM did not converge within {fit.iterations_used} iterations")
        self._print(f"{Colors.GREEN}🔬 {outcome.num_rejected} of {outcome.rlis.shape[0]} features declared replicable at q = {outcome.nominal_q:g}{Colors.NC}")
        if outcome.threshold is not None:
            print(f"{Colors.BLUE}   rLIS threshold: {outcome.threshold:.6e}{Colors.NC}")
            print(f"{Colors.BLUE}   estimated FDP: {outcome.estimated_fdp:.6e}{Colors.NC}")
        self._print(f"{Colors.GREEN}📄 Results written to {results_path}{Colors.NC}")

    def show_compare(self, summary: CompareSummary) -> None:
        """Show per-method rejection counts."""
        if self.json_mode:
            self._output_json({"status": "success", "action": "compare", **summary.to_dict()})
            return
        self._print(f"{Colors.CYAN}📊 Rejections at q = {summary.q:g} (m = {summary.m}):{Colors.NC}")
        width = max(len(name) for name in summary.rejections)
        for name, count in summary.rejections.items():
            print(f"{Colors.YELLOW}   {name:<{width}}{Colors.NC}  {count}")
        print(f"{Colors.BLUE}   rLIS findings made by no other method: {summary.unique_rlis}{Colors.NC}")
        self._print(f"{Colors.GREEN}📄 {len(summary.files)} results tables written{Colors.NC}")

    def show_report(self, reports: list[EvalReport], files: list[str]) -> None:
        """Show the empirical FDR and power of every evaluated cell."""
        cells = [c for r in reports for c in r.cells]
        failures = [f for r in reports for f in r.failures]
        if self.json_mode:
            self._output_json(
                {
                    "status": "success" if not failures else "warning",
                    "action": "simulate",
                    "files": files,
                    "cells": [
                        {
                            "method": c.method,
                            "q": c.q,
                            "mu1": c.mu1,
                            "mu2": c.mu2,
                            "fdr": _json_safe(c.fdr),
                            "power": _json_safe(c.power),
                            "n_reps": c.n_reps,
                            "incomplete": c.incomplete,
                        }
                        for c in cells
                    ],
                    "failures": failures,
                }
            )
            return
        self._print(f"{Colors.CYAN}📊 Empirical FDR and power:{Colors.NC}")
        print(f"{Colors.YELLOW}   {'method':<18}{'q':>8}{'mu1':>6}{'mu2':>6}{'fdr':>10}{'power':>10}{'reps':>6}{Colors.NC}")
        for c in cells:
            flag = " *" if c.incomplete else ""
            print(f"   {c.method:<18}{c.q:>8g}{c.mu1:>6g}{c.mu2:>6g}{c.fdr:>10.4f}{c.power:>10.4f}{c.n_reps:>6}{flag}")
        if failures:
            self.show_warning(f"{len(failures)} method runs failed; cells marked * are incomplete")
        for path in files:
            self._print(f"{Colors.GREEN}📄 {path}{Colors.NC}")

    def show_presets(self, presets: dict[str, dict[str, Any]]) -> None:
        """Show available presets and their key settings."""
        if self.json_mode:
            self._output_json({"action": "presets", "count": len(presets), "presets": presets})
            return
        if not presets:
            self.show_warning("No presets found under configs/")
            return
        self._print(f"{Colors.CYAN}📂 Available presets:{Colors.NC}")
        print()
        for name, info in presets.items():
            print(f"{Colors.YELLOW}{name}{Colors.NC}")
            for key, value in info.items():
                print(f"   {Colors.BLUE}{key}: {value}{Colors.NC}")
        print()
        self._print(f"{Colors.CYAN}💡 Select one with --preset <name>, or pass a file with --config{Colors.NC}")

    def show_version(self, name: str, version: str, description: str = "") -> None:
        if self.json_mode:
            self._output_json({"name": name, "version": version, "description": description})
        else:
            self.show_info(f"{name} version {version}")
