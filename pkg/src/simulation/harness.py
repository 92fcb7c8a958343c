"""
Monte Carlo evaluation of the replicability procedures.

Each replication draws a hidden state path from the chain, turns normal
z-values into one-sided p-values and runs every selected method at every
nominal level. Replication r uses its own random stream derived from
(seed, r), so a report depends only on the configuration and never on the
number of worker processes.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numba as nb
import numpy as np
import pandas as pd
import psutil
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.stats import norm

from models.errors import ParamsValidationError
from models.hmm import HmmParams, PairedPValues, StateCode, StepDensity, TransitionMatrix, stationary_from_transition
from processing.baselines import BaselineMethod, fit_stareg, run_baseline
from processing.em import EmConfig, fit
from processing.forward_backward import compute_rlis
from processing.replicability import step_up
from simulation.scenarios import get_scenario, symmetric_signal_chain

logger = logging.getLogger(__name__)

RLIS = "rlis"
RLIS_ORACLE = "rlis_oracle"
SIM_METHODS = (RLIS, RLIS_ORACLE) + tuple(b.value for b in BaselineMethod)
DEFAULT_Q_GRID = (0.001, 0.01, 0.05, 0.1, 0.2)

# Breakpoints for discretizing the alternative p-value distribution
ORACLE_GRID = np.concatenate(([0.0], np.geomspace(1e-12, 1.0, 400)))

LONG_COLUMNS = ["method", "q", "mu1", "mu2", "metric", "value", "stderr", "n_reps"]
CURVE_COLUMNS = ["method", "q", "mu1", "mu2", "fdr", "power"]


class SimConfig(BaseModel):
    """Data-generating process and evaluation plan."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(default=10_000, ge=1)
    scenario: str = "scenario1"
    transition: Optional[tuple[tuple[float, float, float, float], ...]] = None
    pi1: Optional[float] = Field(default=None, gt=0.0, lt=0.45)
    mu1: float = 2.0
    mu2: float = 2.0
    sigma1: float = Field(default=1.0, gt=0.0)
    sigma2: float = Field(default=1.0, gt=0.0)
    q_grid: tuple[float, ...] = DEFAULT_Q_GRID
    replications: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    threads: Optional[int] = Field(default=None, ge=1)
    em: EmConfig = EmConfig()
    jump_lambdas: tuple[float, float, float] = (0.5, 0.5, 0.5)

    @field_validator("q_grid")
    @classmethod
    def _levels_in_unit_interval(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("q_grid must hold at least one level")
        if any(not 0.0 < q < 1.0 for q in value):
            raise ValueError("every nominal level must lie in (0, 1)")
        return value

    @field_validator("scenario")
    @classmethod
    def _known_scenario(cls, value: str) -> str:
        get_scenario(value)
        return value

    @field_validator("jump_lambdas")
    @classmethod
    def _storey_lambdas(cls, value: tuple[float, float, float]) -> tuple[float, float, float]:
        if any(not 0.0 <= lam < 1.0 for lam in value):
            raise ValueError("Storey tuning parameters must lie in [0, 1)")
        return value

    def transition_matrix(self) -> TransitionMatrix:
        if self.pi1 is not None:
            return symmetric_signal_chain(self.pi1, get_scenario(self.scenario).persistence())
        if self.transition is not None:
            return TransitionMatrix.from_published(self.transition)
        return get_scenario(self.scenario).transition()


@dataclass(frozen=True, eq=False)
class SimTruth:
    states: np.ndarray

    @property
    def theta1(self) -> np.ndarray:
        return (self.states >> 1) & 1

    @property
    def theta2(self) -> np.ndarray:
        return self.states & 1

    @property
    def null_mask(self) -> np.ndarray:
        return self.states != StateCode.SIGNAL_SIGNAL

    def counts(self) -> np.ndarray:
        return np.bincount(self.states, minlength=len(StateCode))


@dataclass(frozen=True)
class EvalCell:
    method: str
    q: float
    mu1: float
    mu2: float
    fdr: float
    fdr_stderr: float
    power: float
    power_stderr: float
    n_reps: int
    n_failed: int = 0

    @property
    def incomplete(self) -> bool:
        return self.n_failed > 0


@dataclass
class EvalReport:
    cells: list[EvalCell] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    def cell(self, method: str, q: float, mu1: Optional[float] = None) -> EvalCell:
        for c in self.cells:
            if c.method == method and math.isclose(c.q, q) and (mu1 is None or math.isclose(c.mu1, mu1)):
                return c
        raise KeyError(f"no cell for method={method}, q={q}, mu1={mu1}")

    def incomplete_cells(self) -> list[EvalCell]:
        return [c for c in self.cells if c.incomplete]

    def extend(self, other: "EvalReport") -> None:
        self.cells.extend(other.cells)
        self.failures.extend(other.failures)

    def to_long_frame(self) -> pd.DataFrame:
        rows = []
        for c in self.cells:
            rows.append([c.method, c.q, c.mu1, c.mu2, "fdr", c.fdr, c.fdr_stderr, c.n_reps])
            rows.append([c.method, c.q, c.mu1, c.mu2, "power", c.power, c.power_stderr, c.n_reps])
        return pd.DataFrame(rows, columns=LONG_COLUMNS)

    def to_curves_frame(self) -> pd.DataFrame:
        return pd.DataFrame([[c.method, c.q, c.mu1, c.mu2, c.fdr, c.power] for c in self.cells], columns=CURVE_COLUMNS)


@nb.njit(cache=True)
def _walk_chain(cumulative, first, uniforms):
    m = uniforms.shape[0]
    k_states = cumulative.shape[1]
    states = np.empty(m, dtype=np.int64)
    states[0] = first
    for j in range(1, m):
        row = cumulative[states[j - 1]]
        k = 0
        while k < k_states - 1 and uniforms[j] >= row[k]:
            k += 1
        states[j] = k
    return states


def simulate_states(cfg: SimConfig, rng: np.random.Generator) -> SimTruth:
    """Stationary start, then one transition per feature."""
    a = cfg.transition_matrix()
    if not a.is_irreducible():
        raise ParamsValidationError(["transition matrix is reducible"])
    pi = stationary_from_transition(a).pi
    uniforms = rng.random(cfg.m)
    first = int(min(np.searchsorted(np.cumsum(pi), uniforms[0], side="right"), len(pi) - 1))
    states = _walk_chain(np.cumsum(a.a, axis=1), first, uniforms)
    return SimTruth(states)


def one_sided_pvalue(x: np.ndarray) -> np.ndarray:
    """Upper standard-normal tail, kept inside (0, 1)."""
    p = norm.sf(np.asarray(x, dtype=float))
    return np.clip(p, np.finfo(float).tiny, np.nextafter(1.0, 0.0))


def simulate_pvalues(truth: SimTruth, cfg: SimConfig, rng: np.random.Generator) -> PairedPValues:
    """z ~ N(0, 1) under the null and N(mu_i, sigma_i^2) under signal, per study."""
    if truth.states.shape[0] != cfg.m:
        raise ValueError(f"state path has {truth.states.shape[0]} features, configuration expects {cfg.m}")
    z1 = rng.standard_normal(cfg.m)
    z2 = rng.standard_normal(cfg.m)
    x1 = np.where(truth.theta1 == 1, cfg.mu1 + cfg.sigma1 * z1, z1)
    x2 = np.where(truth.theta2 == 1, cfg.mu2 + cfg.sigma2 * z2, z2)
    return PairedPValues(one_sided_pvalue(x1), one_sided_pvalue(x2))


def alternative_pvalue_density(mu: float, sigma: float) -> StepDensity:
    """Cell averages of the p-value density of N(mu, sigma^2) z-values on a log-spaced grid."""

    def cdf(t: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return norm.sf((norm.isf(t) - mu) / sigma)

    return StepDensity.from_cdf(cdf, ORACLE_GRID)


def oracle_params(cfg: SimConfig) -> HmmParams:
    """Generating parameters of cfg in model form."""
    a = cfg.transition_matrix()
    return HmmParams(
        pi=stationary_from_transition(a),
        a=a,
        f1=alternative_pvalue_density(cfg.mu1, cfg.sigma1),
        f2=alternative_pvalue_density(cfg.mu2, cfg.sigma2),
    )


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(replication,)))


def _score(rejected: np.ndarray, truth: SimTruth) -> tuple[float, float]:
    mask = np.zeros(truth.states.shape[0], dtype=bool)
    mask[rejected] = True
    n_rejected = int(mask.sum())
    false = int((mask & truth.null_mask).sum())
    n_replicated = int((~truth.null_mask).sum())
    true = int((mask & ~truth.null_mask).sum())
    return false / max(n_rejected, 1), true / max(n_replicated, 1)


def _rejections_per_level(method: str, data: PairedPValues, cfg: SimConfig, oracle: Optional[HmmParams]) -> list[np.ndarray]:
    if method == RLIS:
        rlis = compute_rlis(fit(data, cfg.em).params, data)
        return [step_up(rlis, q).rejected for q in cfg.q_grid]
    if method == RLIS_ORACLE:
        rlis = compute_rlis(oracle, data)
        return [step_up(rlis, q).rejected for q in cfg.q_grid]
    if method == BaselineMethod.STAREG.value:
        lfdr = fit_stareg(data, cfg.em).lfdr
        return [step_up(lfdr, q).rejected for q in cfg.q_grid]
    return [run_baseline(method, data, q, jump_lambdas=cfg.jump_lambdas).rejected for q in cfg.q_grid]


def run_replication(cfg: SimConfig, replication: int, methods: Sequence[str]) -> dict[str, Any]:
    """FDP and power of every method at every level for one replication; failures are recorded."""
    rng = replication_rng(cfg.seed, replication)
    truth = simulate_states(cfg, rng)
    data = simulate_pvalues(truth, cfg, rng)
    oracle = oracle_params(cfg) if RLIS_ORACLE in methods else None

    scores: dict[str, Any] = {}
    for method in methods:
        try:
            scores[method] = [_score(rejected, truth) for rejected in _rejections_per_level(method, data, cfg, oracle)]
        except Exception as e:
            logger.warning(f"Replication {replication}: method {method} failed: {e}")
            scores[method] = f"{type(e).__name__}: {e}"
    logger.debug(f"Replication {replication} done, state counts {truth.counts().tolist()}")
    return scores


def _worker(args: tuple[SimConfig, int, tuple[str, ...]]) -> tuple[int, dict[str, Any]]:
    cfg, replication, methods = args
    return replication, run_replication(cfg, replication, methods)


def default_workers() -> int:
    return psutil.cpu_count(logical=False) or 1


def _mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    if values.shape[0] == 0:
        return float("nan"), float("nan")
    if values.shape[0] == 1:
        return float(values[0]), float("nan")
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.shape[0]))


def _validate_methods(methods: Sequence[str]) -> tuple[str, ...]:
    if not methods:
        raise ValueError("select at least one method")
    unknown = [m for m in methods if m not in SIM_METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}, choose from {list(SIM_METHODS)}")
    return tuple(dict.fromkeys(methods))


def evaluate(cfg: SimConfig, methods: Sequence[str]) -> EvalReport:
    """Empirical FDR and power of each method at each level over cfg.replications replications."""
    methods = _validate_methods(methods)
    workers = min(cfg.threads or default_workers(), cfg.replications)
    logger.info(f"Evaluating {list(methods)} over {cfg.replications} replications (m={cfg.m}, mu=({cfg.mu1}, {cfg.mu2}), workers={workers})")

    results: dict[int, dict[str, Any]] = {}
    if workers <= 1:
        for r in range(cfg.replications):
            results[r] = run_replication(cfg, r, methods)
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_worker, (cfg, r, methods)) for r in range(cfg.replications)]
            for future in as_completed(futures):
                r, scores = future.result()
                results[r] = scores
                logger.debug(f"Progress: {len(results)}/{cfg.replications} replications")

    report = EvalReport()
    for method in methods:
        outcomes = [results[r][method] for r in range(cfg.replications)]
        failed = [(r, o) for r, o in enumerate(outcomes) if isinstance(o, str)]
        report.failures.extend(f"{method} replication {r}: {message}" for r, message in failed)
        ok = [o for o in outcomes if not isinstance(o, str)]
        for level, q in enumerate(cfg.q_grid):
            fdp = np.array([o[level][0] for o in ok])
            power = np.array([o[level][1] for o in ok])
            fdr_mean, fdr_se = _mean_and_stderr(fdp)
            power_mean, power_se = _mean_and_stderr(power)
            report.cells.append(EvalCell(method, q, cfg.mu1, cfg.mu2, fdr_mean, fdr_se, power_mean, power_se, len(ok), len(failed)))
    if report.failures:
        logger.warning(f"{len(report.failures)} method runs failed; affected cells are flagged incomplete")
    return report


def sweep(cfg: SimConfig, methods: Sequence[str], mu_grid: Optional[Sequence[float]] = None) -> EvalReport:
    """evaluate() at every common signal mean mu1 = mu2 = mu of the grid."""
    if not mu_grid:
        return evaluate(cfg, methods)
    report = EvalReport()
    for mu in mu_grid:
        report.extend(evaluate(cfg.model_copy(update={"mu1": float(mu), "mu2": float(mu)}), methods))
    return report


def sweep_pi1(cfg: SimConfig, methods: Sequence[str], pi1_grid: Sequence[float], mu_grid: Optional[Sequence[float]] = None) -> dict[float, EvalReport]:
    """One report per single-study signal share pi1."""
    reports = {}
    for pi1 in pi1_grid:
        cell_cfg = SimConfig.model_validate({**cfg.model_dump(), "pi1": float(pi1)})
        reports[float(pi1)] = sweep(cell_cfg, methods, mu_grid)
    return reports
