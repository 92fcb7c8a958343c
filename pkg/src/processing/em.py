"""
Nonparametric maximum-likelihood estimation of (pi, A, f1, f2) by EM.

Each iteration runs the scaled forward-backward pass as the E-step and then
updates pi and A in closed form and f1, f2 through the Grenander update. The
final stationary vector is recomputed from the fitted transition matrix.
"""

import json
import logging
from dataclasses import dataclass
from typing import Any, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import xlogy

from models.errors import InputDataError, NumericalFailure
from models.hmm import (
    N_STATES,
    HmmParams,
    PairedPValues,
    StateCode,
    StationaryDist,
    StepDensity,
    TransitionMatrix,
    stationary_from_transition,
    validate_params,
)
from processing.forward_backward import INFERENCE_DENSITY_FLOOR, PosteriorTables, run_forward_backward
from processing.isotonic import grenander_update

logger = logging.getLogger(__name__)

MOMENT_ALPHA = 0.05
MOMENT_CELL_FLOOR = 0.02
INITIAL_PERSISTENCE = 0.7
INITIAL_DENSITY_CUT = 0.2
INITIAL_DENSITY_HEAD = 4.0

# Columns of gamma carrying signal in study 1 (states 2, 3) and study 2 (states 1, 3)
STUDY1_SIGNAL_STATES = [int(s) for s in StateCode if s.theta1]
STUDY2_SIGNAL_STATES = [int(s) for s in StateCode if s.theta2]


class EmConfig(BaseModel):
    """Controls for the EM fit."""

    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(default=200, ge=1)
    rel_tol: float = Field(default=1e-6, gt=0.0)
    seed: int = 0
    initializer: Literal["moment", "jittered"] = "moment"
    store_trace: bool = True
    min_features: int = Field(default=100, ge=1)
    param_floor: float = Field(default=1e-8, gt=0.0, lt=0.25)
    # signal densities vanish on (density_support, 1]; 1.0 leaves them unrestricted
    density_support: float = Field(default=0.5, gt=0.0, le=1.0)


@dataclass(frozen=True, eq=False)
class EmFit:
    """Fitted parameters and the observed-data log-likelihood of every iteration."""

    params: HmmParams
    log_likelihood_trace: tuple[float, ...]
    iterations_used: int
    converged: bool

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihood_trace[-1]

    def to_dict(self) -> dict[str, Any]:
        data = self.params.to_dict()
        data["trace"] = list(self.log_likelihood_trace)
        data["iterations"] = self.iterations_used
        data["converged"] = self.converged
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EmFit":
        return cls(
            params=HmmParams.from_dict(data),
            log_likelihood_trace=tuple(float(v) for v in data.get("trace", [])),
            iterations_used=int(data.get("iterations", 0)),
            converged=bool(data.get("converged", False)),
        )


def constrained_simplex_mle(counts: np.ndarray, floor: float) -> np.ndarray:
    """
    argmax sum_k counts_k log a_k over the simplex with every a_k >= floor.

    Components are a_k = max(floor, counts_k / lam) with lam set so the vector
    sums to one.
    """
    c = np.clip(np.asarray(counts, dtype=float), 0.0, None)
    k = c.shape[0]
    if c.sum() <= 0.0:
        return np.full(k, 1.0 / k)
    fixed = np.zeros(k, dtype=bool)
    while True:
        lam = c[~fixed].sum() / (1.0 - floor * fixed.sum())
        a = np.where(fixed, floor, c / lam)
        newly_fixed = (~fixed) & (a < floor)
        if not newly_fixed.any():
            break
        fixed |= newly_fixed
    return a / a.sum()


def moment_state_frequencies(data: PairedPValues, alpha: float = MOMENT_ALPHA, floor: float = MOMENT_CELL_FLOOR) -> np.ndarray:
    """Cross-tabulated share of features with y1 < alpha and y2 < alpha, floored per cell."""
    s1 = data.y1 < alpha
    s2 = data.y2 < alpha
    cells = np.empty(N_STATES)
    cells[StateCode.NULL_NULL] = np.mean(~s1 & ~s2)
    cells[StateCode.NULL_SIGNAL] = np.mean(~s1 & s2)
    cells[StateCode.SIGNAL_NULL] = np.mean(s1 & ~s2)
    cells[StateCode.SIGNAL_SIGNAL] = np.mean(s1 & s2)
    cells = np.maximum(cells, floor)
    return cells / cells.sum()


def initialize(data: PairedPValues, cfg: EmConfig) -> HmmParams:
    """Moment-based starting point for EM."""
    if data.m < cfg.min_features:
        raise InputDataError(f"estimation needs at least {cfg.min_features} features, got {data.m}")

    pi = moment_state_frequencies(data)
    if cfg.initializer == "jittered":
        rng = np.random.default_rng(cfg.seed)
        pi = 0.9 * pi + 0.1 * rng.dirichlet(np.ones(N_STATES))
        pi = np.maximum(pi, MOMENT_CELL_FLOOR)
        pi = pi / pi.sum()

    a = INITIAL_PERSISTENCE * np.eye(N_STATES) + (1.0 - INITIAL_PERSISTENCE) * np.tile(pi, (N_STATES, 1))
    a = a / a.sum(axis=1, keepdims=True)
    f0 = StepDensity.two_piece(INITIAL_DENSITY_CUT, INITIAL_DENSITY_HEAD).truncated(cfg.density_support)
    return HmmParams(pi=StationaryDist(pi), a=TransitionMatrix(a), f1=f0, f2=f0)


def update_initial(post: PosteriorTables, floor: float) -> StationaryDist:
    return StationaryDist(constrained_simplex_mle(post.gamma[0], floor))


def update_transition(post: PosteriorTables, floor: float) -> TransitionMatrix:
    if post.m < 2:
        raise NumericalFailure("transition update needs at least two features")
    counts = post.xi_counts()
    return TransitionMatrix(np.vstack([constrained_simplex_mle(row, floor) for row in counts]))


def density_term(f: StepDensity, y: np.ndarray, weights: np.ndarray) -> float:
    """sum_j weights_j log f(y_j)."""
    with np.errstate(divide="ignore"):
        return float(xlogy(weights, f.evaluate(y)).sum())


def update_density(previous: StepDensity, y: np.ndarray, order: np.ndarray, weights: np.ndarray, support: float = 1.0) -> StepDensity:
    """Grenander update of one signal density; the previous density is kept if it scores higher."""
    weights = np.where(y > support, 0.0, weights)
    updated = grenander_update(y[order], weights[order], support)
    if density_term(updated, y, weights) < density_term(previous, y, weights):
        return previous
    return updated


def m_step(params: HmmParams, post: PosteriorTables, data: PairedPValues, orders: tuple[np.ndarray, np.ndarray], floor: float, support: float = 1.0) -> HmmParams:
    weights1 = post.gamma[:, STUDY1_SIGNAL_STATES].sum(axis=1)
    weights2 = post.gamma[:, STUDY2_SIGNAL_STATES].sum(axis=1)
    return HmmParams(
        pi=update_initial(post, floor),
        a=update_transition(post, floor),
        f1=update_density(params.f1, data.y1, orders[0], weights1, support),
        f2=update_density(params.f2, data.y2, orders[1], weights2, support),
    )


def _e_step(params: HmmParams, data: PairedPValues, iteration: int) -> PosteriorTables:
    try:
        return run_forward_backward(params, data, store_xi=True)
    except NumericalFailure as e:
        raise NumericalFailure(f"E-step failed at iteration {iteration}: {e}") from e


def fit(data: PairedPValues, cfg: Optional[EmConfig] = None) -> EmFit:
    """
    Fit the four-state model to paired p-values.

    Raises:
        InputDataError: fewer features than cfg.min_features
        NumericalFailure: an E-step breaks down or the fitted chain is degenerate
    """
    cfg = cfg or EmConfig()
    params = initialize(data, cfg)
    orders = (np.argsort(data.y1, kind="stable"), np.argsort(data.y2, kind="stable"))

    post = _e_step(params, data, 0)
    log_lik = post.log_likelihood
    trace = [log_lik]
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        params = m_step(params, post, data, orders, cfg.param_floor, cfg.density_support)
        post = _e_step(params, data, iteration)
        new_log_lik = post.log_likelihood
        trace.append(new_log_lik)
        change = abs(new_log_lik - log_lik) / (1.0 + abs(log_lik))
        logger.debug(f"EM iteration {iteration}: log-likelihood {new_log_lik:.10g}, relative change {change:.3e}")
        log_lik = new_log_lik
        if change < cfg.rel_tol:
            converged = True
            break

    if converged:
        logger.info(f"EM converged after {iteration} iterations, log-likelihood {log_lik:.10g}")
    else:
        logger.info(f"EM stopped at the iteration cap ({cfg.max_iterations}), log-likelihood {log_lik:.10g}")

    params = params.with_pi(stationary_from_transition(params.a))
    problems = validate_params(params)
    if problems:
        raise NumericalFailure("fitted parameters are invalid: " + "; ".join(problems))

    return EmFit(
        params=params,
        log_likelihood_trace=tuple(trace) if cfg.store_trace else (log_lik,),
        iterations_used=iteration,
        converged=converged,
    )


def d_objective(params: HmmParams, posteriors: PosteriorTables, data: PairedPValues) -> float:
    """Expected complete-data log-likelihood of params under the given posteriors."""
    emis = params.emission_matrix(data.y1, data.y2, floor=INFERENCE_DENSITY_FLOOR)
    with np.errstate(divide="ignore"):
        total = xlogy(posteriors.gamma[0], params.pi.pi).sum()
        if posteriors.xi is not None and posteriors.xi.shape[0] > 0:
            total += xlogy(posteriors.xi_counts(), params.a.a).sum()
        total += xlogy(posteriors.gamma, emis).sum()
    return float(total)
