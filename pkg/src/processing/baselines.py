"""
Replicability procedures that ignore dependence between features.

Ad hoc BH, MaxP, radjust (adaptive and plain), JUMP and STAREG. All of them
take the same paired p-values as the chain model and return a BaselineOutcome
so the comparison harness can score them side by side.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

import numpy as np

from models.errors import DomainError, NumericalFailure
from models.hmm import PairedPValues, StateCode, StepDensity
from processing.em import (
    STUDY1_SIGNAL_STATES,
    STUDY2_SIGNAL_STATES,
    EmConfig,
    constrained_simplex_mle,
    initialize,
    update_density,
)
from processing.forward_backward import INFERENCE_DENSITY_FLOOR
from processing.replicability import step_up

logger = logging.getLogger(__name__)

DEFAULT_STOREY_LAMBDA = 0.5
NULL_STATES = [int(s) for s in StateCode if s.is_replicability_null]


class BaselineMethod(str, Enum):
    ADHOC_BH = "adhoc_bh"
    MAXP = "maxp"
    RADJUST_ADAPTIVE = "radjust_adaptive"
    RADJUST = "radjust"
    JUMP = "jump"
    STAREG = "stareg"


@dataclass(frozen=True, eq=False)
class BaselineOutcome:
    """Rejections of one baseline procedure plus its diagnostics."""

    method: BaselineMethod
    rejected: np.ndarray
    auxiliary: dict[str, Any] = field(default_factory=dict)

    @property
    def num_rejected(self) -> int:
        return int(self.rejected.shape[0])

    def rejected_mask(self, m: int) -> np.ndarray:
        mask = np.zeros(m, dtype=bool)
        mask[self.rejected] = True
        return mask


def _check_level(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise DomainError(f"nominal level q must lie in (0, 1), got {q!r}")


def bh(p: np.ndarray, q: float) -> np.ndarray:
    """Benjamini-Hochberg step-up: sorted indices of the k smallest p with p_(k) <= kq/m maximal."""
    _check_level(q)
    values = np.asarray(p, dtype=float)
    m = values.shape[0]
    if m == 0:
        return np.empty(0, dtype=int)
    order = np.argsort(values, kind="stable")
    passing = np.flatnonzero(values[order] <= q * np.arange(1, m + 1) / m)
    if passing.shape[0] == 0:
        return np.empty(0, dtype=int)
    return np.sort(order[: passing[-1] + 1])


def adhoc_bh(data: PairedPValues, q: float) -> BaselineOutcome:
    """Features rejected by BH in both studies separately."""
    first = bh(data.y1, q)
    second = bh(data.y2, q)
    return BaselineOutcome(
        BaselineMethod.ADHOC_BH,
        np.intersect1d(first, second),
        {"rejected_study1": int(first.shape[0]), "rejected_study2": int(second.shape[0])},
    )


def maxp(data: PairedPValues, q: float) -> BaselineOutcome:
    """BH applied to the larger p-value of each pair."""
    return BaselineOutcome(BaselineMethod.MAXP, bh(np.maximum(data.y1, data.y2), q))


def radjust_null_proportion(y_this: np.ndarray, selected_other: np.ndarray, q: float) -> float:
    """Null share in one study, estimated on features the other study selected at level q."""
    n_selected = int(selected_other.sum())
    if n_selected == 0:
        return 1.0
    estimate = (1.0 + np.count_nonzero(y_this[selected_other] > q)) / (n_selected * (1.0 - q))
    return float(min(estimate, 1.0))


def radjust(data: PairedPValues, q: float, adaptive: bool = True) -> BaselineOutcome:
    """
    radjust on pairs selected in both studies.

    The adaptive variant selects p <= q in each study and scales the pairwise
    thresholds by the estimated null shares; the plain variant selects p <= q/2.
    """
    _check_level(q)
    method = BaselineMethod.RADJUST_ADAPTIVE if adaptive else BaselineMethod.RADJUST
    cutoff = q if adaptive else q / 2.0
    sel1 = data.y1 <= cutoff
    sel2 = data.y2 <= cutoff
    n1, n2 = int(sel1.sum()), int(sel2.sum())
    both = np.flatnonzero(sel1 & sel2)

    if n1 == 0 or n2 == 0 or both.shape[0] == 0:
        logger.debug(f"{method.value}: empty selection (|S1|={n1}, |S2|={n2}, |S1 & S2|={both.shape[0]})")
        return BaselineOutcome(method, np.empty(0, dtype=int), {"diagnostic": "empty selection set", "selected_study1": n1, "selected_study2": n2})

    pi0_1 = radjust_null_proportion(data.y1, sel2, q) if adaptive else 1.0
    pi0_2 = radjust_null_proportion(data.y2, sel1, q) if adaptive else 1.0
    step1 = q / (2.0 * n2 * pi0_1)
    step2 = q / (2.0 * n1 * pi0_2)

    # smallest r at which each candidate pair passes both thresholds
    needed = np.maximum(np.ceil(data.y1[both] / step1), np.ceil(data.y2[both] / step2))
    needed = np.clip(needed, 1, both.shape[0] + 1).astype(int)
    counts = np.cumsum(np.bincount(needed, minlength=both.shape[0] + 2))
    ranks = np.arange(1, both.shape[0] + 1)
    fixed_points = ranks[counts[1 : both.shape[0] + 1] == ranks]
    r_max = int(fixed_points[-1]) if fixed_points.shape[0] else 0

    if r_max == 0:
        rejected = np.empty(0, dtype=int)
    else:
        passing = (data.y1[both] <= r_max * step1) & (data.y2[both] <= r_max * step2)
        rejected = both[passing]
    return BaselineOutcome(
        method,
        rejected,
        {"pi0_study1": pi0_1, "pi0_study2": pi0_2, "selected_study1": n1, "selected_study2": n2, "R": r_max},
    )


def radjust_adaptive(data: PairedPValues, q: float) -> BaselineOutcome:
    return radjust(data, q, adaptive=True)


def _check_threshold(lam: float) -> None:
    if not 0.0 <= lam < 1.0:
        raise DomainError(f"Storey threshold must lie in [0, 1), got {lam!r}")


def storey_pi0(p: np.ndarray, lam: float) -> float:
    _check_threshold(lam)
    return float(np.count_nonzero(p >= lam) / (p.shape[0] * (1.0 - lam)))


def jump(data: PairedPValues, q: float, lambda1: float = DEFAULT_STOREY_LAMBDA, lambda2: float = DEFAULT_STOREY_LAMBDA, lambda3: float = DEFAULT_STOREY_LAMBDA) -> BaselineOutcome:
    """Step-up on the maximum p-value against a plug-in conservative FDR estimate."""
    _check_level(q)
    m = data.m
    clamped = []

    def _clamp(name: str, value: float) -> float:
        if value < 0.0 or value > 1.0:
            clamped.append(name)
        return float(min(max(value, 0.0), 1.0))

    pi0_1 = _clamp("pi0_study1", storey_pi0(data.y1, lambda1))
    pi0_2 = _clamp("pi0_study2", storey_pi0(data.y2, lambda2))
    _check_threshold(lambda3)
    raw_xi00 = np.count_nonzero((data.y1 >= lambda3) & (data.y2 >= lambda3)) / (m * (1.0 - lambda3) ** 2)
    xi00 = _clamp("xi00", raw_xi00)
    xi01 = _clamp("xi01", pi0_1 - xi00)
    xi10 = _clamp("xi10", pi0_2 - xi00)

    ymax = np.maximum(data.y1, data.y2)
    order = np.argsort(ymax, kind="stable")
    t = ymax[order]
    # number of y_max <= t_(k), ties included
    discoveries = np.searchsorted(t, t, side="right")
    fdr_star = m * (xi00 * t**2 + (xi01 + xi10) * t) / np.maximum(discoveries, 1)
    passing = np.flatnonzero(fdr_star <= q)

    if passing.shape[0] == 0:
        rejected = np.empty(0, dtype=int)
        k = 0
    else:
        k = int(passing[-1]) + 1
        rejected = np.sort(order[:k])
    return BaselineOutcome(
        BaselineMethod.JUMP,
        rejected,
        {"pi0_study1": pi0_1, "pi0_study2": pi0_2, "xi00": xi00, "xi01": xi01, "xi10": xi10, "xi00_raw": float(raw_xi00), "clamped": clamped, "k": k},
    )


@dataclass(frozen=True, eq=False)
class IndependenceFit:
    """Four-group mixture fitted without chain dependence."""

    xi: np.ndarray
    f1: StepDensity
    f2: StepDensity
    lfdr: np.ndarray
    log_likelihood_trace: tuple[float, ...]
    converged: bool


def fit_stareg(data: PairedPValues, cfg: Optional[EmConfig] = None) -> IndependenceFit:
    """
    EM for the independence four-group model.

    Per-feature responsibilities replace the forward-backward pass; mixture
    weights follow the same floored closed form as pi and the densities the
    same Grenander update as the chain model.
    """
    cfg = cfg or EmConfig()
    start = initialize(data, cfg)
    xi = start.pi.pi.copy()
    f1, f2 = start.f1, start.f2
    orders = (np.argsort(data.y1, kind="stable"), np.argsort(data.y2, kind="stable"))

    def _e_step():
        joint = xi * start.with_densities(f1, f2).emission_matrix(data.y1, data.y2, floor=INFERENCE_DENSITY_FLOOR)
        totals = joint.sum(axis=1)
        return joint / totals[:, None], float(np.log(totals).sum())

    resp, log_lik = _e_step()
    trace = [log_lik]
    converged = False
    for _ in range(cfg.max_iterations):
        xi = constrained_simplex_mle(resp.sum(axis=0), cfg.param_floor)
        f1 = update_density(f1, data.y1, orders[0], resp[:, STUDY1_SIGNAL_STATES].sum(axis=1), cfg.density_support)
        f2 = update_density(f2, data.y2, orders[1], resp[:, STUDY2_SIGNAL_STATES].sum(axis=1), cfg.density_support)
        resp, new_log_lik = _e_step()
        if not np.isfinite(new_log_lik):
            raise NumericalFailure(f"independence model log-likelihood is not finite at iteration {len(trace)}")
        trace.append(new_log_lik)
        change = abs(new_log_lik - log_lik) / (1.0 + abs(log_lik))
        log_lik = new_log_lik
        if change < cfg.rel_tol:
            converged = True
            break
    logger.debug(f"Independence EM: {len(trace) - 1} iterations, converged={converged}, log-likelihood {log_lik:.10g}")

    lfdr = np.clip(resp[:, NULL_STATES].sum(axis=1), 0.0, 1.0)
    return IndependenceFit(xi=xi, f1=f1, f2=f2, lfdr=lfdr, log_likelihood_trace=tuple(trace), converged=converged)


def stareg(data: PairedPValues, q: float, cfg: Optional[EmConfig] = None) -> BaselineOutcome:
    """Local-fdr step-up under the independence four-group model."""
    model = fit_stareg(data, cfg)
    outcome = step_up(model.lfdr, q)
    return BaselineOutcome(
        BaselineMethod.STAREG,
        outcome.rejected,
        {"xi": model.xi.tolist(), "lfdr": model.lfdr, "trace": list(model.log_likelihood_trace), "converged": model.converged, "threshold": outcome.threshold},
    )


BaselineRunner = Callable[..., BaselineOutcome]

BASELINES: dict[BaselineMethod, BaselineRunner] = {
    BaselineMethod.ADHOC_BH: adhoc_bh,
    BaselineMethod.MAXP: maxp,
    BaselineMethod.RADJUST_ADAPTIVE: radjust_adaptive,
    BaselineMethod.RADJUST: lambda data, q: radjust(data, q, adaptive=False),
    BaselineMethod.JUMP: jump,
    BaselineMethod.STAREG: stareg,
}


def run_baseline(method: BaselineMethod | str, data: PairedPValues, q: float, jump_lambdas: tuple[float, float, float] = (DEFAULT_STOREY_LAMBDA,) * 3, em_config: Optional[EmConfig] = None) -> BaselineOutcome:
    """Dispatch one baseline by name with its method-specific options."""
    method = BaselineMethod(method)
    if method is BaselineMethod.JUMP:
        return jump(data, q, *jump_lambdas)
    if method is BaselineMethod.STAREG:
        return stareg(data, q, em_config)
    return BASELINES[method](data, q)
