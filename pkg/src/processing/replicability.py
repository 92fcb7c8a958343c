"""
rLIS step-up testing: data-driven and oracle variants.
"""

import logging
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from models.errors import DomainError, ParamsValidationError
from models.hmm import HmmParams, PairedPValues, validate_params
from processing.em import EmConfig, EmFit, fit
from processing.forward_backward import compute_rlis

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TestOutcome:
    """Result of a step-up pass over local statistics."""

    __test__ = False

    rlis: np.ndarray
    threshold: Optional[float]
    rejected: np.ndarray
    estimated_fdp: float
    nominal_q: float

    @property
    def num_rejected(self) -> int:
        return int(self.rejected.shape[0])

    def rejected_mask(self) -> np.ndarray:
        mask = np.zeros(self.rlis.shape[0], dtype=bool)
        mask[self.rejected] = True
        return mask

    def summary(self) -> dict[str, Any]:
        return {
            "q": self.nominal_q,
            "threshold": self.threshold,
            "num_rejected": self.num_rejected,
            "estimated_fdp": self.estimated_fdp,
        }


def _check_level(q: float) -> None:
    if not 0.0 < q < 1.0:
        raise DomainError(f"nominal level q must lie in (0, 1), got {q!r}")


def step_up(rlis: np.ndarray, q: float) -> TestOutcome:
    """
    Reject the longest prefix of ascending statistics whose running mean stays at or below q.

    Features sharing the cutoff value are rejected or kept together.
    """
    _check_level(q)
    values = np.asarray(rlis, dtype=float)
    if values.ndim != 1:
        raise DomainError("local statistics must be a vector")
    if np.any(np.isnan(values)) or np.any(values < 0.0) or np.any(values > 1.0):
        raise DomainError("local statistics must lie in [0, 1]")

    m = values.shape[0]
    if m == 0:
        return TestOutcome(values, None, np.empty(0, dtype=int), 0.0, q)

    order = np.argsort(values, kind="stable")
    ordered = values[order]
    running_mean = np.cumsum(ordered) / np.arange(1, m + 1)
    end_of_group = np.append(ordered[1:] != ordered[:-1], True)
    admissible = np.flatnonzero((running_mean <= q) & end_of_group)

    if admissible.shape[0] == 0:
        return TestOutcome(values, None, np.empty(0, dtype=int), 0.0, q)

    k = int(admissible[-1]) + 1
    return TestOutcome(
        rlis=values,
        threshold=float(ordered[k - 1]),
        rejected=np.sort(order[:k]),
        estimated_fdp=float(running_mean[k - 1]),
        nominal_q=q,
    )


def test_replicability(data: PairedPValues, q: float, cfg: Optional[EmConfig] = None) -> tuple[EmFit, TestOutcome]:
    """Fit the model, compute rLIS under the estimate and run the step-up procedure."""
    _check_level(q)
    em_fit = fit(data, cfg)
    outcome = step_up(compute_rlis(em_fit.params, data), q)
    logger.info(f"Replicability test at q={q}: {outcome.num_rejected} of {data.m} features rejected")
    return em_fit, outcome


test_replicability.__test__ = False


def oracle_test(true_params: HmmParams, data: PairedPValues, q: float) -> TestOutcome:
    """Step-up procedure on rLIS computed under known parameters."""
    problems = validate_params(true_params)
    if problems:
        raise ParamsValidationError(problems)
    return step_up(compute_rlis(true_params, data), q)
