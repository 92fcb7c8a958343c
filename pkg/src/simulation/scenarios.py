"""
Published transition matrices and the named simulation scenarios built on them.
"""

from dataclasses import dataclass

import numpy as np

from models.hmm import TransitionMatrix, stationary_from_transition

# Rows as printed; they are rounded and only sum to one approximately
SCENARIO1_ROWS = (
    (0.905, 0.032, 0.032, 0.032),
    (0.222, 0.333, 0.222, 0.222),
    (0.222, 0.222, 0.333, 0.222),
    (0.222, 0.222, 0.222, 0.333),
)

SCENARIO2_ROWS = (
    (0.889, 0.037, 0.037, 0.037),
    (0.148, 0.556, 0.148, 0.148),
    (0.148, 0.148, 0.556, 0.148),
    (0.222, 0.222, 0.222, 0.333),
)

# Transition matrix fitted to the type 2 diabetes GWAS pair and its stationary vector
DIABETES_ROWS = (
    (0.9840, 0.0066, 0.0040, 0.0055),
    (0.0657, 0.9271, 0.0004, 0.0069),
    (0.0546, 0.0010, 0.9379, 0.0066),
    (0.0501, 0.0045, 0.0050, 0.9403),
)
DIABETES_STATIONARY = (0.779, 0.077, 0.057, 0.087)

REPLICATED_SHARE = 0.1


@dataclass(frozen=True)
class Scenario:
    name: str
    rows: tuple[tuple[float, ...], ...]
    nominal_pi: tuple[float, ...]
    description: str

    def transition(self) -> TransitionMatrix:
        return TransitionMatrix.from_published(self.rows)

    def persistence(self) -> float:
        """Average share of the diagonal beyond what an independent draw from pi gives."""
        a = self.transition().a
        pi = stationary_from_transition(self.transition()).pi
        return float(np.mean((np.diag(a) - pi) / (1.0 - pi)))


SCENARIOS: dict[str, Scenario] = {
    "scenario1": Scenario("scenario1", SCENARIO1_ROWS, (0.7, 0.1, 0.1, 0.1), "pi = (0.7, 0.1, 0.1, 0.1), strongly persistent null state"),
    "scenario2": Scenario("scenario2", SCENARIO2_ROWS, (0.6, 0.15, 0.15, 0.1), "pi = (0.6, 0.15, 0.15, 0.1), persistent single-study signal states"),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario '{name}', choose from {sorted(SCENARIOS)}") from None


def symmetric_signal_chain(pi1: float, persistence: float, pi3: float = REPLICATED_SHARE) -> TransitionMatrix:
    """Chain with stationary vector (1 - 2 pi1 - pi3, pi1, pi1, pi3) and the given persistence."""
    pi0 = 1.0 - 2.0 * pi1 - pi3
    if pi1 <= 0.0 or pi0 <= 0.0:
        raise ValueError(f"pi1 = {pi1} leaves no room for the null state with pi3 = {pi3}")
    return TransitionMatrix.persistent((pi0, pi1, pi1, pi3), persistence)
