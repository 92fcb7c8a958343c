"""
Monotone density estimation for the signal components.

The M-step for f1 and f2 maximizes a weighted log-likelihood over the cone of
non-increasing densities on (0, 1]. The maximizer is a Grenander-type step
density obtained from one weighted pool-adjacent-violators pass.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.isotonic import isotonic_regression

from models.errors import NumericalFailure
from models.hmm import StepDensity

logger = logging.getLogger(__name__)

# Relative share of the total posterior mass under which a point is dropped
ZERO_WEIGHT_RTOL = 1e-14

# Adjacent step heights closer than this are one pooled block
HEIGHT_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class WeightedLevels:
    """Unconstrained per-point levels and their positive weights."""

    targets: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        targets = np.asarray(self.targets, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if targets.ndim != 1 or targets.shape != weights.shape:
            raise ValueError(f"targets and weights must be equal-length vectors, got {targets.shape} and {weights.shape}")
        if not np.all(weights > 0.0):
            raise ValueError("weights must be strictly positive")
        if not np.all(np.isfinite(targets)):
            raise ValueError("targets must be finite")
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "weights", weights)


def pava_nonincreasing(w: WeightedLevels) -> np.ndarray:
    """Weighted least-squares projection of w.targets onto the non-increasing cone."""
    if w.targets.shape[0] == 0:
        return np.empty(0)
    return isotonic_regression(w.targets, sample_weight=w.weights, increasing=False)


def _merge_ties(sorted_p: np.ndarray, gamma_mass: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    values, inverse = np.unique(sorted_p, return_inverse=True)
    return values, np.bincount(inverse, weights=gamma_mass, minlength=values.shape[0])


def grenander_update(sorted_p: np.ndarray, gamma_mass: np.ndarray, support: float = 1.0) -> StepDensity:
    """
    Non-increasing step density maximizing sum_j gamma_j log f(y_j).

    Args:
        sorted_p: p-values in non-decreasing order, all in (0, 1]
        gamma_mass: non-negative posterior weights aligned with sorted_p
        support: right end of the support; the density is zero on (support, 1]

    Returns:
        StepDensity with breakpoints at the retained sample points; the
        interval after the largest retained point is carried to support.

    Raises:
        NumericalFailure: when the weights have no positive mass
    """
    y = np.asarray(sorted_p, dtype=float)
    g = np.asarray(gamma_mass, dtype=float)
    if y.shape != g.shape or y.ndim != 1:
        raise ValueError(f"p-values and weights must be aligned vectors, got {y.shape} and {g.shape}")
    if not 0.0 < support <= 1.0:
        raise ValueError(f"support must lie in (0, 1], got {support!r}")
    if y.shape[0] == 0:
        raise NumericalFailure("degenerate signal component: no points to estimate from")
    if np.any(np.diff(y) < 0.0):
        raise ValueError("p-values must be sorted in non-decreasing order")
    if y[0] <= 0.0 or y[-1] > 1.0:
        raise ValueError("p-values must lie in (0, 1]")

    y, g = _merge_ties(y, np.clip(g, 0.0, None))
    if np.any(g[y > support] > 0.0):
        raise ValueError(f"points above the support end {support!r} must carry zero weight")
    total = float(g.sum())
    if not np.isfinite(total) or total <= 0.0:
        raise NumericalFailure("degenerate signal component: posterior weights have zero total mass")

    keep = g > ZERO_WEIGHT_RTOL * total
    y, g = y[keep], g[keep]

    edges = np.concatenate(([0.0], y))
    edges[-1] = support
    spacing = np.diff(edges)

    # u = -1/z with z = g / (total * spacing); PAVA in u, then map back
    u = pava_nonincreasing(WeightedLevels(-total * spacing / g, g))
    heights = np.minimum.accumulate(-1.0 / u)

    # pooled blocks come back with heights that may differ in the last bits
    step = np.concatenate((~np.isclose(heights[1:], heights[:-1], rtol=HEIGHT_RTOL, atol=0.0), [True]))
    breakpoints = np.concatenate(([0.0], edges[1:][step]))
    heights = heights[step]
    heights = heights / float(np.dot(heights, np.diff(breakpoints)))
    if support < 1.0:
        breakpoints = np.append(breakpoints, 1.0)
        heights = np.append(heights, 0.0)
    logger.debug(f"Grenander update: {y.shape[0]} points, {heights.shape[0]} steps, first height {heights[0]:.4g}")
    return StepDensity(breakpoints, heights)
