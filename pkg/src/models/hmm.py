"""
Domain types for the four-state replicability hidden Markov model.

Each feature j carries a hidden state s_j encoding the pair of study-level
indicators (theta1, theta2). The states form a stationary Markov chain along
the feature order, and conditionally on s_j the paired p-values follow one of
four product densities built from the uniform null density and two
non-increasing signal densities f1 (study 1) and f2 (study 2).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Any, Callable, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from .errors import DomainError, InputDataError, NumericalFailure

N_STATES = 4
ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-8
DENSITY_MASS_TOL = 1e-10
DEFAULT_P_FLOOR = 1e-15


class StateCode(IntEnum):
    """Joint hidden state; the value's high bit is theta1 and its low bit theta2."""

    NULL_NULL = 0
    NULL_SIGNAL = 1
    SIGNAL_NULL = 2
    SIGNAL_SIGNAL = 3

    @property
    def theta1(self) -> int:
        return int(self) >> 1

    @property
    def theta2(self) -> int:
        return int(self) & 1

    @property
    def is_replicability_null(self) -> bool:
        """True for every state except signal in both studies."""
        return self is not StateCode.SIGNAL_SIGNAL

    @classmethod
    def from_thetas(cls, theta1: int, theta2: int) -> "StateCode":
        return cls(2 * int(theta1) + int(theta2))


def _frozen_array(values: Any, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """4x4 matrix of transition probabilities a_kl = P(s_{j+1} = l | s_j = k)."""

    a: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.a, 2, "transition matrix")
        if arr.shape != (N_STATES, N_STATES):
            raise ValueError(f"transition matrix must be {N_STATES}x{N_STATES}, got {arr.shape}")
        object.__setattr__(self, "a", arr)

    @classmethod
    def from_published(cls, rows: Sequence[Sequence[float]]) -> "TransitionMatrix":
        """Build from rounded printed rows, renormalizing each row to sum to one."""
        arr = np.array(rows, dtype=float)
        return cls(arr / arr.sum(axis=1, keepdims=True))

    @classmethod
    def persistent(cls, pi: Sequence[float], stay: float) -> "TransitionMatrix":
        """stay * I + (1 - stay) * (rows equal to pi); pi is stationary for the result."""
        pi_arr = np.asarray(pi, dtype=float)
        return cls(stay * np.eye(N_STATES) + (1.0 - stay) * np.tile(pi_arr, (N_STATES, 1)))

    def violations(self) -> list[str]:
        problems = []
        a = self.a
        if np.any(a < 0.0) or np.any(a > 1.0):
            bad = sorted({int(k) for k in np.argwhere((a < 0.0) | (a > 1.0))[:, 0]})
            problems.append(f"transition matrix has entries outside [0, 1] in rows {bad}")
        row_sums = a.sum(axis=1)
        for k, total in enumerate(row_sums):
            if abs(total - 1.0) > ROW_SUM_TOL:
                problems.append(f"transition matrix row {k} sums to {total:.12g}, expected 1")
        return problems

    def is_irreducible(self) -> bool:
        """True when every state is reachable from every other state."""
        n_components, _ = connected_components(self.a > 0.0, directed=True, connection="strong")
        return n_components == 1


@dataclass(frozen=True, eq=False)
class StationaryDist:
    """Stationary probability vector pi with pi A = pi."""

    pi: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.pi, 1, "stationary vector")
        if arr.shape != (N_STATES,):
            raise ValueError(f"stationary vector must have {N_STATES} entries, got {arr.shape[0]}")
        object.__setattr__(self, "pi", arr)

    def violations(self) -> list[str]:
        problems = []
        if np.any(self.pi < 0.0) or np.any(self.pi > 1.0):
            problems.append("stationary vector has entries outside [0, 1]")
        total = float(self.pi.sum())
        if abs(total - 1.0) > ROW_SUM_TOL:
            problems.append(f"stationary vector sums to {total:.12g}, expected 1")
        return problems


@dataclass(frozen=True, eq=False)
class StepDensity:
    """Non-increasing piecewise-constant density on (0, 1].

    The value on (b_{k-1}, b_k] is heights[k-1]; breakpoints start at 0 and
    end at 1.
    """

    breakpoints: np.ndarray
    heights: np.ndarray

    def __post_init__(self):
        b = _frozen_array(self.breakpoints, 1, "breakpoints")
        h = _frozen_array(self.heights, 1, "heights")
        if b.shape[0] != h.shape[0] + 1:
            raise ValueError(f"{h.shape[0]} heights need {h.shape[0] + 1} breakpoints, got {b.shape[0]}")
        if h.shape[0] == 0:
            raise ValueError("step density needs at least one interval")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError(f"breakpoints must run from 0 to 1, got {b[0]!r}..{b[-1]!r}")
        if np.any(np.diff(b) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "heights", h)

    @classmethod
    def uniform(cls) -> "StepDensity":
        return cls(np.array([0.0, 1.0]), np.array([1.0]))

    @classmethod
    def two_piece(cls, cut: float, head_height: float) -> "StepDensity":
        """Height head_height on (0, cut], constant tail chosen so the density integrates to one."""
        tail = (1.0 - head_height * cut) / (1.0 - cut)
        return cls(np.array([0.0, cut, 1.0]), np.array([head_height, tail]))

    def truncated(self, upper: float) -> "StepDensity":
        """Renormalized restriction to (0, upper], zero on (upper, 1]."""
        if not 0.0 < upper <= 1.0:
            raise ValueError(f"upper must lie in (0, 1], got {upper!r}")
        if upper == 1.0:
            return self
        mass = float(self.cdf(upper))
        if mass <= 0.0:
            raise ValueError(f"density has no mass on (0, {upper!r}]")
        inner = self.breakpoints[self.breakpoints < upper]
        breakpoints = np.concatenate((inner, [upper, 1.0]))
        heights = np.append(self.evaluate(breakpoints[1:-1]) / mass, 0.0)
        return StepDensity(breakpoints, heights)

    @classmethod
    def from_cdf(cls, cdf: Callable[[np.ndarray], np.ndarray], breakpoints: Sequence[float]) -> "StepDensity":
        """Exact cell averages of a continuous distribution, projected onto the non-increasing cone."""
        from processing.isotonic import WeightedLevels, pava_nonincreasing

        b = np.asarray(breakpoints, dtype=float)
        widths = np.diff(b)
        masses = np.diff(np.asarray(cdf(b), dtype=float))
        masses = np.clip(masses, 0.0, None)
        masses = masses / masses.sum()
        averages = masses / widths
        heights = pava_nonincreasing(WeightedLevels(averages, widths))
        return cls(b, np.clip(heights, 0.0, None))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def mass(self) -> float:
        return float(np.dot(self.heights, self.widths))

    def evaluate(self, y: Any) -> np.ndarray:
        """Density at y; y in (b_{k-1}, b_k] maps to heights[k-1]."""
        y_arr = np.asarray(y, dtype=float)
        idx = np.searchsorted(self.breakpoints, y_arr, side="left") - 1
        idx = np.clip(idx, 0, self.heights.shape[0] - 1)
        return self.heights[idx]

    def cdf(self, y: Any) -> np.ndarray:
        cumulative = np.concatenate(([0.0], np.cumsum(self.heights * self.widths)))
        return np.interp(np.asarray(y, dtype=float), self.breakpoints, cumulative)

    def violations(self, label: str = "density") -> list[str]:
        problems = []
        if np.any(self.heights < 0.0):
            problems.append(f"{label} has negative heights")
        if np.any(np.diff(self.heights) > 0.0):
            k = int(np.argmax(np.diff(self.heights) > 0.0))
            problems.append(f"{label} heights increase between intervals {k} and {k + 1}")
        total = self.mass()
        if abs(total - 1.0) > DENSITY_MASS_TOL:
            problems.append(f"{label} integrates to {total:.12g}, expected 1")
        return problems

    def to_dict(self) -> dict[str, Any]:
        return {"breakpoints": self.breakpoints.tolist(), "heights": self.heights.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StepDensity":
        return cls(np.asarray(data["breakpoints"], dtype=float), np.asarray(data["heights"], dtype=float))


@dataclass(frozen=True, eq=False)
class HmmParams:
    """The estimand (pi, A, f1, f2)."""

    pi: StationaryDist
    a: TransitionMatrix
    f1: StepDensity
    f2: StepDensity

    def emission_matrix(self, y1: np.ndarray, y2: np.ndarray, floor: float = 0.0) -> np.ndarray:
        """m x 4 matrix of f^(s)(y1j, y2j) for s = 0..3 (f0f0, f0f2, f1f0, f1f2)."""
        d1 = self.f1.evaluate(y1)
        d2 = self.f2.evaluate(y2)
        if floor > 0.0:
            d1 = np.maximum(d1, floor)
            d2 = np.maximum(d2, floor)
        return np.column_stack((np.ones_like(d1), d2, d1, d1 * d2))

    def with_pi(self, pi: StationaryDist) -> "HmmParams":
        return replace(self, pi=pi)

    def with_densities(self, f1: StepDensity, f2: StepDensity) -> "HmmParams":
        return replace(self, f1=f1, f2=f2)

    def to_dict(self) -> dict[str, Any]:
        return {
            "pi": self.pi.pi.tolist(),
            "A": self.a.a.tolist(),
            "f1": self.f1.to_dict(),
            "f2": self.f2.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "HmmParams":
        try:
            return cls(
                pi=StationaryDist(np.asarray(data["pi"], dtype=float)),
                a=TransitionMatrix(np.asarray(data["A"], dtype=float)),
                f1=StepDensity.from_dict(data["f1"]),
                f2=StepDensity.from_dict(data["f2"]),
            )
        except KeyError as e:
            raise InputDataError(f"parameter document is missing field {e}") from e

    def to_json(self) -> str:
        # repr-based float output round-trips every double exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HmmParams":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputDataError(f"could not decode parameter JSON: {e.msg}", line=e.lineno) from e
        return cls.from_dict(data)


@dataclass(frozen=True, eq=False)
class PairedPValues:
    """Aligned p-value vectors of the two studies, in chain order."""

    y1: np.ndarray
    y2: np.ndarray
    ids: Optional[tuple[str, ...]] = field(default=None)

    def __post_init__(self):
        y1 = np.array(self.y1, dtype=float)
        y2 = np.array(self.y2, dtype=float)
        if y1.ndim != 1 or y2.ndim != 1:
            raise InputDataError("p-value vectors must be one-dimensional")
        if y1.shape != y2.shape:
            raise InputDataError(f"p-value vectors differ in length: {y1.shape[0]} vs {y2.shape[0]}")
        for name, arr in (("y1", y1), ("y2", y2)):
            if np.any(np.isnan(arr)):
                raise InputDataError(f"{name} contains NaN at index {int(np.argmax(np.isnan(arr)))}")
            outside = (arr <= 0.0) | (arr > 1.0)
            if np.any(outside):
                j = int(np.argmax(outside))
                raise InputDataError(f"{name}[{j}] = {arr[j]!r} is outside (0, 1]")
        if self.ids is not None:
            ids = tuple(str(i) for i in self.ids)
            if len(ids) != y1.shape[0]:
                raise InputDataError(f"{len(ids)} feature ids for {y1.shape[0]} p-value pairs")
            object.__setattr__(self, "ids", ids)
        y1.setflags(write=False)
        y2.setflags(write=False)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y2", y2)

    @classmethod
    def from_raw(cls, y1: Any, y2: Any, ids: Optional[Sequence[str]] = None, floor: float = DEFAULT_P_FLOOR) -> "PairedPValues":
        """Clamp exact zeros up to floor before validation."""
        y1_arr = np.array(y1, dtype=float)
        y2_arr = np.array(y2, dtype=float)
        y1_arr[y1_arr == 0.0] = floor
        y2_arr[y2_arr == 0.0] = floor
        return cls(y1_arr, y2_arr, tuple(ids) if ids is not None else None)

    @property
    def m(self) -> int:
        return int(self.y1.shape[0])

    def permuted(self, order: Sequence[int]) -> "PairedPValues":
        idx = np.asarray(order, dtype=int)
        ids = tuple(self.ids[i] for i in idx) if self.ids is not None else None
        return PairedPValues(self.y1[idx], self.y2[idx], ids)

    def feature_ids(self) -> tuple[str, ...]:
        if self.ids is not None:
            return self.ids
        return tuple(str(j + 1) for j in range(self.m))


def validate_params(p: HmmParams) -> list[str]:
    """Every violated invariant of p; empty when p is a valid parameter set."""
    problems = p.pi.violations() + p.a.violations()
    if not p.a.violations():
        if not p.a.is_irreducible():
            problems.append("transition matrix is reducible")
        drift = float(np.max(np.abs(p.pi.pi @ p.a.a - p.pi.pi)))
        if drift > STATIONARY_TOL:
            problems.append(f"pi is not stationary for A: max |pi A - pi| = {drift:.3g}")
    problems += p.f1.violations("f1") + p.f2.violations("f2")
    return problems


def stationary_from_transition(a: TransitionMatrix) -> StationaryDist:
    """Solve (A^T - I) pi = 0 together with sum(pi) = 1."""
    if not a.is_irreducible():
        raise NumericalFailure("stationary distribution is not unique: transition matrix is reducible")
    system = np.vstack((a.a.T - np.eye(N_STATES), np.ones((1, N_STATES))))
    rhs = np.zeros(N_STATES + 1)
    rhs[-1] = 1.0
    pi, _, rank, _ = linalg.lstsq(system, rhs)
    if rank < N_STATES:
        raise NumericalFailure(f"stationary system has rank {rank}, expected {N_STATES}")
    if np.any(pi <= 0.0):
        raise NumericalFailure(f"stationary solution has non-positive entries: {pi.tolist()}")
    return StationaryDist(pi / pi.sum())


def emission_density(p: HmmParams, s: StateCode | int, y1: float, y2: float) -> float:
    """f^(s)(y1, y2) under the four-way factorization."""
    if not (0.0 < y1 <= 1.0) or not (0.0 < y2 <= 1.0):
        raise DomainError(f"emission density is defined on (0, 1]^2, got ({y1!r}, {y2!r})")
    state = StateCode(s)
    d1 = float(p.f1.evaluate(y1)) if state.theta1 else 1.0
    d2 = float(p.f2.evaluate(y2)) if state.theta2 else 1.0
    return d1 * d2
