"""Pytest configuration and shared fixtures.

Puts src/ on the import path, points the CLI log file at a temporary location
for the session, and provides seeded random model instances together with
brute-force reference implementations used to check the fast solvers.
"""

from __future__ import annotations

import itertools
import os
import pathlib
import sys
import tempfile
from functools import lru_cache

import numpy as np
import pytest
from dotenv import load_dotenv

PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
SRC_ROOT = PROJECT_ROOT / "src"
if str(SRC_ROOT) not in sys.path:
    sys.path.insert(0, str(SRC_ROOT))

load_dotenv(PROJECT_ROOT / ".env")

from models.hmm import N_STATES, HmmParams, PairedPValues, StationaryDist, StepDensity, TransitionMatrix, stationary_from_transition  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def log_file_env() -> str:
    """Ensure REPLICTL_LOG_FILE is set for the test session.

    If it is already defined (e.g. from .env) it is preserved.
    """
    if os.environ.get("REPLICTL_LOG_FILE"):
        return os.environ["REPLICTL_LOG_FILE"]

    temp_dir = tempfile.mkdtemp(prefix="replictl_logs_")
    log_path = pathlib.Path(temp_dir) / "test-session.log"
    log_path.touch()
    os.environ["REPLICTL_LOG_FILE"] = str(log_path)
    return str(log_path)


def random_step_density(rng: np.random.Generator, max_steps: int = 5) -> StepDensity:
    """Random non-increasing step density with 1..max_steps intervals."""
    k = int(rng.integers(1, max_steps + 1))
    inner = np.sort(rng.uniform(0.02, 0.98, size=k - 1))
    while np.any(np.diff(inner) < 1e-3):
        inner = np.sort(rng.uniform(0.02, 0.98, size=k - 1))
    breakpoints = np.concatenate(([0.0], inner, [1.0]))
    heights = np.sort(rng.uniform(0.1, 10.0, size=k))[::-1]
    heights = heights / float(np.dot(heights, np.diff(breakpoints)))
    return StepDensity(breakpoints, heights)


def random_params(rng: np.random.Generator, stationary: bool = True) -> HmmParams:
    """Random parameter set with a strictly positive transition matrix."""
    a = TransitionMatrix(rng.dirichlet(np.ones(N_STATES), size=N_STATES))
    pi = stationary_from_transition(a) if stationary else StationaryDist(rng.dirichlet(np.ones(N_STATES)))
    return HmmParams(pi=pi, a=a, f1=random_step_density(rng), f2=random_step_density(rng))


def random_pvalues(rng: np.random.Generator, m: int) -> PairedPValues:
    """Mixture of uniform and small p-values so both density regimes are visited."""
    small = rng.random((2, m)) < 0.3
    y = np.where(small, rng.beta(0.3, 4.0, size=(2, m)), rng.uniform(size=(2, m)))
    return PairedPValues(np.clip(y[0], 1e-12, 1.0), np.clip(y[1], 1e-12, 1.0))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def make_params():
    return random_params


@pytest.fixture
def make_pvalues():
    return random_pvalues


@lru_cache(maxsize=None)
def _all_paths(m: int) -> np.ndarray:
    return np.array(list(itertools.product(range(N_STATES), repeat=m)), dtype=int)


def enumerate_posteriors(params: HmmParams, data: PairedPValues) -> tuple[np.ndarray, np.ndarray, float]:
    """gamma, xi and log-likelihood by summing over all 4^m state paths."""
    m = data.m
    paths = _all_paths(m)
    emis = params.emission_matrix(data.y1, data.y2)
    weight = params.pi.pi[paths[:, 0]] * emis[0, paths[:, 0]]
    for j in range(1, m):
        weight = weight * params.a.a[paths[:, j - 1], paths[:, j]] * emis[j, paths[:, j]]
    total = weight.sum()

    gamma = np.zeros((m, N_STATES))
    xi = np.zeros((max(m - 1, 0), N_STATES, N_STATES))
    for j in range(m):
        gamma[j] = np.bincount(paths[:, j], weights=weight, minlength=N_STATES) / total
    for j in range(m - 1):
        pair = paths[:, j] * N_STATES + paths[:, j + 1]
        xi[j] = (np.bincount(pair, weights=weight, minlength=N_STATES * N_STATES) / total).reshape(N_STATES, N_STATES)
    return gamma, xi, float(np.log(total))


def brute_force_antitonic(targets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted least-squares non-increasing fit by trying every contiguous block partition."""
    n = targets.shape[0]
    best, best_loss = None, np.inf
    for cuts in itertools.product((False, True), repeat=max(n - 1, 0)):
        bounds = [0] + [i + 1 for i, c in enumerate(cuts) if c] + [n]
        fitted = np.empty(n)
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            fitted[lo:hi] = np.dot(weights[lo:hi], targets[lo:hi]) / weights[lo:hi].sum()
        if np.any(np.diff(fitted) > 1e-15):
            continue
        loss = float(np.dot(weights, (targets - fitted) ** 2))
        if loss < best_loss - 1e-15:
            best, best_loss = fitted, loss
    return best


@pytest.fixture
def enumerate_oracle():
    return enumerate_posteriors


@pytest.fixture
def antitonic_oracle():
    return brute_force_antitonic
