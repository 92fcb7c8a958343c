"""
Scaled forward-backward inference for the four-state chain.

alpha_j is normalized by c_j = sum_s alpha_j(s) at every index and beta_j
shares the same constants, so gamma and xi follow from the plain ratio
formulas and log p_m = sum_j log c_j.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numba as nb
import numpy as np

from models.errors import NumericalFailure
from models.hmm import N_STATES, HmmParams, PairedPValues, StateCode

logger = logging.getLogger(__name__)

# Density heights are floored here during inference only
INFERENCE_DENSITY_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class PosteriorTables:
    """Marginal and pairwise posteriors of the hidden states."""

    gamma: np.ndarray
    xi: Optional[np.ndarray]
    log_likelihood: float
    scaling: np.ndarray

    @property
    def m(self) -> int:
        return int(self.gamma.shape[0])

    def xi_counts(self) -> np.ndarray:
        """Expected transition counts sum_j xi_j(k, l)."""
        if self.xi is None:
            raise ValueError("pairwise posteriors were not stored for this run")
        return self.xi.sum(axis=0)


@nb.njit(cache=True)
def _forward(emis, a, pi, alpha, c):
    m, k_states = emis.shape
    for s in range(k_states):
        alpha[0, s] = pi[s] * emis[0, s]
        c[0] += alpha[0, s]
    if not c[0] > 0.0:
        return 0
    for s in range(k_states):
        alpha[0, s] /= c[0]

    for j in range(1, m):
        for s in range(k_states):
            acc = 0.0
            for r in range(k_states):
                acc += alpha[j - 1, r] * a[r, s]
            alpha[j, s] = acc * emis[j, s]
            c[j] += alpha[j, s]
        if not c[j] > 0.0:
            return j
        for s in range(k_states):
            alpha[j, s] /= c[j]
    return -1


@nb.njit(cache=True)
def _backward(emis, a, c, beta):
    m, k_states = emis.shape
    for s in range(k_states):
        beta[m - 1, s] = 1.0
    for jj in range(m - 1):
        j = m - 2 - jj
        for s in range(k_states):
            acc = 0.0
            for r in range(k_states):
                acc += a[s, r] * emis[j + 1, r] * beta[j + 1, r]
            beta[j, s] = acc / c[j + 1]


@nb.njit(cache=True)
def _posteriors(emis, a, alpha, beta, gamma, xi, store_xi):
    m, k_states = emis.shape
    for j in range(m):
        total = 0.0
        for s in range(k_states):
            gamma[j, s] = alpha[j, s] * beta[j, s]
            total += gamma[j, s]
        for s in range(k_states):
            gamma[j, s] /= total
    if not store_xi:
        return
    for j in range(m - 1):
        total = 0.0
        for s in range(k_states):
            for r in range(k_states):
                xi[j, s, r] = alpha[j, s] * a[s, r] * emis[j + 1, r] * beta[j + 1, r]
                total += xi[j, s, r]
        for s in range(k_states):
            for r in range(k_states):
                xi[j, s, r] /= total


def run_forward_backward(p: HmmParams, data: PairedPValues, store_xi: bool = True) -> PosteriorTables:
    """
    Posterior state marginals for every feature, plus pairwise marginals when store_xi.

    Raises:
        NumericalFailure: when the total probability vanishes at some index
    """
    m = data.m
    if m < 1:
        raise ValueError("forward-backward needs at least one feature")

    emis = np.ascontiguousarray(p.emission_matrix(data.y1, data.y2, floor=INFERENCE_DENSITY_FLOOR))
    a = np.ascontiguousarray(p.a.a)
    pi = np.ascontiguousarray(p.pi.pi)

    alpha = np.zeros((m, N_STATES))
    beta = np.zeros((m, N_STATES))
    c = np.zeros(m)
    failed_at = _forward(emis, a, pi, alpha, c)
    if failed_at >= 0:
        raise NumericalFailure(f"total probability is zero at feature index {failed_at}")
    _backward(emis, a, c, beta)

    gamma = np.empty((m, N_STATES))
    xi = np.empty((max(m - 1, 0), N_STATES, N_STATES)) if store_xi else np.empty((0, N_STATES, N_STATES))
    _posteriors(emis, a, alpha, beta, gamma, xi, store_xi)

    log_likelihood = float(np.log(c).sum())
    if not np.isfinite(log_likelihood):
        raise NumericalFailure(f"log-likelihood is not finite ({log_likelihood}) over {m} features")
    return PosteriorTables(gamma=gamma, xi=xi if store_xi else None, log_likelihood=log_likelihood, scaling=c)


def rlis_from_posteriors(post: PosteriorTables) -> np.ndarray:
    """Posterior replicability-null mass gamma_j(0) + gamma_j(1) + gamma_j(2)."""
    null_columns = [int(s) for s in StateCode if s.is_replicability_null]
    return np.clip(post.gamma[:, null_columns].sum(axis=1), 0.0, 1.0)


def compute_rlis(p: HmmParams, data: PairedPValues) -> np.ndarray:
    """rLIS of every feature under p."""
    post = run_forward_backward(p, data, store_xi=False)
    return rlis_from_posteriors(post)
