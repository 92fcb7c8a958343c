"""Tests for scaled forward-backward inference and rLIS."""

import numpy as np
import pytest

from models.errors import NumericalFailure
from models.hmm import HmmParams, PairedPValues, StationaryDist, StepDensity, TransitionMatrix, stationary_from_transition
from processing.forward_backward import compute_rlis, rlis_from_posteriors, run_forward_backward
from simulation.scenarios import SCENARIO1_ROWS


def _uniform_emissions(a: TransitionMatrix, pi) -> HmmParams:
    return HmmParams(pi=StationaryDist(np.asarray(pi)), a=a, f1=StepDensity.uniform(), f2=StepDensity.uniform())


def _check_against_enumeration(params, data, enumerate_oracle):
    post = run_forward_backward(params, data)
    gamma, xi, log_lik = enumerate_oracle(params, data)
    np.testing.assert_allclose(post.gamma, gamma, atol=1e-10, rtol=0)
    np.testing.assert_allclose(post.xi, xi, atol=1e-10, rtol=0)
    assert abs(post.log_likelihood - log_lik) <= 1e-10 * max(1.0, abs(log_lik))
    np.testing.assert_allclose(compute_rlis(params, data), 1.0 - gamma[:, 3], atol=1e-10)


def test_single_uninformative_feature():
    params = _uniform_emissions(TransitionMatrix(np.full((4, 4), 0.25)), np.full(4, 0.25))
    post = run_forward_backward(params, PairedPValues(np.array([0.4]), np.array([0.6])))
    np.testing.assert_allclose(post.gamma[0], np.full(4, 0.25), atol=1e-15)
    assert post.log_likelihood == pytest.approx(0.0, abs=1e-15)
    assert post.xi.shape == (0, 4, 4)


def test_uninformative_emissions_return_prior():
    a = TransitionMatrix.from_published(SCENARIO1_ROWS)
    pi = stationary_from_transition(a).pi
    params = _uniform_emissions(a, pi)
    data = PairedPValues(np.array([0.1, 0.5, 0.9]), np.array([0.2, 0.3, 0.4]))
    post = run_forward_backward(params, data)
    for j in range(3):
        np.testing.assert_allclose(post.gamma[j], pi, atol=1e-12)
    np.testing.assert_allclose(compute_rlis(params, data), np.full(3, 1.0 - pi[3]), atol=1e-12)


def test_rlis_with_prior_weights():
    params = _uniform_emissions(TransitionMatrix(np.tile([0.7, 0.1, 0.1, 0.1], (4, 1))), (0.7, 0.1, 0.1, 0.1))
    data = PairedPValues(np.full(5, 0.5), np.full(5, 0.5))
    np.testing.assert_allclose(compute_rlis(params, data), np.full(5, 0.9), atol=1e-12)


def test_strong_signal_single_feature():
    spike = StepDensity(np.array([0.0, 0.01, 1.0]), np.array([100.0, 0.0]))
    a = TransitionMatrix(np.tile([0.7, 0.1, 0.1, 0.1], (4, 1)))
    params = HmmParams(pi=StationaryDist(np.array([0.7, 0.1, 0.1, 0.1])), a=a, f1=spike, f2=spike)
    rlis = compute_rlis(params, PairedPValues(np.array([0.001]), np.array([0.001])))
    # Bayes ratio by hand: 0.7 + 0.1*100 + 0.1*100 against 0.1*100*100
    expected = (0.7 + 10.0 + 10.0) / (0.7 + 10.0 + 10.0 + 1000.0)
    assert rlis[0] == pytest.approx(expected, rel=1e-12)
    assert rlis[0] < 0.5


def test_matches_enumeration_m6(rng, make_params, make_pvalues, enumerate_oracle):
    _check_against_enumeration(make_params(rng, stationary=False), make_pvalues(rng, 6), enumerate_oracle)


def test_matches_enumeration_random_instances(rng, make_params, make_pvalues, enumerate_oracle):
    for _ in range(40):
        m = int(rng.integers(1, 7))
        _check_against_enumeration(make_params(rng), make_pvalues(rng, m), enumerate_oracle)


def _unscaled_posteriors(params, data):
    emis = params.emission_matrix(data.y1, data.y2)
    a = params.a.a
    m = data.m
    alpha = np.empty((m, 4))
    beta = np.ones((m, 4))
    alpha[0] = params.pi.pi * emis[0]
    for j in range(1, m):
        alpha[j] = (alpha[j - 1] @ a) * emis[j]
    for j in range(m - 2, -1, -1):
        beta[j] = a @ (emis[j + 1] * beta[j + 1])
    total = alpha[-1].sum()
    gamma = alpha * beta / total
    xi = alpha[:-1, :, None] * a[None] * (emis[1:] * beta[1:])[:, None, :] / total
    return gamma, xi, float(np.log(total))


@pytest.mark.parametrize("m", [10, 30, 50])
def test_scaled_recursion_matches_unscaled(rng, make_params, make_pvalues, m):
    for _ in range(5):
        params = make_params(rng, stationary=bool(rng.integers(2)))
        data = make_pvalues(rng, m)
        post = run_forward_backward(params, data)
        gamma, xi, log_lik = _unscaled_posteriors(params, data)
        np.testing.assert_allclose(post.gamma, gamma, atol=1e-10, rtol=0)
        np.testing.assert_allclose(post.xi, xi, atol=1e-10, rtol=0)
        assert post.log_likelihood == pytest.approx(log_lik, rel=1e-10, abs=1e-10)


@pytest.mark.slow
def test_matches_enumeration_500_instances(rng, make_params, make_pvalues, enumerate_oracle):
    for _ in range(500):
        m = int(rng.integers(1, 9))
        _check_against_enumeration(make_params(rng, stationary=bool(rng.integers(2))), make_pvalues(rng, m), enumerate_oracle)


def test_posterior_tables_are_consistent(rng, make_params, make_pvalues):
    params = make_params(rng)
    data = make_pvalues(rng, 200)
    post = run_forward_backward(params, data)
    np.testing.assert_allclose(post.gamma.sum(axis=1), 1.0, atol=1e-10)
    np.testing.assert_allclose(post.xi.sum(axis=(1, 2)), 1.0, atol=1e-10)
    np.testing.assert_allclose(post.xi.sum(axis=2), post.gamma[:-1], atol=1e-10)
    np.testing.assert_allclose(post.xi.sum(axis=1), post.gamma[1:], atol=1e-10)
    assert post.log_likelihood == pytest.approx(float(np.log(post.scaling).sum()))


def test_long_chain_does_not_underflow(rng, make_params, make_pvalues):
    params = make_params(rng)
    data = make_pvalues(rng, 200_000)
    post = run_forward_backward(params, data, store_xi=False)
    assert post.xi is None
    assert np.isfinite(post.log_likelihood)
    rlis = rlis_from_posteriors(post)
    assert np.all((rlis >= 0.0) & (rlis <= 1.0))


def test_xi_counts_need_stored_pairs(rng, make_params, make_pvalues):
    post = run_forward_backward(make_params(rng), make_pvalues(rng, 10), store_xi=False)
    with pytest.raises(ValueError):
        post.xi_counts()


def test_zero_total_probability_names_the_index():
    # signal-only chain with densities vanishing above 0.5
    zero_tail = StepDensity(np.array([0.0, 0.5, 1.0]), np.array([2.0, 0.0]))
    a = TransitionMatrix(np.tile([0.0, 0.0, 0.0, 1.0], (4, 1)))
    params = HmmParams(pi=StationaryDist(np.array([0.0, 0.0, 0.0, 1.0])), a=a, f1=zero_tail, f2=zero_tail)
    data = PairedPValues(np.array([0.1, 0.2, 0.9]), np.array([0.1, 0.2, 0.3]))
    # heights are floored at 1e-300 so the third feature still has positive mass
    post = run_forward_backward(params, data)
    assert post.gamma[2, 3] == pytest.approx(1.0)

    params = HmmParams(pi=StationaryDist(np.array([0.0, 0.0, 0.0, 1.0])), a=a, f1=zero_tail, f2=zero_tail)
    data = PairedPValues(np.array([0.1, 0.9, 0.9]), np.array([0.1, 0.9, 0.9]))
    with pytest.raises(NumericalFailure, match="index 1"):
        run_forward_backward(params, data)


def test_signal_positions_have_lower_rlis():
    from simulation.harness import SimConfig, oracle_params, replication_rng, simulate_pvalues, simulate_states

    cfg = SimConfig(m=10_000, mu1=2.0, mu2=2.0, seed=3)
    rng = replication_rng(cfg.seed, 0)
    truth = simulate_states(cfg, rng)
    data = simulate_pvalues(truth, cfg, rng)
    rlis = compute_rlis(oracle_params(cfg), data)
    assert rlis[~truth.null_mask].mean() < rlis[truth.null_mask].mean()
