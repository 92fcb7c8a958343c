"""Tests for the independence-based replicability baselines."""

import numpy as np
import pytest

from models.errors import DomainError
from models.hmm import PairedPValues, StateCode
from processing.baselines import (
    BaselineMethod,
    adhoc_bh,
    bh,
    fit_stareg,
    jump,
    maxp,
    radjust,
    radjust_adaptive,
    radjust_null_proportion,
    run_baseline,
    stareg,
    storey_pi0,
)
from processing.em import EmConfig
from processing.forward_backward import INFERENCE_DENSITY_FLOOR
from processing.replicability import test_replicability
from simulation.harness import SimConfig, replication_rng, simulate_pvalues, simulate_states


def _bh_by_rule(p: np.ndarray, q: float) -> set[int]:
    m = p.shape[0]
    ordered = sorted(range(m), key=lambda j: (p[j], j))
    for k in range(m, 0, -1):
        if p[ordered[k - 1]] <= k * q / m:
            return set(ordered[:k])
    return set()


def _simulated(m: int, seed: int, **kwargs) -> PairedPValues:
    cfg = SimConfig(m=m, seed=seed, **kwargs)
    rng = replication_rng(seed, 0)
    return simulate_pvalues(simulate_states(cfg, rng), cfg, rng)


def _with_trailing_nulls(data: PairedPValues, extra: int) -> PairedPValues:
    return PairedPValues(np.append(data.y1, np.ones(extra)), np.append(data.y2, np.ones(extra)))


def test_bh_example():
    np.testing.assert_array_equal(bh(np.array([0.01, 0.04, 0.9]), 0.05), [0])


def test_bh_rejects_nothing_for_unit_pvalues():
    assert bh(np.ones(20), 0.05).shape[0] == 0


def test_bh_matches_rule_text():
    rng = np.random.default_rng(21)
    for _ in range(200):
        m = int(rng.integers(1, 200))
        p = np.where(rng.random(m) < 0.3, rng.beta(0.2, 5.0, size=m), rng.uniform(size=m))
        p = np.clip(p, 1e-12, 1.0)
        q = float(rng.uniform(0.01, 0.3))
        assert set(bh(p, q).tolist()) == _bh_by_rule(p, q)


def test_bh_and_maxp_are_monotone_in_q():
    data = _simulated(2000, seed=3)
    for procedure in (lambda q: bh(data.y1, q), lambda q: maxp(data, q).rejected):
        counts = [procedure(q).shape[0] for q in (0.001, 0.01, 0.05, 0.1, 0.2)]
        assert counts == sorted(counts)


def test_bh_rejects_bad_level():
    with pytest.raises(DomainError):
        bh(np.array([0.5]), 1.2)


def test_adhoc_bh_disjoint_rejections_are_empty():
    data = PairedPValues(np.array([1e-6, 0.9, 0.9, 0.9]), np.array([0.9, 1e-6, 0.9, 0.9]))
    outcome = adhoc_bh(data, 0.05)
    assert outcome.num_rejected == 0
    assert outcome.auxiliary == {"rejected_study1": 1, "rejected_study2": 1}


def test_identical_studies_reduce_to_bh():
    rng = np.random.default_rng(22)
    y = np.clip(rng.beta(0.3, 3.0, size=300), 1e-12, 1.0)
    data = PairedPValues(y, y.copy())
    expected = bh(y, 0.1)
    np.testing.assert_array_equal(adhoc_bh(data, 0.1).rejected, expected)
    np.testing.assert_array_equal(maxp(data, 0.1).rejected, expected)


def test_maxp_rejections_are_small_in_both_studies():
    data = _simulated(3000, seed=5)
    outcome = maxp(data, 0.05)
    if outcome.num_rejected:
        threshold = np.maximum(data.y1, data.y2)[outcome.rejected].max()
        assert np.all(data.y1[outcome.rejected] <= threshold)
        assert np.all(data.y2[outcome.rejected] <= threshold)


def test_radjust_without_common_selection_is_empty():
    data = PairedPValues(np.array([0.001, 0.9]), np.array([0.9, 0.001]))
    outcome = radjust_adaptive(data, 0.05)
    assert outcome.num_rejected == 0
    assert outcome.auxiliary["diagnostic"] == "empty selection set"


def test_radjust_single_feature_rejected():
    q = 0.05
    data = PairedPValues(np.array([q / 100]), np.array([q / 100]))
    outcome = radjust_adaptive(data, q)
    np.testing.assert_array_equal(outcome.rejected, [0])
    assert outcome.auxiliary["R"] == 1
    assert radjust(data, q, adaptive=False).num_rejected == 1


def test_radjust_null_proportion_spot_value():
    y1 = np.array([0.2, 0.3, 0.4] + [0.01] * 7 + [0.9] * 5)
    selected = np.array([True] * 10 + [False] * 5)
    assert radjust_null_proportion(y1, selected, 0.05) == pytest.approx(4.0 / (10 * 0.95))
    assert radjust_null_proportion(y1, np.zeros(15, dtype=bool), 0.05) == 1.0


def test_radjust_null_proportion_is_capped_at_one():
    y1 = np.full(20, 0.9)
    assert radjust_null_proportion(y1, np.ones(20, dtype=bool), 0.05) == 1.0


def test_radjust_rejections_pass_their_thresholds():
    data = _simulated(3000, seed=6)
    q = 0.05
    outcome = radjust_adaptive(data, q)
    aux = outcome.auxiliary
    r = aux["R"]
    if r:
        step1 = q / (2.0 * aux["selected_study2"] * aux["pi0_study1"])
        step2 = q / (2.0 * aux["selected_study1"] * aux["pi0_study2"])
        assert outcome.num_rejected == r
        assert np.all(data.y1[outcome.rejected] <= r * step1 * (1 + 1e-12))
        assert np.all(data.y2[outcome.rejected] <= r * step2 * (1 + 1e-12))


def test_plain_radjust_is_more_conservative_in_selection():
    data = _simulated(3000, seed=7)
    plain = radjust(data, 0.05, adaptive=False)
    assert plain.method is BaselineMethod.RADJUST
    assert plain.auxiliary["selected_study1"] <= int((data.y1 <= 0.05).sum())


def test_storey_spot_value():
    p = np.array([0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.6, 0.7, 0.8, 0.9])
    assert storey_pi0(p, 0.5) == pytest.approx(1.0)


@pytest.mark.parametrize("lam", [1.0, -0.1, 1.5])
def test_storey_threshold_outside_unit_interval_rejected(lam):
    p = np.linspace(0.05, 0.95, 10)
    with pytest.raises(DomainError):
        storey_pi0(p, lam)
    with pytest.raises(DomainError):
        jump(PairedPValues(p, p.copy()), 0.05, lambda3=lam)


def test_jump_clamps_and_records_xi00():
    y = np.array([0.7] * 36 + [0.1] * 64)
    outcome = jump(PairedPValues(y, y.copy()), 0.05)
    assert outcome.auxiliary["xi00_raw"] == pytest.approx(1.44)
    assert outcome.auxiliary["xi00"] == 1.0
    assert "xi00" in outcome.auxiliary["clamped"]


def test_jump_with_unit_maxima_rejects_nothing():
    outcome = jump(PairedPValues(np.full(50, 0.3), np.ones(50)), 0.05)
    assert outcome.num_rejected == 0


def test_jump_choice_is_maximal():
    data = _simulated(2000, seed=8)
    q = 0.1
    outcome = jump(data, q)
    aux = outcome.auxiliary
    t = np.sort(np.maximum(data.y1, data.y2))
    discoveries = np.searchsorted(t, t, side="right")
    fdr_star = data.m * (aux["xi00"] * t**2 + (aux["xi01"] + aux["xi10"]) * t) / discoveries
    k = aux["k"]
    assert outcome.num_rejected == k
    if k:
        assert fdr_star[k - 1] <= q
    assert np.all(fdr_star[k:] > q)


def test_stareg_lfdr_is_one_minus_replicated_posterior():
    data = _simulated(1500, seed=9)
    model = fit_stareg(data, EmConfig(max_iterations=50))
    emissions = np.column_stack(
        [
            np.ones(data.m),
            np.maximum(model.f2.evaluate(data.y2), INFERENCE_DENSITY_FLOOR),
            np.maximum(model.f1.evaluate(data.y1), INFERENCE_DENSITY_FLOOR),
            np.maximum(model.f1.evaluate(data.y1), INFERENCE_DENSITY_FLOOR) * np.maximum(model.f2.evaluate(data.y2), INFERENCE_DENSITY_FLOOR),
        ]
    )
    joint = model.xi * emissions
    replicated = joint[:, StateCode.SIGNAL_SIGNAL] / joint.sum(axis=1)
    np.testing.assert_allclose(model.lfdr, 1.0 - replicated, atol=1e-10)


def test_stareg_likelihood_never_decreases():
    for seed in range(3):
        trace = np.asarray(fit_stareg(_simulated(2000, seed=seed)).log_likelihood_trace)
        steps = np.diff(trace)
        assert np.all(steps >= -1e-8 * np.maximum(1.0, np.abs(trace[1:])))


def test_stareg_outcome_carries_lfdr():
    data = _simulated(1000, seed=10)
    outcome = stareg(data, 0.05, EmConfig(max_iterations=30))
    assert outcome.auxiliary["lfdr"].shape == (data.m,)
    assert outcome.num_rejected > 0
    assert np.all(outcome.auxiliary["lfdr"][outcome.rejected] <= outcome.auxiliary["threshold"])


def test_selection_based_methods_ignore_appended_unit_pairs():
    data = _simulated(2000, seed=11)
    padded = _with_trailing_nulls(data, 500)
    for method in (BaselineMethod.RADJUST_ADAPTIVE, BaselineMethod.RADJUST):
        np.testing.assert_array_equal(run_baseline(method, data, 0.05).rejected, run_baseline(method, padded, 0.05).rejected)


def test_appended_unit_pairs_are_never_rejected():
    data = _simulated(2000, seed=12)
    padded = _with_trailing_nulls(data, 200)
    for method in (BaselineMethod.ADHOC_BH, BaselineMethod.MAXP, BaselineMethod.JUMP):
        rejected = run_baseline(method, padded, 0.05).rejected
        assert np.all(rejected < data.m)


def test_run_baseline_dispatches_by_name():
    data = _simulated(500, seed=13)
    assert run_baseline("maxp", data, 0.05).method is BaselineMethod.MAXP
    default = run_baseline("jump", data, 0.05)
    tuned = run_baseline("jump", data, 0.05, jump_lambdas=(0.8, 0.8, 0.8))
    assert default.auxiliary["pi0_study1"] == pytest.approx(storey_pi0(data.y1, 0.5))
    assert tuned.auxiliary["pi0_study1"] == pytest.approx(min(storey_pi0(data.y1, 0.8), 1.0))
    with pytest.raises(ValueError):
        run_baseline("bonferroni", data, 0.05)


@pytest.mark.slow
def test_stareg_matches_chain_model_without_dependence():
    overlaps = []
    for seed in range(20):
        data = _simulated(5000, seed=seed, transition=((0.7, 0.1, 0.1, 0.1),) * 4, mu1=2.5, mu2=2.5)
        chain = set(test_replicability(data, 0.05)[1].rejected.tolist())
        independent = set(stareg(data, 0.05).rejected.tolist())
        overlaps.append(len(chain & independent) / max(len(chain | independent), 1))
    assert np.median(overlaps) >= 0.8


@pytest.mark.slow
def test_stareg_under_uniform_truth():
    shares, counts = [], []
    for seed in range(10):
        data = _simulated(5000, seed=seed, mu1=0.0, mu2=0.0)
        model = fit_stareg(data)
        shares.append(model.xi[StateCode.SIGNAL_SIGNAL])
        counts.append(stareg(data, 0.05).num_rejected)
    assert np.median(shares) <= 0.05
    assert np.median(counts) <= 5
