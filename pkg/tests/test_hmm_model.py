"""Tests for the model domain types, parameter validation and the stationary solver."""

import json

import numpy as np
import pytest

from models.errors import DomainError, InputDataError, NumericalFailure
from models.hmm import (
    HmmParams,
    PairedPValues,
    StateCode,
    StationaryDist,
    StepDensity,
    TransitionMatrix,
    emission_density,
    stationary_from_transition,
    validate_params,
)
from simulation.scenarios import DIABETES_ROWS, DIABETES_STATIONARY, SCENARIO1_ROWS


def _uniform_params(pi=(0.25, 0.25, 0.25, 0.25)) -> HmmParams:
    return HmmParams(
        pi=StationaryDist(np.array(pi)),
        a=TransitionMatrix(np.full((4, 4), 0.25)),
        f1=StepDensity.uniform(),
        f2=StepDensity.uniform(),
    )


def test_state_codes_decode_to_study_indicators():
    assert [(s.theta1, s.theta2) for s in StateCode] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert [s for s in StateCode if s.is_replicability_null] == [StateCode.NULL_NULL, StateCode.NULL_SIGNAL, StateCode.SIGNAL_NULL]
    assert StateCode.from_thetas(1, 0) is StateCode.SIGNAL_NULL


def test_diabetes_estimate_is_valid_after_row_normalization():
    a = TransitionMatrix.from_published(DIABETES_ROWS)
    pi = stationary_from_transition(a)
    params = HmmParams(pi=pi, a=a, f1=StepDensity.two_piece(0.2, 4.0), f2=StepDensity.uniform())
    assert validate_params(params) == []


def test_row_sum_violation_names_the_row():
    rows = np.full((4, 4), 0.25)
    rows[2] = (0.3, 0.2, 0.2, 0.2)
    problems = TransitionMatrix(rows).violations()
    assert len(problems) == 1
    assert "row 2" in problems[0]


def test_increasing_heights_reported():
    density = StepDensity(np.array([0.0, 0.5, 1.0]), np.array([1.0, 2.0]))
    params = HmmParams(
        pi=StationaryDist(np.full(4, 0.25)),
        a=TransitionMatrix(np.full((4, 4), 0.25)),
        f1=density,
        f2=StepDensity.uniform(),
    )
    problems = validate_params(params)
    assert any("f1 heights increase" in p for p in problems)
    assert any("f1 integrates to" in p for p in problems)


def test_non_stationary_pi_reported():
    a = TransitionMatrix.from_published(SCENARIO1_ROWS)
    params = HmmParams(pi=StationaryDist(np.full(4, 0.25)), a=a, f1=StepDensity.uniform(), f2=StepDensity.uniform())
    assert any("not stationary" in p for p in validate_params(params))


def test_reducible_chain_reported():
    a = TransitionMatrix(np.eye(4))
    params = HmmParams(pi=StationaryDist(np.full(4, 0.25)), a=a, f1=StepDensity.uniform(), f2=StepDensity.uniform())
    assert "transition matrix is reducible" in validate_params(params)


def test_stationary_of_first_simulation_matrix():
    pi = stationary_from_transition(TransitionMatrix.from_published(SCENARIO1_ROWS)).pi
    np.testing.assert_allclose(pi, (0.7, 0.1, 0.1, 0.1), atol=5e-3)


def test_stationary_of_constant_rows_is_uniform():
    pi = stationary_from_transition(TransitionMatrix(np.full((4, 4), 0.25))).pi
    np.testing.assert_allclose(pi, np.full(4, 0.25), atol=1e-12)


def test_stationary_of_diabetes_matrix():
    pi = stationary_from_transition(TransitionMatrix.from_published(DIABETES_ROWS)).pi
    np.testing.assert_allclose(pi, DIABETES_STATIONARY, atol=5e-3)


def test_stationary_reproduces_itself_for_random_matrices():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        a = TransitionMatrix(rng.dirichlet(np.full(4, 0.5), size=4))
        pi = stationary_from_transition(a).pi
        assert np.max(np.abs(pi @ a.a - pi)) <= 1e-8
        assert abs(pi.sum() - 1.0) <= 1e-12
        assert np.all(pi > 0.0)


def test_stationary_rejects_reducible_chain():
    rows = np.eye(4)
    rows[0] = (0.5, 0.5, 0.0, 0.0)
    with pytest.raises(NumericalFailure, match="reducible"):
        stationary_from_transition(TransitionMatrix(rows))


def test_emission_density_examples():
    params = _uniform_params()
    assert emission_density(params, StateCode.NULL_NULL, 0.3, 0.7) == 1.0
    assert emission_density(params, StateCode.SIGNAL_SIGNAL, 0.3, 0.7) == 1.0

    f1 = StepDensity(np.array([0.0, 0.5, 1.0]), np.array([1.5, 0.5]))
    params = params.with_densities(f1, StepDensity.uniform())
    assert emission_density(params, StateCode.SIGNAL_NULL, 0.25, 0.9) == pytest.approx(1.5)
    assert emission_density(params, StateCode.NULL_SIGNAL, 0.25, 0.9) == pytest.approx(1.0)


def test_emission_density_rejects_arguments_outside_unit_interval():
    with pytest.raises(DomainError):
        emission_density(_uniform_params(), 0, 0.0, 0.5)
    with pytest.raises(DomainError):
        emission_density(_uniform_params(), 3, 0.5, 1.5)


def test_emission_matrix_columns_follow_state_order(rng, make_params):
    params = make_params(rng)
    y1, y2 = np.array([0.05, 0.6]), np.array([0.3, 0.9])
    emis = params.emission_matrix(y1, y2)
    for j in range(2):
        for s in StateCode:
            assert emis[j, s] == pytest.approx(emission_density(params, s, y1[j], y2[j]))


def test_emissions_integrate_to_one(rng, make_params):
    """Products of step densities integrate exactly by summing over interval pairs."""
    for _ in range(20):
        params = make_params(rng)
        for density in (params.f1, params.f2):
            assert density.mass() == pytest.approx(1.0, abs=1e-10)
        joint = np.outer(params.f1.heights * params.f1.widths, params.f2.heights * params.f2.widths).sum()
        assert joint == pytest.approx(1.0, abs=1e-10)


def test_step_density_is_right_continuous():
    density = StepDensity(np.array([0.0, 0.5, 1.0]), np.array([1.5, 0.5]))
    np.testing.assert_array_equal(density.evaluate([1e-9, 0.5, 0.5000001, 1.0]), [1.5, 1.5, 0.5, 0.5])


def test_step_density_cdf_differences_match_cell_masses(rng, make_params):
    density = make_params(rng).f1
    cdf = density.cdf(density.breakpoints)
    np.testing.assert_allclose(np.diff(cdf), density.heights * density.widths, atol=1e-14)


def test_step_density_constructor_validates_breakpoints():
    with pytest.raises(ValueError):
        StepDensity(np.array([0.0, 0.6, 0.5, 1.0]), np.array([2.0, 1.0, 0.5]))
    with pytest.raises(ValueError):
        StepDensity(np.array([0.1, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        StepDensity(np.array([0.0, 1.0]), np.array([1.0, 1.0]))


def test_two_piece_density_integrates_to_one():
    density = StepDensity.two_piece(0.2, 4.0)
    np.testing.assert_allclose(density.heights, (4.0, 0.25))
    assert density.violations() == []


def test_truncated_density_vanishes_above_cut():
    density = StepDensity.two_piece(0.2, 4.0).truncated(0.5)
    np.testing.assert_allclose(density.breakpoints, (0.0, 0.2, 0.5, 1.0))
    assert density.mass() == pytest.approx(1.0)
    assert density.violations() == []
    assert float(density.evaluate(0.75)) == 0.0
    at_breakpoint = StepDensity.two_piece(0.2, 4.0).truncated(0.2)
    np.testing.assert_allclose(at_breakpoint.heights, (5.0, 0.0))
    assert StepDensity.uniform().truncated(1.0).heights.tolist() == [1.0]
    with pytest.raises(ValueError):
        StepDensity.uniform().truncated(0.0)


def test_paired_pvalues_validation():
    with pytest.raises(InputDataError, match="differ in length"):
        PairedPValues(np.array([0.1, 0.2]), np.array([0.1]))
    with pytest.raises(InputDataError, match="outside"):
        PairedPValues(np.array([0.0, 0.2]), np.array([0.1, 0.2]))
    with pytest.raises(InputDataError, match="NaN"):
        PairedPValues(np.array([np.nan]), np.array([0.1]))
    data = PairedPValues.from_raw([0.0, 0.5], [1.0, 0.25], floor=1e-15)
    assert data.y1[0] == 1e-15
    assert data.feature_ids() == ("1", "2")


def test_params_json_round_trip(rng, make_params):
    params = make_params(rng)
    restored = HmmParams.from_json(params.to_json())
    np.testing.assert_array_equal(restored.a.a, params.a.a)
    np.testing.assert_array_equal(restored.pi.pi, params.pi.pi)
    np.testing.assert_array_equal(restored.f1.heights, params.f1.heights)
    np.testing.assert_array_equal(restored.f2.breakpoints, params.f2.breakpoints)
    assert set(json.loads(params.to_json())) == {"pi", "A", "f1", "f2"}


def test_params_json_missing_field():
    document = json.loads(_uniform_params().to_json())
    del document["f2"]
    with pytest.raises(InputDataError, match="f2"):
        HmmParams.from_json(json.dumps(document))
