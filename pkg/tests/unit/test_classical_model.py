"""
Unit tests for bellsim.classical_model: P_Bell, conditional queries, (A3) and the CHSH value
"""

import math

import numpy as np
import pytest

from bellsim.core import (
    ASPECT_ANGLES,
    OUTCOME_PAIRS,
    OUTCOMES,
    TSIRELSON_VALUE,
    InputError,
    NumericConsistencyError,
    ZeroProbabilityConditionError,
)
from bellsim.classical_model import (
    BellMeasure,
    ConditionalQuery,
    bell_measure,
    bell_measure_from_born,
    check_A3_factorization,
    check_jarrett_locality,
    chsh_closed_form,
    chsh_value_exact,
    conditional_probability,
    corrected_prediction,
    correlators_exact,
    event_probability,
    marginal_A,
    marginal_B,
    uniform_measure,
)
from tests.conftest import assert_approximately_equal, quiet_measure


class TestBellMeasure:
    """Tests for bell_measure() construction."""

    def test_known_weight(self, aspect_measure):
        """Test the weight at (p, q, a, b) = (1, 1, 0, pi/8)."""
        assert aspect_measure.weights[0, 0, 0, 0] == pytest.approx(0.25 * 0.5 * math.cos(math.pi / 8) ** 2, abs=1e-15)
        assert aspect_measure.weights[0, 0, 0, 0] == pytest.approx(0.1066941, abs=1e-7)

    def test_opposite_outcomes_impossible_at_equal_angles(self, rng):
        """Test weight(+1, -1, a, b) = weight(-1, +1, a, b) = 0 whenever a = b."""
        plus, minus = OUTCOMES.index(1), OUTCOMES.index(-1)
        for a1, a2 in rng.uniform(-math.pi, math.pi, size=(100, 2)):
            m = bell_measure(a1, a2, a1, a2)
            for ia in (0, 1):
                assert m.weights[ia, ia, plus, minus] == pytest.approx(0.0, abs=1e-12)
                assert m.weights[ia, ia, minus, plus] == pytest.approx(0.0, abs=1e-12)
                assert m.block_weight(ia, ia) == pytest.approx(0.25, abs=1e-12)

    def test_total_mass(self, aspect_measure):
        assert aspect_measure.weights.sum() == pytest.approx(1.0, abs=1e-12)
        for ia in range(2):
            for ib in range(2):
                assert aspect_measure.block_weight(ia, ib) == pytest.approx(0.25, abs=1e-15)

    def test_matrix_path_agrees(self, rng):
        """Test bell_measure_from_born() against the closed-form blocks."""
        for _ in range(50):
            angles = tuple(rng.uniform(0, 2 * math.pi, size=4))
            np.testing.assert_allclose(bell_measure_from_born(*angles).weights,
                                       bell_measure(*angles).weights, atol=1e-12)

    def test_degenerate_angles_warn(self):
        with pytest.warns(UserWarning, match="Degenerate"):
            bell_measure(0.0, 0.0, math.pi / 8, 3 * math.pi / 8)

    def test_non_finite_angle(self):
        with pytest.raises(InputError):
            bell_measure(0.0, float("nan"), 0.0, 1.0)

    def test_invalid_weights(self):
        with pytest.raises(InputError, match="shape"):
            BellMeasure(ASPECT_ANGLES, np.ones((2, 2, 2)))
        with pytest.raises(NumericConsistencyError, match="sum"):
            BellMeasure(ASPECT_ANGLES, np.full((2, 2, 2, 2), 0.1))

    def test_empty_block(self):
        """Test that conditioning on an unsupported setting raises."""
        weights = np.zeros((2, 2, 2, 2))
        weights[0, 0, 0, 0] = weights[0, 0, 1, 1] = 0.5
        m = BellMeasure(ASPECT_ANGLES, weights)
        with pytest.raises(ZeroProbabilityConditionError):
            m.block(1, 1)

    def test_serialisation(self, aspect_measure):
        document = aspect_measure.to_dict()
        assert len(document["points"]) == 16
        assert document["points"][0]["b"] == "pi/8"
        frame = aspect_measure.to_dataframe()
        assert list(frame.columns) == ["a", "b", "p", "q", "weight"]
        assert frame["weight"].sum() == pytest.approx(1.0, abs=1e-12)


class TestConditionalProbability:
    """Tests for conditional_probability() and the (A3) violation."""

    def test_a3_violation_structure(self, aspect_measure):
        """Test P(eps_A=1 | a, b, eps_B=1) = cos^2(a-b) while P(eps_A=1 | a) = 1/2."""
        for a in ASPECT_ANGLES[:2]:
            for b in ASPECT_ANGLES[2:]:
                conditional = conditional_probability(
                    aspect_measure, ConditionalQuery({"eps_A": 1}, {"gamma_A": a, "gamma_B": b, "eps_B": 1}))
                assert_approximately_equal(conditional, math.cos(a - b) ** 2)
            one_sided = conditional_probability(aspect_measure, ConditionalQuery({"eps_A": 1}, {"gamma_A": a}))
            assert_approximately_equal(one_sided, 0.5)

    def test_zero_probability_condition(self, aspect_measure):
        """Test that an unconfigured angle is a null event and the error names it."""
        with pytest.raises(ZeroProbabilityConditionError, match="gamma_A"):
            conditional_probability(aspect_measure, ConditionalQuery({"eps_A": 1}, {"gamma_A": 1.0}))

    def test_event_probability(self, aspect_measure):
        assert event_probability(aspect_measure, {}) == pytest.approx(1.0, abs=1e-12)
        assert event_probability(aspect_measure, {"gamma_B": math.pi / 8}) == pytest.approx(0.5, abs=1e-12)

    @pytest.mark.parametrize("target,condition", [
        ({}, {"eps_A": 1}),
        ({"eps_C": 1}, {}),
        ({"eps_A": 0}, {}),
        ({"eps_A": 1}, {"eps_A": -1}),
        ({"gamma_A": float("nan")}, {}),
    ])
    def test_invalid_queries(self, target, condition):
        with pytest.raises(InputError):
            ConditionalQuery(target, condition)


class TestMarginals:
    """Tests for marginal_A() and marginal_B()."""

    def test_uniform(self, aspect_measure):
        for a in ASPECT_ANGLES[:2]:
            for b in ASPECT_ANGLES[2:]:
                for dist in (marginal_A(aspect_measure, a, b), marginal_B(aspect_measure, a, b)):
                    assert_approximately_equal(dist[1], 0.5)
                    assert_approximately_equal(dist[-1], 0.5)

    def test_unknown_setting(self, aspect_measure):
        with pytest.raises(InputError, match="not a configured setting"):
            marginal_A(aspect_measure, 1.0, math.pi / 8)


class TestLocalityChecks:
    """Tests for check_A3_factorization() and check_jarrett_locality()."""

    def test_aspect_violates_a3(self, aspect_measure):
        report = check_A3_factorization(aspect_measure)
        assert not report.holds
        assert report.worst_deviation == pytest.approx(math.sqrt(2) / 8, abs=1e-12)
        assert report.witness_setting is not None
        assert report.witness_outcome in OUTCOME_PAIRS

    def test_uniform_measure_factorises(self):
        report = check_A3_factorization(uniform_measure(*ASPECT_ANGLES))
        assert report.holds
        assert report.witness_setting is None

    def test_uncorrelated_angles_factorise(self, uncorrelated_angles):
        assert check_A3_factorization(bell_measure(*uncorrelated_angles)).holds

    def test_jarrett_split(self, aspect_measure):
        """Test that P_Bell keeps parameter independence and breaks outcome independence."""
        report = check_jarrett_locality(aspect_measure)
        assert report.parameter_independence
        assert not report.outcome_independence
        assert not report.bell_local

    def test_jarrett_uniform(self):
        assert check_jarrett_locality(uniform_measure(*ASPECT_ANGLES)).bell_local


class TestCHSH:
    """Tests for the exact CHSH value and the corrected prediction."""

    def test_aspect_value(self, aspect_measure):
        assert_approximately_equal(chsh_value_exact(aspect_measure), 2 * math.sqrt(2))
        assert_approximately_equal(chsh_closed_form(*ASPECT_ANGLES), TSIRELSON_VALUE)

    def test_equal_angles(self):
        angles = (0.0, math.pi / 4, 0.0, math.pi / 4)
        correlators = correlators_exact(bell_measure(*angles))
        assert_approximately_equal(correlators[(0, 0)], 1.0)
        assert_approximately_equal(correlators[(0, 1)], 0.0)
        assert_approximately_equal(chsh_value_exact(bell_measure(*angles)), 2.0)

    def test_uncorrelated_angles(self, uncorrelated_angles):
        assert_approximately_equal(chsh_value_exact(bell_measure(*uncorrelated_angles)), 0.0)

    def test_degenerate_angles(self):
        m = quiet_measure(0.0, 0.0, math.pi / 8, 3 * math.pi / 8)
        assert_approximately_equal(chsh_value_exact(m), chsh_closed_form(0.0, 0.0, math.pi / 8, 3 * math.pi / 8))

    def test_exact_matches_closed_form(self, rng):
        for _ in range(100):
            angles = tuple(rng.uniform(-math.pi, math.pi, size=4))
            assert_approximately_equal(chsh_value_exact(bell_measure(*angles)), chsh_closed_form(*angles))

    def test_never_exceeds_tsirelson(self, rng):
        worst = 0.0
        for _ in range(1_000):
            angles = tuple(rng.uniform(-math.pi, math.pi, size=4))
            worst = max(worst, abs(chsh_value_exact(bell_measure(*angles))))
        assert worst <= TSIRELSON_VALUE + 1e-9
        assert worst > 2.0

    def test_corrected_prediction(self):
        corrected = corrected_prediction(2 * math.sqrt(2), 0.984, 0.971)
        assert 2.682 <= corrected <= 2.712
        assert corrected == pytest.approx(0.984 * 0.971 * 2 * math.sqrt(2), abs=1e-12)

    @pytest.mark.parametrize("f,t", [(0.0, 0.9), (1.1, 0.9), (0.9, -0.1), (float("nan"), 0.9)])
    def test_corrected_prediction_invalid_factors(self, f, t):
        with pytest.raises(InputError):
            corrected_prediction(2.0, f, t)
