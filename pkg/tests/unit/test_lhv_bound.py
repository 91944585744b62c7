"""
Unit tests for bellsim.lhv_bound: deterministic strategies, local models and the CHSH bound
"""

import numpy as np
import pytest

from bellsim.core import ASPECT_ANGLES, LOCAL_BOUND, InputError
from bellsim.classical_model import uniform_measure
from bellsim.lhv_bound import (
    DeterministicStrategy,
    LocalModel,
    best_local_approximation,
    chsh_functional,
    enumerate_deterministic_strategies,
    induced_distribution,
    local_correlators,
    local_model_chsh,
    local_polytope_distance,
    mix_models,
    random_local_model,
    verify_chsh_bound,
)


class TestDeterministicStrategies:
    """Tests for the 16 extremal local strategies."""

    def test_enumeration(self):
        strategies = enumerate_deterministic_strategies()
        assert len(strategies) == 16
        assert len({s.label() for s in strategies}) == 16
        assert strategies[0].label() == "f=++,g=++"

    def test_chsh_values(self):
        """Test that every strategy scores exactly +2 or -2, half of each."""
        values = [chsh_functional(s) for s in enumerate_deterministic_strategies()]
        assert set(values) == {2, -2}
        assert values.count(2) == 8

    def test_invalid_strategy(self):
        with pytest.raises(InputError, match="Strategy map f"):
            DeterministicStrategy((1, 0), (1, 1))
        with pytest.raises(InputError):
            DeterministicStrategy((1,), (1, 1))


class TestLocalModel:
    """Tests for LocalModel validation and derived quantities."""

    def test_validation(self):
        with pytest.raises(InputError, match="at least one"):
            LocalModel((), np.array([]), np.zeros((0, 2)), np.zeros((0, 2)))
        with pytest.raises(InputError, match="sum to 1"):
            LocalModel((0, 1), [0.5, 0.6], np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(InputError, match="shape"):
            LocalModel((0,), [1.0], np.zeros((1, 3)), np.zeros((1, 2)))
        with pytest.raises(InputError, match="response_B"):
            LocalModel((0,), [1.0], np.zeros((1, 2)), np.full((1, 2), 1.5))

    def test_strategy_model_matches_functional(self):
        for strategy in enumerate_deterministic_strategies():
            model = LocalModel.from_strategies([strategy], [1.0])
            assert local_model_chsh(model) == pytest.approx(chsh_functional(strategy), abs=1e-12)

    def test_uniform_mixture_of_strategies(self):
        """Test that the uniform mixture of all 16 strategies has S = 0 and fair-coin outcomes."""
        strategies = enumerate_deterministic_strategies()
        model = LocalModel.from_strategies(strategies, [1 / 16] * 16)
        assert local_model_chsh(model) == pytest.approx(0.0, abs=1e-12)
        assert all(abs(e) < 1e-12 for e in local_correlators(model).values())
        np.testing.assert_allclose(induced_distribution(model), np.full((2, 2, 2, 2), 0.25), atol=1e-12)

    def test_fair_coin_model_is_uncorrelated(self):
        model = LocalModel((0,), [1.0], np.full((1, 2), 0.5), np.full((1, 2), 0.5))
        assert all(abs(e) < 1e-12 for e in local_correlators(model).values())
        np.testing.assert_allclose(induced_distribution(model), np.full((2, 2, 2, 2), 0.25))

    def test_induced_distribution_normalised(self, rng):
        for _ in range(20):
            tables = induced_distribution(random_local_model(rng))
            np.testing.assert_allclose(tables.sum(axis=(2, 3)), np.ones((2, 2)), atol=1e-12)
            assert np.all(tables >= 0)

    def test_mixture_is_linear(self, rng):
        first, second = random_local_model(rng), random_local_model(rng)
        mixed = mix_models(first, second, 0.3)
        expected = 0.3 * local_model_chsh(first) + 0.7 * local_model_chsh(second)
        assert local_model_chsh(mixed) == pytest.approx(expected, abs=1e-12)
        with pytest.raises(InputError):
            mix_models(first, second, 1.5)

    def test_random_models_within_bound(self, rng):
        for _ in range(500):
            assert abs(local_model_chsh(random_local_model(rng))) <= LOCAL_BOUND + 1e-12


class TestVerifyCHSHBound:
    """Tests for verify_chsh_bound()."""

    def test_bound_respected(self):
        report = verify_chsh_bound(2_000, seed=7)
        assert report.bound_respected
        assert report.max_abs_s == pytest.approx(2.0, abs=1e-12)
        assert report.witness is not None

    def test_without_extremes(self):
        report = verify_chsh_bound(500, seed=7, include_extremes=False)
        assert report.bound_respected
        assert 0.0 < report.max_abs_s <= LOCAL_BOUND + 1e-12
        assert abs(local_model_chsh(report.witness)) == pytest.approx(report.max_abs_s, abs=1e-12)

    def test_deterministic_for_seed(self):
        first = verify_chsh_bound(1_500, seed=3, include_extremes=False)
        second = verify_chsh_bound(1_500, seed=3, include_extremes=False)
        assert first.max_abs_s == second.max_abs_s

    def test_worker_count_does_not_change_result(self):
        sequential = verify_chsh_bound(2_500, seed=11, include_extremes=False)
        parallel = verify_chsh_bound(2_500, seed=11, include_extremes=False, workers=2)
        assert parallel.max_abs_s == sequential.max_abs_s

    def test_pool_failure_falls_back_to_sequential(self, mocker, capsys):
        sequential = verify_chsh_bound(2_500, seed=11, include_extremes=False)
        pool = mocker.patch("bellsim.lhv_bound.Pool", side_effect=OSError("fork unavailable"))
        fallback = verify_chsh_bound(2_500, seed=11, include_extremes=False, workers=2, verbose=True)
        pool.assert_called_once()
        assert fallback.max_abs_s == sequential.max_abs_s
        assert "falling back to sequential" in capsys.readouterr().out

    def test_target_distance(self, aspect_measure):
        report = verify_chsh_bound(200, seed=5, target=aspect_measure)
        assert report.min_distance_to_target is not None
        assert report.min_distance_to_target > 0.05

    @pytest.mark.parametrize("trials", [0, -5, 2.5])
    def test_invalid_trials(self, trials):
        with pytest.raises(InputError, match="trials"):
            verify_chsh_bound(trials, seed=1)

    def test_report_serialisation(self):
        document = verify_chsh_bound(10, seed=1).to_dict()
        assert document["bound"]["value"] == 2.0
        assert document["max_abs_s"]["provenance"] == "exact"


class TestLocalApproximations:
    """Tests for best_local_approximation() and local_polytope_distance()."""

    def test_best_local_approximation(self, aspect_measure):
        approximation = best_local_approximation(aspect_measure)
        assert approximation.strategy.label() == "f=++,g=++"
        assert approximation.achieved_s == pytest.approx(2.0, abs=1e-12)

    def test_polytope_distance_aspect(self, aspect_measure):
        """Test that P_Bell at the Aspect angles sits a finite distance outside the local polytope."""
        result = local_polytope_distance(aspect_measure)
        assert 0.05 <= result.distance <= 0.18
        assert abs(result.achieved_s) <= LOCAL_BOUND + 1e-9
        achieved = np.max(np.abs(induced_distribution(result.model) - _blocks(aspect_measure)))
        assert achieved == pytest.approx(result.distance, abs=1e-6)

    def test_polytope_distance_local_target(self):
        result = local_polytope_distance(uniform_measure(*ASPECT_ANGLES))
        assert result.distance == pytest.approx(0.0, abs=1e-9)


def _blocks(measure):
    return measure.weights / measure.weights.sum(axis=(2, 3), keepdims=True)
