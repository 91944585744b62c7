"""
Unit tests for bellsim.monte_carlo: sampling, tallies and estimators
"""

import math

import numpy as np
import pandas as pd
import pytest

from bellsim.core import ASPECT_ANGLES, TSIRELSON_VALUE, EmptySettingError, ExperimentConfig, InputError
from bellsim.monte_carlo import (
    TALLY_COLUMNS,
    RunRecord,
    TallyTable,
    compare_sources,
    convergence_sweep,
    estimate_E,
    estimate_S,
    merge_tallies,
    outcome_table,
    run_experiment,
    sampled_marginals,
    setting_occupancy,
    simulate_runs,
    sweep_to_dataframe,
    tally_from_records,
)
from bellsim.quantum_model import SettingPair
from tests.fixtures.test_configs import create_exact_tally, create_tally, create_test_experiment_config


class TestTallyTable:
    """Tests for TallyTable construction and merging."""

    def test_validation(self):
        with pytest.raises(InputError, match="shape"):
            TallyTable(ASPECT_ANGLES, np.zeros((2, 2, 2)))
        with pytest.raises(InputError, match="non-negative"):
            TallyTable(ASPECT_ANGLES, -np.ones((2, 2, 2, 2)))

    def test_cells_and_counts(self):
        tally = create_tally({(0, 0): (5, 1, 2, 7), (1, 1): (3, 0, 0, 3)})
        assert tally.total == 21
        assert tally.setting_count(0, 0) == 15
        assert tally.cell(0, 0, -1, 1) == 2
        assert tally.cells(1, 1) == (3, 0, 0, 3)
        assert tally.empty_settings() == ((0, 1), (1, 0))

    def test_merge(self):
        first = create_tally({(0, 0): (1, 0, 0, 1)})
        second = create_tally({(0, 0): (2, 0, 0, 0), (1, 0): (0, 1, 0, 0)})
        merged = merge_tallies([first, second])
        assert merged.cells(0, 0) == (3, 0, 0, 1)
        assert merged.total == 5

    def test_merge_rejects_other_angles(self):
        first = create_tally({(0, 0): (1, 0, 0, 1)})
        other = create_tally({(0, 0): (1, 0, 0, 1)}, angles=(0.0, 0.5, 1.0, 1.5))
        with pytest.raises(InputError, match="different angles"):
            first + other
        with pytest.raises(InputError):
            merge_tallies([])

    def test_dataframe(self):
        frame = create_tally({(0, 0): (5, 1, 2, 7)}).to_dataframe()
        assert list(frame.columns) == TALLY_COLUMNS
        assert len(frame) == 16
        assert frame["count"].sum() == 15
        assert frame.loc[0, "b"] == "pi/8"


class TestSampling:
    """Tests for run_experiment() and the run-record view."""

    def test_single_run(self):
        """Test that k = 1 fills exactly one cell."""
        tally = run_experiment(create_test_experiment_config(runs=1))
        assert tally.total == 1
        assert int(np.count_nonzero(tally.counts)) == 1
        assert len(tally.empty_settings()) == 3

    def test_deterministic_for_seed(self):
        cfg = create_test_experiment_config(runs=5_000, seed=9)
        np.testing.assert_array_equal(run_experiment(cfg).counts, run_experiment(cfg).counts)

    def test_different_seeds_differ(self):
        first = run_experiment(create_test_experiment_config(runs=5_000, seed=1))
        second = run_experiment(create_test_experiment_config(runs=5_000, seed=2))
        assert not np.array_equal(first.counts, second.counts)

    def test_prefix_property(self):
        """Test that the first k runs do not depend on how many runs follow."""
        short = run_experiment(create_test_experiment_config(runs=700, seed=4))
        sweep = convergence_sweep(create_test_experiment_config(runs=5_000, seed=4), [700, 5_000])
        np.testing.assert_array_equal(sweep[0].tally.counts, short.counts)
        longer = run_experiment(create_test_experiment_config(runs=5_000, seed=4))
        np.testing.assert_array_equal(sweep[1].tally.counts, longer.counts)

    def test_records_match_tally(self):
        cfg = create_test_experiment_config(runs=3_000, seed=21)
        records = simulate_runs(cfg)
        assert list(records.columns) == ["a", "b", "p", "q"]
        assert len(records) == 3_000
        np.testing.assert_array_equal(tally_from_records(records, cfg.angles).counts, run_experiment(cfg).counts)

    def test_tally_from_run_records(self):
        records = [RunRecord(0.0, math.pi / 8, 1, 1), RunRecord(math.pi / 4, 3 * math.pi / 8, -1, 1)]
        tally = tally_from_records(records, ASPECT_ANGLES)
        assert tally.cell(0, 0, 1, 1) == 1
        assert tally.cell(1, 1, -1, 1) == 1
        assert tally.total == 2

    def test_records_with_unknown_angle(self):
        frame = pd.DataFrame({"a": [0.3], "b": [math.pi / 8], "p": [1], "q": [1]})
        with pytest.raises(InputError, match="not one of the configured angles"):
            tally_from_records(frame, ASPECT_ANGLES)

    def test_run_record_validation(self):
        with pytest.raises(InputError):
            RunRecord(0.0, 0.0, 0, 1)

    def test_parallel_mode(self):
        cfg = create_test_experiment_config(runs=10_001, seed=8, parallel=True, workers=2)
        first, second = run_experiment(cfg), run_experiment(cfg)
        assert first.total == 10_001
        np.testing.assert_array_equal(first.counts, second.counts)

    def test_parallel_falls_back_to_sequential(self, mocker, capsys):
        """Test that a pool that cannot start yields the same tally from the same child streams."""
        cfg = create_test_experiment_config(runs=10_001, seed=8, parallel=True, workers=2)
        expected = run_experiment(cfg)
        pool = mocker.patch("bellsim.monte_carlo.Pool", side_effect=OSError("fork unavailable"))
        tally = run_experiment(cfg, verbose=True)
        pool.assert_called_once()
        np.testing.assert_array_equal(tally.counts, expected.counts)
        assert "falling back to sequential" in capsys.readouterr().err

    def test_sources_share_outcome_table(self):
        quantum = outcome_table(create_test_experiment_config())
        measure = outcome_table(create_test_experiment_config(source="bell-measure"))
        np.testing.assert_allclose(quantum, measure, atol=1e-12)
        np.testing.assert_allclose(quantum.sum(axis=1), np.ones(4), atol=1e-12)


class TestEstimators:
    """Tests for estimate_E() and estimate_S()."""

    def test_correlator_example(self):
        tally = create_tally({(0, 0): (853, 147, 147, 853)})
        assert estimate_E(tally, SettingPair(0.0, math.pi / 8)) == pytest.approx(0.706, abs=1e-12)

    def test_empty_setting(self):
        tally = create_tally({(0, 0): (1, 0, 0, 1), (1, 0): (1, 0, 0, 1), (1, 1): (1, 0, 0, 1)})
        with pytest.raises(EmptySettingError) as excinfo:
            estimate_S(tally)
        assert excinfo.value.setting == "(a1,b2)"
        with pytest.raises(EmptySettingError):
            estimate_E(tally, SettingPair(0.0, 3 * math.pi / 8))

    def test_unknown_setting(self):
        tally = create_tally({(0, 0): (1, 0, 0, 1)})
        with pytest.raises(InputError, match="not a configured setting"):
            estimate_E(tally, SettingPair(1.0, 2.0))

    def test_exact_tally_gives_tsirelson(self):
        estimate = estimate_S(create_exact_tally(1_000_000))
        assert estimate.s == pytest.approx(TSIRELSON_VALUE, abs=1e-5)
        assert estimate.runs == 4_000_000

    def test_uncorrelated_tally(self, uncorrelated_angles):
        estimate = estimate_S(create_exact_tally(1_000, uncorrelated_angles))
        assert estimate.s == pytest.approx(0.0, abs=1e-12)

    def test_standard_error(self):
        tally = create_tally({key: (250, 250, 250, 250) for key in [(0, 0), (0, 1), (1, 0), (1, 1)]})
        estimate = estimate_S(tally)
        assert estimate.standard_errors[(0, 0)] == pytest.approx(math.sqrt(1 / 1000), abs=1e-12)
        assert estimate.s_stderr == pytest.approx(2 * math.sqrt(1 / 1000), abs=1e-12)

    def test_estimate_serialisation(self):
        document = estimate_S(create_exact_tally(100)).to_dict()
        assert document["S"]["provenance"] == "sampled"
        assert set(document["correlators"]) == {"(a1,b1)", "(a1,b2)", "(a2,b1)", "(a2,b2)"}

    def test_simulated_estimate_within_five_sigma(self, small_experiment):
        estimate = estimate_S(run_experiment(small_experiment))
        assert abs(estimate.s - TSIRELSON_VALUE) <= 5 * estimate.s_stderr


class TestConvergenceSweep:
    """Tests for convergence_sweep()."""

    def test_gaps_at_first_checkpoint(self):
        series = convergence_sweep(create_test_experiment_config(seed=5), [1, 10, 2_000])
        assert len(series[0].gaps) == 3
        assert series[0].estimate is None
        assert sum(value is not None for value in series[0].correlators.values()) == 1
        assert series[-1].gaps == ()
        assert series[-1].estimate is not None

    @pytest.mark.parametrize("checkpoints", [[], [0, 10], [10, 10], [100, 50]])
    def test_invalid_checkpoints(self, checkpoints):
        with pytest.raises(InputError):
            convergence_sweep(create_test_experiment_config(), checkpoints)

    def test_dataframe(self):
        series = convergence_sweep(create_test_experiment_config(seed=5), [1, 2_000])
        frame = sweep_to_dataframe(series, exact_s=TSIRELSON_VALUE)
        assert list(frame["runs"]) == [1, 2_000]
        assert "deviation" in frame.columns
        assert frame.loc[0, "gaps"].count(";") == 2
        assert frame.loc[1, "gaps"] == ""


class TestDiagnostics:
    """Tests for marginals, occupancy and the source comparison."""

    def test_sampled_marginals(self, small_experiment):
        report = sampled_marginals(run_experiment(small_experiment))
        assert len(report) == 4
        for values in report.values():
            assert abs(values["z_A"]) < 5
            assert abs(values["z_B"]) < 5

    def test_marginals_on_empty_setting(self):
        with pytest.raises(EmptySettingError):
            sampled_marginals(create_tally({(0, 0): (1, 0, 0, 1)}))

    def test_occupancy(self, small_experiment):
        occupancy = setting_occupancy(run_experiment(small_experiment))
        assert sum(occupancy.values()) == pytest.approx(1.0, abs=1e-12)
        assert all(abs(v - 0.25) < 0.02 for v in occupancy.values())
        with pytest.raises(InputError):
            setting_occupancy(create_tally({}))

    def test_compare_sources(self):
        comparison = compare_sources(ExperimentConfig(runs=20_000, seed=77))
        assert comparison.runs == 20_000
        assert len(comparison.per_setting) == 4
        assert comparison.min_pvalue > 1e-6
        assert all(values["dof"] == 3 for values in comparison.per_setting.values())
