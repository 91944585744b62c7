"""
Factory functions for creating test configurations and tallies
"""

import math

import numpy as np

from bellsim.core import ASPECT_ANGLES, OUTCOMES, SETTING_INDICES, ExperimentConfig
from bellsim.monte_carlo import TallyTable


def create_test_experiment_config(
    angles=ASPECT_ANGLES,
    runs=10_000,
    seed=42,
    source="quantum-exact",
    parallel=False,
    workers=None,
):
    """Create ExperimentConfig with test defaults."""
    return ExperimentConfig(
        angles=angles,
        runs=runs,
        seed=seed,
        source=source,
        parallel=parallel,
        workers=workers,
    )


def create_tally(cells_per_setting, angles=ASPECT_ANGLES):
    """
    Build a TallyTable from counts in canonical outcome order.

    Args:
        cells_per_setting: Dict (ia, ib) -> (N(1,1), N(1,-1), N(-1,1), N(-1,-1));
                           missing settings stay empty
    """
    counts = np.zeros((2, 2, 2, 2), dtype=np.int64)
    for (ia, ib), cells in cells_per_setting.items():
        counts[ia, ib] = np.array(cells).reshape(2, 2)
    return TallyTable(angles, counts)


def create_exact_tally(per_setting_runs, angles=ASPECT_ANGLES):
    """Tally whose cells are the rounded exact probabilities times `per_setting_runs`."""
    cells = {}
    for ia, ib in SETTING_INDICES:
        delta = angles[ia] - angles[2 + ib]
        same = round(per_setting_runs * 0.5 * math.cos(delta) ** 2)
        different = round(per_setting_runs * 0.5 * math.sin(delta) ** 2)
        cells[(ia, ib)] = (same, different, different, same)
    return create_tally(cells, angles)


def all_outcomes():
    """Every outcome pair in canonical order."""
    return [(p, q) for p in OUTCOMES for q in OUTCOMES]
