"""
Monte Carlo simulation of the Bell experiment.

One run: two independent fair coins pick the polariser setting (a, b), then the
outcome pair (p, q) is drawn from the exact conditional law n^(a,b). After k runs
the tallies give the correlators E_k and the CHSH estimate S_k.

Random numbers come from numpy's SFC64 generator seeded through
SeedSequence(seed, spawn_key=(EXPERIMENT_STREAM_ID,)). Every run consumes exactly
three uniforms (coin A, coin B, outcome), so the first n runs of a stream never
depend on how many runs follow (prefix property). Parallel mode spawns one child
stream per worker and merges tallies by cell-wise addition; it is equivalent to
the single-stream mode in distribution only.
"""

from dataclasses import asdict, dataclass, field
from multiprocessing import Pool, cpu_count
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple
import math
import sys

import numpy as np
import pandas as pd
from scipy import stats

from bellsim.core import (
    CHSH_SIGNS,
    OUTCOME_PAIRS,
    OUTCOMES,
    SETTING_INDICES,
    TOLERANCE,
    EmptySettingError,
    ExperimentConfig,
    InputError,
    angles_to_dict,
    format_angle,
    tagged,
)
from bellsim.classical_model import bell_measure
from bellsim.quantum_model import SettingPair, closed_form_distribution


EXPERIMENT_STREAM_ID = 0
SOURCE_COMPARISON_STREAM_ID = 2

# Runs drawn per vectorised batch.
RUN_CHUNK = 1 << 16

RECORD_COLUMNS = ["a", "b", "p", "q"]
TALLY_COLUMNS = ["a", "b", "p", "q", "count"]


def setting_label(ia: int, ib: int) -> str:
    return f"(a{ia + 1},b{ib + 1})"


# -----------------------------
# Data classes
# -----------------------------

@dataclass(frozen=True)
class RunRecord:
    """Result of a single run: the selected setting and the outcome pair."""
    a: float
    b: float
    p: int
    q: int

    def __post_init__(self):
        if self.p not in OUTCOMES or self.q not in OUTCOMES:
            raise InputError(f"Run outcomes must be +1 or -1, got ({self.p!r}, {self.q!r})")


@dataclass(frozen=True, eq=False)
class TallyTable:
    """
    Counts N^(a,b)(p,q) of k runs.

    `counts[ia, ib, ip, iq]` counts runs with setting (a_ia, b_ib) and outcome
    (OUTCOMES[ip], OUTCOMES[iq]).
    """
    angles: Tuple[float, float, float, float]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64, copy=True)
        if counts.shape != (2, 2, 2, 2):
            raise InputError(f"Tally counts must have shape (2, 2, 2, 2), got {counts.shape}")
        if np.any(counts < 0):
            raise InputError("Tally counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "angles", tuple(float(x) for x in self.angles))

    @property
    def total(self) -> int:
        """k, the number of runs."""
        return int(self.counts.sum())

    def setting_count(self, ia: int, ib: int) -> int:
        """N^(a,b), the number of runs with setting (a_ia, b_ib)."""
        return int(self.counts[ia, ib].sum())

    def cell(self, ia: int, ib: int, p: int, q: int) -> int:
        return int(self.counts[ia, ib, OUTCOMES.index(p), OUTCOMES.index(q)])

    def cells(self, ia: int, ib: int) -> Tuple[int, int, int, int]:
        """Counts of one setting in canonical outcome order."""
        return tuple(self.cell(ia, ib, p, q) for p, q in OUTCOME_PAIRS)

    def empty_settings(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(key for key in SETTING_INDICES if self.setting_count(*key) == 0)

    def __add__(self, other: "TallyTable") -> "TallyTable":
        if not isinstance(other, TallyTable):
            return NotImplemented
        if any(abs(x - y) > TOLERANCE for x, y in zip(self.angles, other.angles)):
            raise InputError("Cannot merge tallies recorded at different angles")
        return TallyTable(self.angles, self.counts + other.counts)

    def to_dataframe(self) -> pd.DataFrame:
        """One row per (setting, outcome) cell, columns a, b, p, q, count."""
        a_angles, b_angles = self.angles[:2], self.angles[2:]
        rows = [
            {
                "a": format_angle(a_angles[ia]),
                "b": format_angle(b_angles[ib]),
                "p": p,
                "q": q,
                "count": self.cell(ia, ib, p, q),
            }
            for ia, ib in SETTING_INDICES
            for p, q in OUTCOME_PAIRS
        ]
        return pd.DataFrame(rows, columns=TALLY_COLUMNS)

    def to_dict(self) -> Dict[str, Any]:
        a_angles, b_angles = self.angles[:2], self.angles[2:]
        settings = []
        for ia, ib in SETTING_INDICES:
            settings.append({
                "setting": setting_label(ia, ib),
                "a": format_angle(a_angles[ia]),
                "b": format_angle(b_angles[ib]),
                "count": self.setting_count(ia, ib),
                "cells": [{"p": p, "q": q, "count": self.cell(ia, ib, p, q)} for p, q in OUTCOME_PAIRS],
            })
        return {"angles": angles_to_dict(self.angles), "runs": self.total, "settings": settings}


@dataclass(frozen=True)
class CHSHEstimate:
    """E_k per setting, S_k and its standard error after k runs."""
    correlators: Dict[Tuple[int, int], float]
    standard_errors: Dict[Tuple[int, int], float]
    s: float
    s_stderr: float
    runs: int

    def __post_init__(self):
        for key, value in self.correlators.items():
            if abs(value) > 1 + TOLERANCE:
                raise InputError(f"Correlator for {setting_label(*key)} outside [-1, 1]: {value!r}")
        if abs(self.s) > 4 + TOLERANCE:
            raise InputError(f"CHSH estimate outside [-4, 4]: {self.s!r}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "runs": self.runs,
            "correlators": {
                setting_label(*key): {
                    "E": tagged(value, "sampled"),
                    "stderr": tagged(self.standard_errors[key], "sampled"),
                }
                for key, value in self.correlators.items()
            },
            "S": tagged(self.s, "sampled"),
            "S_stderr": tagged(self.s_stderr, "sampled"),
        }


@dataclass
class SweepPoint:
    """One checkpoint of a convergence sweep; `estimate` is None when a setting is still empty."""
    runs: int
    tally: TallyTable
    estimate: Optional[CHSHEstimate]
    correlators: Dict[Tuple[int, int], Optional[float]] = field(default_factory=dict)
    gaps: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "runs": self.runs,
            "gaps": list(self.gaps),
            "correlators": {
                setting_label(*key): None if value is None else tagged(value, "sampled")
                for key, value in self.correlators.items()
            },
            "estimate": None if self.estimate is None else self.estimate.to_dict(),
        }


# -----------------------------
# Sampling
# -----------------------------

def outcome_table(cfg: ExperimentConfig) -> np.ndarray:
    """
    Conditional outcome probabilities for the configured source.

    Returns:
        Array [setting, outcome] with setting = 2*ia + ib and outcomes in OUTCOME_PAIRS order
    """
    table = np.zeros((4, 4))
    if cfg.source == "bell-measure":
        measure = bell_measure(*cfg.angles)
        for ia, ib in SETTING_INDICES:
            table[2 * ia + ib] = measure.block(ia, ib).as_array()
    else:
        for ia, ib in SETTING_INDICES:
            setting = SettingPair(cfg.a_angles[ia], cfg.b_angles[ib])
            table[2 * ia + ib] = closed_form_distribution(setting).as_array()
    return table


def experiment_stream(seed: int, stream_id: int = EXPERIMENT_STREAM_ID) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(stream_id,))


def _draw_indices(rng: np.random.Generator, n: int, thresholds: np.ndarray):
    """Draw n runs; returns index arrays (ia, ib, ip, iq)."""
    u = rng.random((n, 3))
    ia = (u[:, 0] >= 0.5).astype(np.int64)
    ib = (u[:, 1] >= 0.5).astype(np.int64)
    outcome = (u[:, 2:3] >= thresholds[2 * ia + ib]).sum(axis=1)
    return ia, ib, outcome // 2, outcome % 2


def _thresholds(probabilities: np.ndarray) -> np.ndarray:
    # First three cumulative sums; the fourth cell takes the remainder.
    return np.cumsum(probabilities, axis=1)[:, :3]


def _iter_batches(rng: np.random.Generator, runs: int, thresholds: np.ndarray):
    done = 0
    while done < runs:
        n = min(RUN_CHUNK, runs - done)
        yield _draw_indices(rng, n, thresholds)
        done += n


def _count(ia, ib, ip, iq) -> np.ndarray:
    flat = ((ia * 2 + ib) * 2 + ip) * 2 + iq
    return np.bincount(flat, minlength=16).reshape(2, 2, 2, 2)


def _tally_stream(args: Tuple) -> np.ndarray:
    """Worker body: counts of `runs` runs drawn from one seed sequence."""
    seed_sequence, runs, probabilities = args
    rng = np.random.Generator(np.random.SFC64(seed_sequence))
    thresholds = _thresholds(probabilities)
    counts = np.zeros((2, 2, 2, 2), dtype=np.int64)
    for batch in _iter_batches(rng, runs, thresholds):
        counts += _count(*batch)
    return counts


def _split_runs(runs: int, parts: int) -> List[int]:
    base, extra = divmod(runs, parts)
    return [base + (1 if i < extra else 0) for i in range(parts)]


def run_experiment(cfg: ExperimentConfig, verbose: bool = False) -> TallyTable:
    """
    Simulate cfg.runs runs of the experiment and tally them.

    Single-stream mode (cfg.parallel False) is bitwise reproducible and has the
    prefix property. Parallel mode splits the runs across cfg.workers child streams
    (default: CPU count - 1) and is reproducible for a fixed worker count.

    Args:
        cfg: Experiment configuration
        verbose: Print progress to stderr

    Returns:
        TallyTable of cfg.runs runs
    """
    probabilities = outcome_table(cfg)
    stream = experiment_stream(cfg.seed)

    if verbose:
        print(f"[*] Simulating {cfg.runs:,} runs (source: {cfg.source}, "
              f"mode: {'parallel' if cfg.parallel else 'single-stream'})", file=sys.stderr)

    counts = None
    if cfg.parallel:
        workers = cfg.workers or max(1, cpu_count() - 1)
        sizes = [n for n in _split_runs(cfg.runs, workers) if n > 0]
        jobs = [(child, n, probabilities) for child, n in zip(stream.spawn(len(sizes)), sizes)]
        try:
            with Pool(processes=min(workers, len(jobs))) as pool:
                partial = pool.map(_tally_stream, jobs)
            counts = sum(partial)
        except (OSError, RuntimeError) as e:
            # Sequential evaluation of the same child streams gives the same tally.
            if verbose:
                print(f"    [!] Warning: Parallel processing failed ({e}), falling back to sequential",
                      file=sys.stderr)
            counts = sum(_tally_stream(job) for job in jobs)
    else:
        counts = _tally_stream((stream, cfg.runs, probabilities))

    tally = TallyTable(cfg.angles, counts)
    if verbose:
        print(f"[+] Completed {tally.total:,} runs", file=sys.stderr)
    return tally


def merge_tallies(tables: Iterable[TallyTable]) -> TallyTable:
    """Cell-wise sum of tallies recorded at the same angles."""
    tables = list(tables)
    if not tables:
        raise InputError("merge_tallies needs at least one tally")
    merged = tables[0]
    for table in tables[1:]:
        merged = merged + table
    return merged


def simulate_runs(cfg: ExperimentConfig) -> pd.DataFrame:
    """
    Record-level view of the single-stream experiment: one row per run with
    columns a, b, p, q. Uses the same stream as run_experiment, so
    tally_from_records(simulate_runs(cfg), cfg.angles) equals run_experiment(cfg).
    """
    probabilities = outcome_table(cfg)
    rng = np.random.Generator(np.random.SFC64(experiment_stream(cfg.seed)))
    a_angles = np.array(cfg.a_angles)
    b_angles = np.array(cfg.b_angles)
    signs = np.array(OUTCOMES)
    frames = []
    for ia, ib, ip, iq in _iter_batches(rng, cfg.runs, _thresholds(probabilities)):
        frames.append(pd.DataFrame({
            "a": a_angles[ia],
            "b": b_angles[ib],
            "p": signs[ip],
            "q": signs[iq],
        }, columns=RECORD_COLUMNS))
    return pd.concat(frames, ignore_index=True)


def _angle_index(values: np.ndarray, choices: Sequence[float], name: str) -> np.ndarray:
    index = np.full(len(values), -1, dtype=np.int64)
    # Reverse order so the first matching angle wins when both are equal.
    for idx in reversed(range(len(choices))):
        index[np.abs(values - choices[idx]) <= TOLERANCE] = idx
    if np.any(index < 0):
        bad = values[index < 0][0]
        raise InputError(f"Record angle {name}={bad!r} is not one of the configured angles {tuple(choices)}")
    return index


def tally_from_records(records, angles: Tuple[float, float, float, float]) -> TallyTable:
    """Rebuild a TallyTable from run records: a DataFrame with columns a, b, p, q or an iterable of RunRecord."""
    if not isinstance(records, pd.DataFrame):
        records = pd.DataFrame([asdict(r) for r in records], columns=RECORD_COLUMNS)
    missing = [c for c in RECORD_COLUMNS if c not in records.columns]
    if missing:
        raise InputError(f"Run records are missing columns: {', '.join(missing)}")
    ia = _angle_index(records["a"].to_numpy(dtype=float), angles[:2], "a")
    ib = _angle_index(records["b"].to_numpy(dtype=float), angles[2:], "b")
    p = records["p"].to_numpy()
    q = records["q"].to_numpy()
    if not (np.isin(p, OUTCOMES).all() and np.isin(q, OUTCOMES).all()):
        raise InputError("Run outcomes must be +1 or -1")
    ip = (p == -1).astype(np.int64)
    iq = (q == -1).astype(np.int64)
    return TallyTable(angles, _count(ia, ib, ip, iq))


# -----------------------------
# Estimators
# -----------------------------

def _setting_key(t: TallyTable, setting: SettingPair) -> Tuple[int, int]:
    a_angles, b_angles = t.angles[:2], t.angles[2:]
    try:
        ia = next(i for i, a in enumerate(a_angles) if abs(a - setting.a) <= TOLERANCE)
        ib = next(j for j, b in enumerate(b_angles) if abs(b - setting.b) <= TOLERANCE)
    except StopIteration:
        raise InputError(f"Setting ({setting.a!r}, {setting.b!r}) is not a configured setting of this tally")
    return ia, ib


def _correlator(t: TallyTable, ia: int, ib: int) -> float:
    n = t.setting_count(ia, ib)
    if n == 0:
        raise EmptySettingError(setting_label(ia, ib))
    same = t.cell(ia, ib, 1, 1) + t.cell(ia, ib, -1, -1)
    different = t.cell(ia, ib, 1, -1) + t.cell(ia, ib, -1, 1)
    return (same - different) / n


def available_correlators(t: TallyTable) -> Dict[Tuple[int, int], float]:
    """E_k for every setting that has at least one run."""
    return {key: _correlator(t, *key) for key in SETTING_INDICES if t.setting_count(*key) > 0}


def estimate_E(t: TallyTable, setting: SettingPair) -> float:
    """
    E_k^(a,b) = (N(1,1) - N(1,-1) - N(-1,1) + N(-1,-1)) / N^(a,b).

    Raises:
        EmptySettingError: If no run visited the setting
    """
    return _correlator(t, *_setting_key(t, setting))


def estimate_S(t: TallyTable) -> CHSHEstimate:
    """
    S_k with standard error sqrt(sum_k (1 - E_k^2) / N_k), the root-sum-square of the
    per-setting errors of E_k (the variance of pq is 1 - E^2).

    Raises:
        EmptySettingError: For the first empty setting
    """
    correlators = {key: _correlator(t, *key) for key in SETTING_INDICES}
    errors = {
        key: math.sqrt(max(0.0, 1.0 - value ** 2) / t.setting_count(*key))
        for key, value in correlators.items()
    }
    s = sum(CHSH_SIGNS[key] * value for key, value in correlators.items())
    s_stderr = math.sqrt(sum(e ** 2 for e in errors.values()))
    return CHSHEstimate(correlators, errors, float(s), s_stderr, t.total)


def convergence_sweep(cfg: ExperimentConfig, checkpoints: Sequence[int], verbose: bool = False) -> List[SweepPoint]:
    """
    Estimates at increasing run counts from one growing single-stream run.

    The tally at checkpoint k equals run_experiment with runs=k and the same seed.
    Checkpoints where a setting is still unvisited yield a SweepPoint with gaps
    instead of aborting.

    Raises:
        InputError: If checkpoints are empty, non-positive or not strictly increasing
    """
    checkpoints = [int(k) for k in checkpoints]
    if not checkpoints:
        raise InputError("convergence_sweep needs at least one checkpoint")
    if checkpoints[0] < 1 or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise InputError(f"Checkpoints must be positive and strictly increasing, got {checkpoints}")

    thresholds = _thresholds(outcome_table(cfg))
    rng = np.random.Generator(np.random.SFC64(experiment_stream(cfg.seed)))
    counts = np.zeros((2, 2, 2, 2), dtype=np.int64)
    done = 0
    series = []
    for k in checkpoints:
        for batch in _iter_batches(rng, k - done, thresholds):
            counts += _count(*batch)
        done = k
        tally = TallyTable(cfg.angles, counts)
        empty = tally.empty_settings()
        visited = available_correlators(tally)
        correlators = {key: visited.get(key) for key in SETTING_INDICES}
        estimate = None if empty else estimate_S(tally)
        series.append(SweepPoint(k, tally, estimate, correlators, tuple(setting_label(*key) for key in empty)))
        if verbose:
            status = f"S_k = {estimate.s:.6f}" if estimate else f"gaps: {', '.join(setting_label(*e) for e in empty)}"
            print(f"  Checkpoint {k:,}: {status}", file=sys.stderr)
    return series


def sweep_to_dataframe(series: Sequence[SweepPoint], exact_s: Optional[float] = None) -> pd.DataFrame:
    """Tabular convergence series: runs, S, stderr, the four E_k and the gaps."""
    rows = []
    for point in series:
        row = {"runs": point.runs}
        for key in SETTING_INDICES:
            row[f"E{setting_label(*key)}"] = point.correlators.get(key)
        row["S"] = None if point.estimate is None else point.estimate.s
        row["S_stderr"] = None if point.estimate is None else point.estimate.s_stderr
        if exact_s is not None:
            row["deviation"] = None if point.estimate is None else abs(point.estimate.s - exact_s)
        row["gaps"] = ";".join(point.gaps)
        rows.append(row)
    return pd.DataFrame(rows)


# -----------------------------
# Diagnostics
# -----------------------------

def sampled_marginals(t: TallyTable) -> Dict[str, Dict[str, Any]]:
    """
    Per setting: frequency of eps_A = +1 and eps_B = +1 with z-scores against 1/2.

    Raises:
        EmptySettingError: If a setting has no runs
    """
    report = {}
    for ia, ib in SETTING_INDICES:
        n = t.setting_count(ia, ib)
        if n == 0:
            raise EmptySettingError(setting_label(ia, ib))
        block = t.counts[ia, ib]
        freq_A = block[0].sum() / n
        freq_B = block[:, 0].sum() / n
        sigma = math.sqrt(0.25 / n)
        report[setting_label(ia, ib)] = {
            "runs": n,
            "freq_A_plus": float(freq_A),
            "freq_B_plus": float(freq_B),
            "z_A": float((freq_A - 0.5) / sigma),
            "z_B": float((freq_B - 0.5) / sigma),
        }
    return report


def setting_occupancy(t: TallyTable) -> Dict[str, float]:
    """N^(a,b) / k for every setting."""
    total = t.total
    if total == 0:
        raise InputError("Occupancy of an empty tally is undefined")
    return {setting_label(*key): t.setting_count(*key) / total for key in SETTING_INDICES}


@dataclass
class SourceComparison:
    runs: int
    per_setting: Dict[str, Dict[str, float]]
    min_pvalue: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "runs_per_source": self.runs,
            "per_setting": {
                label: {
                    "chi2": tagged(values["chi2"], "sampled"),
                    "pvalue": tagged(values["pvalue"], "sampled"),
                    "dof": int(values["dof"]),
                }
                for label, values in self.per_setting.items()
            },
            "min_pvalue": tagged(self.min_pvalue, "sampled"),
        }


def compare_sources(cfg: ExperimentConfig) -> SourceComparison:
    """
    Chi-square homogeneity test between tallies drawn from the quantum closed form
    and from the BellMeasure blocks, on two independent child streams of
    SeedSequence(seed, spawn_key=(SOURCE_COMPARISON_STREAM_ID,)).
    Outcome cells that are empty in both tallies are dropped before testing.
    """
    quantum_cfg = ExperimentConfig(cfg.angles, cfg.runs, cfg.seed, "quantum-exact")
    measure_cfg = ExperimentConfig(cfg.angles, cfg.runs, cfg.seed, "bell-measure")
    first, second = experiment_stream(cfg.seed, SOURCE_COMPARISON_STREAM_ID).spawn(2)
    quantum = _tally_stream((first, cfg.runs, outcome_table(quantum_cfg)))
    measure = _tally_stream((second, cfg.runs, outcome_table(measure_cfg)))

    per_setting = {}
    for ia, ib in SETTING_INDICES:
        table = np.vstack([quantum[ia, ib].ravel(), measure[ia, ib].ravel()])
        table = table[:, table.sum(axis=0) > 0]
        if table.shape[1] < 2 or np.any(table.sum(axis=1) == 0):
            per_setting[setting_label(ia, ib)] = {"chi2": 0.0, "pvalue": 1.0, "dof": 0}
            continue
        chi2, pvalue, dof, _ = stats.chi2_contingency(table, correction=False)
        per_setting[setting_label(ia, ib)] = {"chi2": float(chi2), "pvalue": float(pvalue), "dof": int(dof)}
    return SourceComparison(
        runs=int(cfg.runs),
        per_setting=per_setting,
        min_pvalue=min(values["pvalue"] for values in per_setting.values()),
    )
