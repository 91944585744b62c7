"""
Local hidden-variable models and the CHSH bound |S| <= 2.

A LocalModel is a finite mixture over hidden-variable labels lambda. Its weights do
not depend on the settings (freedom) and its joint outcome law is defined as the
product of the two one-sided response laws (Bell locality), so the type itself is
the hypothesis class of the bound.

The CHSH value of a model is linear in the mixture weights and, for fixed lambda,
affine in each response probability. Its extremes over all local models are
therefore attained at the 16 deterministic strategies, where the value is +-2.
"""

from dataclasses import dataclass
from itertools import product
from multiprocessing import Pool, cpu_count
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from bellsim.core import (
    CHSH_SIGNS,
    LOCAL_BOUND,
    OUTCOMES,
    SETTING_INDICES,
    TOLERANCE,
    InputError,
)


# Sub-stream of the master seed reserved for random-model probing.
LHV_STREAM_ID = 1

# Models per independently seeded chunk; fixed so results do not depend on worker count.
PROBE_CHUNK_SIZE = 1_000

MAX_SUPPORT_SIZE = 8


# -----------------------------
# Data classes
# -----------------------------

@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed responses f(a1), f(a2) for Alice and g(b1), g(b2) for Bob, each +-1."""
    f: Tuple[int, int]
    g: Tuple[int, int]

    def __post_init__(self):
        for name, values in (("f", self.f), ("g", self.g)):
            if len(values) != 2 or any(v not in OUTCOMES for v in values):
                raise InputError(f"Strategy map {name} must give +1 or -1 for both settings, got {values!r}")

    def label(self) -> str:
        def sign(v):
            return "+" if v == 1 else "-"
        return f"f={sign(self.f[0])}{sign(self.f[1])},g={sign(self.g[0])}{sign(self.g[1])}"


@dataclass(frozen=True, eq=False)
class LocalModel:
    """
    Finite-lambda local model.

    response_A[k, i] is P(eps_A = +1 | gamma_A = a_i, lambda = k);
    response_B[k, j] is P(eps_B = +1 | gamma_B = b_j, lambda = k).
    """
    lambda_support: Tuple
    lambda_weights: np.ndarray
    response_A: np.ndarray
    response_B: np.ndarray

    def __post_init__(self):
        n = len(self.lambda_support)
        if n == 0:
            raise InputError("LocalModel needs at least one hidden-variable value")
        weights = np.array(self.lambda_weights, dtype=float, copy=True)
        response_A = np.array(self.response_A, dtype=float, copy=True)
        response_B = np.array(self.response_B, dtype=float, copy=True)
        if weights.shape != (n,):
            raise InputError(f"lambda_weights must have shape ({n},), got {weights.shape}")
        if response_A.shape != (n, 2) or response_B.shape != (n, 2):
            raise InputError(f"response tables must have shape ({n}, 2)")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(response_A)) and np.all(np.isfinite(response_B))):
            raise InputError("LocalModel entries must be finite")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > TOLERANCE:
            raise InputError(f"lambda_weights must be non-negative and sum to 1, got sum {weights.sum()!r}")
        for name, table in (("response_A", response_A), ("response_B", response_B)):
            if np.any(table < 0) or np.any(table > 1):
                raise InputError(f"{name} probabilities must lie in [0, 1]")
        for array in (weights, response_A, response_B):
            array.setflags(write=False)
        object.__setattr__(self, "lambda_support", tuple(self.lambda_support))
        object.__setattr__(self, "lambda_weights", weights)
        object.__setattr__(self, "response_A", response_A)
        object.__setattr__(self, "response_B", response_B)

    @classmethod
    def from_strategies(cls, strategies: Sequence[DeterministicStrategy], weights: Sequence[float]) -> "LocalModel":
        """Mixture of deterministic strategies, one lambda value per strategy."""
        response_A = np.array([[1.0 if v == 1 else 0.0 for v in s.f] for s in strategies])
        response_B = np.array([[1.0 if v == 1 else 0.0 for v in s.g] for s in strategies])
        return cls(tuple(s.label() for s in strategies), np.asarray(weights, dtype=float), response_A, response_B)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda_support": [str(x) for x in self.lambda_support],
            "lambda_weights": [{"value": float(w), "provenance": "exact"} for w in self.lambda_weights],
            "response_A": [[{"value": float(v), "provenance": "exact"} for v in row] for row in self.response_A],
            "response_B": [[{"value": float(v), "provenance": "exact"} for v in row] for row in self.response_B],
        }


# -----------------------------
# Deterministic strategies
# -----------------------------

def enumerate_deterministic_strategies() -> List[DeterministicStrategy]:
    """All 16 strategies, ordered by (f(a1), f(a2), g(b1), g(b2)) with +1 first."""
    return [
        DeterministicStrategy((f1, f2), (g1, g2))
        for f1, f2, g1, g2 in product(OUTCOMES, repeat=4)
    ]


def chsh_functional(s: DeterministicStrategy) -> int:
    """f(a1)g(b1) - f(a1)g(b2) + f(a2)g(b1) + f(a2)g(b2); always +-2."""
    return sum(CHSH_SIGNS[(i, j)] * s.f[i] * s.g[j] for i, j in SETTING_INDICES)


# -----------------------------
# Local models
# -----------------------------

def local_correlators(m: LocalModel) -> Dict[Tuple[int, int], float]:
    """E^(a,b) = sum_lambda w(lambda) * A(lambda, a) * B(lambda, b) with A = 2 r_A - 1."""
    expect_A = 2.0 * m.response_A - 1.0
    expect_B = 2.0 * m.response_B - 1.0
    return {
        (i, j): float(np.dot(m.lambda_weights, expect_A[:, i] * expect_B[:, j]))
        for i, j in SETTING_INDICES
    }


def local_model_chsh(m: LocalModel) -> float:
    """Signed CHSH sum of the model's correlators; lies in [-2, 2]."""
    correlators = local_correlators(m)
    return float(sum(CHSH_SIGNS[key] * value for key, value in correlators.items()))


def induced_distribution(m: LocalModel) -> np.ndarray:
    """
    Joint tables P(eps_A=p, eps_B=q | a_i, b_j) = sum_lambda w * P_A(p|a_i,lambda) * P_B(q|b_j,lambda).

    Returns:
        Array indexed [i, j, ip, iq] with index 0 meaning outcome +1
    """
    side_A = np.stack([m.response_A, 1.0 - m.response_A], axis=-1)  # [k, i, ip]
    side_B = np.stack([m.response_B, 1.0 - m.response_B], axis=-1)  # [k, j, iq]
    return np.einsum("k,kip,kjq->ijpq", m.lambda_weights, side_A, side_B)


def mix_models(first: LocalModel, second: LocalModel, weight: float) -> LocalModel:
    """Convex combination weight*first + (1-weight)*second over the union of their supports."""
    if not 0.0 <= weight <= 1.0:
        raise InputError(f"Mixing weight must lie in [0, 1], got {weight!r}")
    support = tuple(f"1:{x}" for x in first.lambda_support) + tuple(f"2:{x}" for x in second.lambda_support)
    return LocalModel(
        support,
        np.concatenate([weight * first.lambda_weights, (1.0 - weight) * second.lambda_weights]),
        np.vstack([first.response_A, second.response_A]),
        np.vstack([first.response_B, second.response_B]),
    )


def random_local_model(rng: np.random.Generator, max_support: int = MAX_SUPPORT_SIZE) -> LocalModel:
    """Support size uniform in 1..max_support, Dirichlet(1) weights, uniform responses."""
    n = int(rng.integers(1, max_support + 1))
    weights = rng.dirichlet(np.ones(n))
    weights = weights / weights.sum()
    return LocalModel(tuple(range(n)), weights, rng.random((n, 2)), rng.random((n, 2)))


# -----------------------------
# Bound probing
# -----------------------------

@dataclass
class BoundProbeReport:
    trials: int
    max_abs_s: float
    bound_respected: bool
    witness: Optional[LocalModel]
    min_distance_to_target: Optional[float] = None
    extremes_included: bool = True

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trials": self.trials,
            "extremes_included": self.extremes_included,
            "max_abs_s": {"value": self.max_abs_s, "provenance": "exact"},
            "bound": {"value": LOCAL_BOUND, "provenance": "exact"},
            "bound_respected": self.bound_respected,
            "witness_model": None if self.witness is None else self.witness.to_dict(),
            "min_distance_to_target": None if self.min_distance_to_target is None
            else {"value": self.min_distance_to_target, "provenance": "exact"},
        }


def _probe_chunk(args: Tuple) -> Tuple[float, Optional[int], Optional[float]]:
    """Evaluate one seeded chunk of random models; returns (max |S|, index of witness, min distance)."""
    seed_sequence, count, target_tables = args
    rng = np.random.Generator(np.random.SFC64(seed_sequence))
    best, best_idx, min_distance = -1.0, None, None
    for idx in range(count):
        model = random_local_model(rng)
        value = abs(local_model_chsh(model))
        if value > best:
            best, best_idx = value, idx
        if target_tables is not None:
            distance = float(np.max(np.abs(induced_distribution(model) - target_tables)))
            min_distance = distance if min_distance is None else min(min_distance, distance)
    return best, best_idx, min_distance


def _regenerate(seed_sequence: np.random.SeedSequence, idx: int) -> LocalModel:
    rng = np.random.Generator(np.random.SFC64(seed_sequence))
    for _ in range(idx):
        random_local_model(rng)
    return random_local_model(rng)


def verify_chsh_bound(trials: int, seed: int, include_extremes: bool = True, target=None,
                      workers: Optional[int] = None, verbose: bool = False) -> BoundProbeReport:
    """
    Probe |S| <= 2 on `trials` random local models.

    Models are drawn in fixed-size chunks, each from its own child of the
    SeedSequence(seed, spawn_key=(LHV_STREAM_ID,)) stream, and merged by
    max-reduction, so the report is the same for any worker count.

    Args:
        trials: Number of random models (>= 1)
        seed: Master seed
        include_extremes: Also evaluate the 16 deterministic strategies
        target: Optional BellMeasure; the report then carries the smallest max-norm
                distance between a sampled model's joint tables and the target blocks
        workers: Process count; None or 1 runs in-process

    Returns:
        BoundProbeReport with the largest |S| found and a witness model
    """
    if isinstance(trials, bool) or int(trials) != trials or trials < 1:
        raise InputError(f"trials must be a positive integer, got {trials!r}")
    target_tables = None if target is None else target_tables_of(target)

    stream = np.random.SeedSequence(seed, spawn_key=(LHV_STREAM_ID,))
    n_chunks = -(-int(trials) // PROBE_CHUNK_SIZE)
    children = stream.spawn(n_chunks)
    sizes = [PROBE_CHUNK_SIZE] * (n_chunks - 1) + [int(trials) - PROBE_CHUNK_SIZE * (n_chunks - 1)]
    jobs = [(child, size, target_tables) for child, size in zip(children, sizes)]

    if verbose:
        print(f"[*] Probing {int(trials):,} random local models in {n_chunks} chunk(s)...")

    results = None
    if workers is not None and workers > 1 and n_chunks > 1:
        try:
            with Pool(processes=min(workers, n_chunks, cpu_count())) as pool:
                results = pool.map(_probe_chunk, jobs)
        except (OSError, RuntimeError) as e:
            if verbose:
                print(f"    [!] Warning: Parallel probing failed ({e}), falling back to sequential")
    if results is None:
        results = [_probe_chunk(job) for job in jobs]

    best, witness = -1.0, None
    min_distance = None
    for chunk_idx, (value, idx, distance) in enumerate(results):
        if value > best:
            best, witness = value, (chunk_idx, idx)
        if distance is not None:
            min_distance = distance if min_distance is None else min(min_distance, distance)
    witness_model = _regenerate(children[witness[0]], witness[1])

    if include_extremes:
        for strategy in enumerate_deterministic_strategies():
            value = abs(float(chsh_functional(strategy)))
            if value > best:
                best, witness_model = value, LocalModel.from_strategies([strategy], [1.0])

    if verbose:
        print(f"[+] Largest |S| found: {best:.12f}")

    return BoundProbeReport(
        trials=int(trials),
        max_abs_s=best,
        bound_respected=best <= LOCAL_BOUND + TOLERANCE,
        witness=witness_model,
        min_distance_to_target=min_distance,
        extremes_included=include_extremes,
    )


# -----------------------------
# Best local approximation
# -----------------------------

@dataclass
class LocalApproximation:
    model: LocalModel
    strategy: DeterministicStrategy
    achieved_s: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "strategy": self.strategy.label(),
            "achieved_s": {"value": self.achieved_s, "provenance": "exact"},
            "model": self.model.to_dict(),
        }


def best_local_approximation(target) -> LocalApproximation:
    """
    Maximise the CHSH functional over local models.

    The objective is linear in the mixture weights, so the optimum sits at a
    deterministic strategy; the first maximiser in enumeration order is returned as a
    one-point mixture. The target only labels the settings: its correlations do
    not enter the objective, so the achieved value is 2 whatever the target.
    """
    strategies = enumerate_deterministic_strategies()
    values = [chsh_functional(s) for s in strategies]
    best = strategies[int(np.argmax(values))]
    model = LocalModel.from_strategies([best], [1.0])
    return LocalApproximation(model=model, strategy=best, achieved_s=local_model_chsh(model))


def target_tables_of(target) -> np.ndarray:
    """Conditional blocks n^(a,b)(p,q) of a BellMeasure as an array [i, j, ip, iq]."""
    tables = np.zeros((2, 2, 2, 2))
    for i, j in SETTING_INDICES:
        total = target.weights[i, j].sum()
        tables[i, j] = target.weights[i, j] / total
    return tables


def _strategy_tables(strategy: DeterministicStrategy) -> np.ndarray:
    tables = np.zeros((2, 2, 2, 2))
    for i, j in SETTING_INDICES:
        tables[i, j, OUTCOMES.index(strategy.f[i]), OUTCOMES.index(strategy.g[j])] = 1.0
    return tables


@dataclass
class PolytopeDistance:
    distance: float
    model: LocalModel
    achieved_s: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "distance": {"value": self.distance, "provenance": "exact"},
            "achieved_s": {"value": self.achieved_s, "provenance": "exact"},
            "model": self.model.to_dict(),
        }


def local_polytope_distance(target) -> PolytopeDistance:
    """
    Smallest max-norm distance between the target blocks and the joint tables of
    any local model, solved as a linear programme over mixtures of the 16
    deterministic strategies:

        minimise t  subject to  |sum_s w_s D_s(cell) - n(cell)| <= t for all 16 cells,
                                sum_s w_s = 1, w >= 0.

    Returns:
        PolytopeDistance with the optimal distance and mixture

    Raises:
        ArithmeticError: If the solver does not report success
    """
    strategies = enumerate_deterministic_strategies()
    columns = np.array([_strategy_tables(s).ravel() for s in strategies]).T  # 16 cells x 16 strategies
    goal = target_tables_of(target).ravel()
    n_cells, n_strategies = columns.shape

    # variables: w_1..w_16, t
    cost = np.zeros(n_strategies + 1)
    cost[-1] = 1.0
    ones = np.ones((n_cells, 1))
    a_ub = np.vstack([np.hstack([columns, -ones]), np.hstack([-columns, -ones])])
    b_ub = np.concatenate([goal, -goal])
    a_eq = np.hstack([np.ones((1, n_strategies)), np.zeros((1, 1))])
    b_eq = np.array([1.0])
    bounds = [(0.0, None)] * n_strategies + [(0.0, None)]

    result = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if not result.success:
        raise ArithmeticError(f"Local-polytope LP failed: {result.message}")

    weights = np.clip(result.x[:n_strategies], 0.0, None)
    weights = weights / weights.sum()
    keep = [idx for idx, w in enumerate(weights) if w > TOLERANCE]
    kept_weights = weights[keep] / weights[keep].sum()
    model = LocalModel.from_strategies([strategies[idx] for idx in keep], kept_weights)
    return PolytopeDistance(distance=float(result.x[-1]), model=model, achieved_s=local_model_chsh(model))
