"""
Quantum description of the Bell experiment on C^2 (x) C^2.

Builds the joint PVM P^(a,b) an outside observer uses for the outcome pair,
the local PVMs of the two sides, the Bell state, Born-rule distributions, and
the numerical check that the local PVMs are the normalised partial traces of
the joint one.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from bellsim.core import (
    OUTCOME_PAIRS,
    OUTCOMES,
    SETTING_INDICES,
    TOLERANCE,
    InputError,
    NumericConsistencyError,
    check_finite,
)
from bellsim.tensor_algebra import (
    adjoint,
    as_matrix,
    as_state,
    identity,
    max_abs_deviation,
    partial_trace_A,
    partial_trace_B,
    pauli3_projector,
    rotation,
    scale,
    tensor_product,
)


# -----------------------------
# Data classes
# -----------------------------

@dataclass(frozen=True)
class SettingPair:
    """Polariser configuration (a, b) in radians."""
    a: float
    b: float

    def __post_init__(self):
        check_finite(self.a, "setting angle a")
        check_finite(self.b, "setting angle b")


@dataclass(frozen=True, eq=False)
class PVM:
    """
    Projection-valued measure on a finite, ordered outcome set.

    Construction only checks shapes and outcome labels. Hermiticity, idempotency,
    orthogonality and completeness are measured by pvm_invariant_report, so a
    deliberately broken PVM can still be built and reported on.
    """
    outcomes: Tuple
    projectors: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.outcomes) != len(self.projectors) or not self.outcomes:
            raise InputError("PVM needs one projector per outcome")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise InputError("PVM outcomes must be distinct")
        frozen = tuple(as_matrix(p) for p in self.projectors)
        if len({p.shape for p in frozen}) != 1:
            raise InputError("PVM projectors must all share one dimension")
        object.__setattr__(self, "projectors", frozen)

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def projector(self, *outcome) -> np.ndarray:
        """Projector for an outcome; joint outcomes may be given as projector(p, q)."""
        key = outcome[0] if len(outcome) == 1 else tuple(outcome)
        try:
            return self.projectors[self.outcomes.index(key)]
        except ValueError:
            raise InputError(f"Unknown outcome {key!r}; outcomes are {self.outcomes}")

    def replace(self, outcome, projector: np.ndarray) -> "PVM":
        """Copy with one projector swapped out (fault injection in verification)."""
        idx = self.outcomes.index(outcome)
        projectors = list(self.projectors)
        projectors[idx] = projector
        return PVM(self.outcomes, tuple(projectors))


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probability table over an ordered outcome set."""
    outcomes: Tuple
    probabilities: Tuple[float, ...]

    def __post_init__(self):
        if len(self.outcomes) != len(self.probabilities):
            raise InputError("One probability per outcome is required")
        probs = tuple(float(p) for p in self.probabilities)
        for outcome, p in zip(self.outcomes, probs):
            if p < -TOLERANCE or p > 1 + TOLERANCE:
                raise NumericConsistencyError(f"Probability of {outcome} outside [0, 1]: {p!r}")
        total = sum(probs)
        if abs(total - 1.0) > TOLERANCE:
            raise NumericConsistencyError(f"Distribution sums to {total!r}, not 1")
        object.__setattr__(self, "probabilities", probs)

    def __getitem__(self, outcome) -> float:
        try:
            return self.probabilities[self.outcomes.index(outcome)]
        except ValueError:
            raise InputError(f"Unknown outcome {outcome!r}; outcomes are {self.outcomes}")

    def as_array(self) -> np.ndarray:
        return np.array(self.probabilities)

    def correlator(self) -> float:
        """E = sum of p*q*n(p,q) over the joint outcome space."""
        return float(sum(p * q * prob for (p, q), prob in zip(self.outcomes, self.probabilities)))

    def to_dict(self) -> Dict[str, float]:
        return {_outcome_label(o): prob for o, prob in zip(self.outcomes, self.probabilities)}


def _outcome_label(outcome) -> str:
    if isinstance(outcome, tuple):
        return "(" + ",".join(f"{v:+d}" for v in outcome) + ")"
    return f"{outcome:+d}"


# -----------------------------
# States and projectors
# -----------------------------

def bell_state() -> np.ndarray:
    """h_Bell = (|00> + |11>)/sqrt(2) under the 2*i_A + i_B convention."""
    amp = 1.0 / np.sqrt(2.0)
    return as_state([amp, 0.0, 0.0, amp])


def rotated_projector(gamma: float, p: int) -> np.ndarray:
    """R_gamma^* P_3({p}) R_gamma."""
    r = rotation(gamma)
    return as_matrix(adjoint(r) @ pauli3_projector(p) @ r)


def joint_pvm(s: SettingPair) -> PVM:
    """P^(a,b)({(p,q)}) = R_a^* P_3({p}) R_a (x) R_b^* P_3({q}) R_b over OUTCOME_PAIRS."""
    projectors = tuple(
        tensor_product(rotated_projector(s.a, p), rotated_projector(s.b, q))
        for p, q in OUTCOME_PAIRS
    )
    return PVM(OUTCOME_PAIRS, projectors)


def local_pvm_A(a: float) -> PVM:
    """P_A^(a)({p}) = R_a^* P_3({p}) R_a (x) I."""
    return PVM(OUTCOMES, tuple(tensor_product(rotated_projector(a, p), identity(2)) for p in OUTCOMES))


def local_pvm_B(b: float) -> PVM:
    """P_B^(b)({q}) = I (x) R_b^* P_3({q}) R_b."""
    return PVM(OUTCOMES, tuple(tensor_product(identity(2), rotated_projector(b, q)) for q in OUTCOMES))


# -----------------------------
# Born rule
# -----------------------------

def born_distribution(pvm: PVM, psi: np.ndarray) -> OutcomeDistribution:
    """
    Outcome probabilities <P(o) psi, psi> for every outcome of `pvm`.

    Raises:
        InputError: If the PVM and state dimensions differ
        NumericConsistencyError: If a probability has an imaginary part above TOLERANCE
    """
    psi = as_state(psi)
    if psi.shape[0] != pvm.dim:
        raise InputError(f"PVM dimension {pvm.dim} does not match state dimension {psi.shape[0]}")
    probabilities = []
    for outcome, projector in zip(pvm.outcomes, pvm.projectors):
        value = np.vdot(psi, projector @ psi)
        if abs(value.imag) > TOLERANCE:
            raise NumericConsistencyError(
                f"Born probability of {outcome} has imaginary residue {value.imag!r}"
            )
        probabilities.append(value.real)
    return OutcomeDistribution(pvm.outcomes, tuple(probabilities))


def closed_form_distribution(s: SettingPair) -> OutcomeDistribution:
    """n^(a,b)(p,q) = cos^2(a-b)/2 if p = q else sin^2(a-b)/2."""
    same = 0.5 * np.cos(s.a - s.b) ** 2
    different = 0.5 * np.sin(s.a - s.b) ** 2
    return OutcomeDistribution(
        OUTCOME_PAIRS,
        tuple(same if p == q else different for p, q in OUTCOME_PAIRS),
    )


def marginalize(distribution: OutcomeDistribution, side: str) -> OutcomeDistribution:
    """Sum a joint distribution over the other side's outcome ('A' keeps p, 'B' keeps q)."""
    if side not in ("A", "B"):
        raise InputError(f"side must be 'A' or 'B', got {side!r}")
    keep = 0 if side == "A" else 1
    totals = {o: 0.0 for o in OUTCOMES}
    for outcome, prob in zip(distribution.outcomes, distribution.probabilities):
        totals[outcome[keep]] += prob
    return OutcomeDistribution(OUTCOMES, tuple(totals[o] for o in OUTCOMES))


# -----------------------------
# PVM invariants
# -----------------------------

@dataclass(frozen=True)
class PVMInvariantReport:
    hermiticity: float
    idempotency: float
    orthogonality: float
    completeness: float

    @property
    def worst(self) -> float:
        return max(self.hermiticity, self.idempotency, self.orthogonality, self.completeness)

    def holds(self, tol: float = TOLERANCE) -> bool:
        return self.worst <= tol

    def failing(self, tol: float = TOLERANCE) -> Tuple[str, ...]:
        names = ("hermiticity", "idempotency", "orthogonality", "completeness")
        return tuple(n for n in names if getattr(self, n) > tol)


def pvm_invariant_report(pvm: PVM) -> PVMInvariantReport:
    """Maximum entry deviations of the four PVM invariants."""
    zero = np.zeros((pvm.dim, pvm.dim), dtype=np.complex128)
    hermiticity = max(max_abs_deviation(p, adjoint(p)) for p in pvm.projectors)
    idempotency = max(max_abs_deviation(p @ p, p) for p in pvm.projectors)
    orthogonality = max(
        (max_abs_deviation(p @ q, zero) for p, q in combinations(pvm.projectors, 2)),
        default=0.0,
    )
    completeness = max_abs_deviation(sum(pvm.projectors), identity(pvm.dim))
    return PVMInvariantReport(hermiticity, idempotency, orthogonality, completeness)


# -----------------------------
# Normalised partial traces
# -----------------------------

@dataclass(frozen=True)
class PartialTraceReport:
    setting: SettingPair
    deviation_A: float
    deviation_B: float

    @property
    def max_deviation(self) -> float:
        return max(self.deviation_A, self.deviation_B)


def verify_partial_trace_theorem(s: SettingPair, pvm: Optional[PVM] = None) -> PartialTraceReport:
    """
    Compare (1/dim C^2) tr_B of the joint PVM, marginalised over q, with R_a^* P_3({p}) R_a,
    and (1/dim C^2) tr_A marginalised over p with R_b^* P_3({q}) R_b.

    Args:
        s: Setting pair
        pvm: Joint PVM to test; joint_pvm(s) when omitted

    Returns:
        PartialTraceReport with the maximum entry deviation on each side
    """
    pvm = joint_pvm(s) if pvm is None else pvm
    normalisation = 1.0 / 2  # 1 / dim(C^2)
    deviation_A = 0.0
    for p in OUTCOMES:
        marginal = sum(pvm.projector(p, q) for q in OUTCOMES)
        reduced = scale(partial_trace_B(marginal), normalisation)
        deviation_A = max(deviation_A, max_abs_deviation(reduced, rotated_projector(s.a, p)))
    deviation_B = 0.0
    for q in OUTCOMES:
        marginal = sum(pvm.projector(p, q) for p in OUTCOMES)
        reduced = scale(partial_trace_A(marginal), normalisation)
        deviation_B = max(deviation_B, max_abs_deviation(reduced, rotated_projector(s.b, q)))
    return PartialTraceReport(s, deviation_A, deviation_B)


def commutator_diagnostic(angles: Tuple[float, float, float, float]) -> Dict[str, float]:
    """
    Largest entry of [P^(s)(o), P^(t)(o')] over outcome pairs, for every pair of
    distinct configured settings s, t. Informational only.
    """
    a_angles, b_angles = angles[:2], angles[2:]
    pvms = {
        (i, j): joint_pvm(SettingPair(a_angles[i], b_angles[j]))
        for i, j in SETTING_INDICES
    }
    report = {}
    for s, t in combinations(SETTING_INDICES, 2):
        worst = 0.0
        for p in pvms[s].projectors:
            for q in pvms[t].projectors:
                worst = max(worst, float(np.max(np.abs(p @ q - q @ p))))
        report[f"a{s[0] + 1}b{s[1] + 1}|a{t[0] + 1}b{t[1] + 1}"] = worst
    return report


def random_settings(count: int, rng: np.random.Generator) -> Iterable[SettingPair]:
    """`count` settings with both angles uniform on [0, 2*pi)."""
    for a, b in rng.uniform(0.0, 2.0 * np.pi, size=(count, 2)):
        yield SettingPair(float(a), float(b))
