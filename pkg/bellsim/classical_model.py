"""
Classical probability model of the Bell experiment.

The sample space is Omega_Bell = {+-1}^2 x {a1, a2} x {b1, b2}; P_Bell is the
uniform mixture of the four setting blocks, each block carrying the quantum
prediction n^(a,b)(p,q). All queries are exact finite sums over the 16 points,
which makes this module the oracle for the Monte-Carlo simulation.
"""

from dataclasses import dataclass
from typing import Any, Dict, Mapping, Optional, Tuple
import math
import warnings

import numpy as np
import pandas as pd

from bellsim.core import (
    CHSH_SIGNS,
    OUTCOME_PAIRS,
    OUTCOMES,
    SETTING_INDICES,
    TOLERANCE,
    InputError,
    NumericConsistencyError,
    ZeroProbabilityConditionError,
    angles_to_dict,
    check_finite,
    format_angle,
)
from bellsim.quantum_model import (
    OutcomeDistribution,
    SettingPair,
    bell_state,
    born_distribution,
    closed_form_distribution,
    joint_pvm,
)


VARIABLES = ("eps_A", "eps_B", "gamma_A", "gamma_B")


# -----------------------------
# Data classes
# -----------------------------

@dataclass(frozen=True, eq=False)
class BellMeasure:
    """
    P_Bell over the 16 points (p, q, a, b).

    `weights[ia, ib, ip, iq]` is the probability of setting (a_ia, b_ib) with outcome
    (OUTCOMES[ip], OUTCOMES[iq]); index 0 is outcome +1.
    """
    angles: Tuple[float, float, float, float]
    weights: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float, copy=True)
        if weights.shape != (2, 2, 2, 2):
            raise InputError(f"BellMeasure weights must have shape (2, 2, 2, 2), got {weights.shape}")
        if np.any(weights < -TOLERANCE):
            raise NumericConsistencyError("BellMeasure weights must be non-negative")
        if abs(weights.sum() - 1.0) > TOLERANCE:
            raise NumericConsistencyError(f"BellMeasure weights sum to {weights.sum()!r}, not 1")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "angles", tuple(float(x) for x in self.angles))

    @property
    def a_angles(self) -> Tuple[float, float]:
        return self.angles[0], self.angles[1]

    @property
    def b_angles(self) -> Tuple[float, float]:
        return self.angles[2], self.angles[3]

    def setting(self, ia: int, ib: int) -> SettingPair:
        return SettingPair(self.a_angles[ia], self.b_angles[ib])

    def block_weight(self, ia: int, ib: int) -> float:
        return float(self.weights[ia, ib].sum())

    def block(self, ia: int, ib: int) -> OutcomeDistribution:
        """Conditional law n^(a,b) of the outcome pair given setting (a_ia, b_ib)."""
        total = self.block_weight(ia, ib)
        if total <= 0:
            raise ZeroProbabilityConditionError(f"gamma_A=a{ia + 1}, gamma_B=b{ib + 1}")
        cells = self.weights[ia, ib] / total
        return OutcomeDistribution(
            OUTCOME_PAIRS,
            tuple(float(cells[OUTCOMES.index(p), OUTCOMES.index(q)]) for p, q in OUTCOME_PAIRS),
        )

    def to_dict(self) -> Dict[str, Any]:
        """Canonical document: angles plus the 16 weights in setting/outcome order."""
        points = []
        for ia, ib in SETTING_INDICES:
            for p, q in OUTCOME_PAIRS:
                points.append({
                    "a": format_angle(self.a_angles[ia]),
                    "b": format_angle(self.b_angles[ib]),
                    "p": p,
                    "q": q,
                    "weight": {"value": float(self.weights[ia, ib, OUTCOMES.index(p), OUTCOMES.index(q)]),
                               "provenance": "exact"},
                })
        return {"angles": angles_to_dict(self.angles), "points": points}

    def to_dataframe(self) -> pd.DataFrame:
        rows = []
        for ia, ib in SETTING_INDICES:
            for p, q in OUTCOME_PAIRS:
                rows.append({
                    "a": self.a_angles[ia],
                    "b": self.b_angles[ib],
                    "p": p,
                    "q": q,
                    "weight": float(self.weights[ia, ib, OUTCOMES.index(p), OUTCOMES.index(q)]),
                })
        return pd.DataFrame(rows, columns=["a", "b", "p", "q", "weight"])


@dataclass(frozen=True)
class ConditionalQuery:
    """
    P(target | condition) over the variables eps_A, eps_B (values +-1) and
    gamma_A, gamma_B (angles in radians).
    """
    target: Mapping[str, float]
    condition: Mapping[str, float]

    def __post_init__(self):
        if not self.target:
            raise InputError("ConditionalQuery needs at least one target assignment")
        for part in (self.target, self.condition):
            for name, value in part.items():
                if name not in VARIABLES:
                    raise InputError(f"Unknown variable {name!r}; expected one of {VARIABLES}")
                if name.startswith("eps") and value not in OUTCOMES:
                    raise InputError(f"{name} must be +1 or -1, got {value!r}")
                if name.startswith("gamma"):
                    check_finite(value, name)
        overlap = set(self.target) & set(self.condition)
        if overlap:
            raise InputError(f"Target and condition share variables: {', '.join(sorted(overlap))}")


def _describe(event: Mapping[str, float]) -> str:
    parts = []
    for name, value in event.items():
        parts.append(f"{name}={format_angle(value) if name.startswith('gamma') else f'{int(value):+d}'}")
    return ", ".join(parts) if parts else "(certain event)"


# -----------------------------
# Construction
# -----------------------------

def _check_angles(a1: float, a2: float, b1: float, b2: float) -> Tuple[float, float, float, float]:
    angles = tuple(check_finite(v, name) for v, name in zip((a1, a2, b1, b2), ("a1", "a2", "b1", "b2")))
    if math.isclose(angles[0], angles[1], abs_tol=TOLERANCE) or math.isclose(angles[2], angles[3], abs_tol=TOLERANCE):
        warnings.warn(
            f"Degenerate polariser angles (a1={format_angle(angles[0])}, a2={format_angle(angles[1])}, "
            f"b1={format_angle(angles[2])}, b2={format_angle(angles[3])}); the measure stays well-defined "
            f"but equal-angle settings cannot be told apart by angle",
            UserWarning,
            stacklevel=3,
        )
    return angles


def _measure_from_blocks(angles, block_fn) -> BellMeasure:
    weights = np.zeros((2, 2, 2, 2))
    for ia, ib in SETTING_INDICES:
        distribution = block_fn(SettingPair(angles[ia], angles[2 + ib]))
        for (p, q), prob in zip(distribution.outcomes, distribution.probabilities):
            weights[ia, ib, OUTCOMES.index(p), OUTCOMES.index(q)] = 0.25 * prob
    return BellMeasure(angles, weights)


def bell_measure(a1: float, a2: float, b1: float, b2: float) -> BellMeasure:
    """
    P_Bell = (P^(a1,b1) + P^(a1,b2) + P^(a2,b1) + P^(a2,b2)) / 4 with the closed-form blocks.

    Raises:
        InputError: If an angle is not finite
    """
    angles = _check_angles(a1, a2, b1, b2)
    return _measure_from_blocks(angles, closed_form_distribution)


def bell_measure_from_born(a1: float, a2: float, b1: float, b2: float) -> BellMeasure:
    """Same measure with each block computed as <P^(a,b)({(p,q)}) h_Bell, h_Bell>."""
    angles = _check_angles(a1, a2, b1, b2)
    psi = bell_state()
    return _measure_from_blocks(angles, lambda s: born_distribution(joint_pvm(s), psi))


def uniform_measure(a1: float, a2: float, b1: float, b2: float) -> BellMeasure:
    """Every one of the 16 points at weight 1/16 (product of uniform marginals)."""
    angles = _check_angles(a1, a2, b1, b2)
    return BellMeasure(angles, np.full((2, 2, 2, 2), 1.0 / 16))


# -----------------------------
# Queries
# -----------------------------

def _event_mask(m: BellMeasure, event: Mapping[str, float]) -> np.ndarray:
    mask = np.ones((2, 2, 2, 2), dtype=bool)
    for ia in range(2):
        for ib in range(2):
            for ip, p in enumerate(OUTCOMES):
                for iq, q in enumerate(OUTCOMES):
                    point = {"eps_A": p, "eps_B": q, "gamma_A": m.a_angles[ia], "gamma_B": m.b_angles[ib]}
                    for name, value in event.items():
                        if name.startswith("gamma"):
                            if not math.isclose(point[name], value, abs_tol=TOLERANCE):
                                mask[ia, ib, ip, iq] = False
                        elif point[name] != value:
                            mask[ia, ib, ip, iq] = False
    return mask


def event_probability(m: BellMeasure, event: Mapping[str, float]) -> float:
    """P_Bell(event) by summation over the matching points."""
    return float(m.weights[_event_mask(m, event)].sum())


def conditional_probability(m: BellMeasure, query: ConditionalQuery) -> float:
    """
    P_Bell(target | condition) by direct summation over the 16 points.

    Raises:
        ZeroProbabilityConditionError: If the condition has probability zero under m
    """
    condition_mass = event_probability(m, query.condition)
    if condition_mass <= 0.0:
        raise ZeroProbabilityConditionError(_describe(query.condition))
    joint = dict(query.condition)
    joint.update(query.target)
    return event_probability(m, joint) / condition_mass


def _setting_index(values: Tuple[float, float], angle: float, name: str) -> int:
    for idx, value in enumerate(values):
        if math.isclose(value, angle, abs_tol=TOLERANCE):
            return idx
    raise InputError(f"{name}={format_angle(angle)} is not a configured setting ({', '.join(format_angle(v) for v in values)})")


def marginal_A(m: BellMeasure, a: float, b: float) -> OutcomeDistribution:
    """
    P_Bell,A(eps_A = p | gamma_A = a) computed as sum_q P_Bell(p, q | a, b).

    Raises:
        InputError: If (a, b) is not one of the configured settings
    """
    ia = _setting_index(m.a_angles, a, "a")
    ib = _setting_index(m.b_angles, b, "b")
    block = m.block(ia, ib)
    return OutcomeDistribution(OUTCOMES, tuple(sum(block[(p, q)] for q in OUTCOMES) for p in OUTCOMES))


def marginal_B(m: BellMeasure, a: float, b: float) -> OutcomeDistribution:
    """P_Bell,B(eps_B = q | gamma_B = b) computed as sum_p P_Bell(p, q | a, b)."""
    ia = _setting_index(m.a_angles, a, "a")
    ib = _setting_index(m.b_angles, b, "b")
    block = m.block(ia, ib)
    return OutcomeDistribution(OUTCOMES, tuple(sum(block[(p, q)] for p in OUTCOMES) for q in OUTCOMES))


# -----------------------------
# Locality checks
# -----------------------------

@dataclass(frozen=True)
class FactorizationReport:
    holds: bool
    worst_deviation: float
    witness_setting: Optional[SettingPair]
    witness_outcome: Optional[Tuple[int, int]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "holds": self.holds,
            "worst_deviation": {"value": self.worst_deviation, "provenance": "exact"},
            "witness_setting": None if self.witness_setting is None else {
                "a": format_angle(self.witness_setting.a), "b": format_angle(self.witness_setting.b)},
            "witness_outcome": None if self.witness_outcome is None else list(self.witness_outcome),
        }


def check_A3_factorization(m: BellMeasure, tol: float = TOLERANCE) -> FactorizationReport:
    """
    Compare P(eps_A=p, eps_B=q | a, b) with P(eps_A=p | gamma_A=a) * P(eps_B=q | gamma_B=b)
    for every setting and outcome pair.

    Returns:
        FactorizationReport; `holds` is False when the worst deviation exceeds `tol`.
        The witness is the first setting/outcome (canonical order) attaining the maximum.
    """
    worst, witness_setting, witness_outcome = 0.0, None, None
    for ia, ib in SETTING_INDICES:
        a, b = m.a_angles[ia], m.b_angles[ib]
        for p, q in OUTCOME_PAIRS:
            joint = conditional_probability(
                m, ConditionalQuery({"eps_A": p, "eps_B": q}, {"gamma_A": a, "gamma_B": b}))
            side_a = conditional_probability(m, ConditionalQuery({"eps_A": p}, {"gamma_A": a}))
            side_b = conditional_probability(m, ConditionalQuery({"eps_B": q}, {"gamma_B": b}))
            deviation = abs(joint - side_a * side_b)
            if deviation > worst:
                worst, witness_setting, witness_outcome = deviation, SettingPair(a, b), (p, q)
    return FactorizationReport(worst <= tol, worst, witness_setting, witness_outcome)


@dataclass(frozen=True)
class JarrettReport:
    parameter_independence: bool
    parameter_deviation: float
    outcome_independence: bool
    outcome_deviation: float

    @property
    def bell_local(self) -> bool:
        return self.parameter_independence and self.outcome_independence

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parameter_independence": self.parameter_independence,
            "parameter_deviation": {"value": self.parameter_deviation, "provenance": "exact"},
            "outcome_independence": self.outcome_independence,
            "outcome_deviation": {"value": self.outcome_deviation, "provenance": "exact"},
            "bell_local": self.bell_local,
        }


def check_jarrett_locality(m: BellMeasure, tol: float = TOLERANCE) -> JarrettReport:
    """
    Split Bell locality into its two halves.

    Parameter independence: each side's marginal does not depend on the remote setting.
    Outcome independence: given both settings, the outcomes factorise into the
    setting-conditional marginals.
    """
    parameter = 0.0
    for ia in range(2):
        first, second = m.block(ia, 0), m.block(ia, 1)
        for p in OUTCOMES:
            parameter = max(parameter, abs(
                sum(first[(p, q)] for q in OUTCOMES) - sum(second[(p, q)] for q in OUTCOMES)))
    for ib in range(2):
        first, second = m.block(0, ib), m.block(1, ib)
        for q in OUTCOMES:
            parameter = max(parameter, abs(
                sum(first[(p, q)] for p in OUTCOMES) - sum(second[(p, q)] for p in OUTCOMES)))

    outcome = 0.0
    for ia, ib in SETTING_INDICES:
        block = m.block(ia, ib)
        for p, q in OUTCOME_PAIRS:
            side_a = sum(block[(p, x)] for x in OUTCOMES)
            side_b = sum(block[(x, q)] for x in OUTCOMES)
            outcome = max(outcome, abs(block[(p, q)] - side_a * side_b))

    return JarrettReport(parameter <= tol, parameter, outcome <= tol, outcome)


# -----------------------------
# CHSH
# -----------------------------

def correlators_exact(m: BellMeasure) -> Dict[Tuple[int, int], float]:
    """E^(a,b) = sum p*q*n^(a,b)(p,q) for each setting index pair."""
    return {(ia, ib): m.block(ia, ib).correlator() for ia, ib in SETTING_INDICES}


def chsh_value_exact(m: BellMeasure) -> float:
    """S = E^(a1,b1) - E^(a1,b2) + E^(a2,b1) + E^(a2,b2) from the exact measure."""
    correlators = correlators_exact(m)
    return float(sum(CHSH_SIGNS[key] * value for key, value in correlators.items()))


def chsh_closed_form(a1: float, a2: float, b1: float, b2: float) -> float:
    """cos 2(a1-b1) - cos 2(a1-b2) + cos 2(a2-b1) + cos 2(a2-b2)."""
    return float(math.cos(2 * (a1 - b1)) - math.cos(2 * (a1 - b2))
                 + math.cos(2 * (a2 - b1)) + math.cos(2 * (a2 - b2)))


def corrected_prediction(s: float, f: float, t: float) -> float:
    """
    F * T * S: the ideal CHSH value scaled by detection (F) and transmission (T) factors.

    Raises:
        InputError: If s is not finite or a factor lies outside (0, 1]
    """
    s = check_finite(s, "S")
    for name, value in (("F", f), ("T", t)):
        value = check_finite(value, name)
        if not 0.0 < value <= 1.0:
            raise InputError(f"Correction factor {name} must lie in (0, 1], got {value!r}")
    return float(f) * float(t) * s
