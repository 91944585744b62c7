"""
Verification battery.

Runs every exact identity the toolkit relies on and records a pass/fail ledger:
PVM invariants, Born rule against the closed form, marginal uniformity, the
normalised partial-trace identity, the structure of the (A3) violation, the
Jarrett split and the local CHSH bound. A check that raises is recorded as a
failure under its own name; the battery never stops early.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple
import math

import numpy as np

from bellsim.core import (
    LOCAL_BOUND,
    OUTCOMES,
    SETTING_INDICES,
    TOLERANCE,
    angles_to_dict,
    tagged,
)
from bellsim.classical_model import (
    ConditionalQuery,
    bell_measure,
    bell_measure_from_born,
    check_A3_factorization,
    check_jarrett_locality,
    chsh_closed_form,
    chsh_value_exact,
    conditional_probability,
    marginal_A,
    marginal_B,
)
from bellsim.lhv_bound import chsh_functional, enumerate_deterministic_strategies, verify_chsh_bound
from bellsim.quantum_model import (
    PVM,
    SettingPair,
    bell_state,
    born_distribution,
    closed_form_distribution,
    joint_pvm,
    local_pvm_A,
    local_pvm_B,
    pvm_invariant_report,
    random_settings,
    verify_partial_trace_theorem,
)


# Sub-stream of the master seed for random settings (disjoint from the experiment and LHV streams).
SETTINGS_STREAM_ID = 3

PVM_CHECKS = ("hermiticity", "idempotency", "orthogonality", "completeness")


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    detail: str
    value: Optional[float] = None
    data: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        document = {"name": self.name, "passed": self.passed, "detail": self.detail}
        if self.value is not None:
            document["value"] = tagged(self.value, "exact")
        if self.data:
            document["data"] = self.data
        return document


@dataclass
class ValidationResult:
    """Pass/fail/warning ledger; prints each entry when `verbose`."""
    verbose: bool = True
    passed: int = 0
    failed: int = 0
    warnings: int = 0
    checks: List[CheckOutcome] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def add_pass(self, name: str, detail: str, value: Optional[float] = None, data: Optional[Dict] = None):
        self.passed += 1
        self.checks.append(CheckOutcome(name, True, detail, value, data or {}))
        if self.verbose:
            print(f"[PASS] {name}: {detail}")

    def add_fail(self, name: str, detail: str, value: Optional[float] = None, data: Optional[Dict] = None):
        self.failed += 1
        self.checks.append(CheckOutcome(name, False, detail, value, data or {}))
        if self.verbose:
            print(f"[FAIL] {name}: {detail}")

    def add_warning(self, message: str):
        self.warnings += 1
        self.notes.append(message)
        if self.verbose:
            print(f"[WARN] {message}")

    @property
    def success(self) -> bool:
        return self.failed == 0

    @property
    def failing(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "failed": self.failed,
            "warnings": list(self.notes),
            "all_passed": self.success,
            "failing_checks": self.failing,
            "checks": [c.to_dict() for c in self.checks],
        }


def _run_check(result: ValidationResult, name: str, check: Callable[[], Tuple[bool, str, Optional[float], Dict]]):
    try:
        ok, detail, value, data = check()
    except (ValueError, ArithmeticError) as e:
        result.add_fail(name, f"raised {type(e).__name__}: {e}")
        return
    if ok:
        result.add_pass(name, detail, value, data)
    else:
        result.add_fail(name, detail, value, data)


def tamper_completeness(pvms: Dict[Tuple[int, int], PVM]) -> Dict[Tuple[int, int], PVM]:
    """Fault injection: zero the (+1,+1) projector of the (a1,b1) joint PVM."""
    tampered = dict(pvms)
    tampered[(0, 0)] = pvms[(0, 0)].replace((1, 1), np.zeros((4, 4)))
    return tampered


# -----------------------------
# Battery
# -----------------------------

def run_verification(angles: Tuple[float, float, float, float], trials: int, seed: int,
                     random_count: int = 1_000, tamper: bool = False,
                     verbose: bool = True) -> ValidationResult:
    """
    Run the full battery at the given angles.

    Args:
        angles: (a1, a2, b1, b2) in radians
        trials: Number of random local models for the CHSH bound probe
        seed: Master seed (random settings and LHV probe streams)
        random_count: Random settings for the Born and partial-trace checks
        tamper: Replace one joint projector by zero before checking (exercises the failure path)
        verbose: Print the ledger as it fills

    Returns:
        ValidationResult; `success` is True when every check passed
    """
    result = ValidationResult(verbose=verbose)
    a_angles, b_angles = angles[:2], angles[2:]
    settings = {key: SettingPair(a_angles[key[0]], b_angles[key[1]]) for key in SETTING_INDICES}
    pvms = {key: joint_pvm(s) for key, s in settings.items()}
    if tamper:
        pvms = tamper_completeness(pvms)
        result.add_warning("Fault injection active: (+1,+1) projector of setting (a1,b1) replaced by zero")

    rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed), spawn_key=(SETTINGS_STREAM_ID,))))
    extra_settings = list(random_settings(random_count, rng))
    psi = bell_state()

    if verbose:
        print(f"\n{'PVM INVARIANTS':-^70}")

    local_pvms = [local_pvm_A(a) for a in a_angles] + [local_pvm_B(b) for b in b_angles]
    reports = [pvm_invariant_report(p) for p in list(pvms.values()) + local_pvms]
    for invariant in PVM_CHECKS:
        def check(invariant=invariant):
            worst = max(getattr(r, invariant) for r in reports)
            return worst <= TOLERANCE, f"max deviation {worst:.3e} over {len(reports)} PVMs", worst, {}
        _run_check(result, f"PVM {invariant}", check)

    if verbose:
        print(f"\n{'BORN RULE':-^70}")

    def born_agreement():
        worst = 0.0
        for s, pvm in list(zip(settings.values(), pvms.values())) + [(s, joint_pvm(s)) for s in extra_settings]:
            matrix_path = born_distribution(pvm, psi).as_array()
            closed = closed_form_distribution(s).as_array()
            worst = max(worst, float(np.max(np.abs(matrix_path - closed))))
        total = len(settings) + len(extra_settings)
        return worst <= TOLERANCE, f"max deviation {worst:.3e} over {total} settings", worst, {}
    _run_check(result, "Born/closed-form agreement", born_agreement)

    def measure_agreement():
        matrix_path = bell_measure_from_born(*angles).weights
        closed = bell_measure(*angles).weights
        worst = float(np.max(np.abs(matrix_path - closed)))
        return worst <= TOLERANCE, f"max weight deviation {worst:.3e}", worst, {}
    _run_check(result, "BellMeasure matrix/closed-form agreement", measure_agreement)

    def marginal_uniformity():
        m = bell_measure(*angles)
        worst = 0.0
        for key, s in settings.items():
            for dist in (marginal_A(m, s.a, s.b), marginal_B(m, s.a, s.b)):
                worst = max(worst, max(abs(dist[o] - 0.5) for o in OUTCOMES))
            local = (born_distribution(local_pvm_A(s.a), psi), born_distribution(local_pvm_B(s.b), psi))
            for dist in local:
                worst = max(worst, max(abs(dist[o] - 0.5) for o in OUTCOMES))
        return worst <= TOLERANCE, f"max |P - 1/2| = {worst:.3e}", worst, {}
    _run_check(result, "Marginal uniformity", marginal_uniformity)

    if verbose:
        print(f"\n{'PARTIAL TRACES':-^70}")

    def partial_traces():
        deviations = [verify_partial_trace_theorem(s, pvms[key]).max_deviation for key, s in settings.items()]
        deviations += [verify_partial_trace_theorem(s).max_deviation for s in extra_settings]
        worst = max(deviations)
        return worst <= TOLERANCE, f"max deviation {worst:.3e} over {len(deviations)} settings", worst, {}
    _run_check(result, "Partial-trace theorem", partial_traces)

    if verbose:
        print(f"\n{'LOCALITY':-^70}")

    def a3_structure():
        m = bell_measure(*angles)
        worst = 0.0
        for s in settings.values():
            conditional = conditional_probability(
                m, ConditionalQuery({"eps_A": 1}, {"gamma_A": s.a, "gamma_B": s.b, "eps_B": 1}))
            one_sided = conditional_probability(m, ConditionalQuery({"eps_A": 1}, {"gamma_A": s.a}))
            worst = max(worst, abs(conditional - math.cos(s.a - s.b) ** 2), abs(one_sided - 0.5))
        report = check_A3_factorization(m)
        verdict = "holds" if report.holds else "violated"
        detail = f"conditionals match cos^2(a-b) and 1/2 within {worst:.3e}; (A3) {verdict}"
        return worst <= TOLERANCE, detail, worst, {"factorization": report.to_dict()}
    _run_check(result, "(A3) conditional structure", a3_structure)

    def parameter_independence():
        report = check_jarrett_locality(bell_measure(*angles))
        detail = (f"remote-setting dependence {report.parameter_deviation:.3e}; "
                  f"outcome independence {'holds' if report.outcome_independence else 'fails'}")
        return report.parameter_independence, detail, report.parameter_deviation, {"jarrett": report.to_dict()}
    _run_check(result, "Parameter independence", parameter_independence)

    def closed_form_chsh():
        exact = chsh_value_exact(bell_measure(*angles))
        closed = chsh_closed_form(*angles)
        deviation = abs(exact - closed)
        return deviation <= TOLERANCE, f"S = {exact:.12f}", exact, {}
    _run_check(result, "CHSH closed form", closed_form_chsh)

    if verbose:
        print(f"\n{'LOCAL HIDDEN VARIABLES':-^70}")

    def enumeration():
        values = [chsh_functional(s) for s in enumerate_deterministic_strategies()]
        ok = max(values) == 2 and min(values) == -2 and len(values) == 16
        return ok, f"16 strategies, CHSH range [{min(values)}, {max(values)}]", float(max(values)), {}
    _run_check(result, "Deterministic strategies", enumeration)

    def probe():
        report = verify_chsh_bound(trials, seed)
        detail = f"max |S| = {report.max_abs_s:.12f} over {trials:,} random models"
        return report.bound_respected, detail, report.max_abs_s, {"bound": tagged(LOCAL_BOUND, "exact")}
    _run_check(result, "LHV bound probe", probe)

    return result


def verification_document(angles, trials: int, random_count: int, result: ValidationResult) -> Dict[str, Any]:
    """Results block for the verify report."""
    document = result.to_dict()
    document.update({"angles": angles_to_dict(angles), "trials": trials, "random_settings": random_count})
    return document
