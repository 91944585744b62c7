"""
===============================================================================
BELL/CHSH TOOLKIT - COMMAND-LINE ANALYSES
===============================================================================

OVERVIEW:
    Entry point tying the models together. Each subcommand builds one
    ReportDocument, prints a human-readable summary (default) or exactly one
    machine document (--json or --csv), and exits with a contract code.

USAGE:
    python scripts/analyze.py exact [--angles a1,a2,b1,b2] [--correct F=..,T=..]
    python scripts/analyze.py simulate [--runs K] [--seed S] [--parallel]
    python scripts/analyze.py verify [--trials N]
    python scripts/analyze.py lhv [--trials N]
    python scripts/analyze.py trace-theorem

    Every subcommand accepts --config PATH (scenario file), --out PATH (also
    write the JSON report to disk) and --json / --csv.

EXIT CODES:
    0  success / all checks passed
    1  usage, configuration or input error
    2  verification failure
    3  numeric or runtime error

===============================================================================
"""

from dataclasses import dataclass
from multiprocessing import cpu_count
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import argparse
import math
import sys
import warnings

import numpy as np
import pandas as pd

from bellsim import __version__
from bellsim.core import (
    ASPECT_ANGLES,
    DEFAULT_RANDOM_SETTINGS,
    DEFAULT_RUNS,
    DEFAULT_TRIALS,
    DETECTION_FACTOR_F,
    MEASURED_S,
    MEASURED_S_UNCERTAINTY,
    OUTCOME_PAIRS,
    SETTING_INDICES,
    SOURCES,
    TOLERANCE,
    TRANSMISSION_FACTOR_T,
    ExperimentConfig,
    InputError,
    ReportDocument,
    ScenarioSettings,
    angles_to_dict,
    format_angle,
    load_config,
    parse_angle_list,
    parse_correction,
    resolve_seed,
    save_json,
    tagged,
)
from bellsim.classical_model import (
    bell_measure,
    check_A3_factorization,
    check_jarrett_locality,
    chsh_closed_form,
    chsh_value_exact,
    corrected_prediction,
)
from bellsim.lhv_bound import (
    best_local_approximation,
    chsh_functional,
    enumerate_deterministic_strategies,
    local_polytope_distance,
    verify_chsh_bound,
)
from bellsim.monte_carlo import (
    available_correlators,
    compare_sources,
    convergence_sweep,
    estimate_S,
    run_experiment,
    sampled_marginals,
    setting_label,
    setting_occupancy,
    sweep_to_dataframe,
)
from bellsim.quantum_model import (
    SettingPair,
    commutator_diagnostic,
    random_settings,
    verify_partial_trace_theorem,
)
from bellsim.verification import SETTINGS_STREAM_ID, run_verification, verification_document


EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VERIFICATION_FAILED = 2
EXIT_RUNTIME = 3


@dataclass
class CommandOutput:
    """A report plus its tabular view and the exit code it implies."""
    document: ReportDocument
    table: pd.DataFrame
    exit_code: int = EXIT_OK


# ===========================================================================
# HELPERS
# ===========================================================================

def _collect_warnings(run: Callable[[], CommandOutput]) -> CommandOutput:
    """Run a command, moving UserWarnings into the report (first occurrence order)."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", UserWarning)
        output = run()
    messages = [str(w.message) for w in caught if issubclass(w.category, UserWarning)]
    for message in messages:
        if message not in output.document.warnings:
            output.document.warnings.append(message)
    return output


def _print_header(title: str, angles: Tuple[float, float, float, float]):
    print("=" * 70)
    print(title)
    print("=" * 70)
    print("Angles: " + ", ".join(f"{n}={format_angle(v)}" for n, v in zip(("a1", "a2", "b1", "b2"), angles)))


def _settings(angles) -> Dict[Tuple[int, int], SettingPair]:
    return {key: SettingPair(angles[key[0]], angles[2 + key[1]]) for key in SETTING_INDICES}


# ===========================================================================
# EXACT VALUES
# ===========================================================================

def cmd_exact(angles: Tuple[float, float, float, float], correction: Optional[Tuple[float, float]] = None,
              verbose: bool = True) -> CommandOutput:
    """
    Exact correlators, CHSH value and block tables from P_Bell.

    Args:
        angles: (a1, a2, b1, b2)
        correction: Optional (F, T); adds F*T*S tagged "corrected"
        verbose: Print the human-readable tables
    """
    measure = bell_measure(*angles)
    s_exact = chsh_value_exact(measure)
    s_closed = chsh_closed_form(*angles)

    correlators = {}
    blocks = {}
    for (ia, ib), setting in _settings(angles).items():
        block = measure.block(ia, ib)
        correlators[setting_label(ia, ib)] = {
            "a": format_angle(setting.a),
            "b": format_angle(setting.b),
            "E": tagged(block.correlator(), "exact"),
            "E_closed_form": tagged(math.cos(2 * (setting.a - setting.b)), "exact"),
        }
        blocks[setting_label(ia, ib)] = {label: tagged(p, "exact") for label, p in block.to_dict().items()}

    results: Dict[str, Any] = {
        "correlators": correlators,
        "S": tagged(s_exact, "exact"),
        "S_closed_form": tagged(s_closed, "exact"),
        "blocks": blocks,
        "locality": {
            "factorization": check_A3_factorization(measure).to_dict(),
            "jarrett": check_jarrett_locality(measure).to_dict(),
        },
    }
    config: Dict[str, Any] = {"angles": angles_to_dict(angles)}

    if correction is not None:
        f, t = correction
        corrected = corrected_prediction(s_exact, f, t)
        results["corrected"] = {
            "F": tagged(f, "exact"),
            "T": tagged(t, "exact"),
            "S": tagged(corrected, "corrected"),
            "measured": tagged(MEASURED_S, "exact"),
            "measured_uncertainty": tagged(MEASURED_S_UNCERTAINTY, "exact"),
            "within_measured_band": abs(corrected - MEASURED_S) <= MEASURED_S_UNCERTAINTY,
        }
        config["correction"] = {"F": f, "T": t}

    if verbose:
        _print_header("EXACT CHSH VALUE", angles)
        print(f"\n{'CORRELATORS':-^70}")
        for label, entry in correlators.items():
            print(f"  E{label} [a={entry['a']}, b={entry['b']}]: {entry['E']['value']:+.12f}")
        print(f"\n  S = {s_exact:.12f}   (closed form {s_closed:.12f})")
        print(f"\n{'BLOCK PROBABILITIES':-^70}")
        print(f"  {'setting':<10}" + "".join(f"{'(%+d,%+d)' % pq:>14}" for pq in OUTCOME_PAIRS))
        for label, cells in blocks.items():
            print(f"  {label:<10}" + "".join(f"{cells[k]['value']:>14.10f}" for k in cells))
        factorization = results["locality"]["factorization"]
        print(f"\n  (A3) factorisation: {'holds' if factorization['holds'] else 'violated'} "
              f"(worst deviation {factorization['worst_deviation']['value']:.6f})")
        if correction is not None:
            c = results["corrected"]
            print(f"\n{'CORRECTED PREDICTION':-^70}")
            print(f"  F*T*S = {c['F']['value']} * {c['T']['value']} * {s_exact:.6f} = {c['S']['value']:.6f}")
            print(f"  Measured: {MEASURED_S} +- {MEASURED_S_UNCERTAINTY} "
                  f"({'within' if c['within_measured_band'] else 'outside'} band)")

    document = ReportDocument("exact", config, results, version=__version__)
    return CommandOutput(document, measure.to_dataframe())


# ===========================================================================
# MONTE CARLO
# ===========================================================================

def cmd_simulate(cfg: ExperimentConfig, seed_origin: str = "default", checkpoints: Optional[Sequence[int]] = None,
                 compare: bool = False, verbose: bool = True) -> CommandOutput:
    """
    Run the Monte Carlo experiment and compare S_k with the exact value.

    A setting without runs does not abort: the report carries the correlators of
    the visited settings and a warning naming the empty ones.
    """
    exact_s = chsh_closed_form(*cfg.angles)
    tally = run_experiment(cfg, verbose=verbose)

    mode = {
        "parallel": cfg.parallel,
        "workers": (cfg.workers or max(1, cpu_count() - 1)) if cfg.parallel else 1,
        "equivalence": "distributional" if cfg.parallel else "bitwise-prefix",
    }
    results: Dict[str, Any] = {
        "tally": tally.to_dict(),
        "exact_S": tagged(exact_s, "exact"),
        "mode": mode,
        "occupancy": {label: tagged(v, "sampled") for label, v in setting_occupancy(tally).items()},
    }
    warning_list: List[str] = []

    empty = tally.empty_settings()
    if empty:
        labels = ", ".join(setting_label(*key) for key in empty)
        warning_list.append(f"EmptySettingError: no runs recorded for {labels}; S_k undefined")
        results["partial_correlators"] = {
            setting_label(*key): tagged(value, "sampled")
            for key, value in available_correlators(tally).items()
        }
        results["estimate"] = None
    else:
        estimate = estimate_S(tally)
        deviation = estimate.s - exact_s
        results["estimate"] = estimate.to_dict()
        results["deviation"] = tagged(abs(deviation), "sampled")
        results["deviation_in_stderr"] = None if estimate.s_stderr == 0 else tagged(
            abs(deviation) / estimate.s_stderr, "sampled")
        results["marginals"] = {
            label: {
                "runs": entry["runs"],
                "freq_A_plus": tagged(entry["freq_A_plus"], "sampled"),
                "freq_B_plus": tagged(entry["freq_B_plus"], "sampled"),
                "z_A": tagged(entry["z_A"], "sampled"),
                "z_B": tagged(entry["z_B"], "sampled"),
            }
            for label, entry in sampled_marginals(tally).items()
        }

    if checkpoints:
        series = convergence_sweep(cfg, checkpoints)
        results["convergence"] = [point.to_dict() for point in series]

    if compare:
        results["source_comparison"] = compare_sources(cfg).to_dict()

    if verbose:
        _print_header("MONTE CARLO SIMULATION", cfg.angles)
        print(f"Runs: {cfg.runs:,}   Seed: {cfg.seed} ({seed_origin})   Source: {cfg.source}   "
              f"Mode: {mode['equivalence']}")
        print(f"\n{'TALLY':-^70}")
        print(f"  {'setting':<10}{'N':>10}" + "".join(f"{'(%+d,%+d)' % pq:>11}" for pq in OUTCOME_PAIRS))
        for ia, ib in SETTING_INDICES:
            print(f"  {setting_label(ia, ib):<10}{tally.setting_count(ia, ib):>10,}"
                  + "".join(f"{n:>11,}" for n in tally.cells(ia, ib)))
        if results["estimate"] is not None:
            estimate = results["estimate"]
            print(f"\n{'ESTIMATES':-^70}")
            for label, entry in estimate["correlators"].items():
                print(f"  E_k{label}: {entry['E']['value']:+.6f} +- {entry['stderr']['value']:.6f}")
            print(f"\n  S_k = {estimate['S']['value']:.6f} +- {estimate['S_stderr']['value']:.6f}")
            print(f"  Exact S = {exact_s:.6f}   |S_k - S| = {results['deviation']['value']:.6f}")
        for message in warning_list:
            print(f"[!] Warning: {message}")
        if checkpoints:
            print(f"\n{'CONVERGENCE':-^70}")
            print(sweep_to_dataframe(series, exact_s).to_string(index=False))
        if compare:
            print(f"\n  Source comparison: min chi-square p-value "
                  f"{results['source_comparison']['min_pvalue']['value']:.4f}")

    config = cfg.to_dict()
    if checkpoints:
        config["checkpoints"] = [int(k) for k in checkpoints]
    document = ReportDocument("simulate", config, results, seed=cfg.seed, seed_origin=seed_origin,
                              warnings=warning_list, version=__version__)
    return CommandOutput(document, tally.to_dataframe())


# ===========================================================================
# VERIFICATION
# ===========================================================================

def cmd_verify(angles: Tuple[float, float, float, float], trials: int, seed: int, seed_origin: str = "default",
               random_count: int = DEFAULT_RANDOM_SETTINGS, tamper: bool = False,
               verbose: bool = True) -> CommandOutput:
    """Run the verification battery; exit code 2 when any check fails."""
    if verbose:
        _print_header("VERIFICATION BATTERY", angles)
    result = run_verification(angles, trials, seed, random_count=random_count, tamper=tamper, verbose=verbose)
    if verbose:
        print("\n" + "=" * 70)
        print(f"Passed: {result.passed}   Failed: {result.failed}   Warnings: {result.warnings}")
        print("=" * 70)

    results = verification_document(angles, trials, random_count, result)
    config = {"angles": angles_to_dict(angles), "trials": trials, "random_settings": random_count}
    document = ReportDocument("verify", config, results, seed=seed, seed_origin=seed_origin,
                              warnings=list(result.notes), version=__version__)
    table = pd.DataFrame(
        [{"check": c.name, "passed": c.passed, "value": c.value, "detail": c.detail} for c in result.checks],
        columns=["check", "passed", "value", "detail"],
    )
    return CommandOutput(document, table, EXIT_OK if result.success else EXIT_VERIFICATION_FAILED)


# ===========================================================================
# LOCAL HIDDEN VARIABLES
# ===========================================================================

def cmd_lhv(angles: Tuple[float, float, float, float], trials: int, seed: int, seed_origin: str = "default",
            workers: Optional[int] = None, verbose: bool = True) -> CommandOutput:
    """Enumerate deterministic strategies, probe random local models and measure the gap to P_Bell."""
    target = bell_measure(*angles)
    strategies = enumerate_deterministic_strategies()
    values = [chsh_functional(s) for s in strategies]
    probe = verify_chsh_bound(trials, seed, target=target, workers=workers, verbose=verbose)
    approximation = best_local_approximation(target)
    polytope = local_polytope_distance(target)
    quantum_s = chsh_value_exact(target)

    results = {
        "strategies": [{"strategy": s.label(), "chsh": v} for s, v in zip(strategies, values)],
        "max_deterministic_chsh": max(values),
        "probe": probe.to_dict(),
        "best_local_approximation": approximation.to_dict(),
        "local_polytope_distance": polytope.to_dict(),
        "quantum_S": tagged(quantum_s, "exact"),
        "quantum_exceeds_local_bound": abs(quantum_s) > 2 + TOLERANCE,
    }

    if verbose:
        _print_header("LOCAL HIDDEN-VARIABLE BOUND", angles)
        print(f"\n{'DETERMINISTIC STRATEGIES':-^70}")
        for s, v in zip(strategies, values):
            print(f"  {s.label():<16} CHSH = {v:+d}")
        print(f"\n  Max over strategies: {max(values)}")
        print(f"  Max |S| over {trials:,} random models: {probe.max_abs_s:.12f} "
              f"({'bound respected' if probe.bound_respected else 'BOUND EXCEEDED'})")
        print(f"  Distance of P_Bell blocks to the local polytope: {polytope.distance:.6f}")
        print(f"  Quantum S = {quantum_s:.6f}")

    config = {"angles": angles_to_dict(angles), "trials": trials, "workers": workers}
    document = ReportDocument("lhv", config, results, seed=seed, seed_origin=seed_origin, version=__version__)
    table = pd.DataFrame(
        [{"f1": s.f[0], "f2": s.f[1], "g1": s.g[0], "g2": s.g[1], "chsh": v} for s, v in zip(strategies, values)],
        columns=["f1", "f2", "g1", "g2", "chsh"],
    )
    exit_code = EXIT_OK if probe.bound_respected and max(values) == 2 else EXIT_VERIFICATION_FAILED
    return CommandOutput(document, table, exit_code)


# ===========================================================================
# PARTIAL TRACES
# ===========================================================================

def cmd_trace_theorem(angles: Tuple[float, float, float, float], seed: int, seed_origin: str = "default",
                      random_count: int = DEFAULT_RANDOM_SETTINGS, verbose: bool = True) -> CommandOutput:
    """Normalised partial traces of the joint PVM against the local projectors."""
    rows = []
    per_setting = {}
    for (ia, ib), setting in _settings(angles).items():
        report = verify_partial_trace_theorem(setting)
        per_setting[setting_label(ia, ib)] = {
            "a": format_angle(setting.a),
            "b": format_angle(setting.b),
            "deviation_A": tagged(report.deviation_A, "exact"),
            "deviation_B": tagged(report.deviation_B, "exact"),
        }
        rows.append({"setting": setting_label(ia, ib), "deviation_A": report.deviation_A,
                     "deviation_B": report.deviation_B})

    rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed), spawn_key=(SETTINGS_STREAM_ID,))))
    random_worst = max(
        (verify_partial_trace_theorem(s).max_deviation for s in random_settings(random_count, rng)),
        default=0.0,
    )
    worst = max([random_worst] + [max(r["deviation_A"], r["deviation_B"]) for r in rows])
    commutators = commutator_diagnostic(angles)

    results = {
        "settings": per_setting,
        "random_settings": random_count,
        "random_max_deviation": tagged(random_worst, "exact"),
        "max_deviation": tagged(worst, "exact"),
        "holds": worst <= TOLERANCE,
        "commutators": {key: tagged(value, "exact") for key, value in commutators.items()},
    }

    if verbose:
        _print_header("NORMALISED PARTIAL TRACES", angles)
        for label, entry in per_setting.items():
            print(f"  {label:<10} dev_A = {entry['deviation_A']['value']:.3e}   "
                  f"dev_B = {entry['deviation_B']['value']:.3e}")
        print(f"  {random_count:,} random settings: max deviation {random_worst:.3e}")
        print(f"\n{'COMMUTATORS (informational)':-^70}")
        for key, value in commutators.items():
            print(f"  [{key}]: {value:.6f}")

    config = {"angles": angles_to_dict(angles), "random_settings": random_count}
    document = ReportDocument("trace-theorem", config, results, seed=seed, seed_origin=seed_origin,
                              version=__version__)
    return CommandOutput(document, pd.DataFrame(rows, columns=["setting", "deviation_A", "deviation_B"]),
                         EXIT_OK if worst <= TOLERANCE else EXIT_VERIFICATION_FAILED)


# ===========================================================================
# ARGUMENT PARSING
# ===========================================================================

class UsageErrorParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage code 1 instead of argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = UsageErrorParser(add_help=False)
    common.add_argument("--angles", help="a1,a2,b1,b2 in radians or pi literals (default: 0,pi/4,pi/8,3pi/8)")
    common.add_argument("--seed", type=int, help="Master seed (default: $BELLSIM_SEED, then built-in)")
    common.add_argument("--config", help="Scenario file (JSON or TOML); flags override it")
    common.add_argument("--out", help="Also write the JSON report to this path")
    common.add_argument("--quiet", "-q", action="store_true", help="Suppress the human-readable output")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="Print the JSON report instead of tables")
    fmt.add_argument("--csv", action="store_true", help="Print the CSV table instead of tables")

    parser = UsageErrorParser(
        prog="bellsim",
        description="Bell/CHSH toolkit: exact values, Monte Carlo experiment, verification",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
        python scripts/analyze.py exact --correct F=0.984,T=0.971
        python scripts/analyze.py simulate --runs 1000000 --seed 7 --json
        python scripts/analyze.py verify --trials 10000
        python scripts/analyze.py lhv --csv
        python scripts/analyze.py trace-theorem --config aspect.json
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    exact = sub.add_parser("exact", parents=[common], help="Exact correlators, S and block tables")
    exact.add_argument(
        "--correct", nargs="*", metavar="F=..,T=..",
        help="Apply correction factors, e.g. F=0.984 T=0.971 (bare flag: detection and transmission defaults)",
    )

    simulate = sub.add_parser("simulate", parents=[common], help="Monte Carlo experiment")
    simulate.add_argument("--runs", type=int, help=f"Number of runs k (default: {DEFAULT_RUNS:,})")
    simulate.add_argument("--source", choices=SOURCES, help="Sampling distribution (default: quantum-exact)")
    simulate.add_argument("--parallel", action="store_true", default=None, help="Split runs across worker processes")
    simulate.add_argument("--workers", type=int, help="Worker processes for --parallel")
    simulate.add_argument("--checkpoints", help="Comma-separated run counts for a convergence sweep")
    simulate.add_argument("--compare-sources", action="store_true", help="Chi-square test between sampling sources")

    verify = sub.add_parser("verify", parents=[common], help="Run the verification battery")
    verify.add_argument("--trials", type=int, help=f"Random local models to probe (default: {DEFAULT_TRIALS:,})")
    verify.add_argument("--random-settings", type=int, help="Random settings for Born/partial-trace checks")
    verify.add_argument("--tamper", action="store_true", help=argparse.SUPPRESS)

    lhv = sub.add_parser("lhv", parents=[common], help="Local hidden-variable bound")
    lhv.add_argument("--trials", type=int, help=f"Random local models to probe (default: {DEFAULT_TRIALS:,})")
    lhv.add_argument("--parallel", action="store_true", default=None, help="Probe in worker processes")
    lhv.add_argument("--workers", type=int, help="Worker processes for --parallel")

    trace = sub.add_parser("trace-theorem", parents=[common], help="Normalised partial-trace identity")
    trace.add_argument("--random-settings", type=int, help="Random settings to check besides the configured ones")

    return parser


def _first(*values):
    return next((v for v in values if v is not None), None)


def _positive(name: str, value: Optional[int]) -> Optional[int]:
    if value is not None and value < 1:
        raise InputError(f"{name} must be a positive integer, got {value!r}")
    return value


def dispatch(args: argparse.Namespace, verbose: bool) -> CommandOutput:
    """Merge flags over the scenario file and run the selected command."""
    scenario = load_config(args.config) if args.config else ScenarioSettings()
    angles = parse_angle_list(args.angles) if args.angles else _first(scenario.angles, ASPECT_ANGLES)
    angles = tuple(angles)

    if args.command == "exact":
        if args.correct is None:
            correction = scenario.correction
        elif args.correct:
            correction = parse_correction(" ".join(args.correct))
        else:
            correction = (DETECTION_FACTOR_F, TRANSMISSION_FACTOR_T)
        return cmd_exact(angles, correction, verbose=verbose)

    seed, origin = resolve_seed(args.seed, scenario.seed)
    random_count = _positive("--random-settings", _first(getattr(args, "random_settings", None),
                                                         scenario.random_settings, DEFAULT_RANDOM_SETTINGS))

    if args.command == "simulate":
        cfg = ExperimentConfig(
            angles=angles,
            runs=_first(args.runs, scenario.runs, DEFAULT_RUNS),
            seed=seed,
            source=_first(args.source, scenario.source, "quantum-exact"),
            parallel=bool(_first(args.parallel, scenario.parallel, False)),
            workers=_first(args.workers, scenario.workers),
        )
        checkpoints = None
        if args.checkpoints:
            try:
                checkpoints = [int(k) for k in args.checkpoints.split(",") if k.strip()]
            except ValueError:
                raise InputError(f"--checkpoints must be comma-separated integers, got {args.checkpoints!r}")
        return cmd_simulate(cfg, origin, checkpoints, args.compare_sources, verbose=verbose)

    trials = _positive("--trials", _first(getattr(args, "trials", None), scenario.trials, DEFAULT_TRIALS))

    if args.command == "verify":
        return cmd_verify(angles, trials, seed, origin, random_count, tamper=args.tamper, verbose=verbose)

    if args.command == "lhv":
        workers = None
        if _first(args.parallel, scenario.parallel, False):
            workers = _positive("--workers", _first(args.workers, scenario.workers)) or max(1, cpu_count() - 1)
        return cmd_lhv(angles, trials, seed, origin, workers, verbose=verbose)

    return cmd_trace_theorem(angles, seed, origin, random_count, verbose=verbose)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one command and return its exit code.

    Human tables go to stdout unless --json, --csv or --quiet is given; with a
    machine format stdout carries exactly one document.
    """
    args = build_parser().parse_args(argv)
    verbose = not (args.json or args.csv or args.quiet)

    try:
        output = _collect_warnings(lambda: dispatch(args, verbose))
    except InputError as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        print(f"ERROR: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    if args.out:
        path = save_json(output.document, args.out)
        if verbose:
            print(f"\n[+] Report written to {path}")

    if args.json:
        sys.stdout.write(output.document.to_json())
    elif args.csv:
        sys.stdout.write(output.table.to_csv(index=False))
    elif verbose:
        for message in output.document.warnings:
            if not message.startswith("EmptySettingError"):
                print(f"[!] Warning: {message}")

    if output.exit_code == EXIT_VERIFICATION_FAILED:
        failing = output.document.results.get("failing_checks") or [output.document.command]
        print(f"Verification failed: {', '.join(failing)}", file=sys.stderr)
    return output.exit_code


if __name__ == "__main__":
    sys.exit(main())
