#!/usr/bin/env python
"""
System validation: runs the verification battery at every enabled scenario in
configs/ and exits nonzero when any check fails.

USAGE:
    python scripts/validate_system.py [--trials N] [--quiet]
"""

import argparse
import glob
import os
import sys
import warnings

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from bellsim.core import (
    ASPECT_ANGLES,
    DEFAULT_RANDOM_SETTINGS,
    DEFAULT_TRIALS,
    InputError,
    load_config,
    resolve_path,
    resolve_seed,
)
from bellsim.verification import run_verification


def main() -> int:
    parser = argparse.ArgumentParser(description="Run the verification battery for every scenario file")
    parser.add_argument("--trials", type=int, default=DEFAULT_TRIALS,
                        help=f"Random local models per scenario (default: {DEFAULT_TRIALS:,})")
    parser.add_argument("--quiet", "-q", action="store_true", help="Only print the summary")
    args = parser.parse_args()
    verbose = not args.quiet

    print("=" * 70)
    print("BELL/CHSH TOOLKIT - SYSTEM VALIDATION")
    print("=" * 70)

    failures = {}
    config_files = sorted(glob.glob(os.path.join(resolve_path("configs"), "*.json")))
    for path in config_files:
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            scenario = load_config(path)
        except InputError as e:
            print(f"[FAIL] {name}: {e}")
            failures[name] = ["config"]
            continue
        if not scenario.metadata.get("enabled", True):
            print(f"[~] {name}: disabled, skipped")
            continue
        seed, _ = resolve_seed(None, scenario.seed)
        print(f"\n{name.upper():-^70}")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            result = run_verification(scenario.angles or ASPECT_ANGLES, args.trials, seed,
                                      random_count=scenario.random_settings or DEFAULT_RANDOM_SETTINGS,
                                      verbose=verbose)
        if not result.success:
            failures[name] = result.failing
        print(f"[{'+' if result.success else '!'}] {name}: {result.passed} passed, {result.failed} failed")

    print("\n" + "=" * 70)
    if failures:
        for name, checks in failures.items():
            print(f"[FAIL] {name}: {', '.join(checks)}")
    else:
        print(f"[PASS] All {len(config_files)} scenario(s) verified")
    print("=" * 70)
    return 0 if not failures else 2


if __name__ == "__main__":
    sys.exit(main())
