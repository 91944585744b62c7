"""
Master Report Generator
Runs every command for each scenario file in configs/ and writes the JSON
reports to reports/<case>_<command>.json, plus reports/cases_index.json.
"""

import argparse
import glob
import json
import os
import sys
from typing import Dict, List

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from bellsim.analysis import EXIT_OK, main as run_command
from bellsim.core import InputError, load_config, resolve_path

COMMANDS = ("exact", "simulate", "verify", "lhv", "trace-theorem")


def get_case_metadata(config_path: str) -> Dict:
    """Display name, description and enabled flag of a scenario file."""
    case_name = os.path.splitext(os.path.basename(config_path))[0]
    try:
        metadata = load_config(config_path).metadata
    except InputError as e:
        print(f"  [!] Warning: Could not load metadata from {config_path}: {e}")
        metadata = {}
    return {
        "display_name": metadata.get("display_name", case_name.replace("_", " ").title()),
        "description": metadata.get("description", f"Case: {case_name}"),
        "enabled": metadata.get("enabled", True),
        "config_file": os.path.basename(config_path),
    }


def generate_case_reports(case_name: str, config_path: str, output_dir: str,
                          commands: List[str], extra: Dict[str, List[str]]) -> Dict:
    """Run each command quietly for one scenario; returns status and report file names."""
    print(f"\n{'=' * 70}")
    print(f"GENERATING REPORTS FOR CASE: {case_name}")
    print(f"{'=' * 70}")

    result = {"case_name": case_name, "reports": {}, "status": "success", "exit_codes": {}}
    for command in commands:
        out_path = os.path.join(output_dir, f"{case_name}_{command.replace('-', '_')}.json")
        argv = [command, "--config", config_path, "--quiet", "--out", out_path] + extra.get(command, [])
        code = run_command(argv)
        result["exit_codes"][command] = code
        if code == EXIT_OK and os.path.exists(out_path):
            result["reports"][command] = os.path.basename(out_path)
            print(f"  [+] {command}: {os.path.relpath(out_path, resolve_path('.'))}")
        else:
            result["status"] = "partial"
            print(f"  [!] {command} exited with code {code}")
    return result


def main() -> int:
    parser = argparse.ArgumentParser(description="Generate JSON reports for every scenario file in configs/.")
    parser.add_argument("--runs", type=int, help="Override the number of Monte Carlo runs per case")
    parser.add_argument("--trials", type=int, help="Override the number of random local models per case")
    parser.add_argument("--output-dir", default="reports", help="Output directory (default: reports/)")
    args = parser.parse_args()

    extra: Dict[str, List[str]] = {}
    if args.runs:
        extra["simulate"] = ["--runs", str(args.runs)]
    if args.trials:
        extra["verify"] = ["--trials", str(args.trials)]
        extra["lhv"] = ["--trials", str(args.trials)]

    output_dir = args.output_dir if os.path.isabs(args.output_dir) else resolve_path(args.output_dir)
    os.makedirs(output_dir, exist_ok=True)

    print("=" * 70)
    print("MASTER REPORT GENERATOR")
    print("=" * 70)

    index = []
    for config_path in sorted(glob.glob(os.path.join(resolve_path("configs"), "*.json"))):
        case_name = os.path.splitext(os.path.basename(config_path))[0]
        metadata = get_case_metadata(config_path)
        if not metadata["enabled"]:
            print(f"\n[~] {case_name}: disabled, skipped")
            continue
        result = generate_case_reports(case_name, config_path, output_dir, list(COMMANDS), extra)
        index.append({**metadata, **result})

    index_path = os.path.join(output_dir, "cases_index.json")
    with open(index_path, "w", encoding="utf-8") as f:
        json.dump({"cases": index}, f, indent=2, sort_keys=True)
        f.write("\n")

    failed = [case["case_name"] for case in index if case["status"] != "success"]
    print(f"\n[+] Index written to {index_path}")
    if failed:
        print(f"[!] Incomplete cases: {', '.join(failed)}")
    return 0 if not failed else 2


if __name__ == "__main__":
    sys.exit(main())
