"""
Script entry point tests.

These tests validate that:
1) validate_system passes on every repository scenario.
2) generate_all_reports writes one report per case and command plus the index.
"""

import json
import os

from scripts import generate_all_reports as generate_all_reports_module
from scripts import validate_system as validate_system_module


def test_validate_system(monkeypatch, capsys):
    monkeypatch.setattr("sys.argv", ["validate_system.py", "--trials", "200", "--quiet"])
    assert validate_system_module.main() == 0
    assert "[PASS] All" in capsys.readouterr().out


def test_generate_all_reports(monkeypatch, temp_output_dir):
    monkeypatch.setattr("sys.argv", [
        "generate_all_reports.py", "--runs", "2000", "--trials", "100", "--output-dir", temp_output_dir,
    ])
    assert generate_all_reports_module.main() == 0

    with open(os.path.join(temp_output_dir, "cases_index.json"), "r", encoding="utf-8") as fh:
        index = json.load(fh)["cases"]
    assert {case["case_name"] for case in index} == {"aspect", "degenerate", "equal_angles", "uncorrelated"}
    for case in index:
        assert case["status"] == "success"
        assert set(case["reports"]) == set(generate_all_reports_module.COMMANDS)
        for filename in case["reports"].values():
            assert os.path.exists(os.path.join(temp_output_dir, filename))

    with open(os.path.join(temp_output_dir, "aspect_simulate.json"), "r", encoding="utf-8") as fh:
        report = json.load(fh)
    assert report["results"]["tally"]["runs"] == 2000
    assert report["seed_origin"] == "config"
