"""
Tests for run tracking and output-path placeholders
"""

import json

import pytest

from spadrecon.errors import ConfigError
from spadrecon.utils import (
    RunTracker,
    find_placeholders,
    get_global_tracker,
    reset_global_tracker,
    substitute_in_mapping,
    substitute_parameters,
    track_stage,
    validate_parameters,
)


def test_summary_groups_stages_by_component():
    tracker = RunTracker()
    tracker.track_stage("eme", "n_max 8", 0.5, iterations=1200, converged=True)
    tracker.track_stage("eme", "n_max 8", 1.5, iterations=5000, converged=False)
    tracker.track_stage("recovery", "order 3", 2.0)

    summary = tracker.get_summary()
    assert summary["total_stages"] == 3
    assert summary["total_seconds"] == pytest.approx(4.0)
    assert summary["by_component"]["eme"] == {"stages": 2, "seconds": 2.0, "iterations": 6200, "not_converged": 1}
    assert summary["by_component"]["recovery"]["not_converged"] == 0


def test_summary_file(tmp_path):
    tracker = RunTracker()
    tracker.track_stage("sim", "2000 cycles", 0.25)
    path = tracker.save_to_file(str(tmp_path / "run.json"))
    with open(path) as f:
        saved = json.load(f)
    assert saved["stages"][0]["label"] == "2000 cycles"


def test_global_tracker_reset():
    reset_global_tracker()
    track_stage("charfit", "background", 0.1)
    assert len(get_global_tracker().stages) == 1
    reset_global_tracker()
    assert get_global_tracker().stages == []


def test_placeholders():
    assert find_placeholders("{out}/recon_{seed}.json") == ["out", "seed"]
    assert substitute_parameters("{out}/recon_{seed}.json", {"out": "runs", "seed": 7}) == "runs/recon_7.json"
    assert substitute_parameters("{out}/{verb}.txt", {"out": "runs"}, strict=False) == "runs/{verb}.txt"
    with pytest.raises(ConfigError):
        substitute_parameters("{out}/{verb}.txt", {"out": "runs"})


def test_mapping_substitution_keeps_non_strings():
    values = {"paths": ["{out}/a.txt", "{out}/b.txt"], "seed": 3, "nested": {"log": "{verb}.log"}}
    result = substitute_in_mapping(values, {"out": "o", "verb": "simulate"})
    assert result == {"paths": ["o/a.txt", "o/b.txt"], "seed": 3, "nested": {"log": "simulate.log"}}
    assert validate_parameters(["out", "seed"], {"out": "runs"}) == (False, ["seed"])
    assert validate_parameters(["out"], {"out": "runs"}) == (True, [])
