"""
Tests for the run configuration and the command-line verbs
"""

import json
import os

import numpy as np
import pytest

from spadrecon.cli import RunConfig, apply_environment, dump_run_config, load_run_config, main, parse_run_config
from spadrecon.cli.commands import EXIT_INPUT, EXIT_OK
from spadrecon.cli.config import OutputSection, RunSection
from spadrecon.errors import ConfigError
from spadrecon.tags import TimeTagStream, read_time_tags, write_time_tags

SMALL_RUN = """
[detector]
preset = SPAD1

[window]
t_start = 0.0
t_end = 3e-7

[matrix]
n_max = 6
order = 2

[eme]
epsilon = 1e-8
max_iter = 200000

[sim]
nbar = 1.0
window = 3e-7
cycles = 3000
"""


@pytest.fixture
def run_ini(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for variable in ("SPADRECON_SEED", "SPADRECON_THREADS", "SPADRECON_LOG_LEVEL"):
        monkeypatch.delenv(variable, raising=False)
    path = tmp_path / "run.ini"
    path.write_text(SMALL_RUN)
    return str(path)


def test_dump_and_parse_round_trip():
    cfg = parse_run_config(SMALL_RUN)
    assert cfg.detector.preset == "SPAD1"
    assert cfg.matrix.order == 2
    assert cfg.eme.max_iter == 200_000
    assert parse_run_config(dump_run_config(cfg)) == cfg
    assert parse_run_config(dump_run_config(RunConfig())) == RunConfig()


def test_unknown_sections_and_keys_are_rejected():
    with pytest.raises(ConfigError, match="Unknown section"):
        parse_run_config("[solver]\nalpha = 0.1\n")
    with pytest.raises(ConfigError, match="Unknown key"):
        parse_run_config("[eme]\nbeta = 0.1\n")
    with pytest.raises(ConfigError):
        parse_run_config("[eme]\nalpha = -1\n")
    with pytest.raises(ConfigError):
        parse_run_config("[uncertainty]\nsources = [eta0\n")


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_run_config(str(tmp_path / "absent.ini"))


def test_environment_overrides_run_section(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SPADRECON_SEED", "42")
    monkeypatch.setenv("SPADRECON_THREADS", "3")
    monkeypatch.setenv("SPADRECON_LOG_LEVEL", "debug")
    cfg = apply_environment(RunConfig())
    assert (cfg.run.seed, cfg.run.threads, cfg.run.log_level) == (42, 3, "DEBUG")

    monkeypatch.setenv("SPADRECON_SEED", "seven")
    with pytest.raises(ConfigError):
        apply_environment(RunConfig())


def test_output_paths_substitute_placeholders():
    cfg = RunConfig(run=RunSection(seed=7), output=OutputSection(out="runs"))
    paths = cfg.output_paths("simulate")
    assert paths.tags == "runs/tags_7.txt"
    assert paths.histogram == "runs/simulate_histogram.txt"
    assert paths.out == "runs"


def test_simulate_is_deterministic(run_ini, tmp_path):
    first, second = str(tmp_path / "a.txt"), str(tmp_path / "b.txt")
    assert main(["simulate", "--config", run_ini, "--seed", "5", "--output", first]) == EXIT_OK
    assert main(["simulate", "--config", run_ini, "--seed", "5", "--output", second]) == EXIT_OK
    a, b = read_time_tags(first), read_time_tags(second)
    assert a.n_cycles == 3000
    assert all(np.array_equal(x, y) for x, y in zip(a.cycles, b.cycles))
    with open(str(tmp_path / "a_tallies.json")) as f:
        assert json.load(f)["photons"] > 0


def test_hist_verb(run_ini, tmp_path):
    stream = TimeTagStream(cycles=(np.array([5, 20, 40]), np.array([3])), cycle_length=100)
    tags = write_time_tags(stream, str(tmp_path / "tags.txt"))
    output = str(tmp_path / "hist.txt")
    assert main(["hist", "--config", run_ini, "--tags", tags, "--bin", "1", "--output", output]) == EXIT_OK
    data = np.loadtxt(output)
    assert data[:, 1].sum() == 1


def test_missing_inputs_exit_with_input_code(run_ini, tmp_path):
    assert main(["hist", "--config", run_ini, "--tags", str(tmp_path / "missing.txt")]) == EXIT_INPUT
    assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == EXIT_INPUT
    with open(run_ini, "w") as f:
        f.write(SMALL_RUN.replace("n_max = 6\n", ""))
    assert main(["build-matrix", "--config", run_ini]) == EXIT_INPUT


def test_build_matrix_writes_factors(run_ini, tmp_path):
    out = str(tmp_path / "out")
    assert main(["build-matrix", "--config", run_ini, "--out", out]) == EXIT_OK
    matrix_dir = os.path.join(out, "matrix")
    detector = np.loadtxt(os.path.join(matrix_dir, "D.txt"))
    assert detector.shape == (7, 7)
    assert detector.sum(axis=0) == pytest.approx(np.ones(7), abs=1e-6)
    with open(os.path.join(matrix_dir, "provenance.json")) as f:
        provenance = json.load(f)
    assert provenance["files"] == ["A.txt", "B.txt", "D.txt", "L.txt", "R.txt"]


def test_simulate_then_reconstruct(run_ini, tmp_path):
    out = str(tmp_path / "out")
    tags = str(tmp_path / "pulsed.txt")
    assert main(["simulate", "--config", run_ini, "--seed", "2", "--output", tags]) == EXIT_OK
    assert main(["reconstruct", "--config", run_ini, "--tags", tags, "--out", out, "--nbar-exp", "1.0"]) == EXIT_OK
    with open(os.path.join(out, "metrics.json")) as f:
        metrics = json.load(f)
    assert metrics["n_max"] == 6
    assert metrics["order"] == 2
    assert metrics["n_cycles"] == 3000
    assert metrics["nbar_exp"] == 1.0
    bars = np.loadtxt(os.path.join(out, "distribution_bars.txt"))
    assert bars[:, 1].sum() == pytest.approx(1.0, abs=1e-6)
