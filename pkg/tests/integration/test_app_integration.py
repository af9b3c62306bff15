#!/usr/bin/env python3

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', '..', 'src'))

import json
from unittest.mock import patch

import pytest

from app import run

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', '..', 'configs')
EXAMPLE1 = os.path.join(CONFIG_DIR, "example1.json")
EXAMPLE2 = os.path.join(CONFIG_DIR, "example2.json")


def decoupled_config() -> dict:
    return {
        "name": "decoupled",
        "d": 2,
        "N": 2,
        "subsystems": [
            {"A": [2, 0, 0, 0.5], "b": [1, 0]},
            {"A": [1, 0, 0, 2], "b": [0, 1]},
        ],
        "switch_set": [[1, 1], [1, 2], [2, 1], [2, 2]],
        "xi": [1, 1],
        "T": 4,
    }


def shear_config() -> dict:
    return {
        "name": "shear",
        "d": 2,
        "N": 1,
        "subsystems": [{"A": [1, 1, 0, 1], "b": [1, 0]}],
        "switch_set": [[1, 1]],
        "xi": [1, 1],
        "T": 3,
    }


class TestCommandLine:
    """End-to-end runs of the command-line entry point."""

    @pytest.fixture(autouse=True)
    def isolated_settings(self, tmp_path):
        with patch('core.config_manager.CONFIG_FILE', tmp_path / "settings.json"):
            yield

    def _write(self, tmp_path, data: dict) -> str:
        path = tmp_path / f"{data['name']}.json"
        path.write_text(json.dumps(data))
        return str(path)

    def test_solve_first_example(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = run(["solve", EXAMPLE1, "--out", str(out), "--quiet"])
        assert code == 0
        report = json.loads((out / "example1.solve.json").read_text())
        assert report["status"] == "solved"
        assert report["nu"] == [2, 1, 2, 1, 2]
        assert report["mu"] == [0.0, -10.0, 0.0, 0.0, 0.0]
        assert report["sparsity"]["total"] == 5
        assert report["notes"] == []
        assert json.loads(capsys.readouterr().out) == report

        lines = (out / "example1.trajectory.csv").read_text().splitlines()
        assert lines[0] == "t,x1,x2,nu,mu"
        assert lines[1] == "0,0,10,2,0"
        assert lines[2] == "1,10,0,1,-10"
        assert lines[-1] == "5,0,0,,"

    def test_compare_second_example(self, tmp_path):
        out = tmp_path / "out"
        code = run(["compare", EXAMPLE2, "--out", str(out), "--quiet"])
        assert code == 0
        report = json.loads((out / "example2.compare.json").read_text())
        assert report["comparison"]["verdict"] == "match"
        assert report["solve"]["sparsity"]["total"] == 1
        assert report["oracle"]["total"] == 1
        assert report["enumeration"]["min_weight"] == 1
        assert "published total 2" in report["solve"]["notes"][0]

    def test_oracle_first_example(self, tmp_path):
        code = run(["oracle", EXAMPLE1, "--out", str(tmp_path), "--quiet", "--jobs", "2"])
        assert code == 0
        report = json.loads((tmp_path / "example1.oracle.json").read_text())
        assert report["feasible"] is True
        assert report["total"] == 5

    def test_oracle_budget(self, tmp_path, capsys):
        code = run(["oracle", EXAMPLE1, "--out", str(tmp_path), "--quiet", "--budget", "10"])
        assert code == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "BUDGET_EXCEEDED"

    @pytest.mark.parametrize("fmt,first", [
        ("dot", "digraph transition_graph {"),
        ("json", "{"),
    ])
    def test_graph_export(self, tmp_path, fmt, first):
        code = run(["graph", EXAMPLE1, "--out", str(tmp_path), "--format", fmt, "--quiet"])
        assert code == 0
        text = (tmp_path / f"example1.graph.{fmt}").read_text()
        assert text.splitlines()[0] == first

    def test_validate(self, tmp_path):
        code = run(["validate", EXAMPLE2, "--out", str(tmp_path), "--quiet", "--seed", "5"])
        assert code == 0
        report = json.loads((tmp_path / "example2.validate.json").read_text())
        assert report["verdict"] == "valid_structural"
        assert report["seed"] == 5

    def test_simulate(self, tmp_path):
        code = run([
            "simulate", EXAMPLE1, "--out", str(tmp_path), "--quiet",
            "--nu", "2", "1", "2", "1", "2",
            "--mu", "0", "-10", "0", "0", "0",
        ])
        assert code == 0
        report = json.loads((tmp_path / "example1.simulate.json").read_text())
        assert report["admissible"] is True
        assert report["reached_origin"] is True
        assert report["sparsity"] == {"switches": 4, "controls": 1, "total": 5}

    def test_simulate_length_mismatch(self, tmp_path, capsys):
        code = run(["simulate", EXAMPLE1, "--out", str(tmp_path), "--quiet", "--nu", "1", "2", "--mu", "0"])
        assert code == 1
        assert "MALFORMED_SEQUENCE" in capsys.readouterr().err

    def test_no_walk(self, tmp_path):
        path = self._write(tmp_path, decoupled_config())
        assert run(["solve", path, "--out", str(tmp_path), "--quiet"]) == 2
        assert run(["compare", path, "--out", str(tmp_path), "--quiet"]) == 4
        report = json.loads((tmp_path / "decoupled.compare.json").read_text())
        assert report["comparison"]["verdict"] == "graph_infeasible_oracle_feasible"
        assert report["solve"]["status"] == "infeasible_no_walk"

    def test_lattice_closes_the_gap(self, tmp_path):
        data = decoupled_config()
        data["abstraction"] = "lattice"
        path = self._write(tmp_path, data)
        assert run(["compare", path, "--out", str(tmp_path), "--quiet"]) == 0

    def test_invalid_abstraction(self, tmp_path):
        path = self._write(tmp_path, shear_config())
        assert run(["validate", path, "--out", str(tmp_path), "--quiet"]) == 3
        assert run(["solve", path, "--out", str(tmp_path), "--quiet"]) == 2
        report = json.loads((tmp_path / "shear.solve.json").read_text())
        assert report["status"] == "infeasible_invalid_abstraction"

    def test_schema_error(self, tmp_path, capsys):
        data = decoupled_config()
        del data["T"]
        path = self._write(tmp_path, data)
        assert run(["solve", path, "--out", str(tmp_path), "--quiet"]) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "SCHEMA_ERROR"
        assert error["path"] == "$.T"

    def test_outputs_are_byte_identical(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            assert run(["compare", EXAMPLE1, "--out", str(out), "--quiet", "--seed", "3"]) == 0
        for name in ("example1.compare.json",):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_stored_settings_are_used(self, tmp_path):
        (tmp_path / "settings.json").write_text(json.dumps({"seed": 42}))
        assert run(["validate", EXAMPLE1, "--out", str(tmp_path), "--quiet"]) == 0
        report = json.loads((tmp_path / "example1.validate.json").read_text())
        assert report["seed"] == 42

    def test_saved_settings_apply_to_later_runs(self, tmp_path):
        assert run(["validate", EXAMPLE1, "--out", str(tmp_path), "--quiet", "--seed", "9", "--save-settings"]) == 0
        assert json.loads((tmp_path / "settings.json").read_text())["seed"] == 9
        assert run(["validate", EXAMPLE1, "--out", str(tmp_path), "--quiet"]) == 0
        assert json.loads((tmp_path / "example1.validate.json").read_text())["seed"] == 9

    def test_reset_settings(self, tmp_path):
        (tmp_path / "settings.json").write_text(json.dumps({"seed": 42}))
        with patch.dict(os.environ, {}, clear=False):
            os.environ.pop("HANDSOFF_SEED", None)
            assert run(["validate", EXAMPLE1, "--out", str(tmp_path), "--quiet", "--reset-settings"]) == 0
        assert not (tmp_path / "settings.json").exists()
        assert json.loads((tmp_path / "example1.validate.json").read_text())["seed"] == 0

    @pytest.mark.parametrize("argv", [
        ["plot", EXAMPLE1],
        ["solve"],
        ["solve", EXAMPLE1, "--samples", "many"],
        ["simulate", EXAMPLE1, "--quiet"],
        ["simulate", EXAMPLE1, "--quiet", "--nu", "1", "2"],
    ])
    def test_usage_errors(self, argv, tmp_path, capsys):
        assert run(argv + ["--out", str(tmp_path)]) == 1
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "USAGE_ERROR"
