import csv
import json

import pytest

from kinex import cli
from kinex.errors import ValidationError


def _write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return p


def test_defaults_fill_in(tmp_path):
    s = cli.parse_scenario(_write(tmp_path, {"experiment": "euler_1d"}))
    assert s.params["cfl"] == 0.45 and s.params["bc"] == "periodic"
    assert s.law.M_max == 2 and s.law.n == 2
    assert s.kernel.kind == "maxwell" and s.seed == 0 and s.workers == 1


def test_unknown_key_reports_line(tmp_path):
    p = _write(tmp_path, {"experiment": "qeval", "N_v": 8, "vmax_": 3.0})
    with pytest.raises(ValidationError, match=r"vmax_.*line 4"):
        cli.parse_scenario(p)


def test_table_length_mismatch(tmp_path):
    p = _write(tmp_path, {"experiment": "qeval", "law": {"table": [1.0, 2.0], "M_max": 3}})
    with pytest.raises(ValidationError, match="M_max = 3"):
        cli.parse_scenario(p)


@pytest.mark.parametrize(
    "doc",
    [
        {"experiment": "nope"},
        {"experiment": "euler_1d", "bc": "reflect"},
        {"experiment": "euler_1d", "cfl": -1.0},
        {"experiment": "qeval", "n": 4},
        {"experiment": "qeval", "law": {"family": {"a": 1.0}, "table": [1.0], "M_max": 1}},
        {"experiment": "qeval", "kernel": {"kind": "power_law", "omega_exp": 0.9}},
    ],
)
def test_invalid_scenarios_exit_1(tmp_path, doc):
    assert cli.main(["run", str(_write(tmp_path, doc))]) == 1


def test_invalid_json_and_missing_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n "experiment": "qeval",\n}')
    assert cli.main(["run", str(bad)]) == 1
    assert "line 3" in capsys.readouterr().err
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 1


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as e:
        cli.main(["bogus"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["verify", "nothing"])
    assert e.value.code == 1


def test_numerical_failure_exit_2(tmp_path):
    out = tmp_path / "o"
    p = _write(tmp_path, {"experiment": "qeval", "v_max": 0.5, "N_v": 4, "output_dir": str(out)})
    assert cli.main(["run", str(p)]) == 2
    fail = json.loads((out / "failure.json").read_text())
    assert fail["error"] == "ConvergenceError"
    assert json.loads((out / "manifest.json").read_text())["status"] == "numerical_failure"


def test_run_writes_outputs_and_is_deterministic(tmp_path):
    def go(d):
        p = _write(tmp_path, {"experiment": "relax_dsmc", "particles": 1000, "steps": 5, "seed": 3, "output_dir": str(d)}, f"{d.name}.json")
        assert cli.main(["run", str(p)]) == 0
        return (d / "relax_dsmc_timeseries.csv").read_bytes()

    a, b = go(tmp_path / "a"), go(tmp_path / "b")
    assert a == b
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["seed"] == 3 and man["backend"] in ("python", "cython")
    assert "versions" in man and man["config"]["particles"] == 1000
    summ = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summ["max_conservation_drift"] < 1e-12
    rows = list(csv.reader(a.decode().splitlines()))
    assert rows[0][:2] == ["time", "rho"] and len(rows) == 7


def test_threads_env_recorded(tmp_path, monkeypatch):
    monkeypatch.setenv("KINEX_THREADS", "4")
    s = cli.parse_scenario(_write(tmp_path, {"experiment": "thermo_verify"}))
    assert s.workers == 4


@pytest.mark.parametrize(
    "doc",
    [
        {"experiment": "collide_demo", "n": 3},
        {"experiment": "qeval", "n": 1, "N_v": 8},
        {"experiment": "relax_bgk", "n": 1, "steps": 5, "N_v": 12},
        {"experiment": "nsme_1d", "cells": 32, "t_end": 0.01},
        {"experiment": "thermo_verify", "samples": 10},
    ],
)
def test_experiments_run(tmp_path, doc):
    doc = dict(doc, output_dir=str(tmp_path / "o"))
    assert cli.main(["run", str(_write(tmp_path, doc))]) == 0
    assert (tmp_path / "o" / "summary.json").is_file()


def test_verify_and_demo(capsys):
    assert cli.main(["verify", "collision", "--seed", "2"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert cli.main(["demo", "collide", "--n", "2", "--m", "1", "--m1", "2", "--m-out", "2", "--v", "1,0", "--v1", "0,0"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["momentum_error"] < 1e-14 and out["energy_error"] < 1e-14
    assert cli.main(["demo", "collide", "--n", "2", "--v", "1,0,0"]) == 1
