import csv
import json

import numpy as np
import pytest

from poptransfer.cli import run_cli
from poptransfer.config import ConfigError, RunConfig, load_config, load_schedule
from poptransfer.controls import Ansatz1


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def _write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


# config

def test_config_defaults():
    cfg = RunConfig.from_dict({})
    assert cfg.system.T == 40.0 and not cfg.system.sink
    assert cfg.train.n_batch == 50
    assert cfg.sweep is None


def test_config_roundtrip():
    data = {
        "seed": 3,
        "system": {"T": 20.0, "sink": True, "channels": [{"kind": "dephase", "rate": 0.1, "level": "e"}]},
        "protocol": {"kind": "ansatz1", "c1": 1.0, "c2": 2.0, "k": 3.0, "m": 4.0, "stray": [0.1, 0.0]},
        "train": {"n_epochs": 5, "ranges": [14, 0.2]},
        "optimize": {"family": "parity_polys", "powell": {"restarts": 2, "init_range": [0, 20]}},
        "sweep": {"scenario": "stray", "axes": [{"name": "stray_dp", "min": -1, "max": 1, "n_points": 3},
                                                {"name": "stray_d", "min": -0.1, "max": 0.1, "n_points": 3}]},
        "output": {"path": "x.csv"},
    }
    once = RunConfig.from_dict(data)
    twice = RunConfig.from_dict(json.loads(once.dumps()))
    assert twice.to_dict() == once.to_dict()
    assert once.protocol == Ansatz1(1.0, 2.0, 3.0, 4.0, stray=(0.1, 0.0))
    assert once.system.effective_sink_rate == pytest.approx(0.5)
    assert [c.kind.value for c in once.system.all_channels()] == ["sink", "dephase"]


@pytest.mark.parametrize("bad", [
    {"unknown": 1},
    {"system": {"T": -1}},
    {"system": {"channels": [{"kind": "decay_eg", "rate": -0.1}]}},
    {"system": {"omega_p": 0}},
    {"train": {"learning_rte": 0.1}},
    {"optimize": {"family": "grape"}},
    {"sweep": {"scenario": "lambda", "extra": True}},
    {"protocol": "protocol9"},
    {"protocol": {"kind": "ansatz1", "c1": 1}},
])
def test_config_rejects(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(p)


def test_load_schedule_from_result(tmp_path):
    p = _write(tmp_path / "r.json", {"score": 0.5, "schedule": Ansatz1(1, 2, 3, 4).to_dict()})
    assert load_schedule(p) == Ansatz1(1, 2, 3, 4)


# CLI

def test_simulate_protocol1(tmp_path):
    out = tmp_path / "traj.csv"
    assert run_cli(["simulate", "--protocol", "protocol1", "--T", "40", "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows[0] == ["t", "rho_gg", "rho_ee", "rho_ff", "rho_ss", "delta_p", "delta"]
    assert float(rows[-1][3]) == pytest.approx(0.9994, abs=0.002)
    assert float(rows[-1][0]) == pytest.approx(40.0)
    assert all(len(r[1].replace("-", "").replace(".", "").split("e")[0].lstrip("0")) <= 12 for r in rows[1:])


def test_simulate_vanishing_time(tmp_path):
    out = tmp_path / "t.csv"
    assert run_cli(["simulate", "--T", "1e-9", "--out", str(out)]) == 0
    rows = _rows(out)
    first = [float(v) for v in rows[1][1:5]]
    last = [float(v) for v in rows[-1][1:5]]
    np.testing.assert_allclose(first, [1, 0, 0, 0])
    np.testing.assert_allclose(last, first, atol=1e-9)


def test_simulate_sink_column(tmp_path):
    out = tmp_path / "s.csv"
    assert run_cli(["simulate", "--sink", "on", "--out", str(out)]) == 0
    rows = _rows(out)
    assert float(rows[-1][4]) > 0.01
    total = sum(float(v) for v in rows[-1][1:5])
    assert total == pytest.approx(1.0, abs=1e-9)


def test_simulate_schedule_file(tmp_path):
    sched = _write(tmp_path / "p.json", Ansatz1(5.11, -0.038, 21.51, 0.29).to_dict())
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(["simulate", "--protocol", sched, "--out", str(a)]) == 0
    assert run_cli(["simulate", "--protocol", "protocol1_T40", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_train_deterministic_and_checkpoint(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"train": {"n_epochs": 3, "n_batch": 6, "n_steps": 6, "n_units": 6,
                                                 "n_dense": 4, "T": 10.0}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(["train", "--config", cfg, "--seed", "7", "--out", str(a)]) == 0
    assert run_cli(["train", "--config", cfg, "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert _rows(a)[0] == ["epoch", "mean_reward", "max_reward", "baseline", "greedy_reward"]
    assert len(_rows(a)) == 4
    capsys.readouterr()
    assert run_cli(["checkpoint-info", str(tmp_path / "a.json")]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["seed"] == 7 and info["n_units"] == 6


def test_optimize_ansatz_cli(tmp_path):
    cfg = _write(tmp_path / "c.json", {"system": {"T": 20.0},
                                      "optimize": {"powell": {"restarts": 1, "max_evals": 60}}})
    out = tmp_path / "o.json"
    assert run_cli(["optimize-ansatz", "--config", cfg, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["schedule"]["kind"] == "ansatz1" and 0 <= doc["score"] <= 1


def test_optimize_poly_cli(tmp_path):
    cfg = _write(tmp_path / "c.json", {"system": {"T": 20.0},
                                      "optimize": {"order": 1, "n_runs": 1, "powell": {"max_evals": 40}}})
    out = tmp_path / "o.json"
    assert run_cli(["optimize-poly", "--config", cfg, "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["params"]) == 4


def test_sweep_cli_deterministic(tmp_path):
    cfg = _write(tmp_path / "c.json", {"sweep": {"scenario": "ladder", "axes": [
        {"name": "gamma_eg", "min": 0, "max": 0.02, "n_points": 2},
        {"name": "gamma_fe", "min": 0, "max": 0.02, "n_points": 2}]}})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli(["sweep", "--config", cfg, "--out", str(a)]) == 0
    assert run_cli(["sweep", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert _rows(a)[0] == ["gamma_eg", "gamma_fe", "final_rho_ff", "max_rho_ee"]
    assert len(_rows(a)) == 5


def test_scan_time_and_raman_cli(tmp_path):
    cfg = _write(tmp_path / "c.json", {"sweep": {"scenario": "time_scan", "axes": [
        {"name": "T", "min": 30, "max": 40, "n_points": 3}]}})
    out = tmp_path / "t.csv"
    assert run_cli(["scan-time", "--config", cfg, "--out", str(out)]) == 0
    assert [r[0] for r in _rows(out)] == ["T", "30", "35", "40"]
    cfg = _write(tmp_path / "r.json", {"sweep": {"scenario": "raman_baseline", "axes": [
        {"name": "delta_p", "min": -2, "max": 2, "n_points": 3}]}})
    out = tmp_path / "r.csv"
    assert run_cli(["raman-scan", "--config", cfg, "--out", str(out)]) == 0
    assert _rows(out)[0] == ["delta_p", "final_rho_ff", "max_rho_ee", "max_rho_ff"]


def test_cli_config_errors(tmp_path):
    assert run_cli(["simulate", "--protocol", "nonexistent", "--out", str(tmp_path / "x.csv")]) == 1
    assert run_cli(["simulate", "--config", str(tmp_path / "nope.json")]) == 1
    bad = _write(tmp_path / "bad.json", {"bogus": True})
    assert run_cli(["sweep", "--config", bad]) == 1
    assert run_cli(["sweep", "--out", str(tmp_path / "s.csv")]) == 1
    assert run_cli(["simulate", "--out", str(tmp_path / "no" / "such" / "dir.csv")]) == 1
    assert run_cli(["simulate", "--sink", "maybe"]) == 1
    assert run_cli(["frobnicate"]) == 1
    assert run_cli(["checkpoint-info", str(tmp_path / "none.json")]) == 1


def test_cli_numerical_failure(tmp_path):
    # The first Adam step overflows the weights; the next forward pass fails.
    cfg = _write(tmp_path / "c.json", {"train": {"n_epochs": 3, "n_batch": 2, "n_steps": 2, "n_units": 2,
                                                 "n_dense": 2, "T": 5.0, "learning_rate": 1e308}})
    with np.errstate(all="ignore"):
        assert run_cli(["train", "--config", cfg, "--out", str(tmp_path / "b.csv")]) == 2
