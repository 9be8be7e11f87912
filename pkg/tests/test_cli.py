import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from aimd_arena.cli import main, parse_topology, run, sweep, topology_to_config
from aimd_arena.network import compute_load_matrix, klimov, reentrant, single_server

E1 = [{"alpha": 1.5, "beta": 0.75}, {"alpha": 1.0, "beta": 0.25}]
MAIN3 = [{"alpha": 1.5, "beta": 0.75}, {"alpha": 1.25, "beta": 0.5}, {"alpha": 1.0, "beta": 0.25}]


@pytest.fixture
def write(tmp_path):
    def _write(cfg, name="cfg.json"):
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        return path

    return _write


def read_csv(path):
    return list(csv.DictReader(io.StringIO(path.read_text())))


def test_fixed_point_single_server(write, tmp_path, capsys):
    cfg = {
        "command": "fixed-point",
        "topology": {"kind": "single_server", "capacity": 50, "users": 2},
        "strategies": [{"alpha": 1, "beta": 0.5}, {"alpha": 1, "beta": 0.5}],
        "output_path": str(tmp_path / "fp.csv"),
    }
    assert main(["fixed-point", "--config", str(write(cfg))]) == 0
    out = capsys.readouterr().out
    assert "T=12.5" in out and "x*=(25.0, 25.0)" in out
    rows = read_csv(tmp_path / "fp.csv")
    assert [float(r["peak_rate"]) for r in rows] == [25.0, 25.0]


def test_simulate_writes_trajectory_csv(write, tmp_path):
    cfg = {
        "command": "simulate",
        "topology": {"kind": "reentrant", "capacities": [4, 2, 4], "users": 2},
        "strategies": E1,
        "simulation": {"initial_rates": [0.1, 0.2], "max_drops": 5},
    }
    out = tmp_path / "traj.csv"
    assert run(write(cfg), out=out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,event_index,user_index,pre_rate,post_rate"
    assert len(lines) == 1 + 5 * 2


def test_stability_and_payoff_matrix(write, tmp_path):
    cfg = {"command": "stability", "topology": {"kind": "reentrant", "capacities": [4, 4, 4], "users": 1}, "rates": [2.5]}
    assert run(write(cfg), out=tmp_path / "s.csv") == 0
    assert [r["binding"] for r in read_csv(tmp_path / "s.csv")] == ["true", "false"]

    cfg = {"command": "payoff-matrix", "strategies": E1, "capacity": 50, "lambda": 140}
    assert run(write(cfg), out=tmp_path / "m.csv") == 0
    rows = read_csv(tmp_path / "m.csv")
    assert [(r["i"], r["j"]) for r in rows] == [("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")]


def test_equilibrium_and_dominance(write, tmp_path, capsys):
    cfg = {"command": "equilibrium", "strategies": E1, "capacity": 50, "lambda": 190}
    assert run(write(cfg), out=tmp_path / "b.csv") == 0
    assert "regime=mixed" in capsys.readouterr().out
    (row,) = read_csv(tmp_path / "b.csv")
    assert float(row["lambda_lo"]) == pytest.approx(173.4984, abs=1e-3)
    assert float(row["lambda_hi"]) == pytest.approx(216.1120, abs=1e-3)

    cfg = {"command": "dominance", "strategies": E1, "capacity": 50}
    assert run(write(cfg)) == 0
    assert float(capsys.readouterr().out.split("=")[1]) == pytest.approx(173.4984, abs=1e-3)


def test_replicator_writes_share_csv(write, tmp_path, capsys):
    cfg = {
        "command": "replicator",
        "strategies": MAIN3,
        "capacity": 50,
        "lambda": 168,
        "replicator": {"gain": 0.2, "delay": 0.25, "mode": "pairwise", "horizon": 10},
    }
    out = tmp_path / "shares.csv"
    assert run(write(cfg), out=out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,share_1,share_2,share_3"
    assert capsys.readouterr().out.startswith("outcome=")


@pytest.mark.parametrize(
    "patch, field",
    [
        ({"lambda": -5}, "lambda"),
        ({"colour": "red"}, "colour"),
        ({"capacity": "fifty"}, "capacity"),
        ({"strategies": [{"alpha": 1, "beta": 1.2}, {"alpha": 1, "beta": 0.5}]}, "strategies[0].beta"),
    ],
)
def test_validation_errors_exit_1(write, capsys, patch, field):
    cfg = {"command": "payoff-matrix", "strategies": E1, "capacity": 50, "lambda": 140}
    cfg.update(patch)
    assert run(write(cfg)) == 1
    assert field in capsys.readouterr().err


def test_missing_and_unknown_nested_keys(write, capsys):
    cfg = {"command": "fixed-point", "topology": {"kind": "klimov", "capacities": [1], "extra": 1}, "strategies": E1[:1]}
    assert run(write(cfg)) == 1
    assert "topology.extra" in capsys.readouterr().err
    cfg = {"command": "fixed-point", "strategies": E1}
    assert run(write(cfg)) == 1
    assert "topology" in capsys.readouterr().err


def test_unreadable_and_malformed(tmp_path, write):
    assert run(tmp_path / "missing.json") == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(bad) == 1
    assert run(write([1, 2])) == 1


def test_command_mismatch(write):
    cfg = {"command": "payoff-matrix", "strategies": E1, "capacity": 50, "lambda": 140}
    assert main(["equilibrium", "--config", str(write(cfg))]) == 1


def test_model_inconsistency_exit_2(write, capsys):
    cfg = {
        "command": "simulate",
        "topology": {"kind": "single_server", "capacity": 10, "users": 1},
        "strategies": [{"alpha": 1.0, "beta": 0.999999999999999}],
        "simulation": {"initial_rates": [0.0], "max_drops": 3},
    }
    assert run(write(cfg)) == 2
    assert "model error" in capsys.readouterr().err


def test_lambda_sweep_regimes(write, tmp_path, capsys):
    cfg = {
        "command": "equilibrium",
        "strategies": E1,
        "capacity": 50,
        "lambda": 0,
        "sweep": {"parameter": "lambda", "from": 0, "to": 250, "count": 51},
    }
    out = tmp_path / "sweep.csv"
    assert sweep(write(cfg), out=out) == 0
    rows = read_csv(out)
    assert len(rows) == 51
    regimes = [r["regime"] for r in rows]
    blocks = [regimes[0]] + [b for a, b in zip(regimes, regimes[1:]) if a != b]
    assert blocks == ["dominant_pure(s1)", "mixed", "dominant_pure(s2)"]
    lams = np.array([float(r["lambda"]) for r in rows])
    mixed = lams[np.array(regimes) == "mixed"]
    assert 173.4984 - 5 < mixed.min() and mixed.max() < 216.1120 + 5
    assert np.all((mixed > 173.4984) & (mixed < 216.1120))
    assert all(r["p"] == "" for r in rows if r["regime"] != "mixed")


def test_tau_sweep_simplex(write, tmp_path):
    cfg = {
        "command": "replicator",
        "strategies": MAIN3,
        "capacity": 50,
        "lambda": 168,
        "replicator": {"gain": 0.2, "delay": 0.25, "mode": "pairwise", "horizon": 30, "step": 0.05},
        "sweep": {"parameter": "tau", "from": 0, "to": 15, "count": 7},
    }
    out = tmp_path / "tau.csv"
    assert sweep(write(cfg), out=out) == 0
    rows = read_csv(out)
    assert [float(r["tau"]) for r in rows] == [0, 2.5, 5, 7.5, 10, 12.5, 15]
    for r in rows:
        assert abs(sum(float(r[f"share_{i}"]) for i in (1, 2, 3)) - 1) < 1e-9


@pytest.mark.parametrize(
    "block",
    [
        {"parameter": "lambda", "from": 10, "to": 0, "count": 5},
        {"parameter": "lambda", "from": 0, "to": 10, "count": 0},
        {"parameter": "capacity", "from": 0, "to": 10, "count": 5},
    ],
)
def test_bad_sweeps_exit_1(write, block, capsys):
    cfg = {"command": "equilibrium", "strategies": E1, "capacity": 50, "lambda": 0, "sweep": block}
    assert sweep(write(cfg)) == 1
    assert "sweep" in capsys.readouterr().err


def test_sweep_rejected_for_non_sweepable_command(write):
    cfg = {"command": "payoff-matrix", "strategies": E1, "capacity": 50, "lambda": 0,
           "sweep": {"parameter": "lambda", "from": 0, "to": 1, "count": 2}}
    assert sweep(write(cfg)) == 1
    assert run(write(cfg)) == 1


@pytest.mark.parametrize("top", [single_server(50, 3), klimov([3, 7, 11]), reentrant(4, 2, 4, 2)])
def test_topology_round_trip(top):
    rebuilt = parse_topology(json.loads(json.dumps(topology_to_config(top))))
    np.testing.assert_array_equal(compute_load_matrix(rebuilt).xi, compute_load_matrix(top).xi)


def test_builtin_block_matches_constructor():
    top = parse_topology({"kind": "reentrant", "capacities": [4, 2, 4], "users": 2})
    np.testing.assert_array_equal(compute_load_matrix(top).xi, compute_load_matrix(reentrant(4, 2, 4, 2)).xi)


def test_deterministic_output(write, tmp_path):
    cfg = {
        "command": "replicator",
        "strategies": MAIN3,
        "capacity": 50,
        "lambda": 140,
        "seed": 7,
        "replicator": {"gain": 0.25, "delay": 5, "mode": "triple", "horizon": 20},
    }
    path = write(cfg)
    assert run(path, out=tmp_path / "a.csv") == 0
    assert run(path, out=tmp_path / "b.csv") == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_console_script(write):
    cfg = {"command": "fixed-point", "topology": {"kind": "single_server", "capacity": 50, "users": 2},
           "strategies": [{"alpha": 1, "beta": 0.5}, {"alpha": 1, "beta": 0.5}]}
    proc = subprocess.run(
        [sys.executable, "-m", "aimd_arena.cli", "fixed-point", "--config", str(write(cfg))],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "T=12.5" in proc.stdout
