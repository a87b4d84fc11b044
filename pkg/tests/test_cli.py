# tests/test_cli.py

import json

import pandas as pd
import pytest

from app.cli import example_table, main
from app.metrics import distances
from configs.app_config import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_VIOLATION, resolve_workers

MODEL = {
    "grid": [0.0, 1.0, 2.0],
    "g1": [[0.0, 1.0]],
    "c": [[[0.0, 0.0]], [[0.0, 1.0]], [[0.0, 0.0]]],
    "initial_measures": {"parked": [[1.0, 1.0]], "arriving": [[0.8, 1.0]]},
    "solver": {"dt": 0.01, "T": 0.3},
}


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps(MODEL), encoding="utf-8")
    return path


def last_line(capsys) -> str:
    return capsys.readouterr().out.strip().splitlines()[-1]


@pytest.mark.parametrize("kind, expected", [("mt", "2"), ("flat", "0.25"), ("norm", "2"), ("w1", "0.25")])
def test_metric_subcommand(capsys, kind, expected):
    argv = ["metric", "--kind", kind, "--grid", "[0, 1, 2]", "--m1", "[[1, 1]]", "--m2", "[[1.25, 1]]"]
    assert main(argv) == EXIT_OK
    assert last_line(capsys) == expected


def test_metric_reads_files(tmp_path, capsys):
    m1 = tmp_path / "m1.json"
    m1.write_text("[[0, 0.5], [0.5, 0.5]]")
    assert main(["metric", "--kind", "flat", "--m1", str(m1), "--m2", "[[0, 0.4], [0.5, 0.6]]"]) == EXIT_OK
    assert float(last_line(capsys)) == pytest.approx(0.05)


@pytest.mark.parametrize("argv", [
    ["metric", "--kind", "w1", "--m1", "[[0, 1]]", "--m2", "[[0, 2]]"],
    ["metric", "--kind", "mt", "--m1", "[[0, 1]]", "--m2", "[[1, 1]]"],
    ["metric", "--kind", "flat", "--m1", "[[0, -1]]", "--m2", "[[1, 1]]"],
    ["metric", "--kind", "flat", "--m1", "[[0, 1", "--m2", "[[1, 1]]"],
    ["metric", "--kind", "flat", "--m1", "{\"x\": 1}", "--m2", "[[1, 1]]"],
])
def test_metric_errors_exit_one(argv):
    assert main(argv) == EXIT_CONFIG_ERROR


def test_simulate_subcommand(model_file, tmp_path):
    out = tmp_path / "run" / "traj.csv"
    argv = ["simulate", "--model", str(model_file), "--out", str(out), "--measure", "arriving", "--snapshot-every", "10"]
    assert main(argv) == EXIT_OK
    frame = pd.read_csv(out)
    assert len(frame) == 31
    assert frame["total_mass"].iloc[-1] == pytest.approx(1.0)
    assert (out.parent / "snapshot_arriving_30.json").exists()


def test_simulate_unknown_measure(model_file, tmp_path):
    argv = ["simulate", "--model", str(model_file), "--out", str(tmp_path / "t.csv"), "--measure", "ghost"]
    assert main(argv) == EXIT_CONFIG_ERROR


def test_simulate_horizon_override(model_file, tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["simulate", "--model", str(model_file), "--out", str(out), "--horizon", "0.1"]) == EXIT_OK
    assert len(pd.read_csv(out)) == 11


def test_examples_subcommand(tmp_path):
    out = tmp_path / "example.csv"
    assert main(["examples", "--which", "1.1", "--out", str(out)]) == EXIT_OK
    frame = pd.read_csv(out)
    assert {"t", "analytic_mt", "simulated_mt", "bound", "analytic_flat"} <= set(frame.columns)
    assert (frame["analytic_flat"] - (frame["t"] + 0.1)).abs().max() < 1e-9


def test_example_table_for_outflow():
    table = example_table("4.5", steps=100, stride=50)
    assert list(table["t"]) == pytest.approx([0.0, 0.2, 0.4])
    assert table["analytic_mt"].iloc[0] == pytest.approx(0.2)
    assert "analytic_flat" not in table.columns


def test_stability_subcommand(model_file, tmp_path):
    out = tmp_path / "stability.csv"
    assert main(["stability", "--model", str(model_file), "--out", str(out)]) == EXIT_OK
    table = pd.read_csv(out)
    assert table["violated"].sum() == 0
    assert table["rho_mt"].iloc[0] == pytest.approx(0.2)


def test_stability_rejects_unknown_pair(model_file, tmp_path):
    argv = ["stability", "--model", str(model_file), "--out", str(tmp_path / "s.csv"), "--pairs", '["parked", "ghost"]']
    assert main(argv) == EXIT_CONFIG_ERROR


def test_constants_subcommand(model_file, tmp_path, capsys):
    out = tmp_path / "constants.json"
    assert main(["constants", "--model", str(model_file), "--out", str(out)]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["T_max"] == pytest.approx(1.0)
    assert printed["L"] == "inf"
    assert printed["C1_half_Tmax"] == pytest.approx(2.5)
    assert json.loads(out.read_text()) == printed


def test_run_rejects_outflow_from_last_point(tmp_path):
    bad = dict(MODEL, c=[[[0.0, 0.0]], [[0.0, 1.0]], [[0.0, 0.3]]])
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["run", "--model", str(path), "--out", str(tmp_path / "out")]) == EXIT_CONFIG_ERROR


def test_run_subcommand(model_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--model", str(model_file), "--out", str(out)]) == EXIT_OK
    assert (out / "metrics_parked__arriving.csv").exists()


def test_seed_flag_fixes_generated_pairs(tmp_path):
    path = tmp_path / "random.json"
    path.write_text(json.dumps(dict(MODEL, random_pairs=1)))
    trajectories = {}
    for label, seed in (("a", "5"), ("b", "5"), ("c", "6")):
        out = tmp_path / label
        main(["run", "--model", str(path), "--out", str(out), "--seed", seed])
        trajectories[label] = (out / "trajectory_random0.csv").read_bytes()
    assert trajectories["a"] == trajectories["b"]
    assert trajectories["a"] != trajectories["c"]


def test_reproduce_all_list(capsys):
    assert main(["reproduce-all", "--list"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "perturbed_dirac_table" in out
    assert "global_stability_sweep" in out


def test_reproduce_all_single_check(tmp_path):
    argv = ["reproduce-all", "--only", "perturbed_dirac_table", "dirac_shift", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    table = pd.read_csv(tmp_path / "reproduce_all.csv")
    assert list(table["status"]) == ["PASS", "PASS"]


def test_reproduce_all_catches_a_broken_metric(monkeypatch):
    monkeypatch.setattr(distances, "mt_metric", lambda m1, m2, grid, solver="auto": 0.0)
    assert main(["reproduce-all", "--only", "perturbed_dirac_table"]) == EXIT_VIOLATION


def test_environment_overrides_worker_flag(monkeypatch):
    monkeypatch.setenv("MTLAB_WORKERS", "3")
    assert resolve_workers(5) == 3
    monkeypatch.delenv("MTLAB_WORKERS")
    assert resolve_workers(5) == 5
