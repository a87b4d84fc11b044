# tests/test_graph.py

import json

import numpy as np
import pandas as pd
import pytest

from app.core.experiment import parse_experiment
from app.graph import pipeline_app, run
from configs.app_config import EXIT_CONFIG_ERROR, EXIT_OK

FROZEN_VS_FREE = {
    "grid": [0.0, 1.0, 2.0],
    "g1": [[0.0, 1.0]],
    "c": [[[0.0, 0.0]], [[0.0, 0.0]], [[0.0, 0.0]]],
    "initial_measures": {"frozen": [[1.0, 1.0]], "free": [[1.1, 1.0]]},
    "solver": {"dt": 0.1, "T": 0.5},
    "metrics": ["flat", "mt"],
    "snapshot_every": 2,
}


def config_with(**overrides):
    data = json.loads(json.dumps(FROZEN_VS_FREE))
    data.update(overrides)
    return parse_experiment(data)


def test_pipeline_is_compiled():
    assert pipeline_app is not None


def test_frozen_vs_free_run(tmp_path):
    assert run(config_with(), output_dir=str(tmp_path)) == EXIT_OK
    metrics = pd.read_csv(tmp_path / "metrics_frozen__free.csv")
    assert list(metrics.columns) == ["t", "flat", "mt"]
    np.testing.assert_allclose(metrics["flat"], metrics["t"] + 0.1, atol=1e-12)
    np.testing.assert_allclose(metrics["mt"], 2.0)

    trajectory = pd.read_csv(tmp_path / "trajectory_free.csv")
    assert list(trajectory.columns) == ["t", "total_mass", "v", "atoms_count"]
    assert len(trajectory) == 6

    stability = pd.read_csv(tmp_path / "stability_frozen__free.csv")
    assert stability["violated"].sum() == 0
    constants = json.loads((tmp_path / "constants_frozen__free.json").read_text())
    assert constants["L"] == "inf"
    assert (tmp_path / "snapshot_free_5.json").exists()


def test_assumption_violation_stops_the_pipeline(tmp_path):
    config = config_with(c=[[[0.0, 0.0]], [[0.0, 0.0]], [[0.0, 1.0]]])
    assert run(config, output_dir=str(tmp_path)) == EXIT_CONFIG_ERROR
    assert not list(tmp_path.glob("*.csv"))


def test_empty_initial_measure(tmp_path):
    config = config_with(initial_measures={"empty": []})
    assert run(config, output_dir=str(tmp_path)) == EXIT_OK
    trajectory = pd.read_csv(tmp_path / "trajectory_empty.csv")
    assert (trajectory["total_mass"] == 0).all()
    assert not list(tmp_path.glob("metrics_*.csv"))


def test_unequal_masses_leave_wasserstein_undefined(tmp_path):
    config = config_with(initial_measures={"a": [[0.5, 1.0]], "b": [[0.5, 2.0]]}, metrics=["w1", "norm"])
    assert run(config, output_dir=str(tmp_path)) == EXIT_OK
    metrics = pd.read_csv(tmp_path / "metrics_a__b.csv")
    assert metrics["w1"].isna().all()
    np.testing.assert_allclose(metrics["norm"], 1.0)


def test_growth_skips_stability(tmp_path):
    config = config_with(p1=[[0.0, 1.0]], p2=[[[0.0, 0.1]], [[0.0, 0.1]]])
    assert run(config, output_dir=str(tmp_path)) == EXIT_OK
    assert (tmp_path / "metrics_frozen__free.csv").exists()
    assert not (tmp_path / "stability_frozen__free.csv").exists()


def test_worker_count_does_not_change_results(tmp_path, monkeypatch):
    single, pooled = tmp_path / "single", tmp_path / "pooled"
    assert run(config_with(), output_dir=str(single)) == EXIT_OK
    monkeypatch.setenv("MTLAB_WORKERS", "2")
    assert run(config_with(), output_dir=str(pooled)) == EXIT_OK
    for name in ("metrics_frozen__free.csv", "trajectory_frozen.csv", "trajectory_free.csv"):
        assert (single / name).read_bytes() == (pooled / name).read_bytes()


def test_superposition_cross_check(tmp_path):
    assert run(config_with(), output_dir=str(tmp_path)) == EXIT_OK
    check = pd.read_csv(tmp_path / "superposition_check.csv")
    assert list(check["measure"]) == ["frozen", "free"]
    np.testing.assert_allclose(check["simulated"], [1.0, 1.6], atol=1e-12)
    assert (check["gap"] <= 1e-9).all()


def test_cross_check_skipped_beyond_the_time_limit(tmp_path):
    # T = 1 reaches the time limit of the unit grid under unit speed
    run(config_with(solver={"dt": 0.1, "T": 1.0}), output_dir=str(tmp_path))
    assert (tmp_path / "trajectory_free.csv").exists()
    assert not (tmp_path / "superposition_check.csv").exists()


def test_seeded_random_pairs_are_reproducible(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    config = config_with(random_pairs=1, seed=11, metrics=["norm", "mt"])
    assert run(config, output_dir=str(first)) == run(config, output_dir=str(second))
    for name in ("metrics_random0__random0_perturbed.csv", "trajectory_random0_perturbed.csv"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
