# tests/test_stability.py

import json
import math
from dataclasses import replace
from types import SimpleNamespace

import numpy as np
import pytest

from app.core.errors import DenominatorNonpositive, NonPositiveSpeed, OutOfRange
from app.core.measure import DiscreteMeasure, make_measure
from app.dynamics.coefficients import ModelCoefficients, PiecewiseLinearFn, unit_speed_model
from app.dynamics.simulator import simulate
from app.metrics.grid import BreakpointGrid
from app.reference.closed_form import ExampleName, ExampleSetup
from app.stability.checks import (
    check_appendix_inequalities, check_global_bound, check_local_bound, check_nonlinear_estimate,
    stability_table, v_difference_integral
)
from app.stability.constants import compute_C1, compute_global_constants, compute_min_g1, compute_Tmax
from app.stability.sweep import SweepTask, build_pair, random_model, run_pair, run_sweep, standard_tasks

ZERO = PiecewiseLinearFn.constant(0.0)


def model_with(grid, g1_table, rates=None):
    rates = rates or [0.0] * grid.N
    c = tuple(PiecewiseLinearFn.constant(r) for r in rates) + (ZERO,)
    return ModelCoefficients(grid=grid, g1=PiecewiseLinearFn.from_table(g1_table), c=c)


@pytest.mark.parametrize("points, g1_table, expected", [
    ([0.0, 1.0, 2.0], [[0.0, 1.0]], 1.0),
    ([0.0, 1.0, 3.0], [[0.0, 2.0]], 0.5),
    ([0.0, 0.5, 2.0], [[0.0, 1.0], [3.0, 4.0]], 0.125),
])
def test_Tmax(points, g1_table, expected):
    grid = BreakpointGrid.from_points(points)
    assert compute_Tmax(grid, model_with(grid, g1_table)) == pytest.approx(expected)


@pytest.mark.parametrize("g1_table, bound, expected", [
    ([[0.0, 1.0]], 5.0, 1.0),
    ([[0.0, 1.0], [10.0, 11.0]], 2.0, 1.0),
    ([[0.0, 2.0], [1.0, 0.5], [3.0, 3.0]], 3.0, 0.5),
])
def test_min_g1(unit_grid, g1_table, bound, expected):
    assert compute_min_g1(model_with(unit_grid, g1_table), bound) == pytest.approx(expected)


def test_min_g1_rejects_nonpositive_speed():
    fake = SimpleNamespace(g1=PiecewiseLinearFn.from_table([[0.0, 1.0], [2.0, -1.0]]))
    with pytest.raises(NonPositiveSpeed):
        compute_min_g1(fake, 2.0)


def test_C1_without_outflow_is_one(free_model):
    m = DiscreteMeasure.dirac(0.5)
    assert compute_C1(0.5, free_model, m, m) == pytest.approx(1.0)


def test_C1_constant_outflow(unit_grid):
    model = unit_speed_model(unit_grid, [1.5, 1.5])
    m = DiscreteMeasure.dirac(0.5)
    assert compute_C1(0.5, model, m, m) == pytest.approx(1.5 * (2.0 + 0.5 * 1.5))


def test_C1_grows_with_outflow(unit_grid):
    m = DiscreteMeasure.dirac(0.5)
    base = unit_speed_model(unit_grid, [1.0, 1.0])
    assert compute_C1(0.5, base.with_scaled_outflow(2.0), m, m) >= 2.0 * compute_C1(0.5, base, m, m)


def test_C1_is_nondecreasing_in_T(rng):
    model = random_model("speed_coupled", rng)
    m1, m2 = DiscreteMeasure.dirac(model.grid.first), DiscreteMeasure.dirac(model.grid.first)
    T_max = compute_Tmax(model.grid, model)
    values = [compute_C1(T, model, m1, m2) for T in np.linspace(0.05, 0.95, 10) * T_max]
    assert all(v >= 1.0 for v in values)
    assert np.all(np.diff(values) >= -1e-12)


def test_C1_needs_positive_T(free_model):
    m = DiscreteMeasure.dirac(0.5)
    with pytest.raises(OutOfRange):
        compute_C1(0.0, free_model, m, m)


def test_C1_denominator_must_stay_positive(unit_grid):
    model = model_with(unit_grid, [[0.0, 1.0], [1.0, 3.0]])
    heavy = make_measure([(1.9, 2.0)])
    with pytest.raises(DenominatorNonpositive):
        compute_C1(0.3, model, heavy, heavy)


def test_global_constants_unit_speed(free_model):
    m = DiscreteMeasure.dirac(0.5)
    constants = compute_global_constants(free_model, m, m)
    assert constants.fixed_step
    assert math.isinf(constants.L)
    assert constants.T_max == pytest.approx(1.0)
    assert constants.T_int == pytest.approx(1.0)
    assert (constants.It1, constants.It2) == (2, 3)
    assert constants.kappa == pytest.approx(1.0)
    assert constants.alpha == pytest.approx(0.0)
    assert constants.beta == constants.T_int


def test_global_constants_mass_step(unit_grid):
    model = model_with(unit_grid, [[0.0, 2.0], [1.0, 3.0]], rates=[0.5, 0.5])
    m = DiscreteMeasure.dirac(0.5)
    constants = compute_global_constants(model, m, m)
    assert constants.L == pytest.approx(0.5)
    assert constants.kappa >= 1.0
    assert constants.It1 >= 1 and constants.It2 >= 1
    assert constants.alpha == pytest.approx(constants.It2 * math.log(constants.kappa))


def test_global_bound_shape(unit_grid):
    model = model_with(unit_grid, [[0.0, 2.0], [1.0, 3.0]], rates=[0.5, 0.5])
    m = DiscreteMeasure.dirac(0.5)
    constants = compute_global_constants(model, m, m)
    assert constants.global_bound(0.0, 0.3) == pytest.approx(0.3)
    assert constants.global_bound(1e-9, 0.3) == pytest.approx(math.exp(constants.alpha) * 0.3)
    assert constants.global_bound(1.0, 0.0) == 0.0
    huge = replace(constants, alpha=1000.0)
    assert math.isinf(huge.global_bound(1.0, 0.1))
    assert huge.global_bound(1.0, 0.0) == 0.0


def test_constants_serialize(free_model):
    m = DiscreteMeasure.dirac(0.5)
    data = compute_global_constants(free_model, m, m).to_dict()
    assert data["L"] == "inf"
    assert "model" not in data
    json.dumps(data)


@pytest.fixture
def frozen_vs_free():
    setup = ExampleSetup.standard(ExampleName.FROZEN_VS_FREE)
    model = setup.model()
    mu, mu_eps = setup.initial_pair()
    traj1 = simulate(mu, model, setup.horizon, 0.01)
    traj2 = simulate(mu_eps, model, setup.horizon, 0.01)
    return model, traj1, traj2, compute_global_constants(model, mu, mu_eps)


def test_bounds_hold_for_frozen_vs_free(frozen_vs_free):
    model, traj1, traj2, constants = frozen_vs_free
    local = check_local_bound(traj1, traj2, model.grid, constants, stride=5)
    assert local.passed
    assert np.allclose(local.table["rho_mt"], 2.0)
    assert check_global_bound(traj1, traj2, model.grid, constants, stride=5).passed
    nonlinear = check_nonlinear_estimate(traj1, traj2, constants, stride=5)
    assert nonlinear.passed
    assert np.all(v_difference_integral(traj1, traj2) == 0.0)


def test_stability_table_columns(frozen_vs_free):
    _, traj1, traj2, constants = frozen_vs_free
    table = stability_table(traj1, traj2, constants, stride=10)
    assert list(table.columns) == ["t", "rho_mt", "rho_flat", "bound_local", "bound_global", "margin", "violated"]
    assert table["t"].iloc[-1] == pytest.approx(0.5)
    np.testing.assert_allclose(table["rho_flat"], table["t"] + 0.1, atol=1e-9)
    assert table["violated"].sum() == 0


def test_identical_measures_never_violate(outflow_model):
    m = make_measure([(0.4, 0.5), (1.0, 0.5)])
    traj = simulate(m, outflow_model, 0.5, 0.01)
    constants = compute_global_constants(outflow_model, m, m)
    local = check_local_bound(traj, traj, outflow_model.grid, constants, stride=10)
    assert local.passed
    assert np.all(np.isinf(local.table["margin"]))
    assert check_global_bound(traj, traj, outflow_model.grid, constants, stride=10).passed


def test_trajectories_must_share_a_time_grid(outflow_model):
    m = DiscreteMeasure.dirac(0.5)
    constants = compute_global_constants(outflow_model, m, m)
    short = simulate(m, outflow_model, 0.2, 0.01)
    long = simulate(m, outflow_model, 0.3, 0.01)
    with pytest.raises(OutOfRange):
        check_global_bound(short, long, outflow_model.grid, constants)


def test_elementary_inequalities_hold():
    reports = check_appendix_inequalities(seed=3, n_samples=500)
    assert [r.name for r in reports] == [
        "exp_minus_one", "exp_difference", "neg_exp_difference", "sup_exp", "integral_exp"
    ]
    assert all(r.passed for r in reports)


def test_elementary_inequalities_on_given_samples():
    reports = check_appendix_inequalities(sample_data={"x": np.array([0.0, 1.0]), "y": np.array([0.0, 1.0])})
    assert all(r.passed for r in reports)
    assert len(reports[0].table) == 2


def test_arrival_time_difference_bound():
    model, mu1, mu2 = build_pair(SweepTask("speed_coupled", seed=3))
    constants = compute_global_constants(model, mu1, mu2)
    dt = constants.T_int / 200
    traj1 = simulate(mu1, model, constants.T_int, dt)
    traj2 = simulate(mu2, model, constants.T_int, dt)
    reports = check_appendix_inequalities(seed=1, n_samples=200, tau_pair=(traj1, traj2, model))
    tau = reports[-1]
    assert tau.name == "tau_difference"
    assert tau.passed


def test_build_pair_is_deterministic():
    first = build_pair(SweepTask("outflow_coupled", seed=11))
    second = build_pair(SweepTask("outflow_coupled", seed=11))
    assert first[1] == second[1]
    assert first[2] == second[2]
    assert first[0].grid == second[0].grid


def test_unknown_family_rejected(rng):
    with pytest.raises(ValueError):
        random_model("quadratic", rng)


def _describe(task):
    return {"family": task.family, "seed": task.seed}


def test_sweep_keeps_task_order():
    tasks = standard_tasks(["constant", "unit_speed"], pairs=3, seed=5)
    assert len({t.seed for t in tasks}) == 6
    results = run_sweep(tasks, workers=1, runner=_describe)
    assert [r["seed"] for r in results] == [t.seed for t in tasks]


@pytest.mark.slow
@pytest.mark.parametrize("family", ["constant", "speed_coupled", "outflow_coupled", "unit_speed"])
def test_global_bound_holds_on_random_pairs(family):
    result = run_pair(SweepTask(family, seed=7, horizon_intervals=1.0, steps_per_interval=200, check_stride=20))
    assert result["global_violations"] == 0
    assert result["mass_drift"] <= 1e-9
