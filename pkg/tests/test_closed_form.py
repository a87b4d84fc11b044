# tests/test_closed_form.py

import math

import pytest

from app.core.errors import OutOfRange
from app.core.measure import DiscreteMeasure, mass_at
from app.dynamics.simulator import simulate
from app.metrics.distances import flat_metric, mt_metric
from app.metrics.grid import BreakpointGrid
from app.reference.closed_form import (
    AnalyticKind, AnalyticSolution, ExampleName, ExampleSetup, eval_example_1_1, eval_example_4_5,
    eval_example_4_6
)

UNIT = BreakpointGrid.from_points([0.0, 1.0, 2.0])
WIDE = BreakpointGrid.from_points([0.0, 1.0, 3.0])


@pytest.mark.parametrize("t", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
def test_frozen_vs_free_series(t):
    frozen, free = eval_example_1_1(t, 0.1, UNIT)
    assert flat_metric(frozen, free) == pytest.approx(t + 0.1)
    assert mt_metric(frozen, free, UNIT) == pytest.approx(2.0)


def test_frozen_vs_free_validity():
    with pytest.raises(OutOfRange):
        eval_example_1_1(0.95, 0.1, UNIT)


def test_free_atom_past_breakpoint_rejected():
    free = AnalyticSolution(AnalyticKind.FREE_ATOM, UNIT, start=1.5)
    assert free.evaluate(0.25) == DiscreteMeasure.dirac(1.75)
    with pytest.raises(OutOfRange):
        free.evaluate(0.6)


def test_constant_outflow_distance_at_arrival():
    eps, c1 = 0.2, 1.0
    mu, mu_eps = eval_example_4_5(eps, eps, c1, 2000, UNIT)
    assert mt_metric(mu, mu_eps, UNIT) == pytest.approx(2.0 * (1.0 - math.exp(-c1 * eps)), rel=1e-3)


def test_constant_outflow_initial_distance():
    mu, mu_eps = eval_example_4_5(0.0, 0.2, 1.0, 100, UNIT)
    assert mt_metric(mu, mu_eps, UNIT) == pytest.approx(0.2)


def test_constant_outflow_keeps_mass():
    mu, _ = eval_example_4_5(0.5, 0.2, 1.0, 500, UNIT)
    assert mu.total_mass == pytest.approx(1.0)
    assert mass_at(mu, 1.0) == pytest.approx(math.exp(-0.5))


def test_no_outflow_keeps_atom_parked():
    mu, _ = eval_example_4_5(0.5, 0.2, 0.0, 100, UNIT)
    assert mu == DiscreteMeasure.dirac(1.0)


def test_constant_outflow_quadrature_converges_at_first_order():
    coarse = [eval_example_4_5(0.5, 0.2, 1.0, M, UNIT)[0] for M in (100, 200, 400)]
    first = mt_metric(coarse[0], coarse[1], UNIT)
    second = mt_metric(coarse[1], coarse[2], UNIT)
    assert 1.8 <= first / second <= 2.2


def test_constant_outflow_validity():
    with pytest.raises(OutOfRange):
        eval_example_4_5(0.1, 1.5, 1.0, 100, UNIT)
    with pytest.raises(OutOfRange):
        eval_example_4_5(1.2, 0.2, 1.0, 100, UNIT)


def test_speed_coupled_ratio():
    eps, g_low = 0.05, 0.5
    t_bar = eps / g_low
    mu0, mu0_eps = eval_example_4_6(0.0, eps, g_low, 1.5, WIDE)
    mu, mu_eps = eval_example_4_6(t_bar, eps, g_low, 1.5, WIDE)
    ratio = mt_metric(mu, mu_eps, WIDE) / mt_metric(mu0, mu0_eps, WIDE)
    assert mt_metric(mu0, mu0_eps, WIDE) == pytest.approx(eps)
    assert ratio == pytest.approx(1.0 / g_low - 1.0, rel=1e-9)


def test_speed_coupled_without_slowdown_closes_the_gap():
    mu, mu_eps = eval_example_4_6(0.05, 0.05, 1.0, 1.5, WIDE)
    assert mt_metric(mu, mu_eps, WIDE) == pytest.approx(0.0, abs=1e-12)


def test_speed_coupled_validity():
    with pytest.raises(OutOfRange):
        eval_example_4_6(0.0, 0.05, 0.5, 2.5, WIDE)
    with pytest.raises(OutOfRange):
        eval_example_4_6(0.0, 0.05, 0.0, 1.5, WIDE)


@pytest.mark.parametrize("name", list(ExampleName))
def test_standard_setups_are_valid(name):
    setup = ExampleSetup.standard(name)
    model = setup.model()
    assert model.grid == setup.grid
    mu, mu_eps = setup.initial_pair()
    assert mu.total_mass == pytest.approx(mu_eps.total_mass)
    setup.evaluate(setup.horizon * 0.99)


def test_simulated_outflow_matches_closed_form():
    setup = ExampleSetup.standard(ExampleName.CONSTANT_OUTFLOW)
    dt = setup.eps / 400
    mu0, mu0_eps = setup.initial_pair()
    model = setup.model()
    sim = simulate(mu0, model, setup.eps, dt).snapshots[-1]
    sim_eps = simulate(mu0_eps, model, setup.eps, dt).snapshots[-1]
    expected = 2.0 * (1.0 - math.exp(-setup.c1 * setup.eps))
    assert mt_metric(sim, sim_eps, setup.grid) == pytest.approx(expected, rel=5e-2)


def test_simulated_speed_coupling_matches_closed_form():
    setup = ExampleSetup.standard(ExampleName.SPEED_COUPLED)
    dt = setup.eps / 200
    mu0, mu0_eps = setup.initial_pair()
    model = setup.model()
    T = setup.reference_time
    sim = simulate(mu0, model, T, dt).snapshots[-1]
    sim_eps = simulate(mu0_eps, model, T, dt).snapshots[-1]
    ratio = mt_metric(sim, sim_eps, setup.grid) / mt_metric(mu0, mu0_eps, setup.grid)
    assert ratio == pytest.approx(1.0 / setup.g_low - 1.0, rel=5e-2)
