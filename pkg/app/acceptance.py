# app/acceptance.py

"""
Named acceptance checks behind `reproduce-all`.

Each check is a function (seed, workers) -> (passed, detail). Checks look the
metrics up on the `distances` module at call time, so a patched metric is
seen everywhere.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd

from app.core.measure import DiscreteMeasure, measure_from_arrays
from app.dynamics.characteristics import branching_eta
from app.dynamics.simulator import simulate
from app.metrics import distances
from app.metrics.grid import BreakpointGrid, MetricKind
from app.metrics.oracle import metric_oracle
from app.reference.closed_form import ExampleName, ExampleSetup, outflow_state
from app.stability.checks import check_appendix_inequalities
from app.stability.constants import compute_Tmax, compute_global_constants
from app.stability.sweep import (
    FAMILIES, SweepTask, build_pair, random_measure, random_model, run_sweep, standard_tasks
)
from app.storage.serialization import write_frame
from configs.app_config import (
    ETA_TOL, EXIT_OK, EXIT_VIOLATION, LONG_RUN_MERGE_FRACTION, METRIC_TOL, SIM_DROP_TOLERANCE
)
from configs.script_config import (
    AXIOM_MAX_ATOMS, CONVERGENCE_BASE_STEPS, CONVERGENCE_HALVINGS, CONVERGENCE_REFERENCE_ATOMS,
    DEFAULT_SEED, ETA_DRAWS, ETA_QUAD_STEPS, MASS_HORIZON_INTERVALS, MASS_MEASURES, MASS_MODELS,
    MASS_STEPS_PER_INTERVAL, NONLINEAR_ALLOWANCE_FACTOR, ORACLE_MAX_ATOMS, RANDOM_PAIRS,
    SWEEP_CHECK_STRIDE, SWEEP_FAMILIES, SWEEP_HORIZON_INTERVALS, SWEEP_PAIRS, SWEEP_STEPS_PER_INTERVAL
)

CheckResult = Tuple[bool, str]
EXACT_TOL = 1e-12
UNIT_GRID = BreakpointGrid.from_points([0.0, 1.0, 2.0])


@dataclass(frozen=True)
class AcceptanceCheck:
    name: str
    description: str
    run: Callable[[int, int], CheckResult]


def _close(value: float, expected: float, tol: float = EXACT_TOL) -> bool:
    return abs(value - expected) <= tol


def _mt(m1: DiscreteMeasure, m2: DiscreteMeasure, grid: BreakpointGrid) -> float:
    return distances.mt_metric(m1, m2, grid)


def check_perturbed_dirac_table(seed: int, workers: int) -> CheckResult:
    eps = 0.25
    center = DiscreteMeasure.dirac(1.0)
    right, left = DiscreteMeasure.dirac(1.0 + eps), DiscreteMeasure.dirac(1.0 - eps)
    expected = {
        ("norm", "right"): 2.0, ("norm", "left"): 2.0,
        ("mt", "right"): 2.0, ("mt", "left"): eps,
        ("w1", "right"): eps, ("w1", "left"): eps,
        ("flat", "right"): eps, ("flat", "left"): eps,
    }
    bad = []
    for (kind, side), value in expected.items():
        other = right if side == "right" else left
        if kind == "mt":
            got = _mt(center, other, UNIT_GRID)
        else:
            got = distances.compute_metric(MetricKind(kind), center, other)
        if not _close(got, value):
            bad.append(f"{kind}/{side}={got!r}")
    return not bad, "all 8 values exact" if not bad else ", ".join(bad)


def check_dirac_shift(seed: int, workers: int) -> CheckResult:
    eps = 0.1
    a, b = DiscreteMeasure.dirac(0.0), DiscreteMeasure.dirac(eps)
    values = (distances.norm_distance(a, b), distances.flat_metric(a, b), distances.wasserstein1(a, b))
    ok = _close(values[0], 2.0) and _close(values[1], eps) and _close(values[2], eps)
    return ok, f"norm={values[0]:.15g}, flat={values[1]:.15g}, w1={values[2]:.15g}"


def check_frozen_vs_free_series(seed: int, workers: int) -> CheckResult:
    setup = ExampleSetup.standard(ExampleName.FROZEN_VS_FREE)
    worst = 0.0
    for k in range(6):
        t = k / 10.0
        m1, m2 = setup.evaluate(t)
        worst = max(worst, abs(distances.flat_metric(m1, m2) - (t + setup.eps)))
    mt0 = _mt(*setup.initial_pair(), setup.grid)
    ok = worst <= EXACT_TOL and _close(mt0, 2.0)
    return ok, f"max |flat - (t + eps)| = {worst:.3g}, mt(0) = {mt0:.15g}"


def _outflow_expected(setup: ExampleSetup) -> float:
    return 2.0 * (1.0 - math.exp(-setup.c1 * setup.eps))


def check_constant_outflow_analytic(seed: int, workers: int) -> CheckResult:
    setup = ExampleSetup.standard(ExampleName.CONSTANT_OUTFLOW)
    value = _mt(*setup.evaluate(setup.eps), setup.grid)
    expected = _outflow_expected(setup)
    rel = abs(value - expected) / expected
    return rel <= 1e-3, f"mt(eps) = {value:.10g}, expected {expected:.10g}, rel {rel:.3g}"


def _simulate_pair(setup: ExampleSetup, horizon: float, dt: float):
    model = setup.model()
    m1, m2 = setup.initial_pair()
    return simulate(m1, model, horizon, dt), simulate(m2, model, horizon, dt)


def check_constant_outflow_simulated(seed: int, workers: int) -> CheckResult:
    setup = ExampleSetup.standard(ExampleName.CONSTANT_OUTFLOW)
    traj1, traj2 = _simulate_pair(setup, setup.eps, setup.eps / 400)
    value = _mt(traj1.snapshots[-1], traj2.snapshots[-1], setup.grid)
    expected = _outflow_expected(setup)
    rel = abs(value - expected) / expected
    return rel <= 5e-2, f"simulated mt(eps) = {value:.10g}, expected {expected:.10g}, rel {rel:.3g}"


def check_speed_coupled_ratio(seed: int, workers: int) -> CheckResult:
    setup = ExampleSetup.standard(ExampleName.SPEED_COUPLED)
    expected = 1.0 / setup.g_low - 1.0
    t_bar = setup.reference_time
    analytic = _mt(*setup.evaluate(t_bar), setup.grid) / _mt(*setup.initial_pair(), setup.grid)

    traj1, traj2 = _simulate_pair(setup, t_bar, t_bar / 400)
    simulated = (_mt(traj1.snapshots[-1], traj2.snapshots[-1], setup.grid)
                 / _mt(traj1.snapshots[0], traj2.snapshots[0], setup.grid))
    ok = abs(analytic - expected) <= 1e-9 and abs(simulated - expected) <= 5e-2 * expected
    return ok, f"analytic ratio {analytic:.12g}, simulated {simulated:.6g}, expected {expected:.6g}"


def _mass_drift(seed: int) -> float:
    rng = np.random.default_rng(seed)
    family = FAMILIES[seed % len(FAMILIES)]
    model = random_model(family, rng)
    T_int = (model.grid.last - float(model.grid.points[-2])) / model.sup_g1
    dt = T_int / MASS_STEPS_PER_INTERVAL
    horizon = MASS_HORIZON_INTERVALS * T_int
    merge = LONG_RUN_MERGE_FRACTION * model.grid.min_gap
    worst = 0.0
    for m0 in [random_measure(rng, model.grid) for _ in range(MASS_MEASURES)]:
        traj = simulate(m0, model, horizon, dt, merge_tolerance=merge, drop_tolerance=SIM_DROP_TOLERANCE)
        worst = max(worst, float(np.max(np.abs(traj.total_mass - traj.total_mass[0]))))
    return worst


def _parallel_map(func, items: List, workers: int) -> List:
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def check_mass_conservation(seed: int, workers: int) -> CheckResult:
    drifts = _parallel_map(_mass_drift, [seed + k for k in range(MASS_MODELS)], workers)
    worst = max(drifts)
    return worst <= 1e-9, f"max |TV(t) - TV(0)| = {worst:.3g} over {MASS_MODELS * MASS_MEASURES} runs"


def check_eta_normalization(seed: int, workers: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(ETA_DRAWS):
        model = random_model("outflow_coupled", rng)
        T = 0.9 * compute_Tmax(model.grid, model)
        steps = 100
        v_series = rng.uniform(0.0, 4.0, steps)
        x_b = float(rng.uniform(model.grid.first, model.grid.last))
        eta = branching_eta(x_b, model, v_series, T / steps, T, ETA_QUAD_STEPS)
        worst = max(worst, abs(eta.total - 1.0))
    return worst <= ETA_TOL, f"max |stay + flow - 1| = {worst:.3g} over {ETA_DRAWS} draws"


def _random_small_measure(rng: np.random.Generator, count: int, lattice: bool = True) -> DiscreteMeasure:
    # Positions on a coarse lattice so that atoms hit grid points and each other
    if lattice:
        positions = rng.integers(-2, 11, count) * 0.25
    else:
        positions = rng.uniform(-0.5, 2.5, count)
    return measure_from_arrays(positions, rng.uniform(0.0, 2.0, count))


def _normalized(m: DiscreteMeasure, mass: float = 1.0) -> DiscreteMeasure:
    if m.total_mass == 0:
        return DiscreteMeasure.dirac(0.0, mass)
    return measure_from_arrays(m.positions, m.weights * (mass / m.total_mass))


def check_oracle_equivalence(seed: int, workers: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(RANDOM_PAIRS):
        k1 = int(rng.integers(0, ORACLE_MAX_ATOMS + 1))
        m1 = _random_small_measure(rng, k1)
        m2 = _random_small_measure(rng, ORACLE_MAX_ATOMS - k1)
        worst = max(worst,
                    abs(distances.flat_metric(m1, m2) - metric_oracle(MetricKind.FLAT, m1, m2)),
                    abs(_mt(m1, m2, UNIT_GRID) - metric_oracle(MetricKind.MT, m1, m2, UNIT_GRID)))
    return worst <= METRIC_TOL, f"max fast/oracle gap {worst:.3g} over {RANDOM_PAIRS} pairs"


def _metric_functions() -> Dict[str, Callable[[DiscreteMeasure, DiscreteMeasure], float]]:
    return {
        "norm": distances.norm_distance,
        "w1": distances.wasserstein1,
        "flat": distances.flat_metric,
        "mt": lambda a, b: _mt(a, b, UNIT_GRID),
    }


def check_metric_axioms(seed: int, workers: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    failures = []
    for name, metric in _metric_functions().items():
        for _ in range(RANDOM_PAIRS):
            a, b, c = (_random_small_measure(rng, int(rng.integers(1, AXIOM_MAX_ATOMS + 1)), lattice=False)
                       for _ in range(3))
            if name == "w1":
                a, b, c = _normalized(a), _normalized(b), _normalized(c)
            ab, ba = metric(a, b), metric(b, a)
            ac, bc = metric(a, c), metric(b, c)
            if ab < 0 or metric(a, a) != 0 or abs(ab - ba) > 1e-12:
                failures.append(f"{name}: symmetry/identity")
            elif ac > ab + bc + METRIC_TOL:
                failures.append(f"{name}: triangle")
            elif a != b and ab <= 0:
                failures.append(f"{name}: positivity")
    return not failures, f"{len(failures)} failures" + (f" (first: {failures[0]})" if failures else "")


def check_ordering_chain(seed: int, workers: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(RANDOM_PAIRS):
        a = _random_small_measure(rng, int(rng.integers(1, AXIOM_MAX_ATOMS + 1)), lattice=False)
        b = _random_small_measure(rng, int(rng.integers(1, AXIOM_MAX_ATOMS + 1)), lattice=False)
        flat, mt, norm = distances.flat_metric(a, b), _mt(a, b, UNIT_GRID), distances.norm_distance(a, b)
        if not (flat <= mt + METRIC_TOL and mt <= norm + METRIC_TOL):
            bad += 1
        a1, b1 = _normalized(a), _normalized(b)
        if distances.flat_metric(a1, b1) > distances.wasserstein1(a1, b1) + METRIC_TOL:
            bad += 1
    return bad == 0, f"{bad} ordering violations over {RANDOM_PAIRS} pairs"


def check_global_stability_sweep(seed: int, workers: int) -> CheckResult:
    tasks = standard_tasks(SWEEP_FAMILIES, SWEEP_PAIRS, seed,
                           horizon_intervals=SWEEP_HORIZON_INTERVALS,
                           steps_per_interval=SWEEP_STEPS_PER_INTERVAL,
                           check_stride=SWEEP_CHECK_STRIDE)
    results = run_sweep(tasks, workers)
    violations = sum(r["global_violations"] for r in results)
    drift = max(r["mass_drift"] for r in results)
    return violations == 0, f"{violations} global violations over {len(results)} pairs, max mass drift {drift:.3g}"


def check_unit_speed_nonlinear(seed: int, workers: int) -> CheckResult:
    tasks = standard_tasks(("unit_speed",), SWEEP_PAIRS, seed,
                           horizon_intervals=1.0,
                           steps_per_interval=SWEEP_STEPS_PER_INTERVAL,
                           check_stride=SWEEP_CHECK_STRIDE,
                           allowance_factor=NONLINEAR_ALLOWANCE_FACTOR)
    results = run_sweep(tasks, workers)
    violations = sum(r["nonlinear_violations"] for r in results)
    return violations == 0, f"{violations} nonlinear-estimate violations over {len(results)} pairs"


def convergence_errors(halvings: int = CONVERGENCE_HALVINGS, base_steps: int = CONVERGENCE_BASE_STEPS,
                       reference_atoms: int = CONVERGENCE_REFERENCE_ATOMS) -> List[float]:
    """MT error of the simulated constant-outflow solution at t = eps, for dt, dt/2, ..."""
    setup = ExampleSetup.standard(ExampleName.CONSTANT_OUTFLOW)
    model = setup.model()
    x1 = float(setup.grid.points[1])
    reference = outflow_state(x1, setup.c1, setup.eps, reference_atoms)
    errors = []
    for level in range(halvings + 1):
        steps = base_steps * 2 ** level
        traj = simulate(DiscreteMeasure.dirac(x1), model, setup.eps, setup.eps / steps)
        errors.append(_mt(traj.snapshots[-1], reference, setup.grid))
    return errors


def check_convergence_order(seed: int, workers: int) -> CheckResult:
    errors = convergence_errors()
    ratios = [a / b for a, b in zip(errors, errors[1:]) if b > 0]
    ok = len(ratios) == CONVERGENCE_HALVINGS and all(1.5 <= r <= 3.0 for r in ratios)
    return ok, "error ratios " + ", ".join(f"{r:.3f}" for r in ratios)


def check_appendix(seed: int, workers: int) -> CheckResult:
    model, mu1_0, mu2_0 = build_pair(SweepTask(family="speed_coupled", seed=seed))
    constants = compute_global_constants(model, mu1_0, mu2_0)
    dt = constants.T_int / 200
    horizon = 2.0 * constants.T_int
    traj1 = simulate(mu1_0, model, horizon, dt)
    traj2 = simulate(mu2_0, model, horizon, dt)
    reports = check_appendix_inequalities(seed=seed, tau_pair=(traj1, traj2, model))
    failed = [r.name for r in reports if not r.passed]
    return not failed, f"{len(reports)} inequality families" + (f", failed: {failed}" if failed else ", no violations")


CHECKS: List[AcceptanceCheck] = [
    AcceptanceCheck("perturbed_dirac_table", "four metrics on shifted Diracs, grid {0,1,2}, eps=0.25", check_perturbed_dirac_table),
    AcceptanceCheck("dirac_shift", "norm 2, flat = w1 = eps for delta_0 vs delta_eps", check_dirac_shift),
    AcceptanceCheck("frozen_vs_free_series", "flat distance t + eps, MT distance 2 at t=0", check_frozen_vs_free_series),
    AcceptanceCheck("constant_outflow_analytic", "MT = 2(1 - exp(-c1 eps)) from the closed form", check_constant_outflow_analytic),
    AcceptanceCheck("constant_outflow_simulated", "same value from the particle scheme", check_constant_outflow_simulated),
    AcceptanceCheck("speed_coupled_ratio", "MT ratio 1/g_low - 1 at t_bar", check_speed_coupled_ratio),
    AcceptanceCheck("mass_conservation", "TV constant along p = 0 runs", check_mass_conservation),
    AcceptanceCheck("eta_normalization", "branching measures are probability measures", check_eta_normalization),
    AcceptanceCheck("oracle_equivalence", "fast flat/MT agree with vertex enumeration", check_oracle_equivalence),
    AcceptanceCheck("metric_axioms", "symmetry, triangle inequality, positivity", check_metric_axioms),
    AcceptanceCheck("ordering_chain", "flat <= MT <= norm, flat <= w1", check_ordering_chain),
    AcceptanceCheck("global_stability_sweep", "MT(t) <= exp(alpha ceil(t/beta)) MT(0) on random pairs", check_global_stability_sweep),
    AcceptanceCheck("unit_speed_nonlinear", "integral of |v1 - v2| bounded for g1 = 1", check_unit_speed_nonlinear),
    AcceptanceCheck("convergence_order", "first-order convergence of the particle scheme", check_convergence_order),
    AcceptanceCheck("appendix_inequalities", "elementary exponential bounds and the tau bound", check_appendix),
]


def check_names() -> List[str]:
    return [check.name for check in CHECKS]


def run_checks(only: Optional[Iterable[str]] = None, seed: int = DEFAULT_SEED, workers: int = 1) -> pd.DataFrame:
    selected = CHECKS if only is None else [c for c in CHECKS if c.name in set(only)]
    rows = []
    for check in selected:
        logging.info(f"[Acceptance] Running '{check.name}'...")
        started = time.perf_counter()
        try:
            passed, detail = check.run(seed, workers)
        except Exception as e:
            logging.error(f"[Acceptance] '{check.name}' raised {type(e).__name__}: {e}", exc_info=True)
            passed, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - started
        logging.info(f"[Acceptance] '{check.name}': {'PASS' if passed else 'FAIL'} in {elapsed:.2f}s")
        rows.append({"check": check.name, "status": "PASS" if passed else "FAIL",
                     "seconds": round(elapsed, 2), "detail": detail})
    return pd.DataFrame(rows, columns=["check", "status", "seconds", "detail"])


def reproduce_all(list_only: bool = False, workers: int = 1, seed: int = DEFAULT_SEED,
                  only: Optional[Iterable[str]] = None, output_dir=None) -> int:
    if list_only:
        for check in CHECKS:
            print(f"{check.name:28s} {check.description}")
        return EXIT_OK
    table = run_checks(only=only, seed=seed, workers=workers)
    with pd.option_context("display.max_colwidth", 80, "display.width", 160):
        print(table.to_string(index=False))
    if output_dir is not None:
        write_frame(table.drop(columns=["seconds"]), f"{output_dir}/reproduce_all.csv")
    failed = int((table["status"] == "FAIL").sum())
    logging.info(f"[Acceptance] {len(table) - failed}/{len(table)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VIOLATION
