# app/stability/sweep.py

"""
Random perturbed-pair sweeps over families of coefficients.

A task is a plain picklable record (family, seed, sizes); the worker rebuilds
the model and measures from the seed, so results do not depend on which
process runs the task or in which order tasks finish.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Iterable, List, Tuple

import numpy as np

from app.core.measure import DiscreteMeasure, measure_from_arrays
from app.dynamics.coefficients import ModelCoefficients, PiecewiseLinearFn
from app.dynamics.simulator import simulate
from app.metrics.grid import BreakpointGrid
from app.stability.checks import check_global_bound, check_local_bound, check_nonlinear_estimate
from app.stability.constants import compute_global_constants
from configs.app_config import LONG_RUN_MERGE_FRACTION, SIM_DROP_TOLERANCE

FAMILIES = ("constant", "speed_coupled", "outflow_coupled", "unit_speed")
V_KNOTS = np.array([0.0, 1.0, 2.0, 4.0])


def random_grid(rng: np.random.Generator) -> BreakpointGrid:
    N = int(rng.integers(2, 4))
    gaps = rng.uniform(0.5, 1.5, N)
    return BreakpointGrid.from_points(np.concatenate(([0.0], np.cumsum(gaps))))


def random_model(family: str, rng: np.random.Generator, grid: BreakpointGrid = None) -> ModelCoefficients:
    grid = grid or random_grid(rng)
    N = grid.N
    if family in ("constant", "outflow_coupled"):
        g1 = PiecewiseLinearFn.constant(float(rng.uniform(0.5, 2.0)))
    elif family == "speed_coupled":
        g1 = PiecewiseLinearFn(V_KNOTS, rng.uniform(0.5, 2.0, V_KNOTS.size))
    elif family == "unit_speed":
        g1 = PiecewiseLinearFn.constant(1.0)
    else:
        raise ValueError(f"unknown coefficient family '{family}'")

    if family == "outflow_coupled":
        rates = [PiecewiseLinearFn(V_KNOTS, rng.uniform(0.0, 1.5, V_KNOTS.size)) for _ in range(N)]
    else:
        rates = [PiecewiseLinearFn.constant(float(rng.uniform(0.0, 1.5))) for _ in range(N)]
    rates.append(PiecewiseLinearFn.constant(0.0))
    return ModelCoefficients(grid=grid, g1=g1, c=tuple(rates))


def random_measure(rng: np.random.Generator, grid: BreakpointGrid, max_atoms: int = 4) -> DiscreteMeasure:
    count = int(rng.integers(1, max_atoms + 1))
    positions = rng.uniform(grid.first, grid.last, count)
    # Some atoms start parked on a breakpoint
    on_grid = rng.random(count) < 0.25
    positions[on_grid] = rng.choice(grid.points[:-1], int(on_grid.sum()))
    return measure_from_arrays(positions, rng.uniform(0.1, 1.0, count))


def perturb(m: DiscreteMeasure, rng: np.random.Generator, grid: BreakpointGrid, scale: float = 0.05) -> DiscreteMeasure:
    shift = rng.uniform(-scale, scale, len(m)) * grid.min_gap
    positions = np.clip(m.positions + shift, grid.first, grid.last)
    weights = m.weights * rng.uniform(1.0 - scale, 1.0 + scale, len(m))
    return measure_from_arrays(positions, weights)


@dataclass(frozen=True)
class SweepTask:
    family: str
    seed: int
    horizon_intervals: float = 3.0
    steps_per_interval: int = 500
    check_stride: int = 25
    allowance_factor: float = 4.0


def build_pair(task: SweepTask) -> Tuple[ModelCoefficients, DiscreteMeasure, DiscreteMeasure]:
    rng = np.random.default_rng(task.seed)
    model = random_model(task.family, rng)
    base = random_measure(rng, model.grid)
    return model, base, perturb(base, rng, model.grid)


def run_pair(task: SweepTask) -> Dict[str, object]:
    model, mu1_0, mu2_0 = build_pair(task)
    constants = compute_global_constants(model, mu1_0, mu2_0)
    dt = constants.T_int / task.steps_per_interval
    horizon = task.horizon_intervals * constants.T_int
    merge = LONG_RUN_MERGE_FRACTION * model.grid.min_gap
    traj1 = simulate(mu1_0, model, horizon, dt, merge_tolerance=merge, drop_tolerance=SIM_DROP_TOLERANCE)
    traj2 = simulate(mu2_0, model, horizon, dt, merge_tolerance=merge, drop_tolerance=SIM_DROP_TOLERANCE)

    allowance = task.allowance_factor * dt
    global_report = check_global_bound(traj1, traj2, model.grid, constants, task.check_stride, allowance)
    local_report = check_local_bound(traj1, traj2, model.grid, constants, task.check_stride, allowance)
    nonlinear_report = check_nonlinear_estimate(traj1, traj2, constants, task.check_stride, allowance)
    drift = float(np.max(np.abs(traj1.total_mass - traj1.total_mass[0])))

    result = asdict(task)
    result.update({
        "rho0": float(global_report.table["rho_mt"].iloc[0]),
        "max_rho": float(global_report.table["rho_mt"].max()),
        "global_violations": global_report.violations,
        "local_violations": local_report.violations,
        "local_vacuous": local_report.vacuous,
        "nonlinear_violations": nonlinear_report.violations,
        "mass_drift": drift,
    })
    return result


def run_sweep(tasks: Iterable[SweepTask], workers: int = 1,
              runner: Callable[[SweepTask], Dict[str, object]] = run_pair) -> List[Dict[str, object]]:
    tasks = list(tasks)
    logging.info(f"Sweep: {len(tasks)} tasks on {workers} worker(s)")
    if workers <= 1 or len(tasks) <= 1:
        return [runner(task) for task in tasks]
    # map keeps submission order whatever the completion order
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(runner, tasks))


def standard_tasks(families: Iterable[str], pairs: int, seed: int, **kwargs) -> List[SweepTask]:
    tasks = []
    for f_index, family in enumerate(families):
        for pair in range(pairs):
            tasks.append(SweepTask(family=family, seed=seed + 1000 * f_index + pair, **kwargs))
    return tasks
