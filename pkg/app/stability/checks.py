# app/stability/checks.py

"""
Numerical verification of the stability estimates on simulated trajectories.

Every check returns a CheckReport: a pandas table with one row per inspected
time (or sample) and the number of rows where the measured quantity exceeds
its bound by more than BOUND_TOL plus the discretization allowance C*dt.
Rows where an estimate is vacuous (its denominator is not positive, or the
time lies outside the estimate's validity window) are counted separately
and never flagged.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.errors import DenominatorNonpositive, OutOfRange
from app.dynamics.characteristics import StepIntegral, hitting_time_tau
from app.dynamics.simulator import Trajectory
from app.metrics import distances
from app.metrics.grid import BreakpointGrid
from app.stability.constants import StabilityConstants, nonlinear_bound
from configs.app_config import APPENDIX_SAMPLES, BOUND_TOL, DEFAULT_ALLOWANCE_FACTOR


@dataclass
class CheckReport:
    name: str
    table: pd.DataFrame
    violations: int
    vacuous: int = 0

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> Dict[str, object]:
        return {"check": self.name, "rows": len(self.table), "violations": self.violations,
                "vacuous": self.vacuous, "passed": self.passed}


def _indices(trajectory: Trajectory, stride: int) -> np.ndarray:
    last = len(trajectory) - 1
    picked = np.arange(0, last + 1, max(1, stride))
    if picked[-1] != last:
        picked = np.append(picked, last)
    return picked


def _common_length(traj1: Trajectory, traj2: Trajectory) -> None:
    if len(traj1) != len(traj2) or not math.isclose(traj1.dt, traj2.dt):
        raise OutOfRange("trajectories must share one time grid")


def rho_series(traj1: Trajectory, traj2: Trajectory, grid: BreakpointGrid, indices: Sequence[int],
               kind: str = "mt") -> np.ndarray:
    # Looked up on the module so a patched metric is picked up by every check
    if kind == "mt":
        return np.array([distances.mt_metric(traj1.snapshots[i], traj2.snapshots[i], grid) for i in indices])
    return np.array([distances.flat_metric(traj1.snapshots[i], traj2.snapshots[i]) for i in indices])


def _allowance(traj: Trajectory, allowance: Optional[float]) -> float:
    if allowance is not None:
        return allowance
    return DEFAULT_ALLOWANCE_FACTOR * traj.dt


def _ratio(rho: float, rho0: float) -> float:
    if rho0 > 0:
        return rho / rho0
    return 0.0 if rho == 0 else math.inf


def _local_bounds(times: np.ndarray, constants: StabilityConstants, rho0: float) -> np.ndarray:
    bounds = np.full(times.shape, np.nan)
    for k, t in enumerate(times):
        if t == 0:
            bounds[k] = rho0
        elif t < constants.T_max:
            try:
                bounds[k] = constants.C1_of_T(float(t)) * rho0
            except DenominatorNonpositive:
                logging.debug(f"Local estimate vacuous at t={t:.6g}")
    return bounds


def check_local_bound(traj1: Trajectory, traj2: Trajectory, grid: BreakpointGrid,
                      constants: StabilityConstants, stride: int = 1,
                      allowance: Optional[float] = None) -> CheckReport:
    _common_length(traj1, traj2)
    idx = _indices(traj1, stride)
    idx = idx[traj1.times[idx] < constants.T_max]
    times = traj1.times[idx]
    rho = rho_series(traj1, traj2, grid, idx)
    rho0 = float(rho[0])
    bounds = _local_bounds(times, constants, rho0)
    slack = BOUND_TOL + _allowance(traj1, allowance)

    c1 = np.where(times > 0, bounds / rho0 if rho0 > 0 else np.nan, 1.0)
    ratio = np.array([_ratio(r, rho0) for r in rho])
    margin = np.where(rho0 > 0, c1 - ratio, np.where(rho == 0, np.inf, -np.inf))
    vacuous = np.isnan(bounds)
    violated = ~vacuous & (rho > bounds + slack)
    table = pd.DataFrame({"t": times, "rho_mt": rho, "ratio": ratio, "C1": c1,
                          "bound_local": bounds, "margin": margin, "violated": violated.astype(int)})
    return CheckReport("local_bound", table, int(violated.sum()), int(vacuous.sum()))


def check_global_bound(traj1: Trajectory, traj2: Trajectory, grid: BreakpointGrid,
                       constants: StabilityConstants, stride: int = 1,
                       allowance: Optional[float] = None) -> CheckReport:
    _common_length(traj1, traj2)
    idx = _indices(traj1, stride)
    times = traj1.times[idx]
    rho = rho_series(traj1, traj2, grid, idx)
    rho0 = float(rho[0])
    bounds = np.array([constants.global_bound(float(t), rho0) for t in times])
    slack = BOUND_TOL + _allowance(traj1, allowance)
    violated = rho > bounds + slack
    with np.errstate(invalid="ignore"):
        margin = bounds - rho
    table = pd.DataFrame({"t": times, "rho_mt": rho, "bound_global": bounds,
                          "margin": margin, "violated": violated.astype(int)})
    return CheckReport("global_bound", table, int(violated.sum()))


def v_difference_integral(traj1: Trajectory, traj2: Trajectory) -> np.ndarray:
    """Left-endpoint cumulative integral of |v_1 - v_2| at every snapshot time."""
    _common_length(traj1, traj2)
    gap = np.abs(traj1.v_series - traj2.v_series)[:-1]
    return np.concatenate(([0.0], np.cumsum(gap * traj1.dt)))


def check_nonlinear_estimate(traj1: Trajectory, traj2: Trajectory, constants: StabilityConstants,
                             stride: int = 1, allowance: Optional[float] = None) -> CheckReport:
    model = constants.model
    grid = model.grid
    idx = _indices(traj1, stride)
    times = traj1.times[idx]
    lhs = v_difference_integral(traj1, traj2)[idx]
    rho0 = distances.mt_metric(traj1.snapshots[0], traj2.snapshots[0], grid)
    slack = BOUND_TOL + _allowance(traj1, allowance)

    local = np.full(times.shape, np.nan)
    for k, t in enumerate(times):
        if 0 < t < constants.T_max:
            try:
                local[k] = nonlinear_bound(float(t), model, constants.mu1_0, constants.mu2_0, rho0)
            except DenominatorNonpositive:
                pass
    long_bound = constants.v_integral_bound(rho0)
    long_col = np.where(times <= constants.T_int, long_bound, np.nan)

    over_local = ~np.isnan(local) & (lhs > local + slack)
    over_long = ~np.isnan(long_col) & (lhs > long_col + slack)
    violated = over_local | over_long
    vacuous = (times > 0) & np.isnan(local) & np.isnan(long_col)
    table = pd.DataFrame({"t": times, "v_integral": lhs, "bound_local": local,
                          "bound_long": long_col, "violated": violated.astype(int)})
    return CheckReport("nonlinear_estimate", table, int(violated.sum()), int(vacuous.sum()))


def stability_table(traj1: Trajectory, traj2: Trajectory, constants: StabilityConstants,
                    stride: int = 1, allowance: Optional[float] = None) -> pd.DataFrame:
    """Per-time rows with both bounds, as written by the stability subcommand."""
    grid = constants.model.grid
    _common_length(traj1, traj2)
    idx = _indices(traj1, stride)
    times = traj1.times[idx]
    rho = rho_series(traj1, traj2, grid, idx)
    flat = rho_series(traj1, traj2, grid, idx, kind="flat")
    rho0 = float(rho[0])
    local = _local_bounds(times, constants, rho0)
    global_ = np.array([constants.global_bound(float(t), rho0) for t in times])
    tightest = np.fmin(local, global_)
    slack = BOUND_TOL + _allowance(traj1, allowance)
    with np.errstate(invalid="ignore"):
        margin = tightest - rho
    violated = rho > tightest + slack
    return pd.DataFrame({"t": times, "rho_mt": rho, "rho_flat": flat, "bound_local": local,
                         "bound_global": global_, "margin": margin, "violated": violated.astype(int)})


def tau_difference_samples(traj1: Trajectory, traj2: Trajectory, model, x_samples: np.ndarray) -> pd.DataFrame:
    """Arrival times at the next breakpoint under both trajectories and their bound."""
    grid = model.grid
    G1 = traj1.displacement(model.g1)
    G2 = traj2.displacement(model.g1)
    gap = np.abs(traj1.v_series - traj2.v_series)[:-1]
    v_gap = StepIntegral(gap, traj1.dt) if gap.size else None
    factor = model.lip_g1 / model.g1.inf_on(0.0, traj1.total_mass.max() + traj2.total_mass.max())

    rows: List[Dict[str, float]] = []
    for x_b in x_samples:
        tau1 = hitting_time_tau(float(x_b), G1, grid)
        tau2 = hitting_time_tau(float(x_b), G2, grid)
        if math.isinf(tau1) or math.isinf(tau2) or v_gap is None:
            continue
        reach = max(tau1, tau2)
        rows.append({"x_b": float(x_b), "tau1": tau1, "tau2": tau2,
                     "difference": abs(tau2 - tau1), "bound": factor * v_gap(reach)})
    return pd.DataFrame(rows, columns=["x_b", "tau1", "tau2", "difference", "bound"])


def _elementwise_report(name: str, lhs: np.ndarray, rhs: np.ndarray, extra: Dict[str, np.ndarray]) -> CheckReport:
    # Relative slack absorbs rounding where both sides are equal in exact arithmetic
    violated = lhs > rhs * (1.0 + 1e-12) + 1e-15
    table = pd.DataFrame({**extra, "lhs": lhs, "rhs": rhs, "violated": violated.astype(int)})
    return CheckReport(name, table, int(violated.sum()))


def check_appendix_inequalities(sample_data: Optional[Dict[str, np.ndarray]] = None, seed: int = 0,
                                n_samples: int = APPENDIX_SAMPLES, tau_pair: Optional[tuple] = None,
                                allowance: Optional[float] = None) -> List[CheckReport]:
    rng = np.random.default_rng(seed)
    data = dict(sample_data or {})
    x = np.asarray(data.get("x", rng.uniform(0.0, 5.0, n_samples)), dtype=np.float64)
    y = np.asarray(data.get("y", rng.uniform(0.0, 5.0, n_samples)), dtype=np.float64)
    reports = []

    reports.append(_elementwise_report("exp_minus_one", np.abs(np.expm1(x)), np.abs(x) * np.exp(x), {"x": x}))
    reports.append(_elementwise_report("exp_difference", np.abs(np.exp(x) - np.exp(y)),
                                       np.abs(x - y) * np.exp(np.maximum(x, y)), {"x": x, "y": y}))
    reports.append(_elementwise_report("neg_exp_difference", np.abs(np.exp(-x) - np.exp(-y)),
                                       np.abs(x - y) * np.exp(-np.minimum(x, y)), {"x": x, "y": y}))

    # Sup over sampled functions xi with values in [-2, 2]
    xi = rng.uniform(-2.0, 2.0, (n_samples, 16))
    sup_xi = np.abs(xi).max(axis=1)
    reports.append(_elementwise_report("sup_exp", np.abs(np.expm1(xi)).max(axis=1),
                                       sup_xi * np.exp(sup_xi), {"sup_xi": sup_xi}))

    # Step functions f1, f2 on [0, T] integrated over [r, T]
    cells = 32
    horizon = rng.uniform(0.1, 2.0, n_samples)
    f1 = rng.uniform(-1.0, 1.0, (n_samples, cells))
    f2 = rng.uniform(-1.0, 1.0, (n_samples, cells))
    start = rng.integers(0, cells, n_samples)
    h = horizon / cells
    active = np.arange(cells)[None, :] >= start[:, None]
    int1 = (f1 * active).sum(axis=1) * h
    int2 = (f2 * active).sum(axis=1) * h
    sup_f = np.maximum(np.abs(f1).max(axis=1), np.abs(f2).max(axis=1))
    reports.append(_elementwise_report("integral_exp", np.abs(np.exp(int1) - np.exp(int2)),
                                       np.exp(3.0 * horizon * sup_f) * (np.abs(f1 - f2) * active).sum(axis=1) * h,
                                       {"T": horizon}))

    if tau_pair is not None:
        traj1, traj2, model = tau_pair
        grid = model.grid
        x_b = rng.uniform(float(grid.points[-2]), grid.last, n_samples)
        table = tau_difference_samples(traj1, traj2, model, x_b)
        slack = BOUND_TOL + _allowance(traj1, allowance)
        violated = table["difference"] > table["bound"] + slack
        table["violated"] = violated.astype(int)
        reports.append(CheckReport("tau_difference", table, int(violated.sum())))

    for report in reports:
        logging.debug(f"[Appendix] {report.name}: {report.violations} violations over {len(report.table)} samples")
    return reports
