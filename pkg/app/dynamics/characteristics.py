# app/dynamics/characteristics.py

"""
Characteristics of the transport system and the superposition formula.

Coefficients depend on time only through v(t), the mass parked at x_N. Here
v is always given as a step series: sample k holds on [k*dt, (k+1)*dt). A mass
element starting at x_b travels with displacement G(t), waits at the first
breakpoint it reaches until its branching time r, then moves on with
G(t) - G(r). The branching time is drawn from eta_{x_b}: an atom at r = T for
the mass that never leaves, plus the outflow spread over [tau, T].
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app.core.errors import BranchBeforeArrival, HorizonExceeded, OutOfRange
from app.core.measure import DiscreteMeasure
from app.dynamics.coefficients import ModelCoefficients, PiecewiseLinearFn
from app.metrics.grid import BreakpointGrid
from app.stability.constants import compute_Tmax
from configs.app_config import DEFAULT_QUAD_STEPS

TIME_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class StepIntegral:
    """t -> integral over [0, t] of a function that is constant on each step."""

    rates: np.ndarray
    dt: float

    def __post_init__(self):
        rates = np.ascontiguousarray(self.rates, dtype=np.float64).ravel()
        if rates.size == 0:
            raise OutOfRange("need at least one sampled step")
        if not self.dt > 0:
            raise OutOfRange(f"step must be positive, got {self.dt}")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "_cumulative", np.concatenate(([0.0], np.cumsum(rates * self.dt))))

    @classmethod
    def displacement(cls, v_series, g1: PiecewiseLinearFn, dt: float) -> "StepIntegral":
        return cls(g1(np.asarray(v_series, dtype=np.float64)), dt)

    @property
    def horizon(self) -> float:
        return self.rates.size * self.dt

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        slack = TIME_RTOL * max(1.0, self.horizon)
        if np.any(t < -slack) or np.any(t > self.horizon + slack):
            raise OutOfRange(f"time outside the sampled range [0, {self.horizon}]")
        t = np.clip(t, 0.0, self.horizon)
        k = np.minimum((t / self.dt).astype(int), self.rates.size - 1)
        result = self._cumulative[k] + self.rates[k] * (t - k * self.dt)
        return float(result) if result.ndim == 0 else result

    def inverse(self, target: float) -> float:
        """Smallest t with integral >= target; inf if the sampled range is too short."""
        if target <= 0:
            return 0.0
        total = self._cumulative[-1]
        if target > total * (1.0 + TIME_RTOL):
            return math.inf
        if target >= total:
            return self.horizon
        k = int(np.searchsorted(self._cumulative, target, side="left")) - 1
        k = min(max(k, 0), self.rates.size - 1)
        if self.rates[k] <= 0:
            return (k + 1) * self.dt
        return k * self.dt + (target - self._cumulative[k]) / self.rates[k]


def accumulate_G(v_series, g1: PiecewiseLinearFn, t: float, dt: float = 1.0) -> float:
    return StepIntegral.displacement(v_series, g1, dt)(t)


def _stop_point(x_b: float, grid: BreakpointGrid) -> Optional[float]:
    on = int(grid.grid_index(x_b)[0])
    if on >= 0:
        return float(grid.points[on])
    nxt = int(grid.next_point_index(x_b)[0])
    if nxt > grid.N:
        return None
    return float(grid.points[nxt])


def hitting_time_tau(x_b: float, G: StepIntegral, grid: BreakpointGrid) -> float:
    stop = _stop_point(x_b, grid)
    if stop is None:
        return math.inf
    if int(grid.grid_index(x_b)[0]) >= 0:
        return 0.0
    return G.inverse(stop - x_b)


def characteristic_path(x_b: float, r: float, ts, G: StepIntegral, grid: BreakpointGrid) -> np.ndarray:
    """Vectorised X(x_b, 0, r, t) over an array of times."""
    ts = np.array(ts, dtype=np.float64, ndmin=1)
    tau = hitting_time_tau(x_b, G, grid)
    free = x_b + G(ts)
    if math.isinf(tau):
        return free
    stop = _stop_point(x_b, grid)
    if r < tau - TIME_RTOL * max(1.0, tau):
        # Branching before arrival only matters once a requested time passes r
        if np.any(ts > r + TIME_RTOL * max(1.0, r)):
            raise BranchBeforeArrival(f"branching time {r} precedes arrival {tau} at the breakpoint")
        return np.minimum(free, stop)
    resumed = stop + G(ts) - G(min(r, G.horizon))
    return np.where(ts <= tau, np.minimum(free, stop), np.where(ts <= r, stop, resumed))


def characteristic_X(x_b: float, r: float, t: float, G: StepIntegral, grid: BreakpointGrid) -> float:
    return float(characteristic_path(x_b, r, [t], G, grid)[0])


@dataclass(frozen=True, eq=False)
class BranchingMeasure:
    horizon: float
    stay_weight: float
    flow_times: np.ndarray
    flow_weights: np.ndarray
    tau: float = math.inf

    @classmethod
    def at_horizon(cls, T: float, tau: float = math.inf) -> "BranchingMeasure":
        return cls(T, 1.0, np.empty(0), np.empty(0), tau)

    @property
    def flow_mass(self) -> float:
        return float(self.flow_weights.sum())

    @property
    def total(self) -> float:
        return self.stay_weight + self.flow_mass

    def atoms(self):
        times = np.concatenate((self.flow_times, [self.horizon]))
        weights = np.concatenate((self.flow_weights, [self.stay_weight]))
        return times, weights


def branching_eta(x_b: float, model: ModelCoefficients, v_series, dt: float, T: float,
                  quad_steps: int = DEFAULT_QUAD_STEPS) -> BranchingMeasure:
    grid = model.grid
    G = StepIntegral.displacement(v_series, model.g1, dt)
    tau = hitting_time_tau(x_b, G, grid)
    label = int(grid.interval_index(x_b)[0])
    on_first = float(grid.snap(x_b)[0]) == grid.first
    # Outflow happens from x_0..x_{N-1}; mass bound for x_N or beyond never branches
    branches = (1 <= label <= grid.N - 1) or (label == 0 and on_first)
    if not branches or tau > T:
        return BranchingMeasure.at_horizon(T, tau)

    rate = StepIntegral(model.c[label](np.asarray(v_series, dtype=np.float64)), dt)
    edges = tau + (T - tau) * np.arange(quad_steps + 1) / quad_steps
    exposure = rate(edges) - rate(tau)
    survival = np.exp(-exposure)
    # Exact released mass per cell, placed at the cell midpoint
    weights = survival[:-1] - survival[1:]
    times = 0.5 * (edges[:-1] + edges[1:])
    return BranchingMeasure(T, float(survival[-1]), times, weights, tau)


def superposition_eval(m0: DiscreteMeasure, phi: Callable, model: ModelCoefficients, v_series,
                       dt: float, T: float, quad_steps: int = DEFAULT_QUAD_STEPS) -> float:
    grid = model.grid
    T_max = compute_Tmax(grid, model)
    if T >= T_max:
        raise HorizonExceeded(f"T={T} must stay below T_max={T_max}")
    G = StepIntegral.displacement(v_series, model.g1, dt)
    if T > G.horizon * (1.0 + TIME_RTOL):
        raise OutOfRange(f"v_series covers [0, {G.horizon}] but T={T}")

    with_growth = not model.p_is_zero
    if with_growth:
        # Midpoint rule in time for the exponential growth factor
        cells = max(1, int(math.ceil(T / dt - TIME_RTOL)))
        edges = np.linspace(0.0, T, cells + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        steps = np.minimum((mids / dt).astype(int), len(v_series) - 1)
        p1_values = model.p1(np.asarray(v_series, dtype=np.float64)[steps])

    total = 0.0
    for x_b, mass in zip(m0.positions, m0.weights):
        eta = branching_eta(float(x_b), model, v_series, dt, T, quad_steps)
        times, weights = eta.atoms()
        for r, weight in zip(times, weights):
            if weight == 0.0:
                continue
            end = characteristic_X(float(x_b), float(r), T, G, grid)
            term = float(np.asarray(phi(np.array([end]))).ravel()[0]) * weight
            if with_growth and T > 0:
                path = characteristic_path(float(x_b), float(r), mids, G, grid)
                term *= math.exp(float(np.sum(p1_values * model.p2(path) * np.diff(edges))))
            total += mass * term
    return total
