# app/dynamics/simulator.py

"""
Explicit particle scheme for the transport system with transmission points.

Each step freezes v = mass at x_N, moves free atoms with speed g1(v), halts
atoms that reach a breakpoint for the rest of the step, lets atoms parked at
x_i (i < N) leak mass at rate c_i(v) into new free atoms, and records a
snapshot. An atom is parked exactly when its position equals a grid point,
so the state is just a DiscreteMeasure.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from app.core.errors import InvalidInitialMeasure, InvalidStep
from app.core.measure import DiscreteMeasure, mass_at, measure_from_arrays, same_position
from app.dynamics.characteristics import StepIntegral
from app.dynamics.coefficients import ModelCoefficients, PiecewiseLinearFn
from configs.app_config import POSITION_RTOL


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    snapshots: Tuple[DiscreteMeasure, ...]
    v_series: np.ndarray
    dt: float

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def total_mass(self) -> np.ndarray:
        return np.array([m.total_mass for m in self.snapshots])

    @property
    def atom_counts(self) -> np.ndarray:
        return np.array([len(m) for m in self.snapshots])

    def __len__(self) -> int:
        return len(self.snapshots)

    def displacement(self, g1: PiecewiseLinearFn) -> StepIntegral:
        # The last sample starts no step, so it does not enter G
        series = self.v_series[:-1] if len(self.v_series) > 1 else self.v_series
        return StepIntegral.displacement(series, g1, self.dt)

    def index_at(self, t: float) -> int:
        return int(np.clip(round(t / self.dt), 0, len(self.times) - 1))

    def snapshot_at(self, t: float) -> DiscreteMeasure:
        return self.snapshots[self.index_at(t)]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "t": self.times,
            "total_mass": self.total_mass,
            "v": self.v_series,
            "atoms_count": self.atom_counts,
        })


def _emit(x_i: float, weight: float, rate: float, duration: float, speed: float,
          cells: int, ceiling: float) -> Tuple[float, List[float], List[float]]:
    """Leak from an atom parked at x_i over the last `duration` of a step.

    Returns the weight left behind and the emitted atoms; the emission window
    is split into `cells` equal parts, each released mass placed where an
    element emitted at the cell midpoint is at the end of the step.
    """
    if rate <= 0.0 or duration <= 0.0 or weight == 0.0:
        return weight, [], []
    stay = weight * math.exp(-rate * duration)
    edges = np.linspace(0.0, duration, cells + 1)
    released = weight * -np.diff(np.exp(-rate * edges))
    released[-1] = (weight - stay) - released[:-1].sum()
    positions = x_i + speed * (duration - 0.5 * (edges[:-1] + edges[1:]))
    positions = np.minimum(positions, ceiling)
    return stay, positions.tolist(), released.tolist()


def _advance(positions: np.ndarray, weights: np.ndarray, v: float, model: ModelCoefficients,
             dt: float, cells: int) -> Tuple[np.ndarray, np.ndarray]:
    grid = model.grid
    points = grid.points
    N = grid.N
    speed = model.speed(v)
    rates = model.rates(v)

    if not model.p_is_zero:
        weights = weights * np.exp(model.growth(v, positions) * dt)

    on = grid.grid_index(positions)
    parked = on >= 0
    out_pos: List[float] = []
    out_w: List[float] = []

    def settle(i: int, weight: float, duration: float):
        # Atom sits at x_i for the last `duration` of the step
        if i >= N:
            out_pos.append(float(points[N]))
            out_w.append(weight)
            return
        ceiling = float(points[i + 1])
        stay, pos, rel = _emit(float(points[i]), weight, float(rates[i]), duration, speed, cells, ceiling)
        out_pos.append(float(points[i]))
        out_w.append(stay)
        out_pos.extend(pos)
        out_w.extend(rel)

    for i, weight in zip(on[parked], weights[parked]):
        settle(int(i), float(weight), dt)

    free_pos = positions[~parked]
    free_w = weights[~parked]
    if free_pos.size:
        nxt = np.minimum(grid.next_point_index(free_pos), N)
        target = points[nxt]
        travel = speed * dt
        reach = target - free_pos
        arrive = reach <= travel + POSITION_RTOL * np.maximum(1.0, np.abs(target))
        moving = ~arrive
        out_pos.extend((free_pos[moving] + travel).tolist())
        out_w.extend(free_w[moving].tolist())
        for i, x, weight in zip(nxt[arrive], free_pos[arrive], free_w[arrive]):
            # Halt at the breakpoint for the residual part of the step
            residual = max(0.0, dt - (float(points[i]) - float(x)) / speed)
            settle(int(i), float(weight), residual)

    new_pos = grid.snap(np.array(out_pos, dtype=np.float64))
    return new_pos, np.array(out_w, dtype=np.float64)


def _merge_free_atoms(positions: np.ndarray, weights: np.ndarray, model: ModelCoefficients,
                      tolerance: float) -> Tuple[np.ndarray, np.ndarray]:
    # Mass-weighted centroids of runs of free atoms closer than `tolerance`, never across a breakpoint
    grid = model.grid
    parked = grid.grid_index(positions) >= 0
    free_pos, free_w = positions[~parked], weights[~parked]
    if free_pos.size < 2:
        return positions, weights
    order = np.argsort(free_pos, kind="mergesort")
    free_pos, free_w = free_pos[order], free_w[order]
    labels = grid.interval_index(free_pos)
    starts = np.concatenate(([True], (np.diff(free_pos) > tolerance) | (np.diff(labels) != 0)))
    first = np.flatnonzero(starts)
    mass = np.add.reduceat(free_w, first)
    moment = np.add.reduceat(free_w * free_pos, first)
    centroid = np.where(mass > 0, moment / np.where(mass > 0, mass, 1.0), free_pos[first])
    return (np.concatenate((positions[parked], centroid)),
            np.concatenate((weights[parked], mass)))


def simulate(m0: DiscreteMeasure, model: ModelCoefficients, T: float, dt: float,
             quad_particles_per_step: int = 1, merge_tolerance: float = 0.0,
             drop_tolerance: float = 0.0) -> Trajectory:
    if not (dt > 0 and math.isfinite(dt)):
        raise InvalidStep(f"dt must be a positive finite number, got {dt}")
    if not (T >= 0 and math.isfinite(T)):
        raise InvalidStep(f"horizon must be a nonnegative finite number, got {T}")
    if quad_particles_per_step < 1:
        raise InvalidStep("quad_particles_per_step must be at least 1")
    grid = model.grid
    if len(m0):
        lowest, highest = float(m0.positions[0]), float(m0.positions[-1])
        below = lowest < grid.first and not same_position(lowest, grid.first)
        above = highest > grid.last and not same_position(highest, grid.last)
        if below or above:
            raise InvalidInitialMeasure(f"initial support [{lowest}, {highest}] leaves [{grid.first}, {grid.last}]")

    steps = max(0, int(math.ceil(T / dt - 1e-9)))
    if not math.isclose(steps * dt, T, rel_tol=1e-9, abs_tol=1e-12):
        logging.warning(f"Horizon {T} is not a multiple of dt={dt}; running to {steps * dt}")

    current = measure_from_arrays(grid.snap(m0.positions), m0.weights, drop_tolerance)
    snapshots = [current]
    v_series = [mass_at(current, grid.last)]
    logging.debug(f"simulate: {steps} steps of {dt}, {len(current)} initial atoms")

    for k in range(steps):
        positions, weights = _advance(current.positions, current.weights, v_series[-1], model, dt,
                                      quad_particles_per_step)
        if merge_tolerance > 0:
            positions, weights = _merge_free_atoms(positions, weights, model, merge_tolerance)
        current = measure_from_arrays(positions, weights, drop_tolerance)
        snapshots.append(current)
        v_series.append(mass_at(current, grid.last))

    times = dt * np.arange(steps + 1)
    logging.debug(f"simulate: finished with {len(current)} atoms, mass {current.total_mass:.12g}")
    return Trajectory(times=times, snapshots=tuple(snapshots), v_series=np.array(v_series), dt=dt)
