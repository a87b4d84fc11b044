# app/reference/closed_form.py

"""
Exact solutions of three small configurations, used as ground truth.

Frozen / free atom
    A unit atom parked on x_1 with no outflow next to one moving freely at unit
    speed just to its right. Their flat distance grows like t + eps while the
    measure-transmission distance is 2 from the start.

Constant outflow
    Unit speed, constant rate c on x_1. A unit atom on x_1 leaks into the
    density c * exp(-c (t - (x - x_1))) on [x_1, x_1 + t]; its perturbation
    starts eps to the left and only begins to leak after arriving.

Two atoms coupled through the speed
    g1(0) = g_low, g1(1) = 1. One atom sits on x_N (so v = 1 and the other atom
    moves at unit speed), the perturbed one starts eps to the left of x_N, so
    until it arrives at t_bar = eps / g_low its companion only moves at g_low.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from app.core.errors import OutOfRange
from app.core.measure import DiscreteMeasure, make_measure, measure_from_arrays
from app.dynamics.coefficients import ModelCoefficients, PiecewiseLinearFn, unit_speed_model
from app.metrics.grid import BreakpointGrid
from configs.app_config import DEFAULT_OUTFLOW_ATOMS, SPEED_RAMP_WIDTH

MeasurePair = Tuple[DiscreteMeasure, DiscreteMeasure]

DEFAULT_GRID = (0.0, 1.0, 2.0)
SPEED_COUPLED_GRID = (0.0, 1.0, 3.0)


class AnalyticKind(str, Enum):
    FROZEN_ATOM = "frozen_atom"
    FREE_ATOM = "free_atom"
    CONSTANT_OUTFLOW = "constant_outflow"
    TWO_ATOM_SPEED_COUPLED = "two_atom_speed_coupled"


class ExampleName(str, Enum):
    FROZEN_VS_FREE = "1.1"
    CONSTANT_OUTFLOW = "4.5"
    SPEED_COUPLED = "4.6"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise OutOfRange(message)


def outflow_state(x_i: float, rate: float, elapsed: float, atoms: int) -> DiscreteMeasure:
    """Unit atom parked on x_i for `elapsed`, leaking at constant `rate` under unit speed."""
    if rate == 0 or elapsed <= 0:
        return DiscreteMeasure.dirac(x_i)
    edges = elapsed * np.arange(atoms + 1) / atoms
    # Antiderivative of the density in the distance from x_i is exp(-rate (elapsed - s))
    cumulative = np.exp(-rate * (elapsed - edges))
    masses = np.diff(cumulative)
    midpoints = x_i + 0.5 * (edges[:-1] + edges[1:])
    positions = np.concatenate(([x_i], midpoints))
    weights = np.concatenate(([math.exp(-rate * elapsed)], masses))
    return measure_from_arrays(positions, weights)


@dataclass(frozen=True)
class AnalyticSolution:
    """One exactly solvable measure path, evaluated at any admissible time.

    `start` is the initial atom for the one-atom kinds; for the coupled kind
    `lag` is how far the second atom starts to the left of x_N.
    """

    kind: AnalyticKind
    grid: BreakpointGrid
    start: float = 0.0
    rate: float = 0.0
    g_low: float = 1.0
    y: Optional[float] = None
    lag: float = 0.0
    atoms: int = DEFAULT_OUTFLOW_ATOMS

    def _arrival(self) -> Tuple[float, float]:
        # First breakpoint at or right of `start` and the unit-speed time to reach it
        index = int(self.grid.next_point_index(np.array([self.start]))[0])
        on = self.grid.grid_index(np.array([self.start]))[0]
        target = float(self.grid.points[on if on >= 0 else min(index, self.grid.N)])
        return target, target - self.start

    def evaluate(self, t: float) -> DiscreteMeasure:
        _require(t >= 0, f"t must be nonnegative, got {t}")
        if self.kind is AnalyticKind.FROZEN_ATOM:
            return DiscreteMeasure.dirac(self.start)

        if self.kind is AnalyticKind.FREE_ATOM:
            target, arrival = self._arrival()
            _require(t < arrival, f"the free atom reaches {target} before t={t}")
            return DiscreteMeasure.dirac(self.start + t)

        if self.kind is AnalyticKind.CONSTANT_OUTFLOW:
            target, arrival = self._arrival()
            if t < arrival:
                return DiscreteMeasure.dirac(self.start + t)
            return outflow_state(target, self.rate, t - arrival, self.atoms)

        last = self.grid.last
        if self.lag == 0:
            return make_measure([(last, 1.0), (self.y + t, 1.0)])
        t_bar = self.lag / self.g_low
        if t < t_bar:
            return make_measure([(last - self.lag + self.g_low * t, 1.0), (self.y + self.g_low * t, 1.0)])
        return make_measure([(last, 1.0), (self.y + self.lag + (t - t_bar), 1.0)])


def _interior_points(grid: BreakpointGrid) -> Tuple[float, float, float]:
    _require(grid.N >= 2, "these configurations need a grid with at least x_0, x_1, x_2")
    return float(grid.points[0]), float(grid.points[1]), float(grid.points[2])


def eval_example_1_1(t: float, eps: float, grid: BreakpointGrid) -> MeasurePair:
    _, x1, x2 = _interior_points(grid)
    _require(t >= 0 and eps > 0, f"need t >= 0 and eps > 0, got t={t}, eps={eps}")
    _require(x1 + eps + t < x2, f"the moving atom reaches x_2 = {x2} before t = {t}")
    frozen = AnalyticSolution(AnalyticKind.FROZEN_ATOM, grid, start=x1)
    free = AnalyticSolution(AnalyticKind.FREE_ATOM, grid, start=x1 + eps)
    return frozen.evaluate(t), free.evaluate(t)


def eval_example_4_5(t: float, eps: float, c1: float, M: int, grid: BreakpointGrid) -> MeasurePair:
    x0, x1, x2 = _interior_points(grid)
    _require(t >= 0 and c1 >= 0 and M >= 1, f"need t >= 0, c1 >= 0, M >= 1 (t={t}, c1={c1}, M={M})")
    _require(0 < eps < x1 - x0, f"eps={eps} must lie in (0, x_1 - x_0)")
    _require(x1 + t < x2, f"outflow leaves (x_1, x_2) before t={t}")
    parked = AnalyticSolution(AnalyticKind.CONSTANT_OUTFLOW, grid, start=x1, rate=c1, atoms=M)
    arriving = AnalyticSolution(AnalyticKind.CONSTANT_OUTFLOW, grid, start=x1 - eps, rate=c1, atoms=M)
    return parked.evaluate(t), arriving.evaluate(t)


def eval_example_4_6(t: float, eps: float, g_low: float, y: float, grid: BreakpointGrid) -> MeasurePair:
    prev, last = float(grid.points[-2]), grid.last
    _require(0 < g_low <= 1, f"g_low={g_low} must lie in (0, 1]")
    _require(prev < y < last and last - y > 1, f"y={y} must lie in ({prev}, {last}) more than 1 below x_N")
    _require(0 < eps < last - prev and y < last - eps, f"eps={eps} too large for this grid")
    _require(t >= 0 and y + t < last, f"the free atom reaches x_N before t={t}")
    kind = AnalyticKind.TWO_ATOM_SPEED_COUPLED
    settled = AnalyticSolution(kind, grid, g_low=g_low, y=y)
    lagging = AnalyticSolution(kind, grid, g_low=g_low, y=y, lag=eps)
    return settled.evaluate(t), lagging.evaluate(t)


def speed_ramp(g_low: float, width: float = SPEED_RAMP_WIDTH) -> PiecewiseLinearFn:
    # g1 = g_low up to v = 1 - width, then a steep Lipschitz ramp to g1(1) = 1
    return PiecewiseLinearFn(np.array([1.0 - width, 1.0]), np.array([g_low, 1.0]))


@dataclass(frozen=True)
class ExampleSetup:
    """Grid, coefficients and parameters of one worked configuration."""

    name: ExampleName
    grid: BreakpointGrid
    eps: float
    c1: float = 0.0
    g_low: float = 1.0
    y: Optional[float] = None
    outflow_atoms: int = DEFAULT_OUTFLOW_ATOMS

    @classmethod
    def standard(cls, name) -> "ExampleSetup":
        name = ExampleName(name)
        if name is ExampleName.FROZEN_VS_FREE:
            return cls(name, BreakpointGrid.from_points(DEFAULT_GRID), eps=0.1)
        if name is ExampleName.CONSTANT_OUTFLOW:
            return cls(name, BreakpointGrid.from_points(DEFAULT_GRID), eps=0.2, c1=1.0)
        return cls(name, BreakpointGrid.from_points(SPEED_COUPLED_GRID), eps=0.05, g_low=0.5, y=1.5)

    @property
    def reference_time(self) -> float:
        if self.name is ExampleName.FROZEN_VS_FREE:
            return 0.5
        if self.name is ExampleName.CONSTANT_OUTFLOW:
            return self.eps
        return self.eps / self.g_low

    @property
    def horizon(self) -> float:
        # Longest time every closed form in the pair stays valid on its grid
        if self.name is ExampleName.FROZEN_VS_FREE:
            return 0.5
        if self.name is ExampleName.CONSTANT_OUTFLOW:
            return 2.0 * self.eps
        return 2.0 * self.eps / self.g_low

    def evaluate(self, t: float) -> MeasurePair:
        if self.name is ExampleName.FROZEN_VS_FREE:
            return eval_example_1_1(t, self.eps, self.grid)
        if self.name is ExampleName.CONSTANT_OUTFLOW:
            return eval_example_4_5(t, self.eps, self.c1, self.outflow_atoms, self.grid)
        return eval_example_4_6(t, self.eps, self.g_low, self.y, self.grid)

    def initial_pair(self) -> MeasurePair:
        return self.evaluate(0.0)

    def model(self) -> ModelCoefficients:
        if self.name is ExampleName.FROZEN_VS_FREE:
            return unit_speed_model(self.grid)
        if self.name is ExampleName.CONSTANT_OUTFLOW:
            return unit_speed_model(self.grid, [0.0, self.c1])
        return ModelCoefficients(
            grid=self.grid,
            g1=speed_ramp(self.g_low),
            c=tuple(PiecewiseLinearFn.constant(0.0) for _ in range(self.grid.N + 1)),
        )
