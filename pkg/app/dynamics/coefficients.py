# app/dynamics/coefficients.py

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import AssumptionViolated
from app.metrics.grid import BreakpointGrid


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFn:
    """Table of (knot, value) pairs, linear in between, constant beyond the ends."""

    knots: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        knots = np.ascontiguousarray(self.knots, dtype=np.float64).ravel()
        values = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if knots.size == 0 or knots.shape != values.shape:
            raise ValueError("a table needs at least one knot and one value per knot")
        if not (np.all(np.isfinite(knots)) and np.all(np.isfinite(values))):
            raise ValueError("table entries must be finite")
        if np.any(np.diff(knots) <= 0):
            raise ValueError(f"knots must be strictly increasing, got {knots.tolist()}")
        knots.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinearFn":
        return cls(np.array([0.0]), np.array([float(value)]))

    @classmethod
    def from_table(cls, table: Sequence[Sequence[float]]) -> "PiecewiseLinearFn":
        rows = np.asarray(table, dtype=np.float64).reshape(-1, 2)
        return cls(rows[:, 0], rows[:, 1])

    def to_table(self) -> List[List[float]]:
        return [[float(k), float(v)] for k, v in zip(self.knots, self.values)]

    def __call__(self, x):
        result = np.interp(x, self.knots, self.values)
        return float(result) if np.ndim(result) == 0 else result

    def __eq__(self, other) -> bool:
        if not isinstance(other, PiecewiseLinearFn):
            return NotImplemented
        return np.array_equal(self.knots, other.knots) and np.array_equal(self.values, other.values)

    @property
    def sup(self) -> float:
        return float(self.values.max())

    @property
    def inf(self) -> float:
        return float(self.values.min())

    @property
    def lipschitz(self) -> float:
        if self.knots.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.knots))))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def inf_on(self, lower: float, upper: float) -> float:
        inside = self.values[(self.knots >= lower) & (self.knots <= upper)]
        ends = np.interp([lower, upper], self.knots, self.values)
        return float(np.concatenate((inside, ends)).min())

    def scaled(self, factor: float) -> "PiecewiseLinearFn":
        return PiecewiseLinearFn(self.knots, self.values * factor)


@dataclass(frozen=True, eq=False)
class IntervalFunction:
    """Function of position given by one table per interval (x_{i-1}, x_i], i = 1..N.

    Zero outside [x_0, x_N]; x_0 itself takes the first piece.
    """

    grid: BreakpointGrid
    pieces: Tuple[PiecewiseLinearFn, ...]

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        if len(self.pieces) != self.grid.N:
            raise AssumptionViolated("p2 support", f"expected {self.grid.N} interval pieces, got {len(self.pieces)}")

    def __call__(self, x):
        x = np.array(x, dtype=np.float64, ndmin=1)
        labels = self.grid.interval_index(x)
        labels = np.where(self.grid.snap(x) == self.grid.first, 1, labels)
        out = np.zeros_like(x)
        for i, piece in enumerate(self.pieces, start=1):
            mask = labels == i
            if mask.any():
                out[mask] = piece(x[mask])
        return out

    @property
    def is_zero(self) -> bool:
        return all(piece.is_zero for piece in self.pieces)


@dataclass(frozen=True, eq=False)
class ModelCoefficients:
    grid: BreakpointGrid
    g1: PiecewiseLinearFn
    c: Tuple[PiecewiseLinearFn, ...]
    p1: PiecewiseLinearFn = field(default_factory=lambda: PiecewiseLinearFn.constant(0.0))
    p2: Optional[IntervalFunction] = None

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(self.c))
        self.validate()

    def validate(self) -> None:
        N = self.grid.N
        if len(self.c) != N + 1:
            raise AssumptionViolated("len(c)=N+1", f"grid has N={N}, got {len(self.c)} outflow rates")
        if self.g1.inf <= 0:
            raise AssumptionViolated("g1>0", f"table minimum is {self.g1.inf}")
        for i, rate in enumerate(self.c):
            if rate.inf < 0:
                raise AssumptionViolated("c_i>=0", f"c_{i} reaches {rate.inf}")
        if not self.c[N].is_zero:
            raise AssumptionViolated("c_N=0", f"c_{N} has values {self.c[N].values.tolist()}")
        if self.p2 is not None and self.p2.grid != self.grid:
            raise AssumptionViolated("p2 support", "p2 is defined on a different grid")

    @property
    def N(self) -> int:
        return self.grid.N

    @property
    def sup_g1(self) -> float:
        return self.g1.sup

    @property
    def lip_g1(self) -> float:
        return self.g1.lipschitz

    @property
    def sup_c(self) -> float:
        return max(rate.sup for rate in self.c)

    @property
    def lip_c(self) -> float:
        return max(rate.lipschitz for rate in self.c)

    @property
    def p_is_zero(self) -> bool:
        return self.p1.is_zero or self.p2 is None or self.p2.is_zero

    def speed(self, v: float) -> float:
        return self.g1(v)

    def rates(self, v: float) -> np.ndarray:
        return np.array([rate(v) for rate in self.c])

    def growth(self, v: float, positions) -> np.ndarray:
        positions = np.array(positions, dtype=np.float64, ndmin=1)
        if self.p_is_zero:
            return np.zeros_like(positions)
        return self.p1(v) * self.p2(positions)

    def with_scaled_outflow(self, factor: float) -> "ModelCoefficients":
        return replace(self, c=tuple(rate.scaled(factor) for rate in self.c))


def unit_speed_model(grid: BreakpointGrid, rates: Sequence[float] = ()) -> ModelCoefficients:
    """g1 = 1 with constant outflow rates c_0..c_{N-1} (missing ones are 0) and c_N = 0."""
    values = list(rates)[:grid.N]
    values += [0.0] * (grid.N + 1 - len(values))
    return ModelCoefficients(
        grid=grid,
        g1=PiecewiseLinearFn.constant(1.0),
        c=tuple(PiecewiseLinearFn.constant(r) for r in values),
    )
