# app/metrics/grid.py

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence

import numpy as np

from app.core.measure import Interval
from configs.app_config import POSITION_RTOL


class MetricKind(str, Enum):
    NORM = "norm"
    WASSERSTEIN1 = "w1"
    FLAT = "flat"
    MT = "mt"

    @property
    def needs_grid(self) -> bool:
        return self is MetricKind.MT


@dataclass(frozen=True, eq=False)
class BreakpointGrid:
    """Transmission points x_0 < x_1 < ... < x_N.

    The points split the line into N+2 test intervals
    (-inf, x_0], (x_0, x_1], ..., (x_{N-1}, x_N], (x_N, +inf);
    an atom sitting on x_i belongs to the interval that ends at x_i.
    """

    points: np.ndarray

    def __post_init__(self):
        points = np.ascontiguousarray(self.points, dtype=np.float64).ravel()
        if points.size < 2:
            raise ValueError("a grid needs at least two points (N >= 1)")
        if not np.all(np.isfinite(points)) or not np.all(np.diff(points) > 0):
            raise ValueError(f"grid points must be finite and strictly increasing, got {points.tolist()}")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def from_points(cls, points: Sequence[float]) -> "BreakpointGrid":
        return cls(np.asarray(points, dtype=np.float64))

    @property
    def N(self) -> int:
        return int(self.points.size - 1)

    @property
    def first(self) -> float:
        return float(self.points[0])

    @property
    def last(self) -> float:
        return float(self.points[-1])

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def min_gap(self) -> float:
        return float(self.gaps.min())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BreakpointGrid):
            return NotImplemented
        return np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    def intervals(self) -> List[Interval]:
        pts = self.points
        pieces = [Interval.left_open(-math.inf, float(pts[0]))]
        pieces += [Interval.left_open(float(a), float(b)) for a, b in zip(pts[:-1], pts[1:])]
        pieces.append(Interval.open(float(pts[-1]), math.inf))
        return pieces

    def snap(self, positions) -> np.ndarray:
        """Move positions lying within POSITION_RTOL of a grid point onto it."""
        positions = np.array(positions, dtype=np.float64, ndmin=1)
        idx = np.clip(np.searchsorted(self.points, positions), 0, self.N)
        snapped = positions.copy()
        for candidate in (np.clip(idx - 1, 0, self.N), idx):
            target = self.points[candidate]
            scale = np.maximum(1.0, np.maximum(np.abs(target), np.abs(positions)))
            close = np.abs(positions - target) <= POSITION_RTOL * scale
            snapped = np.where(close, target, snapped)
        return snapped

    def grid_index(self, positions) -> np.ndarray:
        """Index i of the grid point each position sits on, -1 when it sits on none."""
        positions = np.array(positions, dtype=np.float64, ndmin=1)
        snapped = self.snap(positions)
        idx = np.clip(np.searchsorted(self.points, snapped), 0, self.N)
        return np.where(self.points[idx] == snapped, idx, -1)

    def interval_index(self, positions) -> np.ndarray:
        """Test-interval index k in 0..N+1, with x_i counted in (x_{i-1}, x_i]."""
        snapped = self.snap(positions)
        return np.searchsorted(self.points, snapped, side="left")

    def next_point_index(self, positions) -> np.ndarray:
        """Index of the first grid point strictly to the right, N+1 when there is none."""
        snapped = self.snap(positions)
        return np.searchsorted(self.points, snapped, side="right")
