# app/core/measure.py

"""
Finitely supported nonnegative measures on the real line.

A DiscreteMeasure is a sorted array of atom positions with nonnegative weights.
Every value is immutable once built, so measures can be shared freely between
worker processes. Build measures with `make_measure`; it sorts, merges atoms that
sit at the same position (within POSITION_RTOL) and optionally folds tiny
weights into their nearest neighbour.
"""

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np

from app.core.errors import NegativeWeight, OutOfRange
from configs.app_config import POSITION_RTOL, DEFAULT_DROP_TOLERANCE

Atom = Tuple[float, float]


def same_position(a: float, b: float, rtol: float = POSITION_RTOL) -> bool:
    return abs(a - b) <= rtol * max(1.0, abs(a), abs(b))


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values, dtype=np.float64)
    values.setflags(write=False)
    return values


def _merge_sorted(positions: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    # positions must already be sorted; a new cluster starts wherever the gap exceeds the tolerance
    if positions.size <= 1:
        return positions, weights
    gaps = np.diff(positions)
    scale = np.maximum(1.0, np.maximum(np.abs(positions[:-1]), np.abs(positions[1:])))
    starts = np.concatenate(([True], gaps > POSITION_RTOL * scale))
    if starts.all():
        return positions, weights
    first = np.flatnonzero(starts)
    return positions[first], np.add.reduceat(weights, first)


def _fold_small_weights(positions: np.ndarray, weights: np.ndarray, drop_tolerance: float) -> Tuple[np.ndarray, np.ndarray]:
    small = weights < drop_tolerance
    if not small.any() or positions.size <= 1:
        return positions, weights
    if small.all():
        # Everything is tiny: the heaviest atom keeps the whole mass
        keep = int(np.argmax(weights))
        return positions[keep:keep + 1], np.array([weights.sum()])

    kept_pos = positions[~small]
    kept_w = weights[~small].copy()
    lost_pos = positions[small]
    right = np.searchsorted(kept_pos, lost_pos)
    left = np.clip(right - 1, 0, kept_pos.size - 1)
    right = np.clip(right, 0, kept_pos.size - 1)
    nearest = np.where(np.abs(lost_pos - kept_pos[left]) <= np.abs(kept_pos[right] - lost_pos), left, right)
    np.add.at(kept_w, nearest, weights[small])
    return kept_pos, kept_w


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))
        object.__setattr__(self, "weights", _frozen(self.weights))
        if self.positions.ndim != 1 or self.positions.shape != self.weights.shape:
            raise ValueError("positions and weights must be 1-D arrays of equal length")

    @classmethod
    def zero(cls) -> "DiscreteMeasure":
        return cls(np.empty(0), np.empty(0))

    @classmethod
    def dirac(cls, x: float, weight: float = 1.0) -> "DiscreteMeasure":
        return make_measure([(x, weight)])

    @property
    def atoms(self) -> List[Atom]:
        return [(float(x), float(w)) for x, w in zip(self.positions, self.weights)]

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def is_zero(self) -> bool:
        return self.positions.size == 0 or not np.any(self.weights > 0)

    def __len__(self) -> int:
        return int(self.positions.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(self.weights, other.weights)

    def __hash__(self):
        return hash((self.positions.tobytes(), self.weights.tobytes()))

    def __repr__(self) -> str:
        shown = ", ".join(f"({x:.6g}, {w:.6g})" for x, w in self.atoms[:6])
        more = "" if len(self) <= 6 else f", ... {len(self) - 6} more"
        return f"DiscreteMeasure([{shown}{more}])"


def measure_from_arrays(positions: Sequence[float], weights: Sequence[float],
                        drop_tolerance: float = DEFAULT_DROP_TOLERANCE) -> DiscreteMeasure:
    positions = np.asarray(positions, dtype=np.float64).ravel()
    weights = np.asarray(weights, dtype=np.float64).ravel()
    if positions.shape != weights.shape:
        raise ValueError("positions and weights must have the same length")
    if not np.all(np.isfinite(positions)):
        raise OutOfRange("atom positions must be finite")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        bad = weights[~(np.isfinite(weights) & (weights >= 0))]
        raise NegativeWeight(f"atom weights must be finite and >= 0, got {bad[:3].tolist()}")

    order = np.argsort(positions, kind="mergesort")
    positions, weights = _merge_sorted(positions[order], weights[order])
    if drop_tolerance > 0:
        positions, weights = _fold_small_weights(positions, weights, drop_tolerance)
    return DiscreteMeasure(positions, weights)


def make_measure(raw_atoms: Iterable[Atom], drop_tolerance: float = DEFAULT_DROP_TOLERANCE) -> DiscreteMeasure:
    pairs = np.asarray(list(raw_atoms), dtype=np.float64).reshape(-1, 2)
    return measure_from_arrays(pairs[:, 0], pairs[:, 1], drop_tolerance=drop_tolerance)


def total_variation(m: DiscreteMeasure) -> float:
    return m.total_mass


def mass_at(m: DiscreteMeasure, x: float) -> float:
    if len(m) == 0:
        return 0.0
    idx = int(np.searchsorted(m.positions, x))
    for candidate in (idx - 1, idx):
        if 0 <= candidate < len(m) and same_position(float(m.positions[candidate]), x):
            return float(m.weights[candidate])
    return 0.0


@dataclass(frozen=True)
class Interval:
    """A possibly unbounded interval; infinite ends are always open."""

    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = True

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper):
            raise ValueError("interval ends must not be NaN")
        if math.isinf(self.lower):
            object.__setattr__(self, "lower_closed", False)
        if math.isinf(self.upper):
            object.__setattr__(self, "upper_closed", False)
        singleton = self.lower == self.upper and self.lower_closed and self.upper_closed
        if not (self.lower < self.upper or singleton):
            raise ValueError(f"empty interval: {self}")

    @classmethod
    def left_open(cls, lower: float, upper: float) -> "Interval":
        return cls(lower, upper, lower_closed=False, upper_closed=True)

    @classmethod
    def open(cls, lower: float, upper: float) -> "Interval":
        return cls(lower, upper, lower_closed=False, upper_closed=False)

    @classmethod
    def closed(cls, lower: float, upper: float) -> "Interval":
        return cls(lower, upper, lower_closed=True, upper_closed=True)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        above = x >= self.lower if self.lower_closed else x > self.lower
        below = x <= self.upper if self.upper_closed else x < self.upper
        return above & below

    def complement(self) -> List["Interval"]:
        pieces = []
        if not math.isinf(self.lower):
            pieces.append(Interval(-math.inf, self.lower, lower_closed=False, upper_closed=not self.lower_closed))
        if not math.isinf(self.upper):
            pieces.append(Interval(self.upper, math.inf, lower_closed=not self.upper_closed, upper_closed=False))
        return pieces


def restrict(m: DiscreteMeasure, iv: Interval) -> DiscreteMeasure:
    mask = iv.contains(m.positions)
    return DiscreteMeasure(m.positions[mask], m.weights[mask])


@dataclass(frozen=True, eq=False)
class SignedAtomVector:
    """m1 - m2 over the union support; zero entries are kept."""

    positions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions))
        object.__setattr__(self, "weights", _frozen(self.weights))

    def __neg__(self) -> "SignedAtomVector":
        return SignedAtomVector(self.positions, -self.weights)

    def __len__(self) -> int:
        return int(self.positions.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SignedAtomVector):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(self.weights, other.weights)

    def positive_part(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.positions, np.maximum(self.weights, 0.0))

    def negative_part(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.positions, np.maximum(-self.weights, 0.0))

    def total_variation(self) -> float:
        return float(np.abs(self.weights).sum())


def difference(m1: DiscreteMeasure, m2: DiscreteMeasure) -> SignedAtomVector:
    positions = np.concatenate((m1.positions, m2.positions))
    weights = np.concatenate((m1.weights, -m2.weights))
    order = np.argsort(positions, kind="mergesort")
    positions, weights = _merge_sorted(positions[order], weights[order])
    return SignedAtomVector(positions, weights)
