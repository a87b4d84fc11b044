# app/metrics/distances.py

"""
The four distances between discrete measures: norm, Wasserstein-1, flat
(bounded Lipschitz) and measure-transmission.

Flat and measure-transmission distances reduce to a linear program over the
values psi_k of the test function at the union support points:

    maximize  sum_k sigma_k psi_k
    s.t.      |psi_k| <= 1,  |psi_{k+1} - psi_k| <= x_{k+1} - x_k

Small programs go through the dense simplex. Larger ones use the envelope
recursion: the best partial objective as a function of the last psi value is
concave and piecewise linear, and each new support point dilates it by the gap
and adds a linear term. Both are exact; they differ only in cost.
"""

import logging
from typing import Optional

import numpy as np

from app.core.errors import NeedsGrid, UnequalMass
from app.core.measure import DiscreteMeasure, difference
from app.metrics.grid import BreakpointGrid, MetricKind
from app.metrics.simplex import maximize
from configs.app_config import MASS_TOL, SIMPLEX_MAX_SUPPORT


def norm_distance(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    return difference(m1, m2).total_variation()


def wasserstein1(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    mass1, mass2 = m1.total_mass, m2.total_mass
    if abs(mass1 - mass2) > MASS_TOL * max(1.0, mass1, mass2):
        raise UnequalMass(f"total masses differ: {mass1!r} vs {mass2!r}")
    signed = difference(m1, m2)
    if len(signed) < 2:
        return 0.0
    # Integral of |F1 - F2| over the gaps between consecutive support points
    cdf_gap = np.cumsum(signed.weights)[:-1]
    return float(np.sum(np.abs(cdf_gap) * np.diff(signed.positions)))


def _flat_by_simplex(gaps: np.ndarray, sigma: np.ndarray) -> float:
    # Shift psi to y = psi + 1 in [0, 2] so the slack basis is feasible
    n = sigma.size
    eye = np.eye(n)
    step = eye[1:] - eye[:-1]
    A = np.vstack((eye, step, -step))
    b = np.concatenate((np.full(n, 2.0), gaps, gaps))
    result = maximize(sigma, A, b)
    return result.value - float(sigma.sum())


def _flat_by_envelope(gaps: np.ndarray, sigma: np.ndarray) -> float:
    xs = np.array([-1.0, 1.0])
    values = sigma[0] * xs
    for gap, weight in zip(gaps, sigma[1:]):
        top = int(np.argmax(values))
        # Dilation: left of the maximiser shifts left by the gap, right of it shifts right
        shifted_x = np.concatenate((xs[:top + 1] - gap, xs[top:] + gap))
        shifted_v = np.concatenate((values[:top + 1], values[top:]))
        inside = (shifted_x > -1.0) & (shifted_x < 1.0)
        low = np.interp(-1.0, shifted_x, shifted_v)
        high = np.interp(1.0, shifted_x, shifted_v)
        xs = np.concatenate(([-1.0], shifted_x[inside], [1.0]))
        values = np.concatenate(([low], shifted_v[inside], [high])) + weight * xs
    return float(values.max())


def flat_sup(positions: np.ndarray, sigma: np.ndarray, solver: str = "auto") -> float:
    """Value of the flat LP for signed weights `sigma` at sorted `positions`."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0 or not np.any(sigma):
        return 0.0
    if sigma.size == 1:
        return float(abs(sigma[0]))
    gaps = np.diff(np.asarray(positions, dtype=np.float64))
    if solver == "auto":
        solver = "simplex" if sigma.size <= SIMPLEX_MAX_SUPPORT else "envelope"
    if solver == "simplex":
        value = _flat_by_simplex(gaps, sigma)
    elif solver == "envelope":
        value = _flat_by_envelope(gaps, sigma)
    else:
        raise ValueError(f"unknown flat solver '{solver}'")
    return max(0.0, value)


def flat_metric(m1: DiscreteMeasure, m2: DiscreteMeasure, solver: str = "auto") -> float:
    signed = difference(m1, m2)
    return flat_sup(signed.positions, signed.weights, solver=solver)


def mt_metric(m1: DiscreteMeasure, m2: DiscreteMeasure, grid: BreakpointGrid, solver: str = "auto") -> float:
    signed = difference(m1, m2)
    if len(signed) == 0:
        return 0.0
    # No constraint couples distinct test intervals, so the sup splits into a sum
    labels = grid.interval_index(signed.positions)
    total = 0.0
    for label in np.unique(labels):
        mask = labels == label
        total += flat_sup(signed.positions[mask], signed.weights[mask], solver=solver)
    return total


def compute_metric(kind: MetricKind, m1: DiscreteMeasure, m2: DiscreteMeasure,
                   grid: Optional[BreakpointGrid] = None) -> float:
    kind = MetricKind(kind)
    if kind.needs_grid and grid is None:
        raise NeedsGrid(f"metric '{kind.value}' needs a breakpoint grid")
    if kind is MetricKind.NORM:
        return norm_distance(m1, m2)
    if kind is MetricKind.WASSERSTEIN1:
        return wasserstein1(m1, m2)
    if kind is MetricKind.FLAT:
        return flat_metric(m1, m2)
    value = mt_metric(m1, m2, grid)
    logging.debug(f"mt_metric over {grid.N + 2} intervals = {value:.15g}")
    return value
