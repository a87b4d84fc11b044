# app/metrics/oracle.py

"""
Brute-force reference values for the metrics on tiny supports.

Flat and measure-transmission distances: enumerate every vertex of the
constraint polytope of the psi-program (all choices of n tight constraints,
solved as equalities) and keep the best feasible one.
Wasserstein-1: enumerate every basic transport plan between the atoms of the
two measures and keep the cheapest.
"""

from itertools import combinations
from typing import Optional

import numpy as np

from app.core.errors import NeedsGrid, TooLarge
from app.core.measure import DiscreteMeasure, difference
from app.metrics.distances import norm_distance, wasserstein1
from app.metrics.grid import BreakpointGrid, MetricKind
from configs.app_config import ORACLE_MAX_SUPPORT, MASS_TOL

FEAS_TOL = 1e-10
DET_TOL = 1e-12


def _psi_constraints(positions: np.ndarray, labels: np.ndarray):
    # Rows of A psi <= b: the box |psi_k| <= 1 plus Lipschitz rows inside each interval
    n = positions.size
    eye = np.eye(n)
    rows = [eye, -eye]
    bounds = [np.ones(n), np.ones(n)]
    for k in range(n - 1):
        if labels[k] != labels[k + 1]:
            continue
        step = eye[k + 1] - eye[k]
        gap = positions[k + 1] - positions[k]
        rows.append(np.vstack((step, -step)))
        bounds.append(np.array([gap, gap]))
    return np.vstack(rows), np.concatenate(bounds)


def _best_vertex(objective: np.ndarray, A: np.ndarray, b: np.ndarray) -> float:
    n = objective.size
    subsets = np.array(list(combinations(range(A.shape[0]), n)))
    systems = A[subsets]
    rhs = b[subsets]
    regular = np.abs(np.linalg.det(systems)) > DET_TOL
    if not regular.any():
        return 0.0
    vertices = np.linalg.solve(systems[regular], rhs[regular][..., None])[..., 0]
    slack = vertices @ A.T - b
    feasible = np.all(slack <= FEAS_TOL, axis=1)
    return float((vertices[feasible] @ objective).max())


def _polytope_value(m1: DiscreteMeasure, m2: DiscreteMeasure, grid: Optional[BreakpointGrid]) -> float:
    signed = difference(m1, m2)
    if len(signed) == 0:
        return 0.0
    if grid is None:
        labels = np.zeros(len(signed), dtype=int)
    else:
        labels = grid.interval_index(signed.positions)
    A, b = _psi_constraints(signed.positions, labels)
    return max(0.0, _best_vertex(signed.weights, A, b))


def _transport_value(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    # Vertices of {pi >= 0, row sums = m1, column sums = m2}: choose a basis of
    # rows + cols - 1 cells, solve, keep the nonnegative ones
    if abs(m1.total_mass - m2.total_mass) > MASS_TOL * max(1.0, m1.total_mass, m2.total_mass):
        return wasserstein1(m1, m2)  # raises UnequalMass
    rows, cols = len(m1), len(m2)
    if rows == 0 or cols == 0:
        return 0.0
    cost = np.abs(m1.positions[:, None] - m2.positions[None, :]).ravel()
    equality = np.zeros((rows + cols, rows * cols))
    for i in range(rows):
        equality[i, i * cols:(i + 1) * cols] = 1.0
    for j in range(cols):
        equality[rows + j, j::cols] = 1.0
    target = np.concatenate((m1.weights, m2.weights))
    # The last column-sum row is implied by the others
    equality, target = equality[:-1], target[:-1]

    best = np.inf
    for cells in combinations(range(rows * cols), rows + cols - 1):
        basis = equality[:, cells]
        if abs(np.linalg.det(basis)) <= DET_TOL:
            continue
        plan = np.linalg.solve(basis, target)
        if np.any(plan < -FEAS_TOL):
            continue
        best = min(best, float(cost[list(cells)] @ plan))
    return best


def metric_oracle(kind: MetricKind, m1: DiscreteMeasure, m2: DiscreteMeasure,
                  grid: Optional[BreakpointGrid] = None) -> float:
    kind = MetricKind(kind)
    if kind.needs_grid and grid is None:
        raise NeedsGrid(f"oracle for '{kind.value}' needs a breakpoint grid")
    # Transport plans live on atom pairs, so Wasserstein counts atoms of both sides
    if kind is MetricKind.WASSERSTEIN1:
        support = len(m1) + len(m2)
    else:
        support = len(difference(m1, m2))
    if support > ORACLE_MAX_SUPPORT:
        raise TooLarge(f"oracle handles at most {ORACLE_MAX_SUPPORT} support points, got {support}")
    if kind is MetricKind.NORM:
        return norm_distance(m1, m2)
    if kind is MetricKind.WASSERSTEIN1:
        return _transport_value(m1, m2)
    if kind is MetricKind.FLAT:
        return _polytope_value(m1, m2, grid=None)
    return _polytope_value(m1, m2, grid=grid)
