# app/metrics/simplex.py

"""
Dense tableau simplex for small problems of the form

    maximize   c @ x
    subject to A @ x <= b,  x >= 0,  with b >= 0.

Because b >= 0 the slack basis is feasible and no phase one is needed.
Pivoting follows Bland's rule, so degenerate problems (common for the flat
metric, where many Lipschitz constraints are tight at once) cannot cycle.
"""

import logging
from dataclasses import dataclass

import numpy as np

from app.core.errors import LPUnbounded

PIVOT_EPS = 1e-12


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    value: float
    iterations: int


def maximize(c, A_ub, b_ub, max_iter: int = 0) -> LPResult:
    c = np.asarray(c, dtype=np.float64).ravel()
    A = np.atleast_2d(np.asarray(A_ub, dtype=np.float64))
    b = np.asarray(b_ub, dtype=np.float64).ravel()
    m, n = A.shape
    if c.size != n or b.size != m:
        raise ValueError(f"shape mismatch: c has {c.size}, A is {A.shape}, b has {b.size}")
    if np.any(b < 0):
        raise ValueError("right-hand side must be nonnegative")

    tableau = np.zeros((m + 1, n + m + 1))
    tableau[:m, :n] = A
    tableau[:m, n:n + m] = np.eye(m)
    tableau[:m, -1] = b
    # Objective row holds reduced costs; a positive entry can still improve the value
    tableau[m, :n] = c
    basis = np.arange(n, n + m)

    limit = max_iter or 50 * (n + m) + 100
    iterations = 0
    while iterations < limit:
        entering = np.flatnonzero(tableau[m, :-1] > PIVOT_EPS)
        if entering.size == 0:
            break
        col = int(entering[0])

        column = tableau[:m, col]
        rows = np.flatnonzero(column > PIVOT_EPS)
        if rows.size == 0:
            raise LPUnbounded(f"objective unbounded along column {col}")
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_EPS * max(1.0, abs(best))]
        row = int(ties[np.argmin(basis[ties])])

        tableau[row] /= tableau[row, col]
        factors = tableau[:, col].copy()
        factors[row] = 0.0
        tableau -= np.outer(factors, tableau[row])
        basis[row] = col
        iterations += 1
    else:
        logging.warning(f"Simplex stopped after {limit} pivots without proving optimality")

    solution = np.zeros(n + m)
    solution[basis] = tableau[:m, -1]
    return LPResult(x=solution[:n], value=float(-tableau[m, -1]), iterations=iterations)
