"""Self-contained dense two-phase simplex solver.

The dispatch problems solved here are small (at most a few hundred rows even
for the 300-bus system), so a dense tableau with Dantzig pricing and a Bland
anti-cycling fallback is fast enough and keeps the toolkit free of external
solver dependencies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LPResult", "solve_lp", "SimplexError"]

_TOL = 1e-9


class SimplexError(Exception):
    """Internal solver failure (iteration cap, numerical breakdown)."""


@dataclass
class LPResult:
    x: np.ndarray | None
    objective: float
    status: str  # optimal | infeasible | unbounded
    iterations: int

    @property
    def optimal(self):
        return self.status == "optimal"


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, T[row])
    basis[row] = col


def _run_phase(T, basis, n_real, max_iter, blocked_cols):
    """Iterate the tableau until optimality; objective is the last row."""
    m = T.shape[0] - 1
    it = 0
    stall = 0
    last_obj = T[-1, -1]
    bland_after = 4 * (m + T.shape[1])
    while True:
        cost = T[-1, :-1].copy()
        cost[blocked_cols] = 0.0
        if stall > bland_after:
            # Bland's rule: smallest eligible index
            eligible = np.flatnonzero(cost < -_TOL)
            if eligible.size == 0:
                return it
            col = int(eligible[0])
        else:
            col = int(np.argmin(cost))
            if cost[col] >= -_TOL:
                return it
        ratios = np.full(m, np.inf)
        positive = T[:m, col] > _TOL
        ratios[positive] = T[:m, -1][positive] / T[:m, col][positive]
        if m == 0 or not np.isfinite(ratios).any():
            raise _Unbounded()
        row = int(np.argmin(ratios))
        if stall > bland_after:
            # among ties, leave the basic variable with smallest index
            ties = np.flatnonzero(np.abs(ratios - ratios[row]) <= _TOL)
            row = int(min(ties, key=lambda r: basis[r]))
        _pivot(T, basis, row, col)
        it += 1
        obj = T[-1, -1]
        stall = stall + 1 if obj >= last_obj - _TOL else 0
        last_obj = obj
        if it > max_iter:
            raise SimplexError(f"iteration cap {max_iter} exceeded")


class _Unbounded(Exception):
    pass


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    lb=None,
    ub=None,
    max_iter=None,
) -> LPResult:
    """Minimize ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and
    ``lb <= x <= ub``.  Lower bounds must be finite; upper bounds may be inf.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    lb = np.zeros(n) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    if not np.all(np.isfinite(lb)):
        raise ValueError("lower bounds must be finite")
    if np.any(ub < lb - _TOL):
        return LPResult(None, np.nan, "infeasible", 0)

    rows_ub = []
    rhs_ub = []
    if A_ub is not None and len(A_ub) > 0:
        A_ub = np.asarray(A_ub, dtype=float)
        b_ub = np.asarray(b_ub, dtype=float)
        rows_ub.append(A_ub)
        rhs_ub.append(b_ub - A_ub @ lb)
    finite_ub = np.flatnonzero(np.isfinite(ub))
    if finite_ub.size:
        E = np.zeros((finite_ub.size, n))
        E[np.arange(finite_ub.size), finite_ub] = 1.0
        rows_ub.append(E)
        rhs_ub.append(ub[finite_ub] - lb[finite_ub])
    if rows_ub:
        G = np.vstack(rows_ub)
        h = np.concatenate(rhs_ub)
    else:
        G = np.zeros((0, n))
        h = np.zeros(0)

    if A_eq is not None and len(A_eq) > 0:
        A_eq = np.asarray(A_eq, dtype=float)
        b_eq = np.asarray(b_eq, dtype=float) - A_eq @ lb
    else:
        A_eq = np.zeros((0, n))
        b_eq = np.zeros(0)

    m1, m2 = G.shape[0], A_eq.shape[0]
    m = m1 + m2

    # orient every row so the right-hand side is nonnegative
    flip = h < 0
    slack_sign = np.ones(m1)
    slack_sign[flip] = -1.0
    G = G.copy()
    G[flip] *= -1.0
    h = np.abs(h)
    eq_flip = b_eq < 0
    A_eq = A_eq.copy()
    A_eq[eq_flip] *= -1.0
    b_eq = np.abs(b_eq)

    # artificials: for eq rows and for flipped (>=) inequality rows
    art_rows = list(np.flatnonzero(flip)) + list(range(m1, m))
    n_art = len(art_rows)
    n_cols = n + m1 + n_art

    T = np.zeros((m + 1, n_cols + 1))
    T[:m1, :n] = G
    T[:m1, -1] = h
    T[m1:m, :n] = A_eq
    T[m1:m, -1] = b_eq
    T[np.arange(m1), n + np.arange(m1)] = slack_sign
    basis = np.empty(m, dtype=int)
    basis[:m1] = n + np.arange(m1)
    for k, r in enumerate(art_rows):
        T[r, n + m1 + k] = 1.0
        basis[r] = n + m1 + k

    if max_iter is None:
        max_iter = 200 * (m + n + 10)

    iterations = 0
    art_cols = np.arange(n + m1, n_cols)
    if n_art:
        # phase 1: minimize the sum of artificials
        T[-1, :] = 0.0
        T[-1, art_cols] = 1.0
        for r in art_rows:
            T[-1, :] -= T[r, :]
        try:
            iterations += _run_phase(T, basis, n, max_iter, blocked_cols=[])
        except _Unbounded:
            raise SimplexError("phase 1 unbounded (should be impossible)")
        if T[-1, -1] < -1e-7:
            return LPResult(None, np.nan, "infeasible", iterations)
        # drive remaining artificials out of the basis
        for r in range(m):
            if basis[r] >= n + m1:
                cand = np.flatnonzero(np.abs(T[r, : n + m1]) > _TOL)
                if cand.size:
                    _pivot(T, basis, r, int(cand[0]))

    # phase 2
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r in range(m):
        if basis[r] < n:
            T[-1, :] -= c[basis[r]] * T[r, :]
    try:
        iterations += _run_phase(T, basis, n, max_iter, blocked_cols=art_cols)
    except _Unbounded:
        return LPResult(None, np.nan, "unbounded", iterations)

    x = np.zeros(n)
    for r in range(m):
        if basis[r] < n:
            x[basis[r]] = T[r, -1]
    x = np.clip(x + lb, lb, ub)
    return LPResult(x, float(c @ (x - lb) + c @ lb), "optimal", iterations)
