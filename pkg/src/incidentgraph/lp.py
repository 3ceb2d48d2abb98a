"""Dense two-phase primal simplex.

Solves  min c.x  s.t.  A x <= b,  lo <= x <= hi  on a dense tableau.
Dantzig pricing with an automatic switch to Bland's rule once degenerate
pivots pile up, which guarantees termination. Adequate to a few thousand
variables; anything bigger belongs in an external solver behind the same
interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_TOL = 1e-9


class LpError(RuntimeError):
    pass


class IterationLimit(LpError):
    """Pivot budget exhausted; carries the best feasible point seen."""

    def __init__(self, msg: str, x=None):
        super().__init__(msg)
        self.x = x


@dataclass
class LpResult:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float | None
    iterations: int


def solve_lp(
    c,
    a_ub=None,
    b_ub=None,
    bounds=None,
    max_iter: int = 50000,
) -> LpResult:
    c = np.asarray(c, dtype=float)
    n = c.size
    if a_ub is None:
        a_ub = np.zeros((0, n))
        b_ub = np.zeros(0)
    a_ub = np.asarray(a_ub, dtype=float).reshape(-1, n)
    b_ub = np.asarray(b_ub, dtype=float).ravel()
    if bounds is None:
        bounds = [(0.0, None)] * n
    lo = np.array([b[0] for b in bounds], dtype=float)
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=float)
    if np.any(~np.isfinite(lo)):
        raise LpError("lower bounds must be finite")
    if np.any(hi < lo - _TOL):
        return LpResult("infeasible", None, None, 0)

    # Fixed variables are substituted out.
    fixed = hi - lo <= _TOL
    free_idx = np.flatnonzero(~fixed)
    x_full = lo.copy()

    if free_idx.size == 0:
        if np.all(a_ub @ x_full <= b_ub + 1e-7):
            return LpResult("optimal", x_full, float(c @ x_full), 0)
        return LpResult("infeasible", None, None, 0)

    # Shift to y = x - lo >= 0 and append explicit upper-bound rows.
    a = a_ub[:, free_idx]
    b = b_ub - a_ub @ lo
    ub = hi[free_idx] - lo[free_idx]
    finite_ub = np.flatnonzero(np.isfinite(ub))
    if finite_ub.size:
        rows = np.zeros((finite_ub.size, free_idx.size))
        rows[np.arange(finite_ub.size), finite_ub] = 1.0
        a = np.vstack([a, rows])
        b = np.concatenate([b, ub[finite_ub]])

    y, iters = _simplex_standard(c[free_idx], a, b, max_iter)
    if isinstance(y, str):
        return LpResult(y, None, None, iters)
    x_full[free_idx] += y
    return LpResult("optimal", x_full, float(c @ x_full), iters)


def _simplex_standard(c, a, b, max_iter):
    """min c.y s.t. a y <= b, y >= 0 via two-phase tableau simplex.

    Returns (y, iterations) or (status_string, iterations).
    """
    m, n = a.shape
    if m == 0:
        if np.any(c < -_TOL):
            return "unbounded", 0
        return np.zeros(n), 0

    # Equality form with one slack per row; rows with negative rhs are
    # flipped and get an artificial so the initial basis is feasible.
    neg = b < 0
    sign = np.where(neg, -1.0, 1.0)
    a_eq = a * sign[:, None]
    b_eq = b * sign
    slack = np.diag(sign)
    art_rows = np.flatnonzero(neg)
    n_art = art_rows.size

    total = n + m + n_art
    tab = np.zeros((m + 1, total + 1))
    tab[:m, :n] = a_eq
    tab[:m, n:n + m] = slack
    for j, r in enumerate(art_rows):
        tab[r, n + m + j] = 1.0
    tab[:m, -1] = b_eq

    basis = np.empty(m, dtype=int)
    basis[:] = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(n_art)

    iters = 0
    if n_art:
        # Phase 1: minimize the artificial sum.
        cost1 = np.zeros(total)
        cost1[n + m:] = 1.0
        _set_objective_row(tab, basis, cost1)
        iters += _pivot_until_optimal(tab, basis, max_iter, ncols=total)
        if tab[-1, -1] > 1e-7:
            return "infeasible", iters
        _drive_out_artificials(tab, basis, n + m)

    cost2 = np.zeros(total)
    cost2[:n] = c
    _set_objective_row(tab, basis, cost2, forbid_from=n + m)
    try:
        iters += _pivot_until_optimal(
            tab, basis, max_iter - iters, ncols=n + m
        )
    except LpError as e:
        if "unbounded" in str(e):
            return "unbounded", iters
        raise
    y = np.zeros(total)
    y[basis] = tab[:m, -1]
    return y[:n], iters


def _set_objective_row(tab, basis, cost, forbid_from=None):
    """Bottom row := c_B B^-1 A - c (entering candidates have positive entries)."""
    m = tab.shape[0] - 1
    cb = cost[basis]
    tab[-1, :] = cb @ tab[:m, :]
    tab[-1, :-1] -= cost
    if forbid_from is not None:
        # Artificials stay out of the basis in phase 2.
        tab[-1, forbid_from:-1] = -np.inf


def _pivot_until_optimal(tab, basis, max_iter, ncols):
    m = tab.shape[0] - 1
    iters = 0
    degenerate_streak = 0
    bland = False
    while True:
        row = tab[-1, :ncols]
        if bland:
            candidates = np.flatnonzero(row > _TOL)
            if candidates.size == 0:
                return iters
            pc = candidates[0]
        else:
            pc = int(np.argmax(row))
            if row[pc] <= _TOL:
                return iters
        col = tab[:m, pc]
        pos = col > _TOL
        if not np.any(pos):
            raise LpError("unbounded")
        ratios = np.full(m, np.inf)
        ratios[pos] = tab[:m, -1][pos] / col[pos]
        best = ratios.min()
        tie_rows = np.flatnonzero(ratios <= best + _TOL)
        pr = tie_rows[np.argmin(basis[tie_rows])]  # smallest basis index on ties

        if iters >= max_iter:
            raise IterationLimit(f"simplex exceeded {max_iter} pivots")
        if best <= _TOL:
            degenerate_streak += 1
            if degenerate_streak > 1000:
                bland = True
        else:
            degenerate_streak = 0

        piv = tab[pr, pc]
        tab[pr, :] /= piv
        colvals = tab[:, pc].copy()
        colvals[pr] = 0.0
        tab -= np.outer(colvals, tab[pr, :])
        tab[:, pc] = 0.0
        tab[pr, pc] = 1.0
        basis[pr] = pc
        iters += 1


def _drive_out_artificials(tab, basis, n_real):
    """Pivot basic artificials (at value 0) out, or mark their rows redundant."""
    m = tab.shape[0] - 1
    for r in range(m):
        if basis[r] < n_real:
            continue
        row = tab[r, :n_real]
        nz = np.flatnonzero(np.abs(row) > _TOL)
        if nz.size == 0:
            continue  # redundant row; harmless to keep, never pivots again
        pc = int(nz[0])
        piv = tab[r, pc]
        tab[r, :] /= piv
        colvals = tab[:, pc].copy()
        colvals[r] = 0.0
        tab -= np.outer(colvals, tab[r, :])
        tab[:, pc] = 0.0
        tab[r, pc] = 1.0
        basis[r] = pc
