"""Dense bounded-variable primal simplex for small linear programs.

Solves problems of the form

    maximize    c . x
    subject to  row_lo_i <= (A x)_i <= row_hi_i      (equality when equal)
                lb_j <= x_j <= ub_j

via a full-tableau simplex in which variables may be nonbasic at either
bound.  Ranged rows carry a single bounded slack, so two-sided constraints
cost one row each.  Rows violated at the starting point get one artificial
variable and a standard phase-1 objective.  Pricing is Dantzig with a
permanent switch to Bland's rule after a stall, which rules out cycling.

Problem sizes in this package stay in the low hundreds of variables, so a
dense tableau is the right tradeoff; the pivot loop is numba-compiled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

__all__ = ["LPResult", "maximize"]

# variable statuses
_AT_LOWER = 0
_AT_UPPER = 1
_BASIC = 2
_FIXED = 3

_OPTIMAL = 0
_UNBOUNDED = 1
_MAXITER = 2

_TOL = 1e-9


@dataclass
class LPResult:
    status: str
    value: float
    x: np.ndarray
    iterations: int


@njit(cache=True)
def _simplex_loop(T, zrow, valB, basis, vstat, lb, ub, maxiter, stall_limit):
    m, ncols = T.shape
    bland = False
    stall = 0
    it = 0
    while it < maxiter:
        # ----- pricing -----
        j = -1
        if bland:
            for col in range(ncols):
                st = vstat[col]
                if st == _AT_LOWER and zrow[col] > _TOL:
                    j = col
                    break
                if st == _AT_UPPER and zrow[col] < -_TOL:
                    j = col
                    break
        else:
            best = _TOL
            for col in range(ncols):
                st = vstat[col]
                if st == _AT_LOWER and zrow[col] > best:
                    best = zrow[col]
                    j = col
                elif st == _AT_UPPER and -zrow[col] > best:
                    best = -zrow[col]
                    j = col
        if j < 0:
            return _OPTIMAL, it
        direction = 1.0 if vstat[j] == _AT_LOWER else -1.0
        gain = zrow[j] if direction > 0 else -zrow[j]

        # ----- ratio test -----
        tbest = ub[j] - lb[j]  # own bound flip; may be inf
        rbest = -1
        for i in range(m):
            coef = direction * T[i, j]
            if coef > 1e-9:
                ti = (valB[i] - lb[basis[i]]) / coef
            elif coef < -1e-9:
                ti = (valB[i] - ub[basis[i]]) / coef
            else:
                continue
            if ti < 0.0:
                ti = 0.0
            tie = 1e-10 * (1.0 + abs(tbest))
            if ti < tbest - tie:
                tbest = ti
                rbest = i
            elif rbest >= 0 and ti <= tbest + tie:
                if bland:
                    if basis[i] < basis[rbest]:
                        tbest = min(tbest, ti)
                        rbest = i
                elif abs(T[i, j]) > abs(T[rbest, j]):
                    tbest = min(tbest, ti)
                    rbest = i
            elif rbest < 0 and ti <= tbest:
                tbest = ti
                rbest = i
        if rbest < 0 and not np.isfinite(tbest):
            return _UNBOUNDED, it

        if rbest < 0:
            # bound flip, no basis change
            t = tbest
            for i in range(m):
                valB[i] -= direction * t * T[i, j]
            vstat[j] = _AT_UPPER if vstat[j] == _AT_LOWER else _AT_LOWER
        else:
            r = rbest
            t = tbest
            for i in range(m):
                valB[i] -= direction * t * T[i, j]
            enter_val = (lb[j] if vstat[j] == _AT_LOWER else ub[j]) + direction * t
            leaving = basis[r]
            vstat[leaving] = _AT_LOWER if direction * T[r, j] > 0 else _AT_UPPER
            piv = T[r, j]
            inv = 1.0 / piv
            for cc in range(ncols):
                T[r, cc] *= inv
            for i in range(m):
                if i == r:
                    continue
                f = T[i, j]
                if f != 0.0:
                    for cc in range(ncols):
                        T[i, cc] -= f * T[r, cc]
                    T[i, j] = 0.0
            zf = zrow[j]
            if zf != 0.0:
                for cc in range(ncols):
                    zrow[cc] -= zf * T[r, cc]
                zrow[j] = 0.0
            basis[r] = j
            vstat[j] = _BASIC
            valB[r] = enter_val

        if gain * t <= 1e-13:
            stall += 1
            if stall > stall_limit:
                bland = True
        else:
            stall = 0
        it += 1
    return _MAXITER, it


def maximize(c, A, row_lo, row_hi, lb, ub) -> LPResult:
    """Maximize c.x subject to row_lo <= A x <= row_hi and lb <= x <= ub."""
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    row_lo = np.asarray(row_lo, dtype=float)
    row_hi = np.asarray(row_hi, dtype=float)
    n = c.size
    if A.size == 0:
        A = A.reshape(0, n)
    m = A.shape[0]
    if A.shape != (m, n) or row_lo.shape != (m,) or row_hi.shape != (m,):
        raise ValueError("inconsistent LP shapes")
    if lb.shape != (n,) or ub.shape != (n,):
        raise ValueError("inconsistent bound shapes")
    if np.any(lb > ub + 1e-15) or np.any(row_lo > row_hi + 1e-15):
        raise ValueError("empty bound interval")

    if m == 0:
        x = np.where(c > 0, ub, lb)
        x = np.where(lb == ub, lb, x)
        if not np.all(np.isfinite(x)):
            return LPResult("unbounded", np.inf, x, 0)
        return LPResult("optimal", float(c @ x), x, 0)

    # columns: n structurals, m slacks, then artificials as needed
    nslack = m
    # starting statuses: nonbasic structurals at the bound closest to zero
    stat_struct = np.where(np.abs(lb) <= np.abs(ub), _AT_LOWER, _AT_UPPER)
    stat_struct = np.where(lb == ub, _FIXED, stat_struct)
    xs = np.where((stat_struct == _AT_LOWER) | (stat_struct == _FIXED), lb, ub)
    rowval = A @ xs

    feastol = 1e-9 * (1.0 + np.max(np.abs(rowval), initial=0.0))
    need_art = (rowval < row_lo - feastol) | (rowval > row_hi + feastol)
    art_rows = np.flatnonzero(need_art)
    nart = art_rows.size
    ncols = n + nslack + nart

    T = np.zeros((m, ncols))
    basis = np.empty(m, dtype=np.int64)
    vstat = np.empty(ncols, dtype=np.int64)
    vstat[:n] = stat_struct
    LB = np.concatenate([lb, row_lo, np.zeros(nart)])
    UB = np.concatenate([ub, row_hi, np.full(nart, np.inf)])
    valB = np.zeros(m)

    sigma = np.zeros(m)
    art_of_row = np.full(m, -1, dtype=np.int64)
    for a, i in enumerate(art_rows):
        clamp = row_lo[i] if rowval[i] < row_lo[i] else row_hi[i]
        sigma[i] = 1.0 if rowval[i] - clamp > 0 else -1.0
        art_of_row[i] = n + nslack + a

    for i in range(m):
        if art_of_row[i] < 0:
            # slack basic: row scaled so the slack column becomes +e_i
            T[i, :n] = -A[i]
            T[i, n + i] = 1.0
            basis[i] = n + i
            vstat[n + i] = _BASIC
            valB[i] = rowval[i]
        else:
            s = sigma[i]
            T[i, :n] = -s * A[i]
            T[i, n + i] = s
            T[i, art_of_row[i]] = 1.0
            basis[i] = art_of_row[i]
            vstat[art_of_row[i]] = _BASIC
            clamp = row_lo[i] if rowval[i] < row_lo[i] else row_hi[i]
            vstat[n + i] = _AT_LOWER if clamp == row_lo[i] else _AT_UPPER
            valB[i] = s * (rowval[i] - clamp)

    maxiter = 200 * (m + ncols) + 10_000
    stall_limit = 4 * (m + ncols)

    if nart > 0:
        cphase1 = np.zeros(ncols)
        cphase1[n + nslack:] = -1.0
        cB = cphase1[basis]
        zrow = cphase1 - cB @ T
        status, it1 = _simplex_loop(T, zrow, valB, basis, vstat, LB, UB,
                                    maxiter, stall_limit)
        if status == _MAXITER:
            raise RuntimeError("simplex iteration limit hit in phase 1")
        infeas = 0.0
        for i in range(m):
            if basis[i] >= n + nslack:
                infeas += max(valB[i], 0.0)
        if infeas > 1e-7 * (1.0 + np.max(np.abs(rowval), initial=0.0)):
            return LPResult("infeasible", -np.inf, np.full(n, np.nan), it1)
        # freeze artificials out of the problem
        for col in range(n + nslack, ncols):
            if vstat[col] != _BASIC:
                vstat[col] = _FIXED
        LB[n + nslack:] = 0.0
        UB[n + nslack:] = 0.0
    else:
        it1 = 0

    cext = np.zeros(ncols)
    cext[:n] = c
    cB = cext[basis]
    zrow = cext - cB @ T
    status, it2 = _simplex_loop(T, zrow, valB, basis, vstat, LB, UB,
                                maxiter, stall_limit)
    if status == _MAXITER:
        raise RuntimeError("simplex iteration limit hit in phase 2")
    if status == _UNBOUNDED:
        return LPResult("unbounded", np.inf, np.full(n, np.nan), it1 + it2)

    x = _extract(A, n, m, basis, vstat, LB, UB, sigma, art_of_row, valB)
    return LPResult("optimal", float(c @ x), x, it1 + it2)


def _extract(A, n, m, basis, vstat, LB, UB, sigma, art_of_row, valB):
    """Recover the structural solution from the final basis.

    Basic values are re-solved from the original data instead of read off
    the pivoted tableau, which removes accumulated floating-point drift.
    """
    ncols_real = n + m
    values = np.zeros(n + m + int((art_of_row >= 0).sum()))
    for col in range(values.size):
        st = vstat[col]
        if st == _AT_LOWER or st == _FIXED:
            values[col] = LB[col]
        elif st == _AT_UPPER:
            values[col] = UB[col]
    basic_cols = [int(b) for b in basis]
    B = np.zeros((m, m))
    for pos, col in enumerate(basic_cols):
        if col < n:
            B[:, pos] = A[:, col]
        elif col < ncols_real:
            B[col - n, pos] = -1.0
        else:
            row = int(np.flatnonzero(art_of_row == col)[0])
            B[row, pos] = -sigma[row]
    # rhs = -(W_N x_N): contributions of nonbasic structurals and slacks
    rhs = np.zeros(m)
    for col in range(n):
        if vstat[col] != _BASIC and values[col] != 0.0:
            rhs -= A[:, col] * values[col]
    for i in range(m):
        col = n + i
        if vstat[col] != _BASIC and values[col] != 0.0:
            rhs[i] += values[col]
    try:
        xb = np.linalg.solve(B, rhs)
        for pos, col in enumerate(basic_cols):
            values[col] = xb[pos]
    except np.linalg.LinAlgError:  # pragma: no cover - degenerate fallback
        for pos, col in enumerate(basic_cols):
            values[col] = valB[pos]
    return values[:n]
