"""Two-phase dense-tableau simplex driver.

The pivot loop is the hot kernel: a compiled Cython twin is preferred at
import time and the pure-NumPy fallback is used when the extension is absent
(or when EQUICOMM_PURE_PYTHON is set). Both kernels implement the identical
deterministic pivot rules, so results do not depend on which one runs.

Vertex solutions matter downstream: serve indicators are recovered from a
nonzero test on the allocation columns, which interior points would poison.
"""

from __future__ import annotations

import os

import numpy as np

from . import _simplex_py
from .lp import LpProblem, LpSolution, LpStatus

if os.environ.get("EQUICOMM_PURE_PYTHON"):
    _kernel = _simplex_py
    KERNEL_NAME = "python"
else:
    try:
        from . import _simplex_cy as _kernel

        KERNEL_NAME = "compiled"
    except ImportError:
        _kernel = _simplex_py
        KERNEL_NAME = "python"

_FEAS_TOL = 1e-7
_BLAND_AFTER = 40


class SimplexInternalError(RuntimeError):
    """Iteration limit or inconsistent tableau; indicates a solver bug."""


def active_kernel() -> str:
    return KERNEL_NAME


def _pivot_once(tab, basis, row, col):
    piv = tab[row, col]
    tab[row] /= piv
    factors = tab[:, col].copy()
    factors[row] = 0.0
    tab -= np.outer(factors, tab[row])
    tab[:, col] = 0.0
    tab[row, col] = 1.0
    basis[row] = col


def _set_profit_row(tab, basis, costs):
    m = tab.shape[0] - 1
    tab[m, :] = 0.0
    tab[m, : costs.size] = costs
    for i in range(m):
        c = costs[basis[i]] if basis[i] < costs.size else 0.0
        if c != 0.0:
            tab[m, :] -= c * tab[i, :]


def solve_lp(problem: LpProblem, kernel=None) -> LpSolution:
    """Exact LP optimum with deterministic pivoting; infeasible and unbounded
    problems are reported in the status, never raised."""
    impl = kernel if kernel is not None else _kernel
    n = problem.n_vars
    c = np.asarray(problem.objective, dtype=float)
    lo = np.asarray(problem.lower, dtype=float)
    hi = np.asarray(problem.upper, dtype=float)
    if not np.all(np.isfinite(lo)):
        raise ValueError("variables with infinite lower bounds are not supported")
    if np.any(lo > hi):
        raise ValueError("lower bound above upper bound")
    if not np.all(np.isfinite(problem.rhs)):
        raise ValueError("non-finite right-hand side")

    m = problem.n_rows
    bounded = np.nonzero(np.isfinite(hi))[0]
    M = m + bounded.size

    a_std = np.zeros((M, n))
    b_std = np.zeros(M)
    for i in range(m):
        idx, val = problem.row_idx[i], problem.row_val[i]
        a_std[i, idx] = val
        b_std[i] = problem.rhs[i] - float(np.dot(val, lo[idx]))
    for r, j in enumerate(bounded):
        a_std[m + r, j] = 1.0
        b_std[m + r] = hi[j] - lo[j]

    flip = b_std < 0.0
    a_std[flip] *= -1.0
    b_std[flip] *= -1.0
    art_rows = np.nonzero(flip)[0]
    n_art = art_rows.size

    n_slack_end = n + M
    width = n_slack_end + n_art + 1
    tab = np.zeros((M + 1, width))
    tab[:M, :n] = a_std
    slack_sign = np.where(flip, -1.0, 1.0)
    tab[np.arange(M), n + np.arange(M)] = slack_sign
    for r, i in enumerate(art_rows):
        tab[i, n_slack_end + r] = 1.0
    tab[:M, -1] = b_std

    basis = np.array(
        [n_slack_end + int(np.nonzero(art_rows == i)[0][0]) if flip[i] else n + i for i in range(M)],
        dtype=np.int64,
    )

    iterations = 0
    max_iter = 2000 + 200 * (M + n)

    if n_art > 0:
        costs1 = np.zeros(n_slack_end + n_art)
        costs1[n_slack_end:] = -1.0
        _set_profit_row(tab, basis, costs1)
        status, its = impl.pivot_loop(tab, basis, n_slack_end, _BLAND_AFTER, max_iter)
        iterations += its
        if status == _simplex_py.STATUS_ITER_LIMIT:
            raise SimplexInternalError("phase-1 iteration limit reached")
        if status == _simplex_py.STATUS_UNBOUNDED:
            raise SimplexInternalError("phase-1 reported unbounded")
        if -tab[M, -1] < -_FEAS_TOL:
            return LpSolution(LpStatus.INFEASIBLE, float("nan"), np.full(n, np.nan), iterations)
        # Drive leftover artificials out of the basis; drop redundant rows.
        drop = []
        for i in range(M):
            if basis[i] >= n_slack_end:
                row = tab[i, :n_slack_end]
                cand = np.nonzero(np.abs(row) > 1e-9)[0]
                if cand.size:
                    _pivot_once(tab, basis, i, int(cand[0]))
                else:
                    drop.append(i)
        if drop:
            keep = [i for i in range(M) if i not in set(drop)]
            tab = np.ascontiguousarray(np.vstack([tab[keep], tab[M:]]))
            basis = basis[keep]
            M = len(keep)
        tab = np.ascontiguousarray(np.hstack([tab[:, :n_slack_end], tab[:, -1:]]))

    costs2 = np.zeros(n_slack_end)
    costs2[:n] = c
    _set_profit_row(tab, basis, costs2)
    status, its = impl.pivot_loop(tab, basis, n_slack_end, _BLAND_AFTER, max_iter)
    iterations += its
    if status == _simplex_py.STATUS_ITER_LIMIT:
        raise SimplexInternalError("phase-2 iteration limit reached")
    if status == _simplex_py.STATUS_UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, float("inf"), np.full(n, np.nan), iterations)

    y = np.zeros(n_slack_end)
    y[basis] = tab[:M, -1]
    v = lo + y[:n]

    residual = 0.0
    for i in range(m):
        idx, val = problem.row_idx[i], problem.row_val[i]
        residual = max(residual, float(np.dot(val, v[idx])) - problem.rhs[i])
    residual = max(residual, float(np.max(lo - v, initial=0.0)))
    finite = np.isfinite(hi)
    if np.any(finite):
        residual = max(residual, float(np.max((v - hi)[finite], initial=0.0)))

    return LpSolution(
        status=LpStatus.OPTIMAL,
        objective_value=float(np.dot(c, v)),
        x_values=v,
        iterations=iterations,
        max_primal_residual=residual,
    )


def relaxation_upper_bound(scenario) -> float:
    """Optimal value of the unrestricted envelope relaxation; an upper bound
    on the true objective of every feasible plan."""
    from .envelope import build_envelopes
    from .lp import build_relaxation

    sol = solve_lp(build_relaxation(scenario, build_envelopes(scenario)))
    if sol.status is not LpStatus.OPTIMAL:
        raise SimplexInternalError(f"relaxation not optimal: {sol.status}")
    return sol.objective_value
