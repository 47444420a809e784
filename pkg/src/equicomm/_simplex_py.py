"""Pure-NumPy pivot loop for the tableau simplex.

Semantics must stay in lockstep with the compiled twin in _simplex_cy.pyx:
same entering rule (Dantzig with first-of-max ties, permanent switch to
Bland's least-index rule after a run of degenerate pivots), same leaving rule
(min ratio, ties to the smallest basic variable index), same explicit
re-unitization of the pivot column. The extension is built with
-ffp-contract=off so both kernels perform identical IEEE operations.
"""

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITER_LIMIT = 2

_EPS = 1e-9
_DEG_EPS = 1e-12


def pivot_loop(tab, basis, n_enterable, bland_after, max_iter):
    """Pivot the dense tableau in place until the profit row is non-positive.

    tab: (m+1, n+1) float64; constraint rows with rhs in the last column and
    the profit row (reduced objective coefficients, -objective in the last
    cell) at the bottom. basis: (m,) int64 of basic column indices. Columns
    [0, n_enterable) are eligible to enter. Returns (status, iterations).
    """
    m = tab.shape[0] - 1
    profit = tab[m]
    degen_run = 0
    bland = False
    for it in range(max_iter):
        if bland:
            enter = -1
            for j in range(n_enterable):
                if profit[j] > _EPS:
                    enter = j
                    break
            if enter < 0:
                return STATUS_OPTIMAL, it
        else:
            enter = int(np.argmax(profit[:n_enterable]))
            if profit[enter] <= _EPS:
                return STATUS_OPTIMAL, it

        col = tab[:m, enter]
        rows = np.nonzero(col > _EPS)[0]
        if rows.size == 0:
            return STATUS_UNBOUNDED, it
        ratios = tab[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios == best]
        leave = int(ties[np.argmin(basis[ties])])

        if best <= _DEG_EPS:
            degen_run += 1
            if degen_run >= bland_after:
                bland = True
        else:
            degen_run = 0

        pivot_row = tab[leave]
        pivot_row /= pivot_row[enter]
        factors = tab[:, enter].copy()
        factors[leave] = 0.0
        tab -= np.outer(factors, pivot_row)
        tab[:, enter] = 0.0
        tab[leave, enter] = 1.0
        basis[leave] = enter

    return STATUS_ITER_LIMIT, max_iter
