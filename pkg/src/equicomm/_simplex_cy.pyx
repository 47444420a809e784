# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pivot loop for the tableau simplex; hot twin of _simplex_py.

Keep the selection rules and arithmetic order identical to the pure kernel:
the build disables FP contraction so results match bit for bit.
"""

from libc.stdint cimport int64_t

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITER_LIMIT = 2

cdef double _EPS = 1e-9
cdef double _DEG_EPS = 1e-12


def pivot_loop(double[:, ::1] tab, int64_t[::1] basis, Py_ssize_t n_enterable,
               long bland_after, long max_iter):
    """Same contract as equicomm._simplex_py.pivot_loop."""
    cdef Py_ssize_t m = tab.shape[0] - 1
    cdef Py_ssize_t ncols = tab.shape[1]
    cdef Py_ssize_t rhs = ncols - 1
    cdef Py_ssize_t enter, leave, i, j
    cdef long it, degen_run = 0
    cdef bint bland = False
    cdef double best_profit, coeff, ratio, best_ratio, piv, f

    for it in range(max_iter):
        enter = -1
        if bland:
            for j in range(n_enterable):
                if tab[m, j] > _EPS:
                    enter = j
                    break
            if enter < 0:
                return STATUS_OPTIMAL, it
        else:
            best_profit = tab[m, 0]
            enter = 0
            for j in range(1, n_enterable):
                if tab[m, j] > best_profit:
                    best_profit = tab[m, j]
                    enter = j
            if tab[m, enter] <= _EPS:
                return STATUS_OPTIMAL, it

        leave = -1
        best_ratio = 0.0
        for i in range(m):
            coeff = tab[i, enter]
            if coeff > _EPS:
                ratio = tab[i, rhs] / coeff
                if leave < 0 or ratio < best_ratio:
                    best_ratio = ratio
                    leave = i
                elif ratio == best_ratio and basis[i] < basis[leave]:
                    leave = i
        if leave < 0:
            return STATUS_UNBOUNDED, it

        if best_ratio <= _DEG_EPS:
            degen_run += 1
            if degen_run >= bland_after:
                bland = True
        else:
            degen_run = 0

        piv = tab[leave, enter]
        for j in range(ncols):
            tab[leave, j] /= piv
        for i in range(m + 1):
            if i == leave:
                continue
            f = tab[i, enter]
            if f != 0.0:
                for j in range(ncols):
                    tab[i, j] -= f * tab[leave, j]
        for i in range(m + 1):
            tab[i, enter] = 0.0
        tab[leave, enter] = 1.0
        basis[leave] = enter

    return STATUS_ITER_LIMIT, max_iter
