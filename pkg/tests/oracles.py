"""Independent oracles used by the test suite.

These deliberately avoid the library's solver paths: the allocation optimum
comes from exhaustive enumeration of serve assignments with gridded budgets
(the multiple-choice knapsack view: one item per (slot, allocation) per
area-class), LP optima come from vertex enumeration, and p-values come from
numeric integration of the t density.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import quad


def _clamped_sigmoid(u):
    u = np.clip(u, -700.0, 700.0)
    return 1.0 / (1.0 + np.exp(-u))


def area_value_table(scenario, pos, slot, grid):
    """Best within-area utility per gridded budget for one serve slot,
    splitting the budget between members on the same grid."""
    area = scenario.areas[pos]
    members = list(scenario.household_indices(area.area_id))
    eligible = [
        k for k in members if slot <= scenario.households[k].tolerance_days
    ]
    vals = np.zeros(grid.size)
    if not eligible:
        return vals
    if len(eligible) == 1:
        h = scenario.households[eligible[0]]
        return scenario.tau(h) * _clamped_sigmoid(scenario.theta * (grid - h.demand_mbps))
    if len(eligible) != 2:
        raise NotImplementedError("oracle handles at most 2 eligible members")
    h1, h2 = (scenario.households[k] for k in eligible)
    t1, t2 = scenario.tau(h1), scenario.tau(h2)
    # vals[i] = max over grid splits a <= grid[i].
    for i, budget in enumerate(grid):
        a = grid[grid <= budget + 1e-12]
        total = t1 * _clamped_sigmoid(scenario.theta * (a - h1.demand_mbps)) + t2 * _clamped_sigmoid(
            scenario.theta * (budget - a - h2.demand_mbps)
        )
        vals[i] = total.max()
    return vals


def brute_force_optimum(scenario, grid_steps=100):
    """Exhaustive optimum of the true objective over serve assignments and
    gridded budgets (step smax/grid_steps); supports up to 3 areas."""
    N, T, delta = scenario.n_areas, scenario.horizon_T, scenario.freezeout_delta
    if N > 3:
        raise NotImplementedError("oracle handles at most 3 areas")
    smax = scenario.smax_mbps
    grid = np.linspace(0.0, smax, grid_steps + 1)

    tables = {
        (pos, t): area_value_table(scenario, pos, t, grid)
        for pos in range(N)
        for t in range(1, T + 1)
    }

    best = 0.0
    states = [list(range(1, T + 1)) + [None] for _ in range(N)]
    for assignment in itertools.product(*states):
        served = [(pos, t) for pos, t in enumerate(assignment) if t is not None]
        if not served:
            continue
        # Window membership per slot: which served areas load window t.
        windows = []
        for t in range(1, T + 1):
            inside = frozenset(
                pos for pos, tt in served if max(1, t - delta) <= tt <= t
            )
            if inside:
                windows.append(inside)
        windows = set(windows)
        value = _best_budgets(served, windows, tables, grid, smax)
        best = max(best, value)
    return best


def _best_budgets(served, windows, tables, grid, smax):
    """Max summed area value over gridded budgets under the window sums;
    inner areas use prefix maxima since value tables are non-decreasing."""
    order = [pos for pos, _ in served]
    vals = [tables[key] for key in served]
    pmax = [np.maximum.accumulate(v) for v in vals]
    if len(served) == 1:
        return float(pmax[0][-1])
    if len(served) == 2:
        p0, p1 = order
        limit1 = np.full(grid.size, smax)
        for w in windows:
            if p1 in w:
                limit1 = np.minimum(limit1, smax - (grid if p0 in w else 0.0))
        j = np.searchsorted(grid, limit1 + 1e-9, side="right") - 1
        ok = j >= 0
        if not np.any(ok):
            return 0.0
        return float(np.max(vals[0][ok] + pmax[1][j[ok]]))
    p0, p1, p2 = order
    best = 0.0
    for i0, b0 in enumerate(grid):
        feas1 = np.ones(grid.size, dtype=bool)
        limit2 = np.full(grid.size, smax)
        for w in windows:
            used0 = b0 if p0 in w else 0.0
            if p2 in w:
                limit2 = np.minimum(limit2, smax - used0 - (grid if p1 in w else 0.0))
            elif p1 in w:
                feas1 &= grid <= smax - used0 + 1e-9
        j = np.searchsorted(grid, limit2 + 1e-9, side="right") - 1
        ok = feas1 & (j >= 0)
        if np.any(ok):
            best = max(best, float(vals[0][i0] + np.max(vals[1][ok] + pmax[2][j[ok]])))
    return best


def enumerate_lp_vertices(objective, rows_a, rhs, lower, upper):
    """Exact optimum of max c.v over {Av <= b, lo <= v <= hi} (finite boxes)
    by enumerating all basic points; returns (status, value, argmax)."""
    n = len(objective)
    c = np.asarray(objective, dtype=float)
    constraints = []
    for a, b in zip(rows_a, rhs):
        constraints.append((np.asarray(a, dtype=float), float(b)))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        constraints.append((e, float(upper[j])))
        constraints.append((-e, -float(lower[j])))

    best_val, best_v = None, None
    m = len(constraints)
    for combo in itertools.combinations(range(m), n):
        a_mat = np.array([constraints[i][0] for i in combo])
        b_vec = np.array([constraints[i][1] for i in combo])
        if abs(np.linalg.det(a_mat)) < 1e-10:
            continue
        v = np.linalg.solve(a_mat, b_vec)
        feasible = all(
            np.dot(a, v) <= b + 1e-7 for a, b in constraints
        )
        if feasible:
            val = float(np.dot(c, v))
            if best_val is None or val > best_val:
                best_val, best_v = val, v
    if best_val is None:
        return "infeasible", None, None
    return "optimal", best_val, best_v


def benchmark_brute_force(scenario, phi_for, strict=False):
    """Max served-before-deadline count over all serve assignments with the
    mandatory floors charged to every recycling window."""
    N, T, delta = scenario.n_areas, scenario.horizon_T, scenario.freezeout_delta
    smax = scenario.smax_mbps
    count = np.zeros((N, T))
    floor = np.zeros((N, T))
    critical_deadline = [None] * N
    for pos, area in enumerate(scenario.areas):
        for k in scenario.household_indices(area.area_id):
            h = scenario.households[k]
            phi = phi_for(h)
            for t in range(1, min(h.tolerance_days, T) + 1):
                count[pos, t - 1] += 1
                floor[pos, t - 1] += phi * h.demand_mbps
            if phi > 0.0:
                dl = critical_deadline[pos]
                critical_deadline[pos] = h.tolerance_days if dl is None else min(dl, h.tolerance_days)

    best = None
    states = [list(range(1, T + 1)) + [None] for _ in range(N)]
    for assignment in itertools.product(*states):
        if strict:
            bad = False
            for pos, t in enumerate(assignment):
                dl = critical_deadline[pos]
                if dl is not None and (t is None or t > dl):
                    bad = True
                    break
            if bad:
                continue
        load = np.zeros(T)
        total = 0
        for pos, t in enumerate(assignment):
            if t is None:
                continue
            load[t - 1] += floor[pos, t - 1]
            total += int(count[pos, t - 1])
        ok = all(
            load[max(0, t - delta): t + 1].sum() <= smax + 1e-9 for t in range(T)
        )
        if ok and (best is None or total > best):
            best = total
    return best


def t_sf_by_quadrature(t_stat, dof):
    """Two-tailed p-value by numeric integration of the t density."""

    def density(x):
        return math.exp(
            math.lgamma((dof + 1) / 2.0)
            - math.lgamma(dof / 2.0)
            - 0.5 * math.log(dof * math.pi)
            - (dof + 1) / 2.0 * math.log1p(x * x / dof)
        )

    tail, _ = quad(density, abs(t_stat), np.inf, epsabs=1e-13, epsrel=1e-13)
    return min(1.0, 2.0 * tail)


def pearson_longhand(xs, ys):
    """Definitional covariance-formula coefficient plus quadrature p."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    n = x.size
    sx = (x - x.mean()) / math.sqrt(np.sum((x - x.mean()) ** 2))
    sy = (y - y.mean()) / math.sqrt(np.sum((y - y.mean()) ** 2))
    r = float(np.sum(sx * sy))
    r = max(-1.0, min(1.0, r))
    if abs(r) >= 1.0:
        return r, 0.0
    if r == 0.0:
        return r, 1.0
    t_stat = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, t_sf_by_quadrature(t_stat, n - 2)


def ranks_longhand(xs):
    """Average-tie ranks computed by explicit sorting."""
    x = list(map(float, xs))
    pairs = sorted(range(len(x)), key=lambda i: x[i])
    ranks = [0.0] * len(x)
    i = 0
    while i < len(pairs):
        j = i
        while j + 1 < len(pairs) and x[pairs[j + 1]] == x[pairs[i]]:
            j += 1
        for idx in pairs[i: j + 1]:
            ranks[idx] = (i + j) / 2.0 + 1.0
        i = j + 1
    return np.array(ranks)
