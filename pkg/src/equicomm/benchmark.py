"""Comparison model: serve as many users as possible before their deadlines.

Solved by best-first branch-and-bound on the serve indicators. With the
indicators fixed, feasibility is a pure LP in the per-user rates, and the
cheapest feasible rates are exactly the service-differentiation floors, so
node bounds come from an indicator relaxation whose window rows charge each
area its mandatory floor load. Leftover capacity is afterwards spread evenly
over users in served areas, clipped by the tightest recycling window.

The mandatory floor of an unserved (or served-too-late) user is treated as
conditional on service by default; strict mode takes the floors literally and
reports the blocking users when that makes the model infeasible.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field

import numpy as np

from .lp import LpBuilder, LpStatus
from .scenario import Scenario
from .simplex import solve_lp
from .utility import AllocationPlan, window_usage

FIXED_NULL = -1

_INT_TOL = 1e-7


class BenchmarkInfeasibleError(Exception):
    """Strict service floors cannot all be met; lists the blocking users."""

    def __init__(self, blocking_users, message=None):
        self.blocking_users = tuple(blocking_users)
        super().__init__(
            message
            or f"mandatory service floors unsatisfiable; blocking users: {list(self.blocking_users)}"
        )


@dataclass(frozen=True)
class BenchmarkConfig:
    """phi scales each demand class's mandatory minimum rate; the default
    marks only the 1 Mbps family-communication class as critical."""

    phi_by_demand: dict = field(default_factory=lambda: {1.0: 1.0})

    def __post_init__(self):
        for demand, phi in self.phi_by_demand.items():
            if not 0.0 <= phi <= 1.0:
                raise ValueError(f"phi for demand {demand} must be in [0, 1], got {phi}")

    def phi_for(self, household) -> float:
        return float(self.phi_by_demand.get(float(household.demand_mbps), 0.0))


@dataclass(frozen=True)
class BenchmarkPlan:
    z: np.ndarray
    s_user: np.ndarray
    served_count: int


def _area_tables(scenario: Scenario, config: BenchmarkConfig):
    """count[pos][t-1]: members whose deadline admits slot t;
    floor[pos][t-1]: total mandatory rate when serving at slot t."""
    T = scenario.horizon_T
    count = np.zeros((scenario.n_areas, T), dtype=int)
    floor = np.zeros((scenario.n_areas, T))
    for pos, area in enumerate(scenario.areas):
        for k in scenario.household_indices(area.area_id):
            h = scenario.households[k]
            phi = config.phi_for(h)
            for t in range(1, min(h.tolerance_days, T) + 1):
                count[pos, t - 1] += 1
                floor[pos, t - 1] += phi * h.demand_mbps
    return count, floor


def _allowed_slots(scenario, config, pos, strict):
    area = scenario.areas[pos]
    deadlines = [
        scenario.households[k].tolerance_days
        for k in scenario.household_indices(area.area_id)
    ]
    critical = [
        scenario.households[k].tolerance_days
        for k in scenario.household_indices(area.area_id)
        if config.phi_for(scenario.households[k]) > 0.0
    ]
    if strict and critical:
        limit = min(critical)
    else:
        limit = max(deadlines)
    return list(range(1, min(limit, scenario.horizon_T) + 1))


def solve_benchmark(
    scenario: Scenario,
    config: BenchmarkConfig | None = None,
    strict: bool = False,
    node_limit: int = 100_000,
) -> BenchmarkPlan:
    """Maximize the number of users served before their deadline subject to
    window capacity and the mandatory floors."""
    config = config or BenchmarkConfig()
    N, T = scenario.n_areas, scenario.horizon_T
    delta = scenario.freezeout_delta
    count, floor = _area_tables(scenario, config)
    allowed = [_allowed_slots(scenario, config, pos, strict) for pos in range(N)]
    if strict:
        mandatory = []
        blocking = []
        for pos, area in enumerate(scenario.areas):
            critical = [
                scenario.households[k].id
                for k in scenario.household_indices(area.area_id)
                if config.phi_for(scenario.households[k]) > 0.0
            ]
            mandatory.append(bool(critical))
            if critical:
                fits = any(floor[pos, t - 1] <= scenario.smax_mbps for t in allowed[pos])
                if not allowed[pos] or not fits:
                    blocking.extend(critical)
        if blocking:
            raise BenchmarkInfeasibleError(blocking)
    else:
        mandatory = [False] * N

    def node_lp(assignment):
        """Bound and fractional solution for a partial assignment; None when
        the restricted LP is infeasible."""
        fixed_count = 0
        fixed_load = np.zeros(T)
        free = [pos for pos in range(N) if assignment[pos] is None]
        for pos in range(N):
            state = assignment[pos]
            if state is None or state == FIXED_NULL:
                continue
            fixed_count += int(count[pos, state - 1])
            fixed_load[state - 1] += floor[pos, state - 1]
        window_load = np.array(
            [fixed_load[max(0, t - delta): t + 1].sum() for t in range(T)]
        )
        if np.any(window_load > scenario.smax_mbps + 1e-9):
            return None
        if not free:
            return fixed_count, {}, free

        cols = {}
        for pos in free:
            for t in allowed[pos]:
                cols[(pos, t)] = len(cols)
        builder = LpBuilder(len(cols))
        builder.upper[:] = 1.0
        for (pos, t), j in cols.items():
            builder.objective[j] = float(count[pos, t - 1])
        for pos in free:
            idx = [cols[(pos, t)] for t in allowed[pos]]
            if idx:
                builder.add_row(idx, np.ones(len(idx)), 1.0)
                if mandatory[pos]:
                    builder.add_row(idx, -np.ones(len(idx)), -1.0)
            elif mandatory[pos]:
                return None
        for t in range(1, T + 1):
            idx, val = [], []
            for (pos, tt), j in cols.items():
                if max(1, t - delta) <= tt <= t and floor[pos, tt - 1] > 0.0:
                    idx.append(j)
                    val.append(floor[pos, tt - 1])
            builder.add_row(idx, val, max(0.0, scenario.smax_mbps - window_load[t - 1]))
        sol = solve_lp(builder.build())
        if sol.status is not LpStatus.OPTIMAL:
            return None
        zfrac = {key: sol.x_values[j] for key, j in cols.items()}
        return fixed_count + sol.objective_value, zfrac, free

    def incumbent_from(assignment, zfrac):
        """Complete an assignment with the LP's integral indicators."""
        full = list(assignment)
        for (pos, t), v in zfrac.items():
            if v > 0.5:
                full[pos] = t
        for pos in range(N):
            if full[pos] is None:
                full[pos] = FIXED_NULL
        return tuple(full)

    best_assignment = None
    best_count = -1
    if not strict:
        best_assignment = tuple([FIXED_NULL] * N)
        best_count = 0

    next_id = itertools.count()
    heap = []
    nodes = 0

    def push(assignment):
        nonlocal nodes, best_assignment, best_count
        res = node_lp(assignment)
        nodes += 1
        if res is None:
            return
        bound, zfrac, free = res
        integral = all(
            min(abs(v), abs(v - 1.0)) <= _INT_TOL for v in zfrac.values()
        )
        if integral:
            full = incumbent_from(assignment, zfrac)
            check = node_lp(full)
            if check is not None:
                total = int(round(check[0]))
                if total > best_count:
                    best_count = total
                    best_assignment = full
        if int(np.floor(bound + 1e-6)) > best_count:
            heapq.heappush(heap, (-bound, next(next_id), assignment, zfrac, free))

    push(tuple([None] * N))
    while heap and nodes < node_limit:
        neg_bound, _, assignment, zfrac, free = heapq.heappop(heap)
        if int(np.floor(-neg_bound + 1e-6)) <= best_count:
            break
        branch_pos = -1
        for pos in free:
            if any(
                _INT_TOL < zfrac.get((pos, t), 0.0) < 1.0 - _INT_TOL for t in allowed[pos]
            ):
                branch_pos = pos
                break
        if branch_pos < 0:
            branch_pos = free[0] if free else -1
        if branch_pos < 0:
            continue
        children = [_with(assignment, branch_pos, t) for t in allowed[branch_pos]]
        if not mandatory[branch_pos]:
            children.append(_with(assignment, branch_pos, FIXED_NULL))
        for child in children:
            push(child)

    if best_assignment is None:
        critical_users = [
            h.id for h in scenario.households if (config.phi_for(h) > 0.0)
        ]
        raise BenchmarkInfeasibleError(
            critical_users, "mandatory service floors are jointly unschedulable"
        )

    z = np.zeros((N, T))
    s_user = np.zeros(scenario.n_households)
    served = 0
    for pos, state in enumerate(best_assignment):
        if state == FIXED_NULL:
            continue
        z[pos, state - 1] = 1.0
        for k in scenario.household_indices(scenario.areas[pos].area_id):
            h = scenario.households[k]
            if state <= h.tolerance_days:
                served += 1
                s_user[k] = config.phi_for(h) * h.demand_mbps
    return BenchmarkPlan(z=z, s_user=s_user, served_count=served)


def _with(assignment, pos, state):
    out = list(assignment)
    out[pos] = state
    return tuple(out)


def redistribute_surplus(scenario: Scenario, plan: BenchmarkPlan) -> BenchmarkPlan:
    """Spread leftover window capacity evenly over users in served areas:
    uniform raise until a window binds, freeze its users, repeat."""
    T, delta = scenario.horizon_T, scenario.freezeout_delta
    s_user = plan.s_user.copy()
    serve_slot = {}
    for pos in range(scenario.n_areas):
        hits = np.nonzero(plan.z[pos] > 0.5)[0]
        if hits.size:
            serve_slot[pos] = int(hits[0]) + 1

    user_windows = {}
    for pos, slot in serve_slot.items():
        covering = list(range(slot, min(T, slot + delta) + 1))
        for k in scenario.household_indices(scenario.areas[pos].area_id):
            user_windows[k] = (pos, slot, covering)

    active = sorted(user_windows)
    for _ in range(T + 1):
        if not active:
            break
        x = _benchmark_x(scenario, s_user, serve_slot)
        slack = scenario.smax_mbps - window_usage(scenario, x)
        cnt = np.zeros(T, dtype=int)
        for k in active:
            for t in user_windows[k][2]:
                cnt[t - 1] += 1
        rates = [
            slack[t] / cnt[t] for t in range(T) if cnt[t] > 0
        ]
        if not rates:
            break
        q = max(0.0, min(rates))
        if q <= 1e-9:
            break
        for k in active:
            s_user[k] += q
        x = _benchmark_x(scenario, s_user, serve_slot)
        slack = scenario.smax_mbps - window_usage(scenario, x)
        tight = {t + 1 for t in range(T) if cnt[t] > 0 and slack[t] <= 1e-9}
        active = [
            k for k in active if not any(t in tight for t in user_windows[k][2])
        ]
    return BenchmarkPlan(z=plan.z, s_user=s_user, served_count=plan.served_count)


def _benchmark_x(scenario, s_user, serve_slot):
    x = np.zeros((scenario.n_households, scenario.horizon_T))
    for pos, slot in serve_slot.items():
        for k in scenario.household_indices(scenario.areas[pos].area_id):
            x[k, slot - 1] = s_user[k]
    return x


def to_allocation_plan(scenario: Scenario, plan: BenchmarkPlan) -> AllocationPlan:
    """View the benchmark decision as an allocation plan (shares derived from
    the per-user rates) so both solvers share one metrics path."""
    N, K, T = scenario.n_areas, scenario.n_households, scenario.horizon_T
    s = np.zeros(N)
    w = np.zeros(K)
    x = np.zeros((K, T))
    for pos in range(N):
        hits = np.nonzero(plan.z[pos] > 0.5)[0]
        if not hits.size:
            continue
        slot = int(hits[0]) + 1
        members = list(scenario.household_indices(scenario.areas[pos].area_id))
        total = float(plan.s_user[members].sum())
        s[pos] = total
        if total > 0.0:
            for k in members:
                w[k] = plan.s_user[k] / total
                x[k, slot - 1] = w[k] * total
        else:
            for k in members:
                w[k] = 1.0 / len(members)
    return AllocationPlan(z=plan.z.copy(), s=s, w=w, x=x)
