"""Best-first branch-and-bound over area serve-slot assignments.

Node bounds come from the envelope relaxation restricted by the node's
partial assignment; incumbents come from single-slot-consistent node
solutions, extracted like the rounding heuristic and then improved by two
sound local moves (the envelope is flat beyond its cap, so relaxation optima
routinely leave window capacity unused and split area budgets at kinks):

* within-area reallocation of the fixed budget among members still inside
  their deadline (fine split search for pairs, equal-split subsets otherwise);
* absorption of leftover window slack by the member with the best utility
  gain.

Both moves preserve feasibility and never lower the true objective.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass

import numpy as np

from .envelope import build_envelopes
from .lp import LpStatus, build_relaxation, x_solution_array
from .rounding import active_slots, apply_policies, compute_urr, extract_plan
from .scenario import Scenario
from .simplex import SimplexInternalError, solve_lp
from .utility import (
    AllocationPlan,
    empty_plan,
    sigmoid_rate_utility,
    total_true_objective,
    window_usage,
)

FIXED_NULL = -1

_IMPROVE_EPS = 1e-12


@dataclass(frozen=True)
class BnbNode:
    assignment: tuple
    bound: float
    depth: int
    node_id: int


@dataclass(frozen=True)
class BnbResult:
    best_plan: AllocationPlan
    lower_bound: float
    upper_bound: float
    gap_alpha: float
    nodes_explored: int
    progress: tuple
    limit_reached: bool


def _forbidden_for(scenario: Scenario, assignment) -> frozenset:
    forbidden = set()
    for pos, state in enumerate(assignment):
        if state is None:
            continue
        area_id = scenario.areas[pos].area_id
        for t in range(1, scenario.horizon_T + 1):
            if state == FIXED_NULL or t != state:
                forbidden.add((area_id, t))
    return frozenset(forbidden)


def _area_utility(scenario, eligible, alloc):
    total = 0.0
    for k in eligible:
        h = scenario.households[k]
        total += scenario.tau(h) * sigmoid_rate_utility(alloc[k], h.demand_mbps, scenario.theta)
    return total


def _best_pair_split(scenario, k1, k2, budget):
    """Fine search of a two-member budget split (coarse grid plus one
    refinement pass); returns (alloc_k1, utility)."""
    h1, h2 = scenario.households[k1], scenario.households[k2]
    tau1, tau2 = scenario.tau(h1), scenario.tau(h2)
    theta = scenario.theta

    def util(grid):
        return tau1 * sigmoid_rate_utility(grid, h1.demand_mbps, theta) + tau2 * sigmoid_rate_utility(
            budget - grid, h2.demand_mbps, theta
        )

    grid = np.linspace(0.0, budget, 101)
    vals = util(grid)
    best = int(np.argmax(vals))
    fine = np.linspace(grid[max(0, best - 1)], grid[min(len(grid) - 1, best + 1)], 101)
    fvals = util(fine)
    fbest = int(np.argmax(fvals))
    return float(fine[fbest]), float(fvals[fbest])


def improve_plan(scenario: Scenario, plan: AllocationPlan) -> AllocationPlan:
    """Monotone local improvement of a feasible plan: reallocate each served
    area's budget among in-deadline members, then pour leftover window slack
    into the best-gaining member until no window has headroom."""
    N, K, T = scenario.n_areas, scenario.n_households, scenario.horizon_T
    z = plan.z.copy()
    alloc = np.zeros(K)
    serve = {}
    for pos, area in enumerate(scenario.areas):
        slot = plan.serve_slot(pos)
        if slot is None:
            continue
        serve[pos] = slot
        for k in scenario.household_indices(area.area_id):
            alloc[k] = plan.w[k] * plan.s[pos]

    # Stage 1: fixed-budget reallocation within each served area.
    for pos, slot in serve.items():
        area = scenario.areas[pos]
        members = list(scenario.household_indices(area.area_id))
        budget = float(alloc[members].sum())
        if budget <= 0.0:
            continue
        eligible = [k for k in members if slot <= scenario.households[k].tolerance_days]
        if not eligible:
            continue
        current = _area_utility(scenario, eligible, alloc)
        best_alloc = None
        best_val = current
        if len(eligible) == 1:
            cand = {eligible[0]: budget}
            val = _area_utility(scenario, eligible, _expand(cand, members))
            if val > best_val + _IMPROVE_EPS:
                best_alloc, best_val = cand, val
        elif len(eligible) == 2:
            a, val = _best_pair_split(scenario, eligible[0], eligible[1], budget)
            if val > best_val + _IMPROVE_EPS:
                best_alloc = {eligible[0]: a, eligible[1]: budget - a}
                best_val = val
        else:
            for r in range(1, len(eligible) + 1):
                for subset in itertools.combinations(eligible, r):
                    share = budget / len(subset)
                    cand = {k: share for k in subset}
                    val = _area_utility(scenario, eligible, _expand(cand, members))
                    if val > best_val + _IMPROVE_EPS:
                        best_alloc, best_val = cand, val
        if best_alloc is not None:
            for k in members:
                alloc[k] = best_alloc.get(k, 0.0)

    # Stage 2: absorb remaining window slack. Each round hands one member
    # the smaller of the window headroom and what saturates their sigmoid in
    # double precision, so leftover capacity can still reach other members.
    x = _alloc_to_x(scenario, alloc, serve, K, T)
    delta = scenario.freezeout_delta
    saturation_offset = 40.0 / scenario.theta
    for _ in range(2 * (K + T) + 8):
        usage = window_usage(scenario, x)
        slack = scenario.smax_mbps - usage
        best_gain, best_k, best_pos, best_take = 0.0, -1, -1, 0.0
        for pos, slot in serve.items():
            covering = range(slot, min(T, slot + delta) + 1)
            room = min(slack[t - 1] for t in covering)
            if room <= 1e-9:
                continue
            for k in scenario.household_indices(scenario.areas[pos].area_id):
                h = scenario.households[k]
                if slot > h.tolerance_days:
                    continue
                needed = h.demand_mbps + saturation_offset - alloc[k]
                take = min(room, needed)
                if take <= 1e-9:
                    continue
                tau = scenario.tau(h)
                gain = tau * (
                    sigmoid_rate_utility(alloc[k] + take, h.demand_mbps, scenario.theta)
                    - sigmoid_rate_utility(alloc[k], h.demand_mbps, scenario.theta)
                )
                if gain > best_gain + _IMPROVE_EPS:
                    best_gain, best_k, best_pos, best_take = gain, k, pos, take
        if best_k < 0:
            break
        alloc[best_k] += best_take
        x[best_k, serve[best_pos] - 1] += best_take

    s = np.zeros(N)
    w = np.zeros(K)
    plan_x = np.zeros((K, T))
    for pos, slot in serve.items():
        members = list(scenario.household_indices(scenario.areas[pos].area_id))
        total = float(alloc[members].sum())
        if total <= 0.0:
            # Keep the original shares for a served-at-zero area.
            s[pos] = 0.0
            for k in members:
                w[k] = plan.w[k]
            continue
        s[pos] = total
        for k in members:
            w[k] = alloc[k] / total
            plan_x[k, slot - 1] = w[k] * total
    return AllocationPlan(z=z, s=s, w=w, x=plan_x)


def _expand(cand, members):
    return {k: cand.get(k, 0.0) for k in members}


def _alloc_to_x(scenario, alloc, serve, K, T):
    x = np.zeros((K, T))
    for pos, slot in serve.items():
        for k in scenario.household_indices(scenario.areas[pos].area_id):
            x[k, slot - 1] = alloc[k]
    return x


def solve_bnb(scenario: Scenario, alpha_target: float = 0.15, node_limit: int = 100_000) -> BnbResult:
    """Best-first search to the requested relative gap; an exhausted node
    budget is a normal outcome reported via the achieved gap."""
    if not 0.0 < alpha_target < 1.0:
        raise ValueError("alpha_target must be in (0, 1)")
    envelopes = build_envelopes(scenario)
    N = scenario.n_areas

    nodes_explored = 0
    next_id = itertools.count()
    best_plan = empty_plan(scenario)
    lb = 0.0
    progress = []
    heap = []

    def evaluate(assignment):
        nonlocal nodes_explored, lb, best_plan
        problem = build_relaxation(scenario, envelopes, _forbidden_for(scenario, assignment))
        sol = solve_lp(problem)
        if sol.status is not LpStatus.OPTIMAL:
            raise SimplexInternalError(f"node relaxation returned {sol.status}")
        nodes_explored += 1
        x = x_solution_array(scenario, problem, sol)
        slots = active_slots(scenario, x)
        violating = {
            aid: scenario.area_index(aid) for aid, act in slots.items() if len(act) > 1
        }
        if violating:
            # One-shot rounding: keep each violating area's policy slot and
            # drop its other columns (only removes load, so still feasible).
            keep_x = x.copy()
            dropped, _ = apply_policies(compute_urr(scenario, x), violating)
            for area_id, t in dropped:
                for k in scenario.household_indices(area_id):
                    keep_x[k, t - 1] = 0.0
            plan = improve_plan(scenario, extract_plan(scenario, keep_x))
        else:
            plan = improve_plan(scenario, extract_plan(scenario, x))
        obj = total_true_objective(scenario, plan)
        if obj > lb + _IMPROVE_EPS:
            lb = obj
            best_plan = plan
        # Branch area: largest mass spread across >= 2 slots, then any free
        # area that is still active, then any free area at all.
        branch_pos, branch_slots, best_spread = -1, [], -1.0
        fallback_single, fallback_any = -1, -1
        for pos in range(N):
            if assignment[pos] is not None:
                continue
            if fallback_any < 0:
                fallback_any = pos
            area_id = scenario.areas[pos].area_id
            act = slots[area_id]
            if len(act) == 1 and fallback_single < 0:
                fallback_single = pos
            if len(act) >= 2:
                members = list(scenario.household_indices(area_id))
                mass = x[members].sum(axis=0)
                spread = float(mass.sum() - mass.max())
                if spread > best_spread:
                    best_spread, branch_pos, branch_slots = spread, pos, act
        if branch_pos < 0 and fallback_single >= 0:
            branch_pos = fallback_single
            branch_slots = slots[scenario.areas[branch_pos].area_id]
        elif branch_pos < 0 and fallback_any >= 0:
            branch_pos = fallback_any
            branch_slots = []
        return sol.objective_value, branch_pos, tuple(branch_slots)

    def push(assignment):
        bound, branch_pos, branch_slots = evaluate(assignment)
        if bound > lb + 1e-9:
            node = BnbNode(
                assignment=assignment,
                bound=bound,
                depth=sum(1 for s in assignment if s is not None),
                node_id=next(next_id),
            )
            heapq.heappush(heap, (-bound, node.node_id, node, branch_pos, branch_slots))
        return bound

    root_bound = push(tuple([None] * N))
    ub = max(lb, root_bound)
    gap = _gap(ub, lb)
    progress.append((nodes_explored, ub, lb, gap))
    limit_reached = False

    while heap:
        neg_bound, _, node, branch_pos, branch_slots = heapq.heappop(heap)
        node_bound = -neg_bound
        ub = max(lb, node_bound)
        gap = _gap(ub, lb)
        progress.append((nodes_explored, ub, lb, gap))
        if gap <= alpha_target:
            break
        if node_bound <= lb + 1e-9 or branch_pos < 0:
            continue
        if nodes_explored >= node_limit:
            limit_reached = True
            break
        children = [
            _with(node.assignment, branch_pos, t) for t in branch_slots
        ] + [_with(node.assignment, branch_pos, FIXED_NULL)]
        for child in children:
            push(child)
            if nodes_explored >= node_limit:
                limit_reached = True
                break
        if limit_reached:
            break
    else:
        ub = lb
        gap = 0.0

    if limit_reached and heap:
        ub = max(lb, max(-e[0] for e in heap))
        gap = _gap(ub, lb)

    progress.append((nodes_explored, ub, lb, gap))
    return BnbResult(
        best_plan=best_plan,
        lower_bound=lb,
        upper_bound=ub,
        gap_alpha=gap,
        nodes_explored=nodes_explored,
        progress=tuple(progress),
        limit_reached=limit_reached,
    )


def _with(assignment, pos, state):
    out = list(assignment)
    out[pos] = state
    return tuple(out)


def _gap(ub, lb):
    if ub <= 0.0:
        return 0.0
    return max(0.0, (ub - lb) / ub)


def certify(scenario: Scenario, plan: AllocationPlan, result: BnbResult) -> float:
    """Relative gap of any feasible plan against the search's upper bound."""
    obj = total_true_objective(scenario, plan)
    if result.upper_bound == 0.0:
        if obj == 0.0:
            return 0.0
        raise ValueError("zero upper bound with a nonzero plan objective")
    return (result.upper_bound - obj) / result.upper_bound


def write_progress_csv(result: BnbResult, fh) -> None:
    fh.write("nodes_explored,upper_bound,lower_bound,gap\n")
    for nodes, ub, lb, gap in result.progress:
        fh.write(f"{nodes},{ub:.9g},{lb:.9g},{gap:.9g}\n")
