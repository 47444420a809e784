"""Iterative LP rounding on the utility-resource ratio.

Each round solves the relaxation, reads serve indicators off the nonzero
allocation columns, and for every area active in more than one slot keeps the
slot picked by the temporal policy (max ratio), the spatial policy (best rank
against other areas among tied slots), or the earliest-slot tie-breaker; all
other active slots of that area are forbidden before the re-solve. Forbidding
grows monotonically, so at most one LP per (area, slot) pair is ever solved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envelope import build_envelopes
from .lp import LpStatus, build_relaxation, x_solution_array
from .scenario import Scenario
from .simplex import SimplexInternalError, solve_lp
from .utility import AllocationPlan, ZERO_TOL_MBPS, sigmoid_rate_utility, total_true_objective

POLICY_TEMPORAL = "temporal"
POLICY_SPATIAL = "spatial"
POLICY_TIEBREAK = "tiebreak"

_POLICY_DEPTH = {POLICY_TEMPORAL: 0, POLICY_SPATIAL: 1, POLICY_TIEBREAK: 2}


@dataclass(frozen=True)
class UrrTable:
    """gamma[area_pos, slot-1]: true utility produced per allocated Mbps."""

    gamma: np.ndarray


@dataclass(frozen=True)
class IterationRecord:
    index: int
    lp_value: float
    violating_area_ids: tuple[int, ...]
    policy: str
    forbidden_added: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class HeuristicTrace:
    iterations: tuple[IterationRecord, ...]
    final_plan: AllocationPlan
    upper_bound: float
    true_objective: float
    lp_solves: int


def compute_urr(scenario: Scenario, x: np.ndarray) -> UrrTable:
    """Sum over households with allocation above the zero threshold of
    utility-if-served-now divided by allocation."""
    gamma = np.zeros((scenario.n_areas, scenario.horizon_T))
    for pos, area in enumerate(scenario.areas):
        for k in scenario.household_indices(area.area_id):
            h = scenario.households[k]
            tau = scenario.tau(h)
            for t in range(1, scenario.horizon_T + 1):
                xv = x[k, t - 1]
                if xv <= ZERO_TOL_MBPS or t > h.tolerance_days:
                    continue
                value = tau * sigmoid_rate_utility(xv, h.demand_mbps, scenario.theta)
                gamma[pos, t - 1] += value / xv
    return UrrTable(gamma=gamma)


def _rank(gamma_slot: np.ndarray, pos: int) -> int:
    """Position of this area's ratio in the ascending sort of all areas'
    ratios at one slot (number of strictly smaller entries)."""
    return int(np.sum(gamma_slot < gamma_slot[pos]))


def apply_policies(urr: UrrTable, violating: dict[int, int]) -> tuple[set, str]:
    """For each violating area (area_id -> area position) pick the slot to
    keep and return ((area_id, slot) pairs to forbid, deepest policy used)."""
    gamma = urr.gamma
    to_forbid = set()
    deepest = POLICY_TEMPORAL
    for area_id in sorted(violating):
        pos = violating[area_id]
        active = np.nonzero(gamma[pos] > 0.0)[0]
        if active.size < 2:
            raise ValueError(f"area {area_id} is not violating (needs >= 2 active slots)")
        values = gamma[pos, active]
        best = values.max()
        tied = active[values == best]
        if tied.size == 1:
            keep = int(tied[0])
            policy = POLICY_TEMPORAL
        else:
            ranks = np.array([_rank(gamma[:, t], pos) for t in tied])
            top = tied[ranks == ranks.max()]
            keep = int(top[0])
            policy = POLICY_SPATIAL if top.size == 1 else POLICY_TIEBREAK
        if _POLICY_DEPTH[policy] > _POLICY_DEPTH[deepest]:
            deepest = policy
        for t in active:
            if int(t) != keep:
                to_forbid.add((area_id, int(t) + 1))
    return to_forbid, deepest


def active_slots(scenario: Scenario, x: np.ndarray, zero_tol=ZERO_TOL_MBPS) -> dict[int, list[int]]:
    """1-based slots where each area has any allocation above the threshold."""
    out = {}
    for area in scenario.areas:
        members = list(scenario.household_indices(area.area_id))
        hit = np.nonzero(x[members].max(axis=0) > zero_tol)[0]
        out[area.area_id] = [int(t) + 1 for t in hit]
    return out


def extract_plan(scenario: Scenario, x: np.ndarray, zero_tol=ZERO_TOL_MBPS) -> AllocationPlan:
    """Read the decision triple off a single-slot-consistent allocation:
    serve slot by the nonzero test, budget as the column sum, shares as the
    column fractions. The plan's x is re-derived as z*w*s exactly."""
    N, K, T = scenario.n_areas, scenario.n_households, scenario.horizon_T
    z = np.zeros((N, T))
    s = np.zeros(N)
    w = np.zeros(K)
    plan_x = np.zeros((K, T))
    slots = active_slots(scenario, x, zero_tol)
    for pos, area in enumerate(scenario.areas):
        active = slots[area.area_id]
        if not active:
            continue
        if len(active) > 1:
            raise ValueError(f"area {area.area_id} active in {len(active)} slots")
        t = active[0]
        members = list(scenario.household_indices(area.area_id))
        total = float(x[members, t - 1].sum())
        z[pos, t - 1] = 1.0
        s[pos] = total
        for k in members:
            w[k] = x[k, t - 1] / total
            plan_x[k, t - 1] = w[k] * total
    return AllocationPlan(z=z, s=s, w=w, x=plan_x)


def solve_heuristic(scenario: Scenario) -> HeuristicTrace:
    """Run the rounding loop to a plan in which every area is served at most
    once; the first LP value is the relaxation upper bound."""
    envelopes = build_envelopes(scenario)
    forbidden: set = set()
    records = []
    upper_bound = None
    max_rounds = scenario.n_areas * scenario.horizon_T + 1
    for it in range(max_rounds):
        problem = build_relaxation(scenario, envelopes, forbidden)
        sol = solve_lp(problem)
        if sol.status is not LpStatus.OPTIMAL:
            raise SimplexInternalError(f"relaxation solve returned {sol.status}")
        if upper_bound is None:
            upper_bound = sol.objective_value
        x = x_solution_array(scenario, problem, sol)
        slots = active_slots(scenario, x)
        violating = {
            area_id: scenario.area_index(area_id)
            for area_id, act in slots.items()
            if len(act) > 1
        }
        if not violating:
            plan = extract_plan(scenario, x)
            records.append(
                IterationRecord(it + 1, sol.objective_value, (), "none", ())
            )
            return HeuristicTrace(
                iterations=tuple(records),
                final_plan=plan,
                upper_bound=upper_bound,
                true_objective=total_true_objective(scenario, plan),
                lp_solves=it + 1,
            )
        urr = compute_urr(scenario, x)
        added, policy = apply_policies(urr, violating)
        if not added:
            raise SimplexInternalError("rounding made no progress")
        forbidden |= added
        records.append(
            IterationRecord(
                it + 1,
                sol.objective_value,
                tuple(sorted(violating)),
                policy,
                tuple(sorted(added)),
            )
        )
    raise SimplexInternalError("rounding exceeded the areas x slots bound")


def write_trace_csv(trace: HeuristicTrace, fh) -> None:
    """One row per rounding iteration for convergence plots."""
    fh.write("iteration,lp_value,n_violating,policy\n")
    for rec in trace.iterations:
        fh.write(
            f"{rec.index},{rec.lp_value:.9g},{len(rec.violating_area_ids)},{rec.policy}\n"
        )
