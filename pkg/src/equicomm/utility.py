"""Sigmoid rate-utility, user utility scoring, and plan feasibility checks.

The canonical score of any candidate plan is the exact indicator-form utility
(weight times sigmoid times served-by-deadline), never the envelope surrogate
used inside the relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import Scenario

# IEEE double overflow guard for exp().
EXP_CLAMP = 700.0

# Allocations below this many Mbps are treated as zero when deriving serve
# indicators from a relaxation solution.
ZERO_TOL_MBPS = 1e-6

_FEAS_TOL = 1e-6


@dataclass(frozen=True)
class AllocationPlan:
    """Decision triple (z, s, w) plus the flattened allocation x.

    z: (N, T) serve indicators; s: (N,) deployed Mbps per area; w: (K,) share
    fraction per household; x: (K, T) allocation with x[k, t-1] = z[n, t-1] *
    w[k] * s[n] for k in area n.
    """

    z: np.ndarray
    s: np.ndarray
    w: np.ndarray
    x: np.ndarray

    def serve_slot(self, area_pos: int) -> int | None:
        """1-based slot at which the area at this row is served, or None."""
        hits = np.nonzero(self.z[area_pos] > 0.5)[0]
        if hits.size == 0:
            return None
        return int(hits[0]) + 1


def empty_plan(scenario: Scenario) -> AllocationPlan:
    n, k, t = scenario.n_areas, scenario.n_households, scenario.horizon_T
    return AllocationPlan(
        z=np.zeros((n, t)),
        s=np.zeros(n),
        w=np.zeros(k),
        x=np.zeros((k, t)),
    )


def make_plan(scenario: Scenario, serve_slots, s_by_area, w) -> AllocationPlan:
    """Assemble a consistent plan from per-area serve slots/budgets and
    per-household shares; x is derived as z*w*s."""
    plan = empty_plan(scenario)
    w = np.asarray(w, dtype=float)
    z, s, x = plan.z, plan.s, plan.x.copy()
    for area_id, slot in serve_slots.items():
        pos = scenario.area_index(area_id)
        z[pos, slot - 1] = 1.0
        s[pos] = float(s_by_area[area_id])
        for k in scenario.household_indices(area_id):
            x[k, slot - 1] = w[k] * s[pos]
    return AllocationPlan(z=z, s=s, w=w, x=x)


def sigmoid_rate_utility(r, r_hat, theta):
    """1 / (1 + exp(-theta * (r - r_hat))), exponent clamped to +-700."""
    if np.ndim(r) == 0:
        u = theta * (float(r) - r_hat)
        u = EXP_CLAMP if u > EXP_CLAMP else (-EXP_CLAMP if u < -EXP_CLAMP else u)
        return 1.0 / (1.0 + math.exp(-u))
    u = np.clip(theta * (np.asarray(r, dtype=float) - r_hat), -EXP_CLAMP, EXP_CLAMP)
    return 1.0 / (1.0 + np.exp(-u))


def perceived_rate(scenario: Scenario, plan: AllocationPlan, k: int) -> float:
    """Share-weighted slice of the area's deployed capacity; 0 when unserved."""
    h = scenario.households[k]
    pos = scenario.area_index(h.area_id)
    if plan.serve_slot(pos) is None:
        return 0.0
    members = list(scenario.household_indices(h.area_id))
    total_w = float(np.sum(plan.w[members]))
    if total_w <= 0.0:
        return 0.0
    return float(plan.w[k] / total_w * plan.s[pos])


def user_utility(scenario: Scenario, plan: AllocationPlan, k: int) -> float:
    """tau * sigmoid(rate) if the household's area is served by its deadline,
    else exactly 0."""
    h = scenario.households[k]
    pos = scenario.area_index(h.area_id)
    slot = plan.serve_slot(pos)
    if slot is None or slot > h.tolerance_days:
        return 0.0
    r = perceived_rate(scenario, plan, k)
    return scenario.tau(h) * sigmoid_rate_utility(r, h.demand_mbps, scenario.theta)


def total_true_objective(scenario: Scenario, plan: AllocationPlan) -> float:
    return float(sum(user_utility(scenario, plan, k) for k in range(scenario.n_households)))


def total_objective_from_x(scenario: Scenario, plan: AllocationPlan) -> float:
    """Same score evaluated from the flattened allocation: sum over served
    slots within each household's deadline of tau * sigmoid(x)."""
    total = 0.0
    for k, h in enumerate(scenario.households):
        pos = scenario.area_index(h.area_id)
        tau = scenario.tau(h)
        for t in range(1, h.tolerance_days + 1):
            if plan.z[pos, t - 1] > 0.5:
                total += tau * sigmoid_rate_utility(plan.x[k, t - 1], h.demand_mbps, scenario.theta)
    return total


def window_usage(scenario: Scenario, x: np.ndarray) -> np.ndarray:
    """Total allocation inside the recycling window [t-delta, t] per slot t."""
    T, delta = scenario.horizon_T, scenario.freezeout_delta
    per_slot = np.asarray(x, dtype=float).sum(axis=0)
    return np.array(
        [per_slot[max(0, t - delta): t + 1].sum() for t in range(T)], dtype=float
    )


def available_resource_profile(scenario: Scenario, plan: AllocationPlan) -> np.ndarray:
    """Recursive bookkeeping of the deployable pool: start at S_max, subtract
    deployments, return them delta slots after use."""
    T, delta = scenario.horizon_T, scenario.freezeout_delta
    deploy = np.zeros(T + 1)
    for pos in range(scenario.n_areas):
        slot = plan.serve_slot(pos)
        if slot is not None:
            deploy[slot] += plan.s[pos]
    avail = np.zeros(T + 1)
    avail[1] = scenario.smax_mbps
    for t in range(2, T + 1):
        recycled = deploy[t - 1 - delta] if t - 1 - delta >= 1 else 0.0
        avail[t] = avail[t - 1] - deploy[t - 1] + recycled
    return avail[1:]


def validate_feasibility(scenario: Scenario, plan: AllocationPlan) -> list[str]:
    """Check serve-once, window capacity, deployment bounds, and share
    normalization. Violations are returned as data, not raised."""
    violations = []
    z, s, w, x = plan.z, plan.s, plan.w, plan.x
    smax = scenario.smax_mbps

    for pos, area in enumerate(scenario.areas):
        row = z[pos]
        if np.any((np.abs(row) > _FEAS_TOL) & (np.abs(row - 1.0) > _FEAS_TOL)):
            violations.append(f"serve-once: area {area.area_id} has non-binary serve indicator")
        times = int(np.sum(row > 0.5))
        if times > 1:
            violations.append(f"serve-once: area {area.area_id} served {times} times")

    usage = window_usage(scenario, x)
    for t in range(1, scenario.horizon_T + 1):
        if usage[t - 1] > smax + _FEAS_TOL:
            violations.append(
                f"capacity-window: slot {t} window load {usage[t - 1]:.6f} Mbps "
                f"exceeds {smax:.6f} Mbps"
            )

    for pos, area in enumerate(scenario.areas):
        if s[pos] < -_FEAS_TOL or s[pos] > smax + _FEAS_TOL:
            violations.append(
                f"deployment-bounds: area {area.area_id} deploys {s[pos]:.6f} Mbps "
                f"outside [0, {smax:.6f}]"
            )

    if np.any(w < -_FEAS_TOL) or np.any(w > 1.0 + _FEAS_TOL):
        violations.append("share-normalization: share fraction outside [0, 1]")
    for pos, area in enumerate(scenario.areas):
        if plan.serve_slot(pos) is None:
            continue
        members = list(scenario.household_indices(area.area_id))
        total = float(np.sum(w[members]))
        if abs(total - 1.0) > _FEAS_TOL:
            violations.append(
                f"share-normalization: area {area.area_id} shares sum to {total:.9f}"
            )

    # Consistency of the flattened allocation with (z, s, w).
    for pos, area in enumerate(scenario.areas):
        slot = plan.serve_slot(pos)
        for k in scenario.household_indices(area.area_id):
            expect = np.zeros(scenario.horizon_T)
            if slot is not None:
                expect[slot - 1] = w[k] * s[pos]
            if np.max(np.abs(x[k] - expect)) > 1e-6:
                violations.append(
                    f"plan-consistency: household {scenario.households[k].id} "
                    f"allocation disagrees with z*w*s"
                )
                break

    return violations
