"""Plan scoring and report assembly: effective data rate, normalized
utilities, per-group aggregates, and the diffable plan file format.

A user is "satisfied" when their normalized utility clears the sigmoid
inflection (0.5), i.e. rate at least demand and service by the deadline.
Plan files keep full-precision numbers so export/import round-trips leave
every metric bit-identical; report files round to 9 significant digits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, ScenarioValidationError
from .utility import AllocationPlan, user_utility

GROUPABLE_ATTRIBUTES = ("income", "race", "education", "demand", "tolerance")

_GROUP_FIELDS = {
    "income": "income_code",
    "race": "race_code",
    "education": "education_code",
    "demand": "demand_mbps",
    "tolerance": "tolerance_days",
}

EDR_QUANTILES = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class UserMetrics:
    household_id: str
    area_id: int
    edr_mbps: float
    utility: float
    normalized_utility: float
    satisfied: bool


@dataclass(frozen=True)
class GroupStats:
    count: int
    mean_normalized_utility: float
    satisfied_fraction: float
    edr_quantiles: tuple[float, ...]


@dataclass(frozen=True)
class MetricsReport:
    total_utility: float
    per_user: tuple[UserMetrics, ...]
    per_area: dict
    per_slot: dict
    groups: dict
    upper_bound: float | None = None
    gap: float | None = None


def compute_edr(scenario: Scenario, plan: AllocationPlan) -> np.ndarray:
    """Delivered rate per user, counted only when service arrives by the
    user's deadline."""
    edr = np.zeros(scenario.n_households)
    for pos, area in enumerate(scenario.areas):
        slot = plan.serve_slot(pos)
        if slot is None:
            continue
        for k in scenario.household_indices(area.area_id):
            if slot <= scenario.households[k].tolerance_days:
                edr[k] = plan.w[k] * plan.s[pos]
    return edr


def per_user_metrics(scenario: Scenario, plan: AllocationPlan) -> tuple[UserMetrics, ...]:
    edr = compute_edr(scenario, plan)
    out = []
    for k, h in enumerate(scenario.households):
        util = user_utility(scenario, plan, k)
        normalized = util / scenario.tau(h)
        out.append(
            UserMetrics(
                household_id=h.id,
                area_id=h.area_id,
                edr_mbps=float(edr[k]),
                utility=util,
                normalized_utility=normalized,
                satisfied=normalized > 0.5,
            )
        )
    return tuple(out)


def group_report(scenario: Scenario, plan: AllocationPlan, group_by: str) -> dict:
    """Aggregate per attribute value; attribute values with no households are
    omitted rather than zero-filled."""
    if group_by not in _GROUP_FIELDS:
        raise ValueError(f"unknown grouping attribute {group_by!r}")
    field = _GROUP_FIELDS[group_by]
    users = per_user_metrics(scenario, plan)
    buckets: dict = {}
    for k, h in enumerate(scenario.households):
        buckets.setdefault(getattr(h, field), []).append(users[k])
    report = {}
    for value in sorted(buckets):
        rows = buckets[value]
        edrs = np.array([r.edr_mbps for r in rows])
        report[value] = GroupStats(
            count=len(rows),
            mean_normalized_utility=float(np.mean([r.normalized_utility for r in rows])),
            satisfied_fraction=float(np.mean([r.satisfied for r in rows])),
            edr_quantiles=tuple(float(np.quantile(edrs, q)) for q in EDR_QUANTILES),
        )
    return report


def compute_metrics(
    scenario: Scenario,
    plan: AllocationPlan,
    group_by=("income", "race", "education"),
    upper_bound=None,
    gap=None,
) -> MetricsReport:
    users = per_user_metrics(scenario, plan)
    per_area: dict = {}
    per_slot: dict = {}
    for pos, area in enumerate(scenario.areas):
        total = sum(users[k].utility for k in scenario.household_indices(area.area_id))
        per_area[area.area_id] = total
        slot = plan.serve_slot(pos)
        if slot is not None and total != 0.0:
            per_slot[slot] = per_slot.get(slot, 0.0) + total
    return MetricsReport(
        total_utility=float(sum(u.utility for u in users)),
        per_user=users,
        per_area=per_area,
        per_slot=per_slot,
        groups={attr: group_report(scenario, plan, attr) for attr in group_by},
        upper_bound=upper_bound,
        gap=gap,
    )


def _full(x: float) -> str:
    return repr(float(x))


def write_plan_csv(scenario: Scenario, plan: AllocationPlan, fh) -> None:
    """Two sections: served areas (area_id, serve_slot, s_n_mbps) then the
    per-user shares; unserved areas are simply absent from the first section."""
    fh.write("area_id,serve_slot,s_n_mbps\n")
    for pos, area in enumerate(scenario.areas):
        slot = plan.serve_slot(pos)
        if slot is None:
            continue
        fh.write(f"{area.area_id},{slot},{_full(plan.s[pos])}\n")
    fh.write("\n")
    fh.write("user_id,w\n")
    for k, h in enumerate(scenario.households):
        fh.write(f"{h.id},{_full(plan.w[k])}\n")


def read_plan_csv(scenario: Scenario, fh) -> AllocationPlan:
    lines = [ln.rstrip("\n") for ln in fh]
    try:
        split = lines.index("")
    except ValueError:
        raise ScenarioValidationError("plan file missing the blank section separator")
    area_rows, user_rows = lines[:split], [ln for ln in lines[split + 1:] if ln]
    if not area_rows or area_rows[0] != "area_id,serve_slot,s_n_mbps":
        raise ScenarioValidationError("plan file missing the area section header")
    if not user_rows or user_rows[0] != "user_id,w":
        raise ScenarioValidationError("plan file missing the user section header")

    N, K, T = scenario.n_areas, scenario.n_households, scenario.horizon_T
    z = np.zeros((N, T))
    s = np.zeros(N)
    w = np.zeros(K)
    known_ids = {h.id: k for k, h in enumerate(scenario.households)}
    for ln in area_rows[1:]:
        parts = ln.split(",")
        if len(parts) != 3:
            raise ScenarioValidationError(f"bad plan area row: {ln!r}")
        area_id, slot = int(parts[0]), int(parts[1])
        try:
            pos = scenario.area_index(area_id)
        except KeyError:
            raise ScenarioValidationError(f"plan references unknown area {area_id}")
        if not 1 <= slot <= T:
            raise ScenarioValidationError(f"plan serve slot {slot} outside 1..{T}")
        z[pos, slot - 1] = 1.0
        s[pos] = float(parts[2])
    for ln in user_rows[1:]:
        parts = ln.split(",")
        if len(parts) != 2:
            raise ScenarioValidationError(f"bad plan user row: {ln!r}")
        if parts[0] not in known_ids:
            raise ScenarioValidationError(f"plan references unknown user {parts[0]!r}")
        w[known_ids[parts[0]]] = float(parts[1])

    x = np.zeros((K, T))
    for pos, area in enumerate(scenario.areas):
        hits = np.nonzero(z[pos] > 0.5)[0]
        if not hits.size:
            continue
        for k in scenario.household_indices(area.area_id):
            x[k, hits[0]] = w[k] * s[pos]
    return AllocationPlan(z=z, s=s, w=w, x=x)
