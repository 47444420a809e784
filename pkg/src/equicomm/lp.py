"""Linear-program container and the builder for the envelope relaxation.

The relaxation maximizes the sum of auxiliary envelope variables: one
allocation column and one auxiliary column per (household, slot) pair with the
slot inside the household's deadline, a window capacity row per slot, and two
envelope rows per auxiliary column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .envelope import EnvelopePiece
from .scenario import Scenario


class LpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LpProblem:
    """maximize c.v subject to sparse <= rows and per-variable [lo, hi] boxes."""

    n_vars: int
    objective: np.ndarray
    row_idx: list[np.ndarray]
    row_val: list[np.ndarray]
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    x_index: dict = field(default_factory=dict)
    beta_index: dict = field(default_factory=dict)

    @property
    def n_rows(self):
        return len(self.rhs)


@dataclass
class LpSolution:
    status: LpStatus
    objective_value: float
    x_values: np.ndarray
    iterations: int
    max_primal_residual: float = 0.0


class LpBuilder:
    def __init__(self, n_vars):
        self.n_vars = n_vars
        self.objective = np.zeros(n_vars)
        self.row_idx = []
        self.row_val = []
        self.rhs = []
        self.lower = np.zeros(n_vars)
        self.upper = np.full(n_vars, np.inf)

    def add_row(self, idx, val, rhs):
        """Append a <= row given parallel column-index/coefficient arrays."""
        self.row_idx.append(np.asarray(idx, dtype=np.int64))
        self.row_val.append(np.asarray(val, dtype=float))
        self.rhs.append(float(rhs))

    def build(self, x_index=None, beta_index=None) -> LpProblem:
        return LpProblem(
            n_vars=self.n_vars,
            objective=self.objective,
            row_idx=self.row_idx,
            row_val=self.row_val,
            rhs=np.array(self.rhs, dtype=float),
            lower=self.lower,
            upper=self.upper,
            x_index=x_index or {},
            beta_index=beta_index or {},
        )


def build_relaxation(
    scenario: Scenario,
    envelopes: dict[tuple[int, int, int], EnvelopePiece],
    forbidden: frozenset | set = frozenset(),
) -> LpProblem:
    """Assemble the relaxation LP, keeping allocation columns only for slots
    within each household's deadline and outside the forbidden (area, slot)
    set; slots past the deadline carry no utility and are eliminated."""
    triples = []
    for k, h in enumerate(scenario.households):
        for t in range(1, h.tolerance_days + 1):
            if (h.area_id, t) in forbidden:
                continue
            triples.append((k, h.area_id, t))

    n_x = len(triples)
    builder = LpBuilder(2 * n_x)
    builder.objective[n_x:] = 1.0
    builder.upper[:n_x] = scenario.smax_mbps

    x_index = {trip: i for i, trip in enumerate(triples)}
    beta_index = {trip: n_x + i for i, trip in enumerate(triples)}

    # One capacity row per slot covering the recycling window, clipped at 1.
    cols_at_slot: dict[int, list[int]] = {}
    for i, (_, _, t) in enumerate(triples):
        cols_at_slot.setdefault(t, []).append(i)
    delta = scenario.freezeout_delta
    for t in range(1, scenario.horizon_T + 1):
        idx = []
        for tt in range(max(1, t - delta), t + 1):
            idx.extend(cols_at_slot.get(tt, []))
        builder.add_row(idx, np.ones(len(idx)), scenario.smax_mbps)

    for i, trip in enumerate(triples):
        piece = envelopes[trip]
        builder.add_row([n_x + i, i], [1.0, -piece.a], piece.b)
        builder.add_row([n_x + i], [1.0], piece.cap)

    return builder.build(x_index=x_index, beta_index=beta_index)


def x_solution_array(scenario: Scenario, problem: LpProblem, solution: LpSolution) -> np.ndarray:
    """Map the LP's allocation columns back onto a (households, slots) grid."""
    x = np.zeros((scenario.n_households, scenario.horizon_T))
    for (k, _, t), col in problem.x_index.items():
        x[k, t - 1] = solution.x_values[col]
    return x


def dump_lp(problem: LpProblem, fh) -> None:
    """Plain-text dump (objective row, rows, bounds) for external cross-checks."""
    fh.write("maximize " + " ".join(f"{c:.9g}" for c in problem.objective) + "\n")
    for idx, val, rhs in zip(problem.row_idx, problem.row_val, problem.rhs):
        terms = " + ".join(f"{v:.9g}*v{j}" for j, v in zip(idx, val))
        fh.write(f"{terms if terms else '0'} <= {rhs:.9g}\n")
    for j in range(problem.n_vars):
        fh.write(f"v{j} in [{problem.lower[j]:.9g}, {problem.upper[j]:.9g}]\n")
