"""Socially equitable post-disaster communication resource allocation.

Builds the sigmoid-utility placement/sharing model over discrete areas and a
slotted horizon, bounds it through a two-piece concave envelope LP, rounds
the relaxation with spatial-temporal policies, certifies gaps by
branch-and-bound, and compares against an admission-maximizing benchmark.
"""

__version__ = "0.1.0"

from .benchmark import (
    BenchmarkConfig,
    BenchmarkInfeasibleError,
    BenchmarkPlan,
    redistribute_surplus,
    solve_benchmark,
)
from .branch_bound import BnbResult, certify, solve_bnb
from .envelope import EnvelopePiece, build_envelope, build_envelopes, envelope_value
from .lp import LpProblem, LpSolution, LpStatus, build_relaxation
from .metrics import MetricsReport, compute_edr, compute_metrics, group_report
from .rounding import HeuristicTrace, UrrTable, apply_policies, compute_urr, solve_heuristic
from .scenario import (
    Area,
    GlobalParams,
    HouseholdProfile,
    Scenario,
    ScenarioError,
    generate_scenario,
    load_scenario,
    tau_of,
)
from .simplex import active_kernel, relaxation_upper_bound, solve_lp
from .stats import CorrelationReport, correlation_table, pearson, spearman
from .utility import (
    AllocationPlan,
    perceived_rate,
    sigmoid_rate_utility,
    total_true_objective,
    user_utility,
    validate_feasibility,
)
