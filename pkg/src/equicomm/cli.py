"""Command-line surface.

Subcommands: generate, solve, bound, benchmark, compare, correlate, validate.
All randomized paths take an explicit --seed (default 0, never wall clock);
identical flags and seed produce byte-identical output files. Report numbers
are rounded to 9 significant digits; plan and scenario files keep full
precision so they reload exactly.

Exit codes: 0 success, 1 validation/model error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .benchmark import (
    BenchmarkConfig,
    BenchmarkInfeasibleError,
    redistribute_surplus,
    solve_benchmark,
    to_allocation_plan,
)
from .branch_bound import solve_bnb, write_progress_csv
from .metrics import compute_metrics, read_plan_csv, write_plan_csv
from .rounding import solve_heuristic, write_trace_csv
from .scenario import (
    GlobalParams,
    ScenarioError,
    generate_scenario,
    load_params,
    load_scenario,
    save_params,
    save_scenario,
)
from .stats import correlation_table, write_correlation_csv
from .utility import validate_feasibility


def _g9(x):
    if x is None:
        return None
    return float(f"{float(x):.9g}")


def _fmt(x):
    return f"{float(x):.9g}"


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--smax-gbps", type=float, default=None, help="total resource pool in Gbps")
    common.add_argument("--delta", type=int, default=None, help="resource freeze-out in slots")
    common.add_argument("--theta", type=float, default=None, help="sigmoid steepness per Mbps")
    common.add_argument("--tau", choices=("income", "race", "education"), default=None,
                        help="attribute supplying the priority weight")
    common.add_argument("--horizon", type=int, default=None, help="number of time slots")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--alpha", type=float, default=0.15, help="target relative gap")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--strict-phi", action="store_true",
                        help="take mandatory rate floors literally for unserved users")
    common.add_argument("--out-dir", default=".")

    parser = argparse.ArgumentParser(prog="equicomm", description=__doc__)
    parser.add_argument("--version", action="version", version=f"equicomm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic scenario")
    p.add_argument("--areas", type=int, default=60)
    p.add_argument("--users-min", type=int, default=4)
    p.add_argument("--users-max", type=int, default=12)
    p.add_argument("--marginals", default=None, help="JSON file of categorical marginals")

    for name, extra in (
        ("solve", "run the rounding heuristic and emit plan + metrics"),
        ("bound", "run branch-and-bound and emit certified bounds"),
        ("benchmark", "run the admission-maximizing comparison model"),
        ("compare", "run both solvers and emit joint per-user tables"),
        ("correlate", "emit the attribute correlation table"),
    ):
        p = sub.add_parser(name, parents=[common], help=extra)
        p.add_argument("--households", required=True)
        p.add_argument("--params", default=None)
        if name == "bound":
            p.add_argument("--node-limit", type=int, default=100_000)

    p = sub.add_parser("validate", parents=[common], help="feasibility-check a plan file")
    p.add_argument("--households", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--plan", required=True)
    return parser


def _resolve_params(args) -> GlobalParams:
    base = load_params(args.params) if getattr(args, "params", None) else GlobalParams()
    return GlobalParams(
        horizon_T=args.horizon if args.horizon is not None else base.horizon_T,
        smax_mbps=args.smax_gbps * 1000.0 if args.smax_gbps is not None else base.smax_mbps,
        freezeout_delta=args.delta if args.delta is not None else base.freezeout_delta,
        theta=args.theta if args.theta is not None else base.theta,
        tau_source=args.tau if args.tau is not None else base.tau_source,
    )


def _load(args):
    return load_scenario(args.households, _resolve_params(args))


def _metrics_payload(report):
    return {
        "total_utility": _g9(report.total_utility),
        "upper_bound": _g9(report.upper_bound),
        "gap": _g9(report.gap),
        "per_user": [
            {
                "user_id": u.household_id,
                "area_id": u.area_id,
                "edr_mbps": _g9(u.edr_mbps),
                "utility": _g9(u.utility),
                "normalized_utility": _g9(u.normalized_utility),
                "satisfied": u.satisfied,
            }
            for u in report.per_user
        ],
        "per_area": {str(a): _g9(v) for a, v in sorted(report.per_area.items())},
        "per_slot": {str(t): _g9(v) for t, v in sorted(report.per_slot.items())},
        "groups": {
            attr: {
                str(value): {
                    "count": stats.count,
                    "mean_normalized_utility": _g9(stats.mean_normalized_utility),
                    "satisfied_fraction": _g9(stats.satisfied_fraction),
                    "edr_quantiles": [_g9(q) for q in stats.edr_quantiles],
                }
                for value, stats in groups.items()
            }
            for attr, groups in report.groups.items()
        },
    }


def _write_metrics(report, out_dir: Path, stem: str, fmt: str):
    if fmt == "json":
        path = out_dir / f"{stem}.json"
        path.write_text(json.dumps(_metrics_payload(report), indent=2, sort_keys=True) + "\n")
        return [path]
    paths = []
    users = out_dir / f"{stem}_users.csv"
    with users.open("w") as fh:
        fh.write("user_id,area_id,edr_mbps,utility,normalized_utility,satisfied\n")
        for u in report.per_user:
            fh.write(
                f"{u.household_id},{u.area_id},{_fmt(u.edr_mbps)},{_fmt(u.utility)},"
                f"{_fmt(u.normalized_utility)},{str(u.satisfied).lower()}\n"
            )
    paths.append(users)
    groups = out_dir / f"{stem}_groups.csv"
    with groups.open("w") as fh:
        fh.write(
            "attribute,value,count,mean_normalized_utility,satisfied_fraction,"
            "edr_q0,edr_q25,edr_q50,edr_q75,edr_q100\n"
        )
        for attr, table in report.groups.items():
            for value, stats in table.items():
                qs = ",".join(_fmt(q) for q in stats.edr_quantiles)
                fh.write(
                    f"{attr},{value},{stats.count},{_fmt(stats.mean_normalized_utility)},"
                    f"{_fmt(stats.satisfied_fraction)},{qs}\n"
                )
    paths.append(groups)
    summary = out_dir / f"{stem}_summary.csv"
    with summary.open("w") as fh:
        fh.write("total_utility,upper_bound,gap\n")
        ub = _fmt(report.upper_bound) if report.upper_bound is not None else ""
        gap = _fmt(report.gap) if report.gap is not None else ""
        fh.write(f"{_fmt(report.total_utility)},{ub},{gap}\n")
    paths.append(summary)
    return paths


def _cmd_generate(args, out_dir: Path):
    params = _resolve_params(args)
    marginals = None
    if args.marginals:
        raw = json.loads(Path(args.marginals).read_text())
        marginals = {
            attr: {int(code): float(p) for code, p in dist.items()}
            for attr, dist in raw.items()
        }
    scenario = generate_scenario(
        seed=args.seed,
        n_areas=args.areas,
        users_per_area=(args.users_min, args.users_max),
        marginals=marginals,
        params=params,
    )
    save_scenario(scenario, out_dir / "households.csv")
    save_params(params, out_dir / "params.txt")
    print(f"wrote {out_dir / 'households.csv'} ({scenario.n_households} households, "
          f"{scenario.n_areas} areas) and {out_dir / 'params.txt'}")
    return 0


def _cmd_solve(args, out_dir: Path):
    scenario = _load(args)
    trace = solve_heuristic(scenario)
    gap = None
    if trace.upper_bound > 0:
        gap = (trace.upper_bound - trace.true_objective) / trace.upper_bound
    report = compute_metrics(
        scenario, trace.final_plan, upper_bound=trace.upper_bound, gap=gap
    )
    with (out_dir / "plan.csv").open("w") as fh:
        write_plan_csv(scenario, trace.final_plan, fh)
    with (out_dir / "trace.csv").open("w") as fh:
        write_trace_csv(trace, fh)
    _write_metrics(report, out_dir, "metrics", args.format)
    print(
        f"total_utility={_fmt(report.total_utility)} upper_bound={_fmt(trace.upper_bound)} "
        f"gap={_fmt(gap if gap is not None else 0.0)} lp_solves={trace.lp_solves}"
    )
    return 0


def _cmd_bound(args, out_dir: Path):
    scenario = _load(args)
    result = solve_bnb(scenario, alpha_target=args.alpha, node_limit=args.node_limit)
    root_bound = result.progress[0][1]
    payload = {
        "root_upper_bound": _g9(root_bound),
        "upper_bound": _g9(result.upper_bound),
        "lower_bound": _g9(result.lower_bound),
        "gap": _g9(result.gap_alpha),
        "nodes_explored": result.nodes_explored,
        "node_limit_reached": result.limit_reached,
    }
    if args.format == "json":
        (out_dir / "bounds.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        with (out_dir / "bounds.csv").open("w") as fh:
            fh.write("root_upper_bound,upper_bound,lower_bound,gap,nodes_explored,node_limit_reached\n")
            fh.write(
                f"{_fmt(root_bound)},{_fmt(result.upper_bound)},{_fmt(result.lower_bound)},"
                f"{_fmt(result.gap_alpha)},{result.nodes_explored},"
                f"{str(result.limit_reached).lower()}\n"
            )
    with (out_dir / "progress.csv").open("w") as fh:
        write_progress_csv(result, fh)
    with (out_dir / "bnb_plan.csv").open("w") as fh:
        write_plan_csv(scenario, result.best_plan, fh)
    print(
        f"upper_bound={_fmt(result.upper_bound)} lower_bound={_fmt(result.lower_bound)} "
        f"gap={_fmt(result.gap_alpha)} nodes={result.nodes_explored}"
    )
    return 0


def _benchmark_plan(scenario, args):
    plan = solve_benchmark(scenario, BenchmarkConfig(), strict=args.strict_phi)
    return redistribute_surplus(scenario, plan)


def _cmd_benchmark(args, out_dir: Path):
    scenario = _load(args)
    bplan = _benchmark_plan(scenario, args)
    plan = to_allocation_plan(scenario, bplan)
    report = compute_metrics(scenario, plan)
    with (out_dir / "benchmark_plan.csv").open("w") as fh:
        write_plan_csv(scenario, plan, fh)
    _write_metrics(report, out_dir, "benchmark_metrics", args.format)
    print(
        f"served_count={bplan.served_count} of {scenario.n_households} "
        f"total_utility={_fmt(report.total_utility)}"
    )
    return 0


_COMPARE_HEADER = (
    "solver,user_id,area_id,income_code,race_code,education_code,demand_mbps,"
    "tolerance_days,edr_mbps,utility,normalized_utility,satisfied"
)


def _cmd_compare(args, out_dir: Path):
    scenario = _load(args)
    trace = solve_heuristic(scenario)
    bplan = to_allocation_plan(scenario, _benchmark_plan(scenario, args))
    rows = []
    for solver, plan in (("heuristic", trace.final_plan), ("benchmark", bplan)):
        report = compute_metrics(scenario, plan)
        for u, h in zip(report.per_user, scenario.households):
            rows.append(
                {
                    "solver": solver,
                    "user_id": u.household_id,
                    "area_id": u.area_id,
                    "income_code": h.income_code,
                    "race_code": h.race_code,
                    "education_code": h.education_code,
                    "demand_mbps": _g9(h.demand_mbps),
                    "tolerance_days": h.tolerance_days,
                    "edr_mbps": _g9(u.edr_mbps),
                    "utility": _g9(u.utility),
                    "normalized_utility": _g9(u.normalized_utility),
                    "satisfied": u.satisfied,
                }
            )
    if args.format == "json":
        (out_dir / "compare.json").write_text(json.dumps(rows, indent=2, sort_keys=True) + "\n")
    else:
        with (out_dir / "compare.csv").open("w") as fh:
            fh.write(_COMPARE_HEADER + "\n")
            for r in rows:
                fh.write(
                    f"{r['solver']},{r['user_id']},{r['area_id']},{r['income_code']},"
                    f"{r['race_code']},{r['education_code']},{_fmt(r['demand_mbps'])},"
                    f"{r['tolerance_days']},{_fmt(r['edr_mbps'])},{_fmt(r['utility'])},"
                    f"{_fmt(r['normalized_utility'])},{str(r['satisfied']).lower()}\n"
                )
    print(f"wrote comparison rows for {scenario.n_households} users x 2 solvers")
    return 0


def _cmd_correlate(args, out_dir: Path):
    scenario = _load(args)
    report = correlation_table(scenario)
    with (out_dir / "correlations.csv").open("w") as fh:
        write_correlation_csv(report, fh)
    print(f"wrote {out_dir / 'correlations.csv'} ({len(report.pairs)} cells)")
    return 0


def _cmd_validate(args, out_dir: Path):
    scenario = _load(args)
    with open(args.plan) as fh:
        plan = read_plan_csv(scenario, fh)
    violations = validate_feasibility(scenario, plan)
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return 1
    print("plan feasible")
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "bound": _cmd_bound,
    "benchmark": _cmd_benchmark,
    "compare": _cmd_compare,
    "correlate": _cmd_correlate,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](args, out_dir)
    except (ScenarioError, BenchmarkInfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
