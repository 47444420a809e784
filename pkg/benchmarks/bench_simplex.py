#!/usr/bin/env python3
"""Compare the compiled simplex pivot kernel against the pure-NumPy fallback.

Solves the envelope relaxation of synthetic scenarios at several sizes with
both kernels, checks that objectives match exactly, and prints a timing table.

Usage: python benchmarks/bench_simplex.py [--repeats N]
"""

import argparse
import time

from equicomm import _simplex_py
from equicomm.envelope import build_envelopes
from equicomm.lp import build_relaxation
from equicomm.scenario import GlobalParams, generate_scenario
from equicomm.simplex import solve_lp

try:
    from equicomm import _simplex_cy
except ImportError:
    _simplex_cy = None

SIZES = [
    ("small", 4, (1, 3), 8),
    ("medium", 10, (2, 4), 12),
    ("large", 15, (2, 4), 15),
]


def build_problem(name, n_areas, users, horizon):
    params = GlobalParams(
        horizon_T=horizon,
        smax_mbps=500.0,
        freezeout_delta=1,
        theta=10.0,
        tau_source="race",
    )
    sc = generate_scenario(seed=7, n_areas=n_areas, users_per_area=users, params=params)
    problem = build_relaxation(sc, build_envelopes(sc))
    return sc, problem


def time_solve(problem, kernel, repeats):
    best = float("inf")
    value = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        sol = solve_lp(problem, kernel=kernel)
        best = min(best, time.perf_counter() - t0)
        value = sol.objective_value
    return best, value


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    if _simplex_cy is None:
        print("compiled kernel not built; run pip install -e . first")
        return 1

    print(f"{'size':<8} {'rows':>6} {'cols':>6} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, n_areas, users, horizon in SIZES:
        sc, problem = build_problem(name, n_areas, users, horizon)
        t_py, v_py = time_solve(problem, _simplex_py, args.repeats)
        t_cy, v_cy = time_solve(problem, _simplex_cy, args.repeats)
        assert v_py == v_cy, f"kernel results differ: {v_py} vs {v_cy}"
        print(
            f"{name:<8} {problem.n_rows:>6} {problem.n_vars:>6} "
            f"{t_py * 1e3:>8.1f}ms {t_cy * 1e3:>8.1f}ms {t_py / t_cy:>7.1f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
