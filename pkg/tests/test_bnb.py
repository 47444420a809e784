import numpy as np
import pytest

from equicomm.branch_bound import certify, improve_plan, solve_bnb, write_progress_csv
from equicomm.envelope import build_envelopes
from equicomm.lp import build_relaxation
from equicomm.rounding import solve_heuristic
from equicomm.scenario import GlobalParams, generate_scenario
from equicomm.simplex import solve_lp
from equicomm.utility import (
    empty_plan,
    make_plan,
    total_true_objective,
    validate_feasibility,
)

from conftest import LOW_DEMAND_MARGINALS, make_household, make_scenario
from oracles import brute_force_optimum


def tiny_random_scenario(rng):
    params = GlobalParams(
        horizon_T=int(rng.integers(1, 5)),
        smax_mbps=float(rng.choice([5.0, 12.0, 20.0, 40.0])),
        freezeout_delta=int(rng.integers(0, 3)),
        theta=10.0,
        tau_source="race",
    )
    return generate_scenario(
        seed=int(rng.integers(0, 10**6)),
        n_areas=int(rng.integers(1, 4)),
        users_per_area=(1, 2),
        marginals=LOW_DEMAND_MARGINALS,
        params=params,
    )


class TestSolveBnb:
    def test_alpha_validation(self, two_user_scenario):
        with pytest.raises(ValueError):
            solve_bnb(two_user_scenario, alpha_target=0.0)
        with pytest.raises(ValueError):
            solve_bnb(two_user_scenario, alpha_target=1.5)

    def test_matches_brute_force_on_tiny_instances(self):
        rng = np.random.default_rng(404)
        for _ in range(8):
            sc = tiny_random_scenario(rng)
            brute = brute_force_optimum(sc, 100)
            res = solve_bnb(sc, alpha_target=0.001, node_limit=20_000)
            tol = sc.theta * (sc.smax_mbps / 100.0) / 4.0 * sc.tau_vector().max()
            assert abs(res.lower_bound - brute) <= tol
            assert validate_feasibility(sc, res.best_plan) == []

    def test_normal_termination_meets_alpha(self):
        sc = make_scenario(
            [
                make_household("a", area_id=1, demand=1.0, tolerance=2, race=3),
                make_household("b", area_id=2, demand=10.0, tolerance=3, race=1),
            ],
            horizon_T=3,
            smax_mbps=20.0,
            freezeout_delta=1,
        )
        res = solve_bnb(sc, alpha_target=0.15, node_limit=10_000)
        assert not res.limit_reached
        assert res.gap_alpha <= 0.15

    def test_gap_zero_at_root_when_capacity_ample(self):
        # One utility-bearing slot per household; a huge pool saturates every
        # sigmoid, so the root relaxation is already integral per area.
        sc = make_scenario(
            [
                make_household("a", area_id=1, demand=1.0, tolerance=1, race=3),
                make_household("b", area_id=1, demand=10.0, tolerance=1, race=1),
                make_household("c", area_id=2, demand=500.0, tolerance=1, race=3),
            ],
            horizon_T=2,
            smax_mbps=1e6,
            freezeout_delta=1,
        )
        res = solve_bnb(sc, alpha_target=0.01, node_limit=100)
        assert res.nodes_explored == 1
        assert res.gap_alpha <= 1e-9
        assert res.lower_bound == pytest.approx(3.0 + 1.0 + 3.0, abs=1e-9)

    def test_bounds_and_incumbent_sandwich(self):
        rng = np.random.default_rng(77)
        for _ in range(5):
            sc = tiny_random_scenario(rng)
            res = solve_bnb(sc, alpha_target=0.05, node_limit=5_000)
            assert res.lower_bound <= res.upper_bound + 1e-9
            assert res.gap_alpha >= 0.0
            assert total_true_objective(sc, res.best_plan) == pytest.approx(res.lower_bound)

    def test_child_bounds_never_exceed_parent(self):
        sc = make_scenario(
            [
                make_household("a", area_id=1, demand=1.0, tolerance=2, race=3),
                make_household("b", area_id=2, demand=10.0, tolerance=2, race=1),
            ],
            horizon_T=2,
            smax_mbps=8.0,
        )
        envelopes = build_envelopes(sc)
        root = solve_lp(build_relaxation(sc, envelopes)).objective_value
        for fixed in [{(1, 2)}, {(1, 1)}, {(1, 1), (1, 2)}]:
            child = solve_lp(build_relaxation(sc, envelopes, forbidden=fixed)).objective_value
            assert child <= root + 1e-7

    def test_progress_log_monotone_upper_bound(self):
        rng = np.random.default_rng(12)
        sc = tiny_random_scenario(rng)
        res = solve_bnb(sc, alpha_target=0.001, node_limit=5_000)
        ubs = [row[1] for row in res.progress]
        assert all(b <= a + 1e-9 for a, b in zip(ubs, ubs[1:]))
        lbs = [row[2] for row in res.progress]
        assert all(b >= a - 1e-12 for a, b in zip(lbs, lbs[1:]))

    def test_determinism(self):
        rng = np.random.default_rng(99)
        sc = tiny_random_scenario(rng)
        a = solve_bnb(sc, alpha_target=0.05, node_limit=3_000)
        b = solve_bnb(sc, alpha_target=0.05, node_limit=3_000)
        assert a.lower_bound == b.lower_bound
        assert a.upper_bound == b.upper_bound
        assert a.nodes_explored == b.nodes_explored
        assert np.array_equal(a.best_plan.z, b.best_plan.z)
        assert np.array_equal(a.best_plan.s, b.best_plan.s)
        assert np.array_equal(a.best_plan.w, b.best_plan.w)

    def test_node_limit_is_normal_status(self):
        params = GlobalParams(horizon_T=6, smax_mbps=50.0, freezeout_delta=1, theta=10.0, tau_source="race")
        sc = generate_scenario(seed=5, n_areas=6, users_per_area=(2, 3), marginals=LOW_DEMAND_MARGINALS, params=params)
        res = solve_bnb(sc, alpha_target=0.001, node_limit=30)
        assert res.limit_reached
        assert res.gap_alpha >= 0.0
        assert res.lower_bound > 0.0

    def test_progress_csv(self, tmp_path, two_user_scenario):
        res = solve_bnb(two_user_scenario, alpha_target=0.1, node_limit=100)
        path = tmp_path / "progress.csv"
        with path.open("w") as fh:
            write_progress_csv(res, fh)
        lines = path.read_text().splitlines()
        assert lines[0] == "nodes_explored,upper_bound,lower_bound,gap"
        assert len(lines) == 1 + len(res.progress)


class TestCertify:
    def test_incumbent_matches_result_gap(self):
        rng = np.random.default_rng(3)
        sc = tiny_random_scenario(rng)
        res = solve_bnb(sc, alpha_target=0.05, node_limit=2_000)
        assert certify(sc, res.best_plan, res) == pytest.approx(res.gap_alpha, abs=1e-9)

    def test_all_zero_plan_full_gap(self):
        sc = make_scenario(
            [make_household("a", area_id=1, demand=1.0, tolerance=1, race=3)],
            horizon_T=1,
            smax_mbps=10.0,
        )
        res = solve_bnb(sc, alpha_target=0.05, node_limit=100)
        assert certify(sc, empty_plan(sc), res) == pytest.approx(1.0)

    def test_heuristic_plan_gap_small_on_scarce_fixture(self):
        params = GlobalParams(horizon_T=4, smax_mbps=30.0, freezeout_delta=1, theta=10.0, tau_source="race")
        sc = generate_scenario(seed=1, n_areas=3, users_per_area=(1, 2), marginals=LOW_DEMAND_MARGINALS, params=params)
        trace = solve_heuristic(sc)
        res = solve_bnb(sc, alpha_target=0.01, node_limit=20_000)
        assert certify(sc, trace.final_plan, res) <= 0.15


class TestImprovePlan:
    def test_never_decreases_objective_and_stays_feasible(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            sc = tiny_random_scenario(rng)
            serve = {}
            budgets = {}
            w = np.zeros(sc.n_households)
            for area in sc.areas:
                if rng.random() < 0.5:
                    continue
                serve[area.area_id] = 1
                budgets[area.area_id] = float(sc.smax_mbps / (2 * sc.n_areas))
                members = list(sc.household_indices(area.area_id))
                shares = rng.dirichlet(np.ones(len(members)))
                for k, s in zip(members, shares):
                    w[k] = s
            plan = make_plan(sc, serve, budgets, w)
            assert validate_feasibility(sc, plan) == []
            better = improve_plan(sc, plan)
            assert validate_feasibility(sc, better) == []
            assert total_true_objective(sc, better) >= total_true_objective(sc, plan) - 1e-12
            assert np.array_equal(better.z, plan.z)

    def test_consolidates_split_budget(self):
        # Two users, each demanding 1 Mbps, but only 1.5 available: splitting
        # wastes it, one saturated user is optimal.
        sc = make_scenario(
            [
                make_household("a", area_id=1, demand=1.0, tolerance=2, race=1),
                make_household("b", area_id=1, demand=1.0, tolerance=2, race=1),
            ],
            horizon_T=2,
            smax_mbps=1.5,
        )
        plan = make_plan(sc, {1: 1}, {1: 1.5}, [0.5, 0.5])
        better = improve_plan(sc, plan)
        vals = sorted(better.w.tolist())
        assert total_true_objective(sc, better) >= 0.99
        assert vals[1] > 0.9