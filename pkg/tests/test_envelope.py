import numpy as np
import pytest

from equicomm.envelope import build_envelope, build_envelopes, envelope_value
from equicomm.utility import sigmoid_rate_utility

from conftest import make_household, make_scenario


def weighted_sigmoid(tau, r_hat, theta, x):
    return tau * sigmoid_rate_utility(x, r_hat, theta)


class TestAnchor:
    def test_value_at_zero_is_exact(self):
        piece = build_envelope(3.0, 5.0, 10.0, 100.0)
        assert piece.b == weighted_sigmoid(3.0, 5.0, 10.0, 0.0)
        assert envelope_value(piece, 0.0) == piece.b

    def test_cap_reached_for_large_x(self):
        piece = build_envelope(2.0, 1.0, 10.0, 50.0)
        assert envelope_value(piece, 49.0) == 2.0

    def test_positive_inputs_required(self):
        for bad in [(0.0, 1, 1, 1), (1, -1, 1, 1), (1, 1, 0, 1), (1, 1, 1, 0)]:
            with pytest.raises(ValueError):
                build_envelope(*bad)


class TestTangency:
    def test_tangency_conditions(self):
        piece = build_envelope(1.0, 5.0, 10.0, 100.0)
        assert piece.x1 > piece.r_hat
        # Line meets curve at x1 ...
        assert piece.a * piece.x1 + piece.b == pytest.approx(piece.y1, abs=1e-6)
        # ... with matching slope.
        s = sigmoid_rate_utility(piece.x1, 5.0, 10.0)
        assert piece.a == pytest.approx(10.0 * s * (1.0 - s), rel=1e-5)

    def test_envelope_value_at_x1(self):
        piece = build_envelope(4.0, 2.0, 8.0, 60.0)
        assert envelope_value(piece, piece.x1) == pytest.approx(piece.y1, abs=1e-6)

    def test_steep_limit_slope(self):
        # As the sigmoid approaches a step, the line tends to tau / r_hat.
        errs = []
        for theta in (10.0, 100.0, 1000.0):
            piece = build_envelope(2.0, 10.0, theta, 500.0)
            errs.append(abs(piece.a - 0.2) / 0.2)
        assert errs[0] < 0.06
        assert errs[1] < errs[0] and errs[2] < errs[1]
        assert errs[2] < 0.005

    def test_secant_fallback_when_demand_near_box(self):
        piece = build_envelope(1.0, 80.0, 0.05, 100.0)
        grid = np.linspace(0.0, 100.0, 2001)
        env = np.minimum(piece.a * grid + piece.b, piece.cap)
        assert np.all(env >= weighted_sigmoid(1.0, 80.0, 0.05, grid) - 1e-9)

    def test_secant_fallback_when_demand_beyond_box(self):
        piece = build_envelope(3.0, 120.0, 10.0, 100.0)
        assert piece.x1 == 100.0
        grid = np.linspace(0.0, 100.0, 2001)
        env = np.minimum(piece.a * grid + piece.b, piece.cap)
        assert np.all(env >= weighted_sigmoid(3.0, 120.0, 10.0, grid) - 1e-9)


class TestDomination:
    def test_domination_on_grid(self):
        piece = build_envelope(1.0, 5.0, 10.0, 100.0)
        grid = np.linspace(0.0, 100.0, 10_000)
        env = np.minimum(piece.a * grid + piece.b, piece.cap)
        assert np.all(env >= weighted_sigmoid(1.0, 5.0, 10.0, grid) - 1e-9)

    def test_random_triples_dominate(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            tau = float(rng.uniform(0.5, 8))
            r_hat = float(rng.uniform(0.5, 900))
            theta = float(rng.uniform(0.2, 40))
            s_max = float(rng.uniform(r_hat * 0.3, 2000))
            piece = build_envelope(tau, r_hat, theta, s_max)
            grid = np.linspace(0.0, s_max, 1000)
            env = np.minimum(piece.a * grid + piece.b, piece.cap)
            assert np.all(env >= weighted_sigmoid(tau, r_hat, theta, grid) - 1e-9)

    def test_midpoint_concavity(self):
        rng = np.random.default_rng(29)
        piece = build_envelope(2.0, 7.0, 5.0, 80.0)
        for _ in range(300):
            x1, x2 = rng.uniform(0, 80, 2)
            mid = envelope_value(piece, 0.5 * (x1 + x2))
            assert mid >= 0.5 * (envelope_value(piece, x1) + envelope_value(piece, x2)) - 1e-9

    def test_deviation_shrinks_with_steepness(self):
        # Measured from the tangency point on (where the cap replaces the
        # sigmoid tail); below the tangency the line steepens toward a step
        # as theta grows, so the gap there cannot shrink.
        tau, r_hat, s_max = 2.0, 5.0, 60.0
        devs = []
        for theta in (1.0, 5.0, 10.0, 50.0):
            piece = build_envelope(tau, r_hat, theta, s_max)
            grid = np.linspace(piece.x1, s_max, 2000)
            env = np.minimum(piece.a * grid + piece.b, piece.cap)
            devs.append(float(np.max(env - weighted_sigmoid(tau, r_hat, theta, grid))))
        assert all(b <= a + 1e-12 for a, b in zip(devs, devs[1:]))


class TestScenarioEnvelopes:
    def test_one_piece_per_slot_within_deadline(self):
        sc = make_scenario(
            [
                make_household("a", area_id=1, demand=1.0, tolerance=2),
                make_household("b", area_id=2, demand=10.0, tolerance=4),
            ],
            horizon_T=5,
            smax_mbps=50.0,
        )
        pieces = build_envelopes(sc)
        assert set(pieces) == {(0, 1, 1), (0, 1, 2), (1, 2, 1), (1, 2, 2), (1, 2, 3), (1, 2, 4)}

    def test_cache_shares_identical_parameters(self):
        sc = make_scenario(
            [
                make_household("a", area_id=1, race=3, demand=10.0, tolerance=2),
                make_household("b", area_id=2, race=3, demand=10.0, tolerance=3),
            ],
            horizon_T=4,
            smax_mbps=50.0,
        )
        pieces = build_envelopes(sc)
        assert pieces[(0, 1, 1)] is pieces[(1, 2, 3)]
        assert pieces[(0, 1, 1)] == pieces[(0, 1, 2)]
