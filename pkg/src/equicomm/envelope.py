"""Two-piece concave over-estimator of a weighted sigmoid.

envelope(x) = min(a*x + b, cap) with the line anchored at x = 0 and tangent to
the sigmoid's concave branch; when the tangency point falls beyond the
resource box, the secant through the box edge is used instead (still an
over-estimator there, since the secant slope from the anchor is increasing up
to tangency).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .utility import sigmoid_rate_utility

BISECT_TOL = 1e-9
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class EnvelopePiece:
    a: float
    b: float
    cap: float
    x0: float
    y0: float
    x1: float
    y1: float
    theta: float
    r_hat: float


def envelope_value(piece: EnvelopePiece, x: float) -> float:
    return min(piece.a * x + piece.b, piece.cap)


def _sigmoid_slope(x, r_hat, theta, tau):
    s = sigmoid_rate_utility(x, r_hat, theta)
    return tau * theta * s * (1.0 - s)


def _tangency_residual(x, r_hat, theta, tau, y0):
    # Zero where the line from (0, y0) with the sigmoid's local slope passes
    # through the sigmoid, i.e. slope(x)*x - (value(x) - y0) = 0.
    return _sigmoid_slope(x, r_hat, theta, tau) * x - (
        tau * sigmoid_rate_utility(x, r_hat, theta) - y0
    )


def build_envelope(tau: float, r_hat: float, theta: float, s_max: float) -> EnvelopePiece:
    """Fit the affine piece by bisection on the tangency condition over
    (r_hat, s_max]; fall back to the secant through (s_max, f(s_max)) when no
    tangency exists inside the box."""
    if tau <= 0 or r_hat <= 0 or theta <= 0 or s_max <= 0:
        raise ValueError("tau, r_hat, theta, s_max must all be positive")
    y0 = tau * sigmoid_rate_utility(0.0, r_hat, theta)

    lo = r_hat * (1.0 + 1e-12)
    if lo >= s_max or _tangency_residual(s_max, r_hat, theta, tau, y0) > 0.0:
        # Tangency beyond the box: secant through the anchor and the box edge.
        x1 = s_max
        y1 = tau * sigmoid_rate_utility(x1, r_hat, theta)
    else:
        hi = s_max
        for _ in range(BISECT_MAX_ITER):
            mid = 0.5 * (lo + hi)
            if _tangency_residual(mid, r_hat, theta, tau, y0) > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= BISECT_TOL:
                break
        x1 = 0.5 * (lo + hi)
        y1 = tau * sigmoid_rate_utility(x1, r_hat, theta)

    a = (y1 - y0) / x1
    return EnvelopePiece(
        a=a, b=y0, cap=tau, x0=0.0, y0=y0, x1=x1, y1=y1, theta=theta, r_hat=r_hat
    )


@lru_cache(maxsize=None)
def _cached_envelope(tau, r_hat, theta, s_max):
    return build_envelope(tau, r_hat, theta, s_max)


def build_envelopes(scenario) -> dict[tuple[int, int, int], EnvelopePiece]:
    """One piece per (household index, area id, slot) with slot <= deadline.

    Coefficients depend only on (tau, r_hat) for fixed scenario parameters, so
    construction is cached on that key; the returned mapping still carries the
    full triple index.
    """
    pieces = {}
    for k, h in enumerate(scenario.households):
        piece = _cached_envelope(
            scenario.tau(h), h.demand_mbps, scenario.theta, scenario.smax_mbps
        )
        for t in range(1, h.tolerance_days + 1):
            pieces[(k, h.area_id, t)] = piece
    return pieces
