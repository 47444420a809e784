"""The compiled pivot kernel and the NumPy fallback must be interchangeable:
same pivots, same objective, same solution vector, bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from equicomm import _simplex_py
from equicomm.envelope import build_envelopes
from equicomm.lp import LpStatus, build_relaxation
from equicomm.scenario import GlobalParams, generate_scenario
from equicomm.simplex import active_kernel, solve_lp

from conftest import LOW_DEMAND_MARGINALS

try:
    from equicomm import _simplex_cy
except ImportError:
    _simplex_cy = None


@pytest.mark.skipif(_simplex_cy is None, reason="compiled kernel not built")
class TestKernelParity:
    def test_relaxation_lps_identical(self):
        rng = np.random.default_rng(5150)
        for i in range(10):
            params = GlobalParams(
                horizon_T=int(rng.integers(2, 10)),
                smax_mbps=float(rng.choice([10.0, 50.0, 300.0])),
                freezeout_delta=int(rng.integers(0, 3)),
                theta=10.0,
                tau_source="race",
            )
            sc = generate_scenario(
                seed=i, n_areas=int(rng.integers(1, 8)), users_per_area=(1, 4),
                marginals=LOW_DEMAND_MARGINALS, params=params,
            )
            p = build_relaxation(sc, build_envelopes(sc))
            a = solve_lp(p, kernel=_simplex_cy)
            b = solve_lp(p, kernel=_simplex_py)
            assert a.status is LpStatus.OPTIMAL and b.status is LpStatus.OPTIMAL
            assert a.objective_value == b.objective_value
            assert a.iterations == b.iterations
            assert np.array_equal(a.x_values, b.x_values)

    def test_kernel_selection_env_override(self):
        env = dict(os.environ, EQUICOMM_PURE_PYTHON="1")
        out = subprocess.run(
            [sys.executable, "-c", "from equicomm.simplex import active_kernel; print(active_kernel())"],
            capture_output=True, text=True, env=env,
        )
        assert out.stdout.strip() == "python"

    def test_default_prefers_compiled(self):
        assert active_kernel() == "compiled"
