import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from equicomm.scenario import GlobalParams, HouseholdProfile, Scenario, _assemble


def make_household(
    hid="h1",
    area_id=1,
    income=3,
    race=3,
    education=2,
    demand=1.0,
    tolerance=5,
    hardship=2,
    perception=3,
):
    return HouseholdProfile(
        id=hid,
        area_id=area_id,
        income_code=income,
        race_code=race,
        education_code=education,
        demand_mbps=float(demand),
        tolerance_days=tolerance,
        hardship_code=hardship,
        perception_code=perception,
    )


def make_scenario(
    households,
    horizon_T=5,
    smax_mbps=100.0,
    freezeout_delta=1,
    theta=10.0,
    tau_source="race",
) -> Scenario:
    params = GlobalParams(
        horizon_T=horizon_T,
        smax_mbps=smax_mbps,
        freezeout_delta=freezeout_delta,
        theta=theta,
        tau_source=tau_source,
    )
    return _assemble(list(households), params)


LOW_DEMAND_MARGINALS = {
    "income": {1: 0.3, 3: 0.4, 5: 0.3},
    "race": {1: 0.5, 3: 0.5},
    "education": {1: 0.2, 2: 0.2, 4: 0.2, 5: 0.2, 7: 0.2},
    "demand": {1: 0.5, 10: 0.5},
    "hardship": {1: 0.25, 2: 0.25, 3: 0.25, 4: 0.25},
    "perception": {1: 0.2, 2: 0.2, 3: 0.2, 4: 0.2, 5: 0.2},
}


@pytest.fixture
def two_user_scenario():
    """One area, two equal-priority users sharing a 10 Mbps pool."""
    return make_scenario(
        [
            make_household("a", area_id=1, demand=1.0, tolerance=3),
            make_household("b", area_id=1, demand=1.0, tolerance=3),
        ],
        horizon_T=3,
        smax_mbps=10.0,
    )
