"""Problem-instance data model: households, areas, attribute coding, CSV I/O,
and the seedable synthetic scenario generator.

Every household carries the survey-derived attribute codes plus the planning
triple (priority weight source, demanded rate in Mbps, deadline in days).
Rates are held internally in Mbps everywhere; the CLI converts the total
resource pool from Gbps.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Attribute coding tables. The priority weight tau of a household is the coded
# value of the selected source attribute (income, race, or education), used raw.
INCOME_CODES = {
    "Above $100,000": 1,
    "$49,999 - $99,999": 3,
    "Less than $49,999": 5,
}
RACE_CODES = {
    "White": 1,
    "Non-White": 3,
}
EDUCATION_CODES = {
    "Graduate school": 1,
    "Bachelor": 2,
    "Some college": 4,
    "High school": 5,
    "Less than high school": 7,
}
DEMAND_CODES_MBPS = {
    "Communicate with family": 1,
    "Use social media": 10,
    "Remote work or education": 500,
    "Streaming entertainment": 1000,
}
HARDSHIP_CODES = {
    "A little": 1,
    "A moderate amount": 2,
    "A lot": 3,
    "A great deal": 4,
}
PERCEPTION_CODES = {
    "Not important": 1,
    "Slightly important": 2,
    "Moderately important": 3,
    "Very important": 4,
    "Extremely important": 5,
}

VALID_INCOME = frozenset(INCOME_CODES.values())
VALID_RACE = frozenset(RACE_CODES.values())
VALID_EDUCATION = frozenset(EDUCATION_CODES.values())
VALID_DEMAND_MBPS = frozenset(float(v) for v in DEMAND_CODES_MBPS.values())
VALID_HARDSHIP = frozenset(HARDSHIP_CODES.values())
VALID_PERCEPTION = frozenset(PERCEPTION_CODES.values())

TAU_SOURCES = ("income", "race", "education")

# Max tolerance seen in the survey responses; the generator never draws above it.
MAX_SURVEY_TOLERANCE_DAYS = 14

CSV_HEADER = (
    "id,area_id,income_code,race_code,education_code,"
    "demand_mbps,tolerance_days,hardship_code,perception_code"
)

_INT_RE = re.compile(r"^[+-]?[0-9]+$")
_DECIMAL_RE = re.compile(r"^[+-]?([0-9]+(\.[0-9]*)?|\.[0-9]+)([eE][+-]?[0-9]+)?$")


class ScenarioError(Exception):
    """Base for scenario construction failures."""


class ScenarioParseError(ScenarioError):
    """Malformed file content; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ScenarioValidationError(ScenarioError):
    """Structurally parseable but semantically invalid input."""


@dataclass(frozen=True)
class HouseholdProfile:
    id: str
    area_id: int
    income_code: int
    race_code: int
    education_code: int
    demand_mbps: float
    tolerance_days: int
    hardship_code: int
    perception_code: int


@dataclass(frozen=True)
class Area:
    area_id: int
    household_ids: tuple[str, ...]


@dataclass(frozen=True)
class GlobalParams:
    horizon_T: int = 15
    smax_mbps: float = 10_000.0
    freezeout_delta: int = 1
    theta: float = 10.0
    tau_source: str = "race"


@dataclass(frozen=True)
class Scenario:
    areas: tuple[Area, ...]
    households: tuple[HouseholdProfile, ...]
    horizon_T: int
    smax_mbps: float
    freezeout_delta: int
    theta: float
    tau_source: str

    @property
    def n_areas(self):
        return len(self.areas)

    @property
    def n_households(self):
        return len(self.households)

    def area_index(self, area_id: int) -> int:
        """Position of an area in `areas` (also its row in plan matrices)."""
        return self._area_pos[area_id]

    def household_indices(self, area_id: int) -> tuple[int, ...]:
        """Global household indices belonging to one area, in row order."""
        return self._members[area_id]

    def tau(self, household: HouseholdProfile) -> float:
        return tau_of(household, self.tau_source)

    def tau_vector(self) -> np.ndarray:
        return np.array([self.tau(h) for h in self.households], dtype=float)

    def demand_vector(self) -> np.ndarray:
        return np.array([h.demand_mbps for h in self.households], dtype=float)

    def deadline_vector(self) -> np.ndarray:
        return np.array([h.tolerance_days for h in self.households], dtype=int)

    def __post_init__(self):
        pos = {a.area_id: i for i, a in enumerate(self.areas)}
        by_id = {h.id: k for k, h in enumerate(self.households)}
        members = {
            a.area_id: tuple(by_id[hid] for hid in a.household_ids) for a in self.areas
        }
        object.__setattr__(self, "_area_pos", pos)
        object.__setattr__(self, "_members", members)


def tau_of(household: HouseholdProfile, source: str) -> float:
    """Priority weight: the coded value of the chosen sociodemographic attribute."""
    if source == "income":
        return float(household.income_code)
    if source == "race":
        return float(household.race_code)
    if source == "education":
        return float(household.education_code)
    raise ScenarioValidationError(f"unknown tau source {source!r}")


def demand_from_choices(demands_mbps) -> float:
    """Collapse a multi-choice service-demand selection to one rate (the max)."""
    demands = [float(d) for d in demands_mbps]
    if not demands:
        raise ScenarioValidationError("empty service-demand selection")
    return max(demands)


def _parse_int(text, field, line):
    text = text.strip()
    if not _INT_RE.match(text):
        raise ScenarioParseError(f"field {field!r}: not an integer: {text!r}", line)
    return int(text)


def _parse_decimal(text, field, line):
    text = text.strip()
    if not _DECIMAL_RE.match(text):
        raise ScenarioParseError(f"field {field!r}: not a decimal: {text!r}", line)
    return float(text)


def _parse_demand(text, line):
    # Multi-choice survey answers may arrive ';'-separated; keep the max.
    parts = [p for p in text.split(";") if p.strip()]
    if not parts:
        raise ScenarioParseError("field 'demand_mbps': empty", line)
    values = [_parse_decimal(p, "demand_mbps", line) for p in parts]
    for v in values:
        if v <= 0:
            raise ScenarioParseError(f"field 'demand_mbps': must be > 0, got {v}", line)
    return demand_from_choices(values)


def _check_code(value, valid, field, line=None):
    if value not in valid:
        msg = f"field {field!r}: code {value} outside {sorted(valid)}"
        raise ScenarioValidationError(f"line {line}: {msg}" if line else msg)


def _validate_household(h: HouseholdProfile, horizon_T: int, line=None):
    _check_code(h.income_code, VALID_INCOME, "income_code", line)
    _check_code(h.race_code, VALID_RACE, "race_code", line)
    _check_code(h.education_code, VALID_EDUCATION, "education_code", line)
    _check_code(h.hardship_code, VALID_HARDSHIP, "hardship_code", line)
    _check_code(h.perception_code, VALID_PERCEPTION, "perception_code", line)
    if h.demand_mbps <= 0:
        raise ScenarioValidationError(f"household {h.id}: demand_mbps must be > 0")
    if h.tolerance_days < 1:
        raise ScenarioValidationError(f"household {h.id}: tolerance_days must be >= 1")
    if h.tolerance_days > horizon_T:
        where = f"line {line}: " if line else ""
        raise ScenarioValidationError(
            f"{where}household {h.id}: tolerance_days {h.tolerance_days} "
            f"exceeds horizon {horizon_T}"
        )


def _assemble(households, params: GlobalParams) -> Scenario:
    if not households:
        raise ScenarioValidationError("no households")
    if params.horizon_T < 1:
        raise ScenarioValidationError("horizon_T must be >= 1")
    if params.smax_mbps <= 0:
        raise ScenarioValidationError("smax_mbps must be > 0")
    if params.freezeout_delta < 0:
        raise ScenarioValidationError("freezeout_delta must be >= 0")
    if params.theta <= 0:
        raise ScenarioValidationError("theta must be > 0")
    if params.tau_source not in TAU_SOURCES:
        raise ScenarioValidationError(f"tau_source must be one of {TAU_SOURCES}")
    seen = set()
    for h in households:
        if h.id in seen:
            raise ScenarioValidationError(f"duplicate household id {h.id!r}")
        seen.add(h.id)
    # Group by area id preserving first-appearance order; row order kept within.
    order: list[int] = []
    groups: dict[int, list[str]] = {}
    for h in households:
        if h.area_id not in groups:
            groups[h.area_id] = []
            order.append(h.area_id)
        groups[h.area_id].append(h.id)
    areas = tuple(Area(a, tuple(groups[a])) for a in order)
    return Scenario(
        areas=areas,
        households=tuple(households),
        horizon_T=params.horizon_T,
        smax_mbps=params.smax_mbps,
        freezeout_delta=params.freezeout_delta,
        theta=params.theta,
        tau_source=params.tau_source,
    )


def load_scenario(path, params: GlobalParams) -> Scenario:
    """Read the household CSV at `path` and build a validated Scenario."""
    lines = Path(path).read_text().splitlines()
    rows = [(i + 1, ln) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise ScenarioValidationError("no households")
    header_line, header = rows[0]
    if [c.strip() for c in header.split(",")] != CSV_HEADER.split(","):
        raise ScenarioParseError(f"expected header {CSV_HEADER!r}", header_line)
    households = []
    for line_no, raw in rows[1:]:
        fields = raw.split(",")
        if len(fields) != 9:
            raise ScenarioParseError(f"expected 9 fields, got {len(fields)}", line_no)
        h = HouseholdProfile(
            id=fields[0].strip(),
            area_id=_parse_int(fields[1], "area_id", line_no),
            income_code=_parse_int(fields[2], "income_code", line_no),
            race_code=_parse_int(fields[3], "race_code", line_no),
            education_code=_parse_int(fields[4], "education_code", line_no),
            demand_mbps=_parse_demand(fields[5], line_no),
            tolerance_days=_parse_int(fields[6], "tolerance_days", line_no),
            hardship_code=_parse_int(fields[7], "hardship_code", line_no),
            perception_code=_parse_int(fields[8], "perception_code", line_no),
        )
        _validate_household(h, params.horizon_T, line_no)
        households.append(h)
    if not households:
        raise ScenarioValidationError("no households")
    return _assemble(households, params)


def save_scenario(scenario: Scenario, path) -> None:
    """Write the household CSV; numbers use full-precision repr so a reload
    reproduces the scenario exactly."""
    out = [CSV_HEADER]
    for h in scenario.households:
        demand = repr(h.demand_mbps) if h.demand_mbps != int(h.demand_mbps) else str(int(h.demand_mbps))
        out.append(
            f"{h.id},{h.area_id},{h.income_code},{h.race_code},{h.education_code},"
            f"{demand},{h.tolerance_days},{h.hardship_code},{h.perception_code}"
        )
    Path(path).write_text("\n".join(out) + "\n")


_PARAM_KEYS = ("T", "smax_gbps", "delta", "theta", "tau_source")


def load_params(path) -> GlobalParams:
    """Parse the flat key-value parameter file (keys: T, smax_gbps, delta,
    theta, tau_source)."""
    values = {}
    for i, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ScenarioParseError("expected key=value", i)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _PARAM_KEYS:
            raise ScenarioParseError(f"unknown key {key!r}", i)
        values[key] = (val, i)
    missing = [k for k in _PARAM_KEYS if k not in values]
    if missing:
        raise ScenarioValidationError(f"missing parameter keys: {missing}")
    tau_source = values["tau_source"][0]
    if tau_source not in TAU_SOURCES:
        raise ScenarioValidationError(f"tau_source must be one of {TAU_SOURCES}")
    return GlobalParams(
        horizon_T=_parse_int(values["T"][0], "T", values["T"][1]),
        smax_mbps=_parse_decimal(values["smax_gbps"][0], "smax_gbps", values["smax_gbps"][1]) * 1000.0,
        freezeout_delta=_parse_int(values["delta"][0], "delta", values["delta"][1]),
        theta=_parse_decimal(values["theta"][0], "theta", values["theta"][1]),
        tau_source=tau_source,
    )


def save_params(params: GlobalParams, path) -> None:
    smax_gbps = params.smax_mbps / 1000.0
    smax = repr(smax_gbps) if smax_gbps != int(smax_gbps) else str(int(smax_gbps))
    theta = repr(params.theta) if params.theta != int(params.theta) else str(int(params.theta))
    Path(path).write_text(
        f"T={params.horizon_T}\n"
        f"smax_gbps={smax}\n"
        f"delta={params.freezeout_delta}\n"
        f"theta={theta}\n"
        f"tau_source={params.tau_source}\n"
    )


def uniform_marginals() -> dict[str, dict[int, float]]:
    """Uniform categorical distribution over every coded attribute."""

    def unif(codes):
        vals = sorted(codes)
        return {v: 1.0 / len(vals) for v in vals}

    return {
        "income": unif(VALID_INCOME),
        "race": unif(VALID_RACE),
        "education": unif(VALID_EDUCATION),
        "demand": {int(v): 1.0 / len(VALID_DEMAND_MBPS) for v in sorted(VALID_DEMAND_MBPS)},
        "hardship": unif(VALID_HARDSHIP),
        "perception": unif(VALID_PERCEPTION),
    }


_MARGINAL_CODE_SETS = {
    "income": VALID_INCOME,
    "race": VALID_RACE,
    "education": VALID_EDUCATION,
    "demand": frozenset(int(v) for v in VALID_DEMAND_MBPS),
    "hardship": VALID_HARDSHIP,
    "perception": VALID_PERCEPTION,
}


def _check_marginals(marginals):
    for attr, codes in _MARGINAL_CODE_SETS.items():
        if attr not in marginals:
            raise ScenarioValidationError(f"missing marginal for {attr!r}")
        dist = marginals[attr]
        extra = set(dist) - codes
        if extra:
            raise ScenarioValidationError(f"marginal {attr!r}: unknown codes {sorted(extra)}")
        if any(p < 0 for p in dist.values()):
            raise ScenarioValidationError(f"marginal {attr!r}: negative probability")
        total = sum(dist.values())
        if abs(total - 1.0) > 1e-9:
            raise ScenarioValidationError(f"marginal {attr!r}: probabilities sum to {total}, not 1")


def generate_scenario(
    seed: int,
    n_areas: int,
    users_per_area: tuple[int, int],
    marginals: dict[str, dict[int, float]] | None = None,
    params: GlobalParams = GlobalParams(),
) -> Scenario:
    """Draw a synthetic scenario; deterministic for a fixed seed.

    `users_per_area` is an inclusive (min, max) range. Attribute values are
    drawn independently from the given categorical marginals (uniform when
    omitted); tolerances are uniform on 1..min(14, T).
    """
    if n_areas < 1:
        raise ScenarioValidationError("n_areas must be >= 1")
    lo, hi = users_per_area
    if lo < 1 or hi < lo:
        raise ScenarioValidationError("users_per_area must satisfy 1 <= min <= max")
    if marginals is None:
        marginals = uniform_marginals()
    _check_marginals(marginals)

    rng = np.random.default_rng(seed)
    max_tol = min(MAX_SURVEY_TOLERANCE_DAYS, params.horizon_T)

    def draw(attr):
        dist = marginals[attr]
        codes = sorted(dist)
        probs = np.array([dist[c] for c in codes], dtype=float)
        probs = probs / probs.sum()
        return int(codes[rng.choice(len(codes), p=probs)])

    households = []
    serial = 0
    for area_id in range(1, n_areas + 1):
        count = int(rng.integers(lo, hi + 1))
        for _ in range(count):
            serial += 1
            households.append(
                HouseholdProfile(
                    id=f"h{serial:05d}",
                    area_id=area_id,
                    income_code=draw("income"),
                    race_code=draw("race"),
                    education_code=draw("education"),
                    demand_mbps=float(draw("demand")),
                    tolerance_days=int(rng.integers(1, max_tol + 1)),
                    hardship_code=draw("hardship"),
                    perception_code=draw("perception"),
                )
            )
    return _assemble(households, params)


