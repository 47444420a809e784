"""Spearman rank and Pearson correlation with two-tailed p-values.

p-values use the t approximation for both methods: t = r*sqrt((n-2)/(1-r^2))
against Student's t with n-2 degrees of freedom, evaluated through the
regularized incomplete beta function. Perfect correlations report p = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .scenario import Scenario

P_SIGNIFICANT = 0.05

ROW_ATTRIBUTES = ("hardship", "perception", "tolerance", "demand")
COL_ATTRIBUTES = ("income", "education", "race")

_ATTRIBUTE_FIELDS = {
    "hardship": "hardship_code",
    "perception": "perception_code",
    "tolerance": "tolerance_days",
    "demand": "demand_mbps",
    "income": "income_code",
    "education": "education_code",
    "race": "race_code",
}


class UndefinedCorrelationError(ValueError):
    """Zero variance (or too few points) makes the coefficient undefined."""


@dataclass(frozen=True)
class CorrelationEntry:
    x_attr: str
    y_attr: str
    method: str
    coefficient: float | None
    p_value: float | None
    n: int
    significant: bool
    error: str | None = None


@dataclass(frozen=True)
class CorrelationReport:
    pairs: tuple[CorrelationEntry, ...]


def _as_checked_vectors(xs, ys):
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise ValueError("inputs must be 1-D vectors of equal length")
    if x.size < 3:
        raise UndefinedCorrelationError("need at least 3 observations")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("zero variance in an input vector")
    return x, y


def _t_p_value(r: float, n: int) -> float:
    if abs(r) >= 1.0:
        return 0.0
    if r == 0.0:
        return 1.0
    dof = n - 2
    t2 = r * r * dof / (1.0 - r * r)
    # Two-tailed survival of |t|: regularized incomplete beta at dof/(dof+t^2).
    return float(betainc(dof / 2.0, 0.5, dof / (dof + t2)))


def pearson(xs, ys) -> tuple[float, float]:
    """Product-moment coefficient and its two-tailed p-value."""
    x, y = _as_checked_vectors(xs, ys)
    xc = x - x.mean()
    yc = y - y.mean()
    r = float(np.dot(xc, yc) / np.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    r = max(-1.0, min(1.0, r))
    return r, _t_p_value(r, x.size)


def rank_average_ties(xs) -> np.ndarray:
    """1-based ranks with tied values sharing their average rank."""
    x = np.asarray(xs, dtype=float)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and x[order[j + 1]] == x[order[i]]:
            j += 1
        avg = 0.5 * (i + j) + 1.0
        ranks[order[i: j + 1]] = avg
        i = j + 1
    return ranks


def spearman(xs, ys) -> tuple[float, float]:
    """Pearson on average-tied ranks, same p-value approximation."""
    x, y = _as_checked_vectors(xs, ys)
    return pearson(rank_average_ties(x), rank_average_ties(y))


def attribute_vector(scenario: Scenario, attribute: str) -> np.ndarray:
    try:
        field = _ATTRIBUTE_FIELDS[attribute]
    except KeyError:
        raise ValueError(f"unknown attribute {attribute!r}") from None
    return np.array([getattr(h, field) for h in scenario.households], dtype=float)


def correlation_table(
    scenario: Scenario,
    rows=ROW_ATTRIBUTES,
    cols=COL_ATTRIBUTES,
) -> CorrelationReport:
    """Both methods for every (row, col) attribute pair; undefined cells are
    reported in place without failing the rest of the table."""
    entries = []
    n = scenario.n_households
    for row in rows:
        xs = attribute_vector(scenario, row)
        for col in cols:
            ys = attribute_vector(scenario, col)
            for method, fn in (("spearman", spearman), ("pearson", pearson)):
                try:
                    coeff, p = fn(xs, ys)
                    entries.append(
                        CorrelationEntry(
                            x_attr=row,
                            y_attr=col,
                            method=method,
                            coefficient=coeff,
                            p_value=p,
                            n=n,
                            significant=p < P_SIGNIFICANT,
                        )
                    )
                except UndefinedCorrelationError as exc:
                    entries.append(
                        CorrelationEntry(
                            x_attr=row,
                            y_attr=col,
                            method=method,
                            coefficient=None,
                            p_value=None,
                            n=n,
                            significant=False,
                            error=str(exc),
                        )
                    )
    return CorrelationReport(pairs=tuple(entries))


def write_correlation_csv(report: CorrelationReport, fh) -> None:
    fh.write("method,row,col,coefficient,p_value,significant\n")
    for e in report.pairs:
        coeff = f"{e.coefficient:.9g}" if e.coefficient is not None else "undefined"
        p = f"{e.p_value:.9g}" if e.p_value is not None else "undefined"
        fh.write(f"{e.method},{e.x_attr},{e.y_attr},{coeff},{p},{str(e.significant).lower()}\n")
