"""County finance ratios, jobs-multiplier exposure, county ratings and issuance growth."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from datetime import date
from typing import Iterable, Mapping

import pandas as pd

from .bonds import Bond
from .errors import MissingField, NoRatedBonds, ValidationError, ZeroBase


@dataclass(frozen=True)
class CountyYear:
    fips: str
    year: int
    labor_force: float | None = None
    unemployment_rate: float | None = None
    total_revenue: float | None = None
    state_igr: float | None = None
    total_expenditure: float | None = None
    interest_general: float | None = None
    interest_total: float | None = None
    total_lt_debt: float | None = None
    debt_retired: float | None = None
    property_tax: float | None = None
    population: float | None = None

    def __post_init__(self) -> None:
        if self.labor_force is not None and self.labor_force <= 0:
            raise ValidationError(f"{self.fips} {self.year}: labor_force must be positive")
        if self.unemployment_rate is not None and not 0 <= self.unemployment_rate <= 1:
            raise ValidationError(f"{self.fips} {self.year}: unemployment_rate outside [0, 1]")

    @classmethod
    def from_mapping(cls, row: Mapping) -> "CountyYear":
        kw = {}
        for f in fields(cls):
            v = row.get(f.name)
            if f.name in ("fips", "year"):
                kw[f.name] = str(v) if f.name == "fips" else int(v)
            else:
                kw[f.name] = None if v is None or (isinstance(v, float) and math.isnan(v)) else float(v)
        return cls(**kw)

    def need(self, name: str) -> float:
        v = getattr(self, name)
        if v is None:
            raise MissingField(name)
        return v


def revenue_measures(cy: CountyYear) -> tuple[float, float, float]:
    """Own-source revenue net of non-interest spending (three variants)."""
    own = cy.need("total_revenue") - cy.need("state_igr")
    r1 = own - (cy.need("total_expenditure") - cy.need("interest_total"))
    r2 = own - (cy.need("total_expenditure") - cy.need("interest_general"))
    r3 = own + cy.need("interest_general")
    return r1, r2, r3


@dataclass
class InterestRatios:
    int_rev1: float | None
    int_rev2: float | None
    int_rev3: float | None
    int_debt: float | None
    net_debt: float
    flags: list[str] = field(default_factory=list)

    @property
    def excluded(self) -> bool:
        return any(f.startswith("zero:") for f in self.flags)


def _ratio(num: float, den: float, name: str, flags: list[str]) -> float | None:
    if den == 0:
        flags.append(f"zero:{name}")
        return None
    if den < 0:
        flags.append(f"negative:{name}")
    return num / den


def interest_ratios(cy: CountyYear, lag: CountyYear) -> InterestRatios:
    """Interest from ``cy`` (year t-1) over fiscal scales from ``lag`` (year t-2).

    Zero denominators give None and a ``zero:`` flag; negative ones keep
    their sign and get a ``negative:`` flag.
    """
    flags: list[str] = []
    r1, r2, r3 = revenue_measures(lag)
    ig = cy.need("interest_general")
    return InterestRatios(
        int_rev1=_ratio(ig, r1, "int_rev1", flags),
        int_rev2=_ratio(ig, r2, "int_rev2", flags),
        int_rev3=_ratio(cy.need("interest_total"), r3, "int_rev3", flags),
        int_debt=_ratio(ig, lag.need("total_lt_debt"), "int_debt", flags),
        net_debt=cy.need("total_lt_debt") - cy.need("debt_retired"),
        flags=flags,
    )


def interest_ratio_panel(county: pd.DataFrame) -> tuple[pd.DataFrame, int]:
    """Ratios keyed by (fips, year t) from rows t-1 and t-2; returns rows and excluded count."""
    rows = {(str(r["fips"]), int(r["year"])): CountyYear.from_mapping(r) for r in county.to_dict("records")}
    out, excluded = [], 0
    for (fips, year) in sorted(rows):
        prev, lag = rows.get((fips, year)), rows.get((fips, year - 1))
        if lag is None:
            continue
        try:
            ratios = interest_ratios(prev, lag)
        except MissingField:
            excluded += 1
            continue
        if ratios.excluded:
            excluded += 1
            continue
        out.append({"fips": fips, "year": year + 1, "int_rev1": ratios.int_rev1,
                    "int_rev2": ratios.int_rev2, "int_rev3": ratios.int_rev3,
                    "int_debt": ratios.int_debt, "net_debt": ratios.net_debt,
                    "flags": ";".join(ratios.flags)})
    cols = ["fips", "year", "int_rev1", "int_rev2", "int_rev3", "int_debt", "net_debt", "flags"]
    return pd.DataFrame(out, columns=cols), excluded


@dataclass(frozen=True)
class MultiplierInputs:
    """Value-added weights of an industry's upstream/downstream sectors and a county's sector shares."""

    industry: str
    weights_up: Mapping[str, float]
    shares: Mapping[str, float]
    weights_down: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, m in (("weights_up", self.weights_up), ("weights_down", self.weights_down)):
            if any(v < 0 for v in m.values()):
                raise ValidationError(f"{name} must be non-negative")
        if any(not 0 <= v <= 1 for v in self.shares.values()):
            raise ValidationError("sector shares must lie in [0, 1]")


def jobs_multiplier(inputs: MultiplierInputs) -> float:
    """Sum over sectors of (upstream + downstream weight) times the county share."""
    sectors = sorted(set(inputs.weights_up) | set(inputs.weights_down))
    return math.fsum(
        (inputs.weights_up.get(s, 0.0) + inputs.weights_down.get(s, 0.0)) * inputs.shares.get(s, 0.0)
        for s in sectors
    )


def multiplier_table(weights: pd.DataFrame, shares: pd.DataFrame) -> pd.DataFrame:
    """Wage- and employment-share exposures for every (fips, industry) pair.

    ``weights`` has industry, sector, weight_up, weight_down; ``shares`` has
    fips, sector, wage_share, emp_share.
    """
    rows = []
    by_ind = {k: g for k, g in weights.groupby("industry", sort=True)}
    by_fips = {str(k): g for k, g in shares.groupby("fips", sort=True)}
    for fips, sh in by_fips.items():
        wage = dict(zip(sh["sector"], sh["wage_share"]))
        emp = dict(zip(sh["sector"], sh["emp_share"]))
        for ind, w in by_ind.items():
            up = dict(zip(w["sector"], w["weight_up"]))
            down = dict(zip(w["sector"], w["weight_down"]))
            rows.append({
                "fips": fips, "industry": ind,
                "exposure_wage": jobs_multiplier(MultiplierInputs(ind, up, wage, down)),
                "exposure_emp": jobs_multiplier(MultiplierInputs(ind, up, emp, down)),
            })
    return pd.DataFrame(rows, columns=["fips", "industry", "exposure_wage", "exposure_emp"])


def months_between(start: date, end: date) -> int:
    """Whole calendar months from ``start``'s month to ``end``'s month."""
    return (end.year - start.year) * 12 + (end.month - start.month)


def county_rating(bonds: Iterable[Bond], deal_date: date | None = None) -> float:
    """Mean numeric rating of rated issues dated 12-24 months before ``deal_date``.

    Without a deal date every rated bond passed in counts.
    """
    scores = []
    for b in bonds:
        if b.rating is None:
            continue
        if deal_date is not None:
            if b.dated_date is None or not 12 <= months_between(b.dated_date, deal_date) <= 24:
                continue
        scores.append(b.rating)
    if not scores:
        raise NoRatedBonds("no rated bonds in the rating window")
    return math.fsum(scores) / len(scores)


BASE_WINDOW = (-18, -13)


def issuance_growth(
    issues: Iterable[tuple[date, float]],
    event_date: date,
    horizon_halves: int,
) -> list[tuple[int, float]]:
    """Par issued per half-year relative to the six months ending 13 months pre-event.

    Returns (first month of the half-year relative to the event, ratio) for
    ``horizon_halves`` consecutive half-years starting at month -12.
    """
    lo, hi = BASE_WINDOW
    base = 0.0
    halves = [0.0] * horizon_halves
    for when, par in issues:
        m = months_between(event_date, when)
        if lo <= m <= hi:
            base += par
        h = (m - (hi + 1)) // 6
        if m > hi and h < horizon_halves:
            halves[h] += par
    if not base > 0:
        raise ZeroBase("no par issued in the base window (months -18 to -13)")
    return [(hi + 1 + 6 * h, halves[h] / base) for h in range(horizon_halves)]
