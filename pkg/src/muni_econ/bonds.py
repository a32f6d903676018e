"""Bond reference records, cash flows, price/yield/duration math and ratings."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from importlib import resources
from typing import Mapping

import numpy as np

from .curve import CashflowSchedule, semiannual_price, solve_semiannual_yield
from .errors import Matured, UnknownGrade, ValidationError

DAYS_PER_YEAR = 365.25
FLAG_FIELDS = (
    "callable",
    "insured",
    "general_obligation",
    "bank_qualified",
    "refunding",
    "credit_enhanced",
)


def year_fraction(start: date, end: date) -> float:
    """ACT/365.25."""
    return (end - start).days / DAYS_PER_YEAR


@dataclass(frozen=True)
class Bond:
    cusip: str
    dated_date: date | None
    maturity_date: date | None
    coupon_rate: float | None
    amount_issued: float
    offering_price: float | None = None
    offering_yield: float | None = None
    sale_method: str = "competitive"
    callable: bool = False
    insured: bool = False
    general_obligation: bool = False
    bank_qualified: bool = False
    refunding: bool = False
    credit_enhanced: bool = False
    tax_exempt_federal: bool = True
    tax_exempt_state: bool = True
    state: str = ""
    county_fips: str = ""
    rating: int | None = None

    def __post_init__(self) -> None:
        if len(self.cusip) != 9:
            raise ValidationError(f"cusip must have 9 characters: {self.cusip!r}")
        if self.dated_date and self.maturity_date and self.maturity_date <= self.dated_date:
            raise ValidationError(f"{self.cusip}: maturity_date must follow dated_date")
        if self.coupon_rate is not None and not 0.0 <= self.coupon_rate <= 0.20:
            raise ValidationError(f"{self.cusip}: coupon_rate {self.coupon_rate} outside [0, 0.20]")
        if self.offering_price is not None and not 50.0 <= self.offering_price <= 150.0:
            raise ValidationError(f"{self.cusip}: offering_price {self.offering_price} outside [50, 150]")
        if self.rating is not None and not 1 <= self.rating <= 28:
            raise ValidationError(f"{self.cusip}: rating {self.rating} outside [1, 28]")
        if self.sale_method not in ("negotiated", "competitive"):
            raise ValidationError(f"{self.cusip}: unknown sale_method {self.sale_method!r}")

    @property
    def negotiated(self) -> bool:
        return self.sale_method == "negotiated"

    @property
    def taxable(self) -> bool:
        return not self.tax_exempt_federal


def coupon_schedule(coupon_rate: float, years: float) -> CashflowSchedule:
    """Semiannual coupons stepped back from maturity in 0.5-year increments."""
    if years <= 0:
        raise Matured(f"no cash flows remain ({years:.4f} years to maturity)")
    coupon = 100.0 * coupon_rate / 2.0
    times = []
    k = 0
    while years - 0.5 * k > 0:
        times.append(years - 0.5 * k)
        k += 1
    times.reverse()
    amounts = [coupon] * len(times)
    amounts[-1] += 100.0
    if coupon == 0.0:
        return CashflowSchedule((years,), (100.0,))
    return CashflowSchedule(tuple(times), tuple(amounts))


def cashflows(bond: Bond, as_of: date) -> CashflowSchedule:
    if bond.maturity_date is None or bond.coupon_rate is None:
        raise ValidationError(f"{bond.cusip}: missing coupon or maturity")
    if as_of >= bond.maturity_date:
        raise Matured(f"{bond.cusip} matured on {bond.maturity_date}")
    return coupon_schedule(bond.coupon_rate, year_fraction(as_of, bond.maturity_date))


def price_from_yield(cf: CashflowSchedule, y: float) -> float:
    return semiannual_price(cf.t, cf.a, y)


def ytm_from_price(cf: CashflowSchedule, price: float) -> float:
    """Semiannual yield to maturity; raises NoRoot outside the [-0.5, 2.0] bracket."""
    return solve_semiannual_yield(cf.t, cf.a, price)


def macaulay_duration(cf: CashflowSchedule, y: float) -> float:
    pv = cf.a * (1.0 + y / 2.0) ** (-2.0 * cf.t)
    # normalising first makes a single flow's weight exactly 1
    return float(np.dot(cf.t, pv / pv.sum()))


def wealth_impact(outstanding: float, macaulay_years: float, y: float, dy: float) -> float:
    """Bondholder value change from a yield move, via modified duration."""
    if outstanding < 0:
        raise ValidationError("outstanding must be non-negative")
    return outstanding * macaulay_years * dy / (1.0 + y / 2.0)


def annual_interest_delta(principal: float, dy: float) -> float:
    return principal * dy


class RatingScale:
    """Ordered letter-grade scale; larger integer means better credit."""

    # Moody's symbols mapped onto the S&P/Fitch letters of the default table.
    MOODYS = {
        "Aaa": "AAA", "Aa1": "AA+", "Aa2": "AA", "Aa3": "AA-",
        "A1": "A+", "A2": "A", "A3": "A-",
        "Baa1": "BBB+", "Baa2": "BBB", "Baa3": "BBB-",
        "Ba1": "BB+", "Ba2": "BB", "Ba3": "BB-",
        "B1": "B+", "B2": "B", "B3": "B-",
        "Caa1": "CCC+", "Caa2": "CCC", "Caa3": "CCC-", "Ca": "CC",
    }

    def __init__(self, table: Mapping[str, int]):
        scores = sorted(table.values())
        if len(set(table.values())) != len(table):
            raise ValidationError("rating scale must be a bijection")
        if scores != list(range(1, len(table) + 1)):
            raise ValidationError("rating scores must be consecutive integers from 1")
        self._to_score = dict(table)
        self._to_grade = {v: k for k, v in table.items()}

    @classmethod
    def from_csv(cls, path=None) -> "RatingScale":
        if path is None:
            text = resources.files("muni_econ.data").joinpath("ratings.csv").read_text()
        else:
            with open(path, newline="") as fh:
                text = fh.read()
        rows = csv.DictReader(text.splitlines())
        return cls({r["grade"].strip(): int(r["score"]) for r in rows})

    def __len__(self) -> int:
        return len(self._to_score)

    @property
    def grades(self) -> list[str]:
        """Grades from best to worst."""
        return [self._to_grade[s] for s in sorted(self._to_grade, reverse=True)]

    def encode(self, grade: str) -> int:
        g = grade.strip()
        g = self.MOODYS.get(g, g)
        try:
            return self._to_score[g]
        except KeyError:
            raise UnknownGrade(f"unknown rating grade {grade!r}") from None

    def decode(self, score: int) -> str:
        try:
            return self._to_grade[score]
        except KeyError:
            raise UnknownGrade(f"no grade with score {score!r}") from None


_DEFAULT_SCALE: RatingScale | None = None


def default_rating_scale() -> RatingScale:
    global _DEFAULT_SCALE
    if _DEFAULT_SCALE is None:
        _DEFAULT_SCALE = RatingScale.from_csv()
    return _DEFAULT_SCALE


def encode_rating(grade: str, scale: RatingScale | None = None) -> int:
    return (scale or default_rating_scale()).encode(grade)


def build_bond_controls(bond: Bond, obs_date: date) -> dict[str, float]:
    """Bond-level regression controls at ``obs_date``.

    A missing rating is carried as NaN so listwise deletion can drop it later.
    """
    if bond.maturity_date is None or obs_date >= bond.maturity_date:
        raise Matured(f"{bond.cusip} has no remaining maturity at {obs_date}")
    if bond.amount_issued <= 0:
        raise ValidationError(f"{bond.cusip}: amount_issued must be positive")
    remaining = year_fraction(obs_date, bond.maturity_date)
    controls = {
        "coupon": math.nan if bond.coupon_rate is None else bond.coupon_rate,
        "log_amount": math.log(bond.amount_issued),
    }
    for name in FLAG_FIELDS:
        controls[name] = float(getattr(bond, name))
    controls["rating"] = math.nan if bond.rating is None else float(bond.rating)
    controls["remaining_maturity"] = remaining
    controls["inverse_maturity"] = 1.0 / remaining
    return controls
