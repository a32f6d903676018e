"""Treasury zero curve, discounting, and the coupon-equivalent risk-free yield.

Zero rates are continuously compounded and linearly interpolated in tenor,
flat beyond the first and last tenor.  Bond yields are quoted with
semiannual compounding, so the risk-free comparator for a bond is the
semiannual yield that reprices its own cash flows at the curve value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date
from typing import Sequence

import numpy as np

from .errors import NoRoot, NonFiniteRate, ValidationError

YIELD_BRACKET = (-0.5, 2.0)
PRICE_TOL = 1e-10


@dataclass(frozen=True)
class ZeroCurve:
    as_of_date: date
    tenors: tuple[float, ...]
    rates: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tenors", tuple(float(t) for t in self.tenors))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.tenors) != len(self.rates):
            raise ValidationError("tenors and rates differ in length")
        if len(self.tenors) < 2:
            raise ValidationError("a zero curve needs at least 2 points")
        if any(t <= 0 for t in self.tenors):
            raise ValidationError("tenors must be positive")
        if any(b <= a for a, b in zip(self.tenors, self.tenors[1:])):
            raise ValidationError("tenors must be strictly increasing")
        if not all(math.isfinite(r) for r in self.rates):
            raise ValidationError("zero rates must be finite")

    @classmethod
    def flat(cls, rate: float, as_of_date: date = date(2000, 1, 1)) -> "ZeroCurve":
        return cls(as_of_date, (0.25, 30.0), (rate, rate))

    def zero_rate(self, t):
        """Linearly interpolated zero rate; flat outside the quoted tenors."""
        z = np.interp(t, self.tenors, self.rates)
        if not np.all(np.isfinite(z)):
            raise NonFiniteRate(f"interpolated zero rate is not finite at t={t!r}")
        return z


@dataclass(frozen=True)
class CashflowSchedule:
    """Future cash flows per 100 face, times in years from valuation."""

    times: tuple[float, ...]
    amounts: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "amounts", tuple(float(a) for a in self.amounts))
        if len(self.times) != len(self.amounts):
            raise ValidationError("times and amounts differ in length")
        if not self.times:
            raise ValidationError("cash-flow schedule is empty")
        if self.times[0] <= 0 or any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("cash-flow times must be positive and strictly increasing")
        if any(a <= 0 for a in self.amounts):
            raise ValidationError("cash-flow amounts must be positive")

    @classmethod
    def from_flows(cls, flows: Sequence[tuple[float, float]]) -> "CashflowSchedule":
        """Build from (time, amount) pairs, merging flows that share a time."""
        merged: dict[float, float] = {}
        for t, a in flows:
            merged[float(t)] = merged.get(float(t), 0.0) + float(a)
        times = sorted(merged)
        return cls(tuple(times), tuple(merged[t] for t in times))

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times)

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.amounts)

    def nominal_total(self) -> float:
        return math.fsum(self.amounts)


def discount_factor(curve: ZeroCurve, t):
    """exp(-z(t) t) with z linearly interpolated; 1.0 at t = 0."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValidationError("discount horizon must be non-negative")
    df = np.exp(-curve.zero_rate(t_arr) * t_arr)
    return float(df) if df.ndim == 0 else df


def riskfree_price(curve: ZeroCurve, cf: CashflowSchedule) -> float:
    return float(np.dot(cf.a, discount_factor(curve, cf.t)))


def semiannual_price(times: np.ndarray, amounts: np.ndarray, y: float) -> float:
    base = 1.0 + y / 2.0
    if base <= 0:
        raise ValidationError("yield must exceed -2 under semiannual compounding")
    return float(np.dot(amounts, base ** (-2.0 * times)))


def _price_and_slope(times: np.ndarray, amounts: np.ndarray, y: float) -> tuple[float, float]:
    base = 1.0 + y / 2.0
    disc = base ** (-2.0 * times)
    price = float(np.dot(amounts, disc))
    slope = float(np.dot(amounts * -times, disc / base))
    return price, slope


def solve_semiannual_yield(
    times: np.ndarray,
    amounts: np.ndarray,
    target: float,
    bracket: tuple[float, float] = YIELD_BRACKET,
    tol: float = PRICE_TOL,
    max_iter: int = 500,
) -> float:
    """Yield y with sum(a (1+y/2)^(-2t)) == target, Newton steps guarded by bisection.

    Price is strictly decreasing in y for positive flows, so the bracket
    either contains exactly one root or none.  The iteration always starts
    from y = 0, so the answer does not depend on any caller guess.
    """
    lo, hi = bracket
    f_lo = semiannual_price(times, amounts, lo) - target
    f_hi = semiannual_price(times, amounts, hi) - target
    if abs(f_lo) < tol:
        return lo
    if abs(f_hi) < tol:
        return hi
    if not (f_hi < 0.0 < f_lo):
        raise NoRoot(
            f"price {target!r} outside achievable range "
            f"[{f_hi + target:.6f}, {f_lo + target:.6f}] on yield bracket {bracket}"
        )
    y = 0.0 if lo < 0.0 < hi else 0.5 * (lo + hi)
    best_y, best_gap = y, math.inf
    for _ in range(max_iter):
        price, slope = _price_and_slope(times, amounts, y)
        gap = price - target
        if abs(gap) < best_gap:
            best_y, best_gap = y, abs(gap)
        if abs(gap) < tol:
            return y
        if gap > 0:
            lo = y
        else:
            hi = y
        step = y - gap / slope if slope != 0 else math.nan
        y = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(y)):
            return best_y
    raise NoRoot(f"yield solver did not reach |gap| < {tol} (best {best_gap:.3e})")


def coupon_equivalent_riskfree_yield(curve: ZeroCurve, cf: CashflowSchedule) -> float:
    """Semiannual yield that reprices ``cf`` at its treasury-curve value."""
    target = riskfree_price(curve, cf)
    if not target > 0:
        raise NoRoot("risk-free price must be positive")
    return solve_semiannual_yield(cf.t, cf.a, target)
