"""Trade cleaning, monthly volume-weighted aggregation and spread attachment."""

from __future__ import annotations

import bisect
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from typing import Collection, Mapping, Sequence

import numpy as np
import pandas as pd

from .bonds import Bond, cashflows
from .curve import ZeroCurve, coupon_equivalent_riskfree_yield
from .spreads import TaxRegime, combined_retention, compute_spreads

log = logging.getLogger(__name__)

SIDES = ("customer_buy", "customer_sell", "interdealer")
MIN_TRADES = 10
ISSUANCE_BUFFER_DAYS = 15
MAX_MATURITY_DAYS = 36_500
CURVE_TOLERANCE_DAYS = 31

RULES = (
    (0, "Drop trades outside sample window"),
    (1, "Drop unmatched CUSIPs"),
    (2, "Drop if maturity (days) > 36,500 or < 0 or missing"),
    (3, "Drop if missing coupon or maturity"),
    (4, "Drop if USD price < 50 or > 150"),
    (5, "Drop primary market trades"),
    (6, "Drop trades within 15 days after issuance"),
    (7, "Drop trades with less than 1 year to maturity"),
    (8, "Drop if yield < 0 or > 50%"),
    (9, "Drop if < 10 transactions"),
)
SORT_KEYS = ["cusip", "trade_date", "side", "price", "yield", "par_volume"]


@dataclass(frozen=True)
class TradeRecord:
    cusip: str
    trade_date: date
    price: float
    yield_: float
    par_volume: float
    side: str = "customer_buy"

    def __post_init__(self) -> None:
        if self.par_volume <= 0 or self.price <= 0:
            raise ValueError("price and par_volume must be positive")
        if self.side not in SIDES:
            raise ValueError(f"unknown side {self.side!r}")


def trades_frame(records: Sequence[TradeRecord]) -> pd.DataFrame:
    return pd.DataFrame({
        "cusip": [r.cusip for r in records],
        "trade_date": pd.to_datetime([r.trade_date for r in records]),
        "price": [float(r.price) for r in records],
        "yield": [float(r.yield_) for r in records],
        "par_volume": [float(r.par_volume) for r in records],
        "side": [r.side for r in records],
    }, columns=["cusip", "trade_date", "price", "yield", "par_volume", "side"])


def canonical_order(trades: pd.DataFrame) -> pd.DataFrame:
    """Sort into a fixed order so results do not depend on input order."""
    return trades.sort_values(SORT_KEYS, kind="mergesort").reset_index(drop=True)


@dataclass
class CleanReport:
    input_trades: int
    input_cusips: int
    rows: list[dict] = field(default_factory=list)

    def dropped(self, rule: int) -> int:
        for r in self.rows:
            if r["rule"] == rule:
                return r["dropped"]
        raise KeyError(rule)

    @property
    def drops(self) -> list[int]:
        return [r["dropped"] for r in self.rows]

    @property
    def surviving_trades(self) -> int:
        return self.rows[-1]["trades"] if self.rows else self.input_trades

    @property
    def surviving_cusips(self) -> int:
        return self.rows[-1]["cusips"] if self.rows else self.input_cusips

    def to_frame(self) -> pd.DataFrame:
        head = {"rule": "", "step": "Input trades", "dropped": 0,
                "cusips": self.input_cusips, "trades": self.input_trades}
        return pd.DataFrame([head] + self.rows, columns=["rule", "step", "dropped", "cusips", "trades"])


def _bond_columns(trades: pd.DataFrame, bonds: Mapping[str, Bond]) -> pd.DataFrame:
    def attr(name):
        return trades["cusip"].map(lambda c: getattr(bonds[c], name) if c in bonds else None)

    out = pd.DataFrame(index=trades.index)
    out["matched"] = trades["cusip"].map(lambda c: c in bonds)
    out["dated"] = pd.to_datetime(attr("dated_date"))
    out["maturity"] = pd.to_datetime(attr("maturity_date"))
    out["coupon"] = pd.to_numeric(attr("coupon_rate"), errors="coerce")
    return out


def clean(
    trades: pd.DataFrame,
    bonds: Mapping[str, Bond],
    window: tuple[date, date] | None = None,
) -> tuple[pd.DataFrame, CleanReport]:
    """Apply the secondary-market screens in order and report drops per rule.

    ``window`` is the inclusive sample period; out-of-window trades are
    removed first and recorded as rule 0.
    """
    df = canonical_order(trades)
    info = _bond_columns(df, bonds)
    report = CleanReport(len(df), int(df["cusip"].nunique()))
    keep = np.ones(len(df), dtype=bool)

    td = df["trade_date"]
    days_to_mat = (info["maturity"] - td).dt.days
    days_since_dated = (td - info["dated"]).dt.days
    y = df["yield"]

    def step(rule: int, drop: pd.Series | np.ndarray) -> None:
        drop = np.asarray(drop, dtype=bool) & keep
        keep[drop] = False
        report.rows.append({
            "rule": rule,
            "step": RULES[rule][1],
            "dropped": int(drop.sum()),
            "cusips": int(df.loc[keep, "cusip"].nunique()),
            "trades": int(keep.sum()),
        })

    if window is not None:
        lo, hi = pd.Timestamp(window[0]), pd.Timestamp(window[1])
        step(0, (td < lo) | (td > hi))
    step(1, ~info["matched"])
    step(2, info["maturity"].isna() | (days_to_mat > MAX_MATURITY_DAYS) | (days_to_mat < 0))
    step(3, info["coupon"].isna() | info["maturity"].isna())
    step(4, (df["price"] < 50) | (df["price"] > 150))
    step(5, (days_since_dated <= 0).fillna(False))
    step(6, ((days_since_dated > 0) & (days_since_dated <= ISSUANCE_BUFFER_DAYS)).fillna(False))
    step(7, (days_to_mat / 365.25 < 1.0).fillna(False))
    step(8, y.isna() | (y < 0) | (y > 0.5))
    counts = df.loc[keep, "cusip"].value_counts()
    thin = df["cusip"].map(counts).fillna(0) < MIN_TRADES
    step(9, thin)

    assert sum(report.drops) == len(df) - int(keep.sum())
    return df.loc[keep].reset_index(drop=True), report


def _month_end(periods: pd.Series) -> pd.Series:
    return periods.dt.to_timestamp(how="end").dt.normalize()


def aggregate_monthly(
    trades: pd.DataFrame,
    bonds: Mapping[str, Bond],
    sides: Collection[str] = ("customer_buy",),
) -> pd.DataFrame:
    """One volume-weighted row per (cusip, calendar month) for the chosen sides."""
    cols = ["cusip", "year_month", "vw_yield", "vw_price", "total_volume",
            "n_trades", "remaining_maturity_years"]
    df = canonical_order(trades[trades["side"].isin(list(sides))])
    if df.empty:
        return pd.DataFrame(columns=cols)
    df = df.assign(
        year_month=df["trade_date"].dt.to_period("M"),
        yv=df["yield"] * df["par_volume"],
        pv=df["price"] * df["par_volume"],
    )
    g = df.groupby(["cusip", "year_month"], sort=True)
    out = g.agg(
        yv=("yv", "sum"), pv=("pv", "sum"), total_volume=("par_volume", "sum"),
        n_trades=("par_volume", "size"), y_min=("yield", "min"), y_max=("yield", "max"),
        p_min=("price", "min"), p_max=("price", "max"),
    ).reset_index()
    # rounding can push a weighted mean a hair outside its constituents
    out["vw_yield"] = (out["yv"] / out["total_volume"]).clip(out["y_min"], out["y_max"])
    out["vw_price"] = (out["pv"] / out["total_volume"]).clip(out["p_min"], out["p_max"])
    month_end = _month_end(out["year_month"])
    maturity = pd.to_datetime(out["cusip"].map(lambda c: bonds[c].maturity_date if c in bonds else None))
    out["remaining_maturity_years"] = (maturity - month_end).dt.days / 365.25
    out["year_month"] = out["year_month"].astype(str)
    out["n_trades"] = out["n_trades"].astype(int)
    return out[cols]


def nearest_curve(curves: Sequence[ZeroCurve], when: date, tolerance_days: int = CURVE_TOLERANCE_DAYS):
    """Curve whose as-of date is closest to ``when`` (earlier wins ties), or None."""
    dates = [c.as_of_date for c in curves]
    i = bisect.bisect_left(dates, when)
    best = None
    for j in (i - 1, i):
        if 0 <= j < len(curves):
            gap = abs((dates[j] - when).days)
            if gap <= tolerance_days and (best is None or gap < best[0]):
                best = (gap, curves[j])
    return None if best is None else best[1]


def attach_spreads(
    obs: pd.DataFrame,
    curves: Sequence[ZeroCurve],
    regime: TaxRegime,
    bonds: Mapping[str, Bond],
) -> tuple[pd.DataFrame, list[str], Counter]:
    """Add r_t, retention and the four spread outcomes to monthly observations.

    Returns the enriched rows, the months with no usable curve (their rows are
    left out) and a tally of missing state/local tax rates.
    """
    curves = sorted(curves, key=lambda c: c.as_of_date)
    missing_months: set[str] = set()
    missing_tax: Counter = Counter()
    rows = []
    for rec in obs.to_dict("records"):
        period = pd.Period(rec["year_month"], freq="M")
        month_end = period.to_timestamp(how="end").date()
        curve = nearest_curve(curves, month_end)
        if curve is None:
            missing_months.add(rec["year_month"])
            continue
        bond = bonds[rec["cusip"]]
        r = coupon_equivalent_riskfree_yield(curve, cashflows(bond, month_end))
        if bond.taxable:
            retention = 1.0
        else:
            retention = combined_retention(regime, bond.state, bond.county_fips, period.year,
                                           missing_tax, include_state=bond.tax_exempt_state)
        s = compute_spreads(rec["vw_yield"], r, retention)
        rows.append({
            **rec,
            "curve_date": curve.as_of_date,
            "retention": retention,
            "riskfree_yield": s.riskfree_yield,
            "spread": s.spread,
            "after_tax_yield": s.after_tax_yield,
            "after_tax_spread": s.after_tax_spread,
        })
    if missing_months:
        log.warning("no curve within %d days for months: %s", CURVE_TOLERANCE_DAYS,
                    ", ".join(sorted(missing_months)))
    cols = list(obs.columns) + ["curve_date", "retention", "riskfree_yield", "spread",
                                "after_tax_yield", "after_tax_spread"]
    return pd.DataFrame(rows, columns=cols), sorted(missing_months), missing_tax
