"""Underpricing and liquidity measures over a bond's first trading month."""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import timedelta
from typing import Mapping

import numpy as np
import pandas as pd

from .bonds import Bond
from .errors import InsufficientTrades, NoCustomerTrades, NoInterdealerTrades, ValidationError

WINDOW_DAYS = 30
OUTPUT_COLUMNS = ["cusip", "markup_bps", "markup_po_bps", "markup_pv_bps",
                  "price_dispersion", "amihud", "n_trades_window"]


@dataclass(frozen=True)
class IssuanceWindowTrades:
    """Trades in the first 30 calendar days after the dated date.

    ``trades`` holds trade_date, price, par_volume and side, in time order.
    """

    cusip: str
    offering_price: float
    trades: pd.DataFrame

    def __post_init__(self) -> None:
        if not 50.0 <= self.offering_price <= 150.0:
            raise ValidationError(f"{self.cusip}: offering price {self.offering_price} outside [50, 150]")

    def side(self, name: str) -> pd.DataFrame:
        return self.trades[self.trades["side"] == name]

    @classmethod
    def from_lists(cls, cusip, offering_price, prices, volumes, sides=None, dates=None):
        n = len(prices)
        sides = ["customer_buy"] * n if sides is None else list(sides)
        dates = [pd.Timestamp("2015-01-02")] * n if dates is None else pd.to_datetime(list(dates))
        df = pd.DataFrame({"trade_date": dates, "price": np.asarray(prices, float),
                           "par_volume": np.asarray(volumes, float), "side": sides})
        return cls(cusip, float(offering_price), df)


def issuance_window(trades: pd.DataFrame, bond: Bond, days: int = WINDOW_DAYS) -> IssuanceWindowTrades:
    if bond.dated_date is None or bond.offering_price is None:
        raise ValidationError(f"{bond.cusip}: dated date and offering price are required")
    start = pd.Timestamp(bond.dated_date)
    end = start + timedelta(days=days)
    sel = trades[(trades["cusip"] == bond.cusip) & (trades["trade_date"] >= start)
                 & (trades["trade_date"] < end)]
    # stable sort keeps within-day input order for the time-ordered Amihud path
    sel = sel.sort_values("trade_date", kind="mergesort")
    cols = ["trade_date", "price", "par_volume", "side"]
    return IssuanceWindowTrades(bond.cusip, bond.offering_price, sel[cols].reset_index(drop=True))


def _vw_price(df: pd.DataFrame) -> float:
    v = df["par_volume"].to_numpy()
    return float(np.dot(v, df["price"].to_numpy()) / v.sum())


def markup_offering(w: IssuanceWindowTrades) -> float:
    """Trade-weighted premium of customer purchases over the offering price, bps."""
    buys = w.side("customer_buy")
    if buys.empty:
        raise NoCustomerTrades(w.cusip)
    v = buys["par_volume"].to_numpy()
    o = w.offering_price
    return float(1e4 * np.dot(v, buys["price"].to_numpy() - o) / (o * v.sum()))


def markup_avg_po(w: IssuanceWindowTrades) -> float:
    """Average customer price against the offering price, bps."""
    buys = w.side("customer_buy")
    if buys.empty:
        raise NoCustomerTrades(w.cusip)
    return 1e4 * (_vw_price(buys) - w.offering_price) / w.offering_price


def markup_interdealer(w: IssuanceWindowTrades) -> float:
    """Average customer price against the average interdealer price, bps."""
    buys = w.side("customer_buy")
    dealer = w.side("interdealer")
    if buys.empty:
        raise NoCustomerTrades(w.cusip)
    if dealer.empty:
        raise NoInterdealerTrades(w.cusip)
    v_bar = _vw_price(dealer)
    return 1e4 * (_vw_price(buys) - v_bar) / v_bar


def price_dispersion(w: IssuanceWindowTrades) -> float:
    """Mean over days of the volume-weighted RMS deviation from that day's consensus price.

    Only days with at least two trades (any side) contribute.
    """
    daily = []
    for _, day in w.trades.groupby(w.trades["trade_date"].dt.normalize(), sort=True):
        if len(day) < 2:
            continue
        v = day["par_volume"].to_numpy()
        # centring on the first price keeps a constant day exactly at zero
        d = day["price"].to_numpy() - day["price"].iloc[0]
        m = np.dot(v, d) / v.sum()
        daily.append(math.sqrt(np.dot(v, (d - m) ** 2) / v.sum()))
    if not daily:
        raise InsufficientTrades(f"{w.cusip}: no day with two or more trades")
    return float(np.mean(daily))


def amihud(w: IssuanceWindowTrades) -> float:
    """Mean |log return| per unit volume over consecutive trades, times 1e6."""
    if len(w.trades) < 2:
        raise InsufficientTrades(f"{w.cusip}: Amihud needs at least two trades")
    p = w.trades["price"].to_numpy()
    v = w.trades["par_volume"].to_numpy()
    ratios = np.abs(np.log(p[1:] / p[:-1])) / v[1:]
    return float(ratios.mean() * 1e6)


def liquidity_table(trades: pd.DataFrame, bonds: Mapping[str, Bond]) -> pd.DataFrame:
    """All measures for every bond with an offering price; failures become NaN."""
    rows = []
    for cusip in sorted(bonds):
        bond = bonds[cusip]
        if bond.offering_price is None or bond.dated_date is None:
            continue
        w = issuance_window(trades, bond)
        if w.trades.empty:
            continue
        row = {"cusip": cusip, "n_trades_window": len(w.trades)}
        for col, fn in (("markup_bps", markup_offering), ("markup_po_bps", markup_avg_po),
                        ("markup_pv_bps", markup_interdealer), ("price_dispersion", price_dispersion),
                        ("amihud", amihud)):
            try:
                row[col] = fn(w)
            except (NoCustomerTrades, NoInterdealerTrades, InsufficientTrades):
                row[col] = math.nan
        rows.append(row)
    return pd.DataFrame(rows, columns=OUTPUT_COLUMNS)
