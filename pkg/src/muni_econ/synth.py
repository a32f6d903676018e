"""Seeded synthetic data with known ground truth.

Everything draws from numpy's counter-based Philox bit generator keyed by
the seed, so a seed reproduces the same numbers on any platform.
"""

from __future__ import annotations

import string
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta

import numpy as np
import pandas as pd

from .bonds import Bond
from .curve import ZeroCurve

PRNG = "numpy.random.Philox"
STATES = ("CA", "NY", "TX", "FL", "IL", "PA", "OH", "WA", "NJ", "GA")
NO_INCOME_TAX = {"TX", "FL", "WA"}


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


@dataclass(frozen=True)
class PanelDGP:
    """Unit-by-period panel of treated/control pairs with staggered event dates.

    ``beta`` is the treatment effect (bps) switched on for treated units
    once event time reaches zero; ``pretrend`` adds slope * event time to
    treated units before the event.  ``cluster_sd`` is a shock shared by all
    units of a cluster in a period.
    """

    seed: int = 0
    n_pairs: int = 40
    n_periods: int = 36
    n_clusters: int = 20
    beta: float = 15.25
    unit_sd: float = 20.0
    time_sd: float = 10.0
    pair_sd: float = 5.0
    cluster_sd: float = 4.0
    noise_sd: float = 6.0
    control_coef: float = 0.5
    pretrend: float = 0.0
    assignment: str = "random_within_pair"
    event_span: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.n_pairs < 2 or self.n_periods < 2 or self.n_clusters < 2:
            raise ValueError("n_pairs, n_periods and n_clusters must all be at least 2")
        if self.assignment not in ("random_within_pair", "alternate"):
            raise ValueError(f"unknown assignment rule {self.assignment!r}")


def gen_panel(dgp: PanelDGP) -> tuple[pd.DataFrame, dict]:
    rng = rng_for(dgp.seed, 1)
    n_units = 2 * dgp.n_pairs
    T = dgp.n_periods
    lo, hi = dgp.event_span or (T // 3, T - T // 3)
    event_at = rng.integers(lo, hi + 1, size=dgp.n_pairs)
    if dgp.assignment == "alternate":
        treated_first = np.ones(dgp.n_pairs, dtype=bool)
    else:
        treated_first = rng.random(dgp.n_pairs) < 0.5
    cluster_of = rng.integers(0, dgp.n_clusters, size=n_units)
    unit_fe = rng.normal(0, dgp.unit_sd, n_units)
    time_fe = rng.normal(0, dgp.time_sd, T)
    pair_fe = rng.normal(0, dgp.pair_sd, dgp.n_pairs)
    cluster_shock = rng.normal(0, dgp.cluster_sd, (dgp.n_clusters, T))

    unit = np.repeat(np.arange(n_units), T)
    period = np.tile(np.arange(T), n_units)
    pair = unit // 2
    treat = ((unit % 2 == 0) == treated_first[pair]).astype(float)
    event_time = period - event_at[pair]
    post = (event_time >= 0).astype(float)
    x = rng.normal(0, 1, unit.size)
    noise = rng.normal(0, dgp.noise_sd, unit.size)
    cl = cluster_of[unit]
    y = (unit_fe[unit] + time_fe[period] + pair_fe[pair]
         + dgp.beta * treat * post
         + dgp.pretrend * treat * np.minimum(event_time, 0)
         + dgp.control_coef * x + cluster_shock[cl, period] + noise)
    df = pd.DataFrame({
        "unit": unit, "pair": pair, "period": period, "cluster": cl,
        "treat": treat, "post": post, "event_time": event_time, "x": x, "y": y,
    })
    manifest = {"generator": "gen_panel", "prng": PRNG, **asdict(dgp)}
    manifest["event_span"] = f"{lo}:{hi}"
    return df, manifest


@dataclass(frozen=True)
class ViolationRecipe:
    """Number of trades to plant that fail exactly one cleaning rule (the first they reach)."""

    outside_window: int = 0
    unmatched: int = 0
    bad_maturity: int = 0
    missing_coupon: int = 0
    bad_price: int = 0
    primary: int = 0
    early: int = 0
    short_maturity: int = 0
    bad_yield: int = 0
    thin: int = 0

    def __post_init__(self) -> None:
        if any(v < 0 for v in asdict(self).values()):
            raise ValueError("violation counts must be non-negative")

    def by_rule(self) -> dict[int, int]:
        return dict(enumerate(asdict(self).values()))


SYNTH_WINDOW = (date(2005, 1, 1), date(2049, 12, 31))


@dataclass
class TradeFixture:
    bonds: dict[str, Bond]
    trades: pd.DataFrame
    expected: dict[int, int]
    window: tuple[date, date] = SYNTH_WINDOW
    manifest: dict = field(default_factory=dict)


def _cusip(rng: np.random.Generator, taken: set[str]) -> str:
    alphabet = np.array(list(string.digits + string.ascii_uppercase))
    while True:
        c = "".join(rng.choice(alphabet, 9))
        if c not in taken:
            taken.add(c)
            return c


def _rand_date(rng, start: date, end: date) -> date:
    return start + timedelta(days=int(rng.integers(0, (end - start).days + 1)))


def _bond(rng, cusip: str, fips_pool, **over) -> Bond:
    dated = _rand_date(rng, date(2010, 1, 1), date(2014, 12, 31))
    years = int(rng.integers(5, 21))
    state = str(rng.choice(STATES))
    spec = dict(
        cusip=cusip,
        dated_date=dated,
        maturity_date=date(dated.year + years, dated.month, min(dated.day, 28)),
        coupon_rate=round(float(rng.uniform(0.02, 0.05)), 4),
        amount_issued=round(float(rng.uniform(1e6, 5e7)), 0),
        offering_price=round(float(rng.uniform(98, 104)), 3),
        offering_yield=round(float(rng.uniform(0.015, 0.04)), 5),
        sale_method=str(rng.choice(["negotiated", "competitive"])),
        callable=bool(rng.random() < 0.4),
        insured=bool(rng.random() < 0.2),
        general_obligation=bool(rng.random() < 0.5),
        bank_qualified=bool(rng.random() < 0.3),
        refunding=bool(rng.random() < 0.3),
        credit_enhanced=bool(rng.random() < 0.1),
        state=state,
        county_fips=str(rng.choice(fips_pool)),
        rating=int(rng.integers(14, 29)),
    )
    spec.update(over)
    return Bond(**spec)


def _trade(rng, cusip, when, price=None, yld=None, side=None):
    return {
        "cusip": cusip,
        "trade_date": pd.Timestamp(when),
        "price": round(float(rng.uniform(92, 108)), 3) if price is None else price,
        "yield": round(float(rng.uniform(0.01, 0.05)), 5) if yld is None else yld,
        "par_volume": float(rng.integers(1, 200) * 5000),
        "side": str(rng.choice(["customer_buy", "customer_buy", "customer_sell", "interdealer"]))
        if side is None else side,
    }


def _clean_date(rng, bond: Bond) -> date:
    start = bond.dated_date + timedelta(days=16)
    end = bond.maturity_date - timedelta(days=400)
    return _rand_date(rng, start, end)


def gen_trades(seed: int, n_bonds: int, recipe: ViolationRecipe | None = None) -> TradeFixture:
    """Clean trades on ``n_bonds`` bonds plus exactly the violations in ``recipe``."""
    recipe = recipe or ViolationRecipe()
    if n_bonds < 1:
        raise ValueError("n_bonds must be at least 1")
    rng = rng_for(seed, 2)
    taken: set[str] = set()
    fips_pool = [f"{s:05d}" for s in rng.choice(np.arange(1001, 56000), 12, replace=False)]
    bonds = {}
    base = []
    for _ in range(n_bonds):
        b = _bond(rng, _cusip(rng, taken), fips_pool)
        bonds[b.cusip] = b
        base.append(b)
    rows = []
    for b in base:
        for _ in range(int(rng.integers(12, 25))):
            rows.append(_trade(rng, b.cusip, _clean_date(rng, b)))

    def pick():
        return base[int(rng.integers(0, len(base)))]

    for _ in range(recipe.outside_window):
        b = pick()
        rows.append(_trade(rng, b.cusip, _rand_date(rng, date(2050, 1, 1), date(2055, 12, 31))))
    for _ in range(recipe.unmatched):
        rows.append(_trade(rng, _cusip(rng, taken), _rand_date(rng, date(2011, 1, 1), date(2018, 12, 31))))
    if recipe.bad_maturity:
        b = _bond(rng, _cusip(rng, taken), fips_pool)
        # more than 36,500 days out from any trade date used here
        b = Bond(**{**asdict(b), "maturity_date": date(2125, 1, 1)})
        bonds[b.cusip] = b
        for _ in range(recipe.bad_maturity):
            rows.append(_trade(rng, b.cusip, _rand_date(rng, b.dated_date + timedelta(days=16),
                                                        date(2019, 12, 31))))
    if recipe.missing_coupon:
        b = _bond(rng, _cusip(rng, taken), fips_pool, coupon_rate=None)
        bonds[b.cusip] = b
        for _ in range(recipe.missing_coupon):
            rows.append(_trade(rng, b.cusip, _clean_date(rng, b)))
    for i in range(recipe.bad_price):
        b = pick()
        rows.append(_trade(rng, b.cusip, _clean_date(rng, b), price=45.0 if i % 2 == 0 else 155.0))
    for _ in range(recipe.primary):
        b = pick()
        rows.append(_trade(rng, b.cusip, b.dated_date - timedelta(days=int(rng.integers(0, 30)))))
    for _ in range(recipe.early):
        b = pick()
        rows.append(_trade(rng, b.cusip, b.dated_date + timedelta(days=int(rng.integers(1, 16)))))
    for _ in range(recipe.short_maturity):
        b = pick()
        rows.append(_trade(rng, b.cusip, b.maturity_date - timedelta(days=int(rng.integers(1, 365)))))
    for i in range(recipe.bad_yield):
        b = pick()
        rows.append(_trade(rng, b.cusip, _clean_date(rng, b), yld=-0.01 if i % 2 == 0 else 0.6))
    left = recipe.thin
    while left > 0:
        n = min(left, int(rng.integers(1, 10)))
        b = _bond(rng, _cusip(rng, taken), fips_pool)
        bonds[b.cusip] = b
        for _ in range(n):
            rows.append(_trade(rng, b.cusip, _clean_date(rng, b)))
        left -= n

    order = rng.permutation(len(rows))
    trades = pd.DataFrame([rows[i] for i in order],
                          columns=["cusip", "trade_date", "price", "yield", "par_volume", "side"])
    manifest = {"generator": "gen_trades", "prng": PRNG, "seed": seed, "n_bonds": n_bonds,
                **{f"recipe.{k}": v for k, v in asdict(recipe).items()}}
    return TradeFixture(bonds, trades, recipe.by_rule(), SYNTH_WINDOW, manifest)


def gen_curves(seed: int, start: date, end: date) -> list[ZeroCurve]:
    """Month-end upward-sloping curves following a small random walk in level."""
    rng = rng_for(seed, 3)
    tenors = (0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0)
    shape = np.array([0.0, 0.001, 0.002, 0.004, 0.008, 0.012, 0.015, 0.016])
    level = 0.015
    curves = []
    for m in pd.period_range(start, end, freq="M"):
        level = float(np.clip(level + rng.normal(0, 0.0015), 0.0, 0.05))
        rates = np.round(level + shape, 6)
        curves.append(ZeroCurve(m.to_timestamp(how="end").date(), tenors, tuple(rates.tolist())))
    return curves


def gen_state_tax(seed: int, years=range(2005, 2050)) -> dict[tuple[str, int], float]:
    rng = rng_for(seed, 4)
    base = {s: 0.0 if s in NO_INCOME_TAX else round(float(rng.uniform(0.03, 0.10)), 4) for s in STATES}
    return {(s, y): base[s] for s in STATES for y in years}


def gen_county(seed: int, fips: list[str], years=range(2005, 2021)) -> pd.DataFrame:
    rng = rng_for(seed, 5)
    rows = []
    for f in sorted(fips):
        lf = float(rng.uniform(2e4, 5e5))
        ur = float(rng.uniform(0.03, 0.09))
        rev = lf * float(rng.uniform(1.5, 3.0)) * 1000
        for y in years:
            lf *= float(np.exp(rng.normal(0.005, 0.01)))
            ur = float(np.clip(ur + rng.normal(0, 0.004), 0.02, 0.15))
            rev *= float(np.exp(rng.normal(0.02, 0.03)))
            debt = rev * float(rng.uniform(0.5, 1.5))
            rows.append({
                "fips": f, "year": y, "labor_force": round(lf), "unemployment_rate": round(ur, 4),
                "total_revenue": round(rev), "state_igr": round(rev * float(rng.uniform(0.2, 0.4))),
                "total_expenditure": round(rev * float(rng.uniform(0.5, 0.65))),
                "interest_general": round(debt * 0.03), "interest_total": round(debt * 0.035),
                "total_lt_debt": round(debt), "debt_retired": round(debt * float(rng.uniform(0.05, 0.1))),
                "property_tax": round(rev * 0.3), "population": round(lf * 2.1),
            })
    return pd.DataFrame(rows)


def gen_events(seed: int, fips: list[str], n_events: int) -> pd.DataFrame:
    rng = rng_for(seed, 6)
    chosen = rng.choice(sorted(fips), size=min(n_events, len(fips)), replace=False)
    rows = [{"event_id": f"E{i + 1:03d}", "treated_fips": str(f),
             "event_date": pd.Timestamp(_rand_date(rng, date(2012, 1, 1), date(2017, 12, 31)))}
            for i, f in enumerate(chosen)]
    return pd.DataFrame(rows, columns=["event_id", "treated_fips", "event_date"])
