"""Nearest-neighbour selection of control counties for treated events."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import EmptyPool, ValidationError

DEFAULT_FEATURES = ("unemployment_rate", "d_unemployment_rate", "log_labor_force",
                    "d_log_labor_force", "avg_yield")


@dataclass(frozen=True)
class FeatureRow:
    fips: str
    features: Mapping[str, float]
    region: str | None = None

    def vector(self, names: Sequence[str]) -> np.ndarray:
        try:
            v = np.array([float(self.features[n]) for n in names])
        except KeyError as exc:
            raise ValidationError(f"{self.fips}: missing feature {exc}") from None
        if not np.all(np.isfinite(v)):
            raise ValidationError(f"{self.fips}: non-finite feature value")
        return v


@dataclass(frozen=True)
class MatchOptions:
    features: tuple[str, ...] = DEFAULT_FEATURES
    extra_features: tuple[str, ...] = ()
    same_region: bool = False
    exclude: frozenset[str] = frozenset()
    caliper: float | None = None
    raw_distance: bool = False

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.features) + tuple(self.extra_features)


@dataclass
class MatchResult:
    event_id: str
    treated_fips: str
    controls: list[tuple[str, float]]
    means: dict[str, float] = field(default_factory=dict)
    sds: dict[str, float] = field(default_factory=dict)


def match(
    treated: FeatureRow,
    pool: Iterable[FeatureRow],
    k: int = 1,
    opts: MatchOptions | None = None,
    event_id: str = "",
) -> MatchResult:
    """The ``k`` pool counties closest to ``treated`` in (z-scored) Euclidean distance.

    Ties go to the lower fips.  The pool is sorted by fips before any
    arithmetic so the result is identical for any input order.
    """
    opts = opts or MatchOptions()
    names = opts.names
    cands = sorted(
        (r for r in pool
         if r.fips != treated.fips and r.fips not in opts.exclude
         and (not opts.same_region or r.region == treated.region)),
        key=lambda r: r.fips,
    )
    if not cands:
        raise EmptyPool(f"no eligible controls for {treated.fips}")
    if k < 1 or k > len(cands):
        raise ValidationError(f"k={k} must lie in [1, {len(cands)}]")
    X = np.vstack([r.vector(names) for r in cands])
    x0 = treated.vector(names)
    full = np.vstack([X, x0])
    mu = full.mean(axis=0)
    sd = full.std(axis=0)
    if opts.raw_distance:
        scale = np.ones_like(sd)
    else:
        # a constant feature carries no information; keep it out of the distance
        scale = np.where(sd > 0, sd, np.inf)
    dist = np.sqrt((((X - x0) / scale) ** 2).sum(axis=1))
    order = sorted(range(len(cands)), key=lambda i: (dist[i], cands[i].fips))
    chosen = [(cands[i].fips, float(dist[i])) for i in order[:k]]
    if opts.caliper is not None:
        chosen = [(f, d) for f, d in chosen if d <= opts.caliper]
    return MatchResult(event_id, treated.fips, chosen,
                       dict(zip(names, mu.tolist())), dict(zip(names, sd.tolist())))


def match_report(results: Sequence[MatchResult], rows: Mapping[str, FeatureRow],
                 features: Sequence[str] | None = None) -> pd.DataFrame:
    """Balance table: treated vs control means, difference and Welch t-statistic."""
    if not results:
        raise ValidationError("no match results")
    features = list(features) if features is not None else list(results[0].means)
    treated = [rows[r.treated_fips] for r in results]
    controls = [rows[f] for r in results for f, _ in r.controls]
    out = []
    for name in features:
        a = np.array([row.features[name] for row in treated], float)
        b = np.array([row.features[name] for row in controls], float)
        diff = a.mean() - b.mean()
        t = _welch_t(a, b)
        out.append({"feature": name, "treated_mean": a.mean(), "control_mean": b.mean(),
                    "difference": diff, "t_stat": t})
    return pd.DataFrame(out, columns=["feature", "treated_mean", "control_mean", "difference", "t_stat"])


def _welch_t(a: np.ndarray, b: np.ndarray) -> float | None:
    if len(a) < 2 or len(b) < 2:
        return None
    se2 = a.var(ddof=1) / len(a) + b.var(ddof=1) / len(b)
    if se2 == 0:
        return None
    return float((a.mean() - b.mean()) / math.sqrt(se2))


def county_features(county: pd.DataFrame, year: int,
                    avg_yield: Mapping[str, float] | None = None) -> dict[str, FeatureRow]:
    """Feature rows from county-year data: level in ``year`` and change from ``year - 1``."""
    cur = county[county["year"] == year].set_index("fips")
    prev = county[county["year"] == year - 1].set_index("fips")
    out = {}
    for fips in sorted(set(cur.index) & set(prev.index)):
        c, p = cur.loc[fips], prev.loc[fips]
        feats = {
            "unemployment_rate": float(c["unemployment_rate"]),
            "d_unemployment_rate": float(c["unemployment_rate"] - p["unemployment_rate"]),
            "log_labor_force": math.log(c["labor_force"]),
            "d_log_labor_force": math.log(c["labor_force"]) - math.log(p["labor_force"]),
        }
        if avg_yield is not None:
            if fips not in avg_yield:
                continue
            feats["avg_yield"] = float(avg_yield[fips])
        region = str(c["region"]) if "region" in c.index else None
        out[str(fips)] = FeatureRow(str(fips), feats, region)
    return out


def event_exclusions(events: pd.DataFrame, event_date, months: int = 24) -> frozenset[str]:
    """Counties with their own event within ``months`` of ``event_date``."""
    ev = pd.Timestamp(event_date)
    lo, hi = ev - pd.DateOffset(months=months), ev + pd.DateOffset(months=months)
    near = events[(events["event_date"] >= lo) & (events["event_date"] <= hi)]
    return frozenset(near["treated_fips"].astype(str))
