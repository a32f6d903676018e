"""Regressor builders for DiD, group splits and event studies; the key=value spec file."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import MissingBenchmark, NonBinary, ValidationError

BUCKET_MONTHS = {"month": 1, "quarter": 3, "half": 6, "year": 12}
BUCKET_TAGS = {"month": "m", "quarter": "q", "half": "h", "year": "y"}


@dataclass
class Design:
    data: pd.DataFrame
    regressors: list[str]
    fe: list[str] = field(default_factory=list)


def _require_binary(data: pd.DataFrame, col: str) -> None:
    vals = set(pd.unique(data[col].dropna()).tolist())
    if not vals <= {0, 1}:
        raise NonBinary(f"{col!r} must be 0/1, found {sorted(vals)[:5]}")


def build_did(
    data: pd.DataFrame,
    treat_var: str,
    post_var: str,
    group_splits: str | None = None,
    time_var: str | None = None,
) -> Design:
    """Treat, post and their interaction; with ``group_splits`` each is interacted per group.

    Split designs also register a ``group#time`` fixed effect when
    ``time_var`` is given.
    """
    for c in (treat_var, post_var):
        _require_binary(data, c)
    df = data.copy()
    inter = f"{treat_var}_x_{post_var}"
    if group_splits is None:
        df[inter] = df[treat_var] * df[post_var]
        return Design(df, [treat_var, post_var, inter])
    regs = []
    for g in sorted(pd.unique(df[group_splits].dropna()).tolist()):
        ind = (df[group_splits] == g).astype(float)
        tag = f"{group_splits}={g}"
        df[f"{treat_var}_x_{tag}"] = df[treat_var] * ind
        df[f"{post_var}_x_{tag}"] = df[post_var] * ind
        df[f"{inter}_x_{tag}"] = df[treat_var] * df[post_var] * ind
        regs += [f"{treat_var}_x_{tag}", f"{post_var}_x_{tag}", f"{inter}_x_{tag}"]
    fe = [f"{group_splits}#{time_var}"] if time_var else []
    return Design(df, regs, fe)


def bucket_of(event_time, bucket: str):
    try:
        size = BUCKET_MONTHS[bucket]
    except KeyError:
        raise ValidationError(f"bucket must be one of {sorted(BUCKET_MONTHS)}") from None
    return np.floor_divide(np.asarray(event_time, dtype=np.int64), size)


def event_term(cohort: str, bucket: str, b: int) -> str:
    return f"{cohort}_{BUCKET_TAGS[bucket]}{int(b)}"


@dataclass
class EventStudyDesign(Design):
    buckets: list[int] = field(default_factory=list)
    benchmark: int = -1
    bucket: str = "quarter"

    def terms(self, cohort: str = "treated", pre: bool | None = None) -> list[str]:
        out = []
        for b in self.buckets:
            if b == self.benchmark:
                continue
            if pre is True and b >= 0 or pre is False and b < 0:
                continue
            out.append(event_term(cohort, self.bucket, b))
        return out


def build_event_study(
    data: pd.DataFrame,
    cohort_var: str,
    event_time: str,
    bucket: str = "quarter",
    benchmark: int = -1,
    trend_unit: str | None = None,
    trend_time: str | None = None,
) -> EventStudyDesign:
    """Cohort-by-bucket event dummies with the benchmark bucket left out for both cohorts.

    ``event_time`` is in months relative to the event; buckets are
    floor(months / bucket length), so quarter -1 covers months -3..-1.
    ``trend_unit`` adds one linear ``trend_time`` slope per unit.
    """
    _require_binary(data, cohort_var)
    df = data.copy()
    b = bucket_of(df[event_time].to_numpy(), bucket)
    buckets = sorted(set(b.tolist()))
    if benchmark not in buckets:
        raise MissingBenchmark(f"no rows fall in benchmark bucket {benchmark}")
    regs = []
    new = {}
    for cohort, flag in (("treated", 1), ("control", 0)):
        in_cohort = df[cohort_var].to_numpy() == flag
        for k in buckets:
            if k == benchmark:
                continue
            name = event_term(cohort, bucket, k)
            new[name] = (in_cohort & (b == k)).astype(float)
            regs.append(name)
    if trend_unit is not None:
        if trend_time is None:
            raise ValidationError("trend_time is required with trend_unit")
        t = df[trend_time].to_numpy(dtype=float)
        for u in sorted(pd.unique(df[trend_unit]).tolist()):
            name = f"trend_{u}"
            new[name] = np.where(df[trend_unit].to_numpy() == u, t, 0.0)
            regs.append(name)
    df = pd.concat([df, pd.DataFrame(new, index=df.index)], axis=1)
    return EventStudyDesign(df, regs, [], buckets, benchmark, bucket)


@dataclass
class RegressionSpec:
    outcome: str
    regressors: list[str]
    fe: list[str] = field(default_factory=list)
    cluster: list[str] = field(default_factory=list)
    weights: str | None = None
    window: tuple[int, int] | None = None
    benchmark: int | None = None
    extra: dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, kv: dict[str, str]) -> "RegressionSpec":
        def lst(key):
            raw = kv.get(key, "")
            return [p.strip() for p in raw.split(",") if p.strip()]

        if "outcome" not in kv or not kv["outcome"].strip():
            raise ValidationError("spec needs outcome=")
        window = None
        if kv.get("window"):
            parts = [int(p) for p in kv["window"].replace(":", ",").split(",")]
            if len(parts) == 1:
                parts = [-abs(parts[0]), abs(parts[0])]
            if len(parts) != 2 or parts[0] >= parts[1]:
                raise ValidationError(f"bad window {kv['window']!r}")
            window = (parts[0], parts[1])
        known = {"outcome", "regressors", "fe", "cluster", "weights", "window", "benchmark"}
        return cls(
            outcome=kv["outcome"].strip(),
            regressors=lst("regressors"),
            fe=lst("fe"),
            cluster=lst("cluster"),
            weights=kv.get("weights", "").strip() or None,
            window=window,
            benchmark=int(kv["benchmark"]) if kv.get("benchmark") else None,
            extra={k: v for k, v in kv.items() if k not in known},
        )
