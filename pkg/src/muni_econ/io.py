"""CSV readers and writers for every external file schema."""

from __future__ import annotations

import csv
import hashlib
import math
from collections import defaultdict
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import pandas as pd

from .bonds import Bond, RatingScale, default_rating_scale
from .curve import ZeroCurve
from .errors import ValidationError

BOND_COLUMNS = [
    "cusip", "dated_date", "maturity_date", "coupon_rate", "amount_issued",
    "offering_price", "offering_yield", "sale_method", "callable", "insured", "go",
    "bank_qualified", "refunding", "credit_enhanced", "tax_exempt_fed",
    "tax_exempt_state", "state", "county_fips", "rating",
]
TRADE_COLUMNS = ["cusip", "trade_date", "price", "yield", "par_volume", "side"]
SIDE_CODES = {"P": "customer_buy", "S": "customer_sell", "D": "interdealer"}
SIDE_LETTERS = {v: k for k, v in SIDE_CODES.items()}
COUNTY_COLUMNS = [
    "fips", "year", "labor_force", "unemployment_rate", "total_revenue", "state_igr",
    "total_expenditure", "interest_general", "interest_total", "total_lt_debt",
    "debt_retired", "property_tax", "population",
]


def fmt(x) -> str:
    """Numeric cell with 10 significant digits; blank for missing."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return ""
        if x == 0:
            return "0"
        return format(float(x), ".10g")
    if isinstance(x, (date, pd.Timestamp)):
        return x.strftime("%Y-%m-%d")
    return str(x)


def write_csv(path, rows: Iterable[Mapping], columns: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row.get(c)) for c in columns])


def write_frame(path, df: pd.DataFrame, columns: list[str] | None = None) -> None:
    columns = list(df.columns) if columns is None else columns
    write_csv(path, df[columns].to_dict("records"), columns)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _rows(path, required: list[str]):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            yield lineno, row


def _opt_float(s: str) -> float | None:
    s = (s or "").strip()
    return None if s == "" else float(s)


def _opt_date(s: str) -> date | None:
    s = (s or "").strip()
    return None if s == "" else date.fromisoformat(s)


def _flag(s: str) -> bool:
    s = (s or "").strip()
    if s not in ("0", "1"):
        raise ValueError(f"boolean flag must be 0 or 1, got {s!r}")
    return s == "1"


def read_bonds(path, scale: RatingScale | None = None) -> dict[str, Bond]:
    scale = scale or default_rating_scale()
    bonds: dict[str, Bond] = {}
    for lineno, r in _rows(path, BOND_COLUMNS):
        try:
            grade = (r["rating"] or "").strip()
            bond = Bond(
                cusip=r["cusip"].strip(),
                dated_date=_opt_date(r["dated_date"]),
                maturity_date=_opt_date(r["maturity_date"]),
                coupon_rate=_opt_float(r["coupon_rate"]),
                amount_issued=float(r["amount_issued"]),
                offering_price=_opt_float(r["offering_price"]),
                offering_yield=_opt_float(r["offering_yield"]),
                sale_method=r["sale_method"].strip(),
                callable=_flag(r["callable"]),
                insured=_flag(r["insured"]),
                general_obligation=_flag(r["go"]),
                bank_qualified=_flag(r["bank_qualified"]),
                refunding=_flag(r["refunding"]),
                credit_enhanced=_flag(r["credit_enhanced"]),
                tax_exempt_federal=_flag(r["tax_exempt_fed"]),
                tax_exempt_state=_flag(r["tax_exempt_state"]),
                state=r["state"].strip(),
                county_fips=r["county_fips"].strip(),
                rating=scale.encode(grade) if grade else None,
            )
        except (ValueError, KeyError) as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
        if bond.cusip in bonds:
            raise ValidationError(f"{path}:{lineno}: duplicate cusip {bond.cusip}")
        bonds[bond.cusip] = bond
    return bonds


def write_bonds(path, bonds: Iterable[Bond], scale: RatingScale | None = None) -> None:
    scale = scale or default_rating_scale()
    rows = []
    for b in bonds:
        rows.append({
            "cusip": b.cusip, "dated_date": b.dated_date, "maturity_date": b.maturity_date,
            "coupon_rate": b.coupon_rate, "amount_issued": b.amount_issued,
            "offering_price": b.offering_price, "offering_yield": b.offering_yield,
            "sale_method": b.sale_method, "callable": b.callable, "insured": b.insured,
            "go": b.general_obligation, "bank_qualified": b.bank_qualified,
            "refunding": b.refunding, "credit_enhanced": b.credit_enhanced,
            "tax_exempt_fed": b.tax_exempt_federal, "tax_exempt_state": b.tax_exempt_state,
            "state": b.state, "county_fips": b.county_fips,
            "rating": scale.decode(b.rating) if b.rating is not None else None,
        })
    write_csv(path, rows, BOND_COLUMNS)


def read_trades(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"cusip": str, "side": str}, keep_default_na=True)
    missing = [c for c in TRADE_COLUMNS if c not in df.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    bad = ~df["side"].isin(list(SIDE_CODES))
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + 2
        raise ValidationError(f"{path}:{line}: side must be one of P/S/D")
    df["side"] = df["side"].map(SIDE_CODES)
    try:
        df["trade_date"] = pd.to_datetime(df["trade_date"], format="%Y-%m-%d")
    except ValueError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return df[TRADE_COLUMNS]


def write_trades(path, trades: pd.DataFrame) -> None:
    out = trades.copy()
    out["side"] = out["side"].map(SIDE_LETTERS)
    write_frame(path, out, TRADE_COLUMNS)


def read_curves(path) -> list[ZeroCurve]:
    points: dict[date, list[tuple[float, float]]] = defaultdict(list)
    for lineno, r in _rows(path, ["as_of_date", "tenor_years", "zero_rate_cc"]):
        try:
            points[date.fromisoformat(r["as_of_date"].strip())].append(
                (float(r["tenor_years"]), float(r["zero_rate_cc"]))
            )
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    curves = []
    for d in sorted(points):
        pts = sorted(points[d])
        try:
            curves.append(ZeroCurve(d, [t for t, _ in pts], [z for _, z in pts]))
        except ValidationError as exc:
            raise ValidationError(f"{path}: curve {d}: {exc}") from exc
    return curves


def write_curves(path, curves: Iterable[ZeroCurve]) -> None:
    rows = [
        {"as_of_date": c.as_of_date, "tenor_years": t, "zero_rate_cc": z}
        for c in curves for t, z in zip(c.tenors, c.rates)
    ]
    write_csv(path, rows, ["as_of_date", "tenor_years", "zero_rate_cc"])


def read_state_tax(path) -> dict[tuple[str, int], float]:
    out = {}
    for lineno, r in _rows(path, ["state", "year", "top_rate"]):
        try:
            out[(r["state"].strip(), int(r["year"]))] = float(r["top_rate"])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return out


def read_local_tax(path) -> dict[tuple[str, int], float]:
    out = {}
    for lineno, r in _rows(path, ["fips", "year", "local_rate"]):
        try:
            out[(r["fips"].strip(), int(r["year"]))] = float(r["local_rate"])
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return out


def read_county(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"fips": str, "region": str})
    missing = [c for c in COUNTY_COLUMNS if c not in df.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    return df[COUNTY_COLUMNS + [c for c in ("region",) if c in df.columns]]


def read_events(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"event_id": str, "treated_fips": str})
    missing = [c for c in ("event_id", "treated_fips", "event_date") if c not in df.columns]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}")
    df["event_date"] = pd.to_datetime(df["event_date"], format="%Y-%m-%d")
    return df


def read_keyvalue(path) -> dict[str, str]:
    """``key=value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def write_keyvalue(path, items: Mapping[str, object]) -> None:
    with open(path, "w") as fh:
        for k in items:
            fh.write(f"{k}={fmt(items[k])}\n")
