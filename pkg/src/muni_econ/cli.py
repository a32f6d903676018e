"""Batch command-line front end.

Every sub-command reads CSV inputs, writes CSV outputs plus a
``<command>_manifest.txt`` (config hash, input digests, version) and exits
with 0 on success, 2 on invalid input and 1 on a computation error.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from datetime import date
from pathlib import Path

import pandas as pd

from . import __version__
from . import io as mio
from .bonds import annual_interest_delta, wealth_impact
from .errors import MuniEconError, ValidationError
from .liquidity import OUTPUT_COLUMNS, liquidity_table
from .matching import MatchOptions, county_features, event_exclusions, match, match_report
from .panel import RegressionSpec, build_event_study, fit
from .spreads import TaxRegime, load_federal_schedule
from .synth import (
    PanelDGP,
    ViolationRecipe,
    gen_county,
    gen_curves,
    gen_events,
    gen_panel,
    gen_state_tax,
    gen_trades,
)
from .trades import aggregate_monthly, attach_spreads, clean

log = logging.getLogger("muni_econ")

OBS_COLUMNS = ["cusip", "year_month", "vw_yield", "vw_price", "total_volume", "n_trades",
               "remaining_maturity_years"]
SPREAD_COLUMNS = OBS_COLUMNS + ["curve_date", "retention", "riskfree_yield", "spread",
                                "after_tax_yield", "after_tax_spread"]
SIDE_FLAGS = {"P": "customer_buy", "S": "customer_sell", "D": "interdealer"}


def _date(s: str) -> date:
    try:
        return date.fromisoformat(s)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"input file not found: {path}")
    return p


class Run:
    """Bookkeeping for one command: declared inputs, outputs and the manifest."""

    def __init__(self, name: str, args: argparse.Namespace):
        self.name = name
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = {k: v for k, v in sorted(vars(args).items())
                       if k not in ("func", "config", "out", "verbose")}
        self.inputs: dict[str, Path] = {}
        self.outputs: list[str] = []
        self.extra: dict[str, object] = {}

    def input(self, key: str, path) -> Path:
        p = _existing(path)
        self.inputs[key] = p
        return p

    def path(self, filename: str) -> Path:
        self.outputs.append(filename)
        return self.out / filename

    def finish(self) -> None:
        canon = "\n".join(f"{k}={_canon(v)}" for k, v in self.config.items())
        manifest = {
            "command": self.name,
            "tool": "muni-econ",
            "version": __version__,
            "config_sha256": hashlib.sha256(canon.encode()).hexdigest(),
        }
        for k, p in sorted(self.inputs.items()):
            manifest[f"input.{k}"] = p.name
            manifest[f"input.{k}.sha256"] = mio.file_digest(p)
        for k, v in self.config.items():
            manifest[f"config.{k}"] = _canon(v)
        manifest.update(self.extra)
        manifest["outputs"] = ",".join(self.outputs)
        mio.write_keyvalue(self.out / f"{self.name}_manifest.txt", manifest)


def _canon(v) -> str:
    if isinstance(v, Path):
        return v.name
    if isinstance(v, (list, tuple)):
        return ",".join(_canon(x) for x in v)
    if v is None:
        return ""
    return mio.fmt(v) if isinstance(v, (int, float)) else str(v)


def cmd_synth(args) -> None:
    run = Run("synth", args)
    recipe = ViolationRecipe(*[int(x) for x in args.recipe.split(",")]) if args.recipe else ViolationRecipe()
    fx = gen_trades(args.seed, args.n_bonds, recipe)
    mio.write_bonds(run.path("bonds.csv"), fx.bonds.values())
    mio.write_trades(run.path("trades.csv"), fx.trades)
    mio.write_csv(run.path("expected_clean.csv"),
                  [{"rule": k, "dropped": v} for k, v in fx.expected.items()], ["rule", "dropped"])
    last = max(b.maturity_date for b in fx.bonds.values() if b.maturity_date.year < 2100)
    mio.write_curves(run.path("curve.csv"), gen_curves(args.seed, date(2010, 1, 1), last))
    federal = load_federal_schedule()
    top = federal[max(federal)]
    mio.write_csv(run.path("federal_tax.csv"),
                  [{"year": y, "top_rate": federal.get(y, top)} for y in range(min(federal), 2050)],
                  ["year", "top_rate"])
    st = gen_state_tax(args.seed)
    mio.write_csv(run.path("state_tax.csv"),
                  [{"state": s, "year": y, "top_rate": r} for (s, y), r in sorted(st.items())],
                  ["state", "year", "top_rate"])
    fips = sorted({b.county_fips for b in fx.bonds.values()})
    mio.write_frame(run.path("county.csv"), gen_county(args.seed, fips), mio.COUNTY_COLUMNS)
    mio.write_frame(run.path("events.csv"), gen_events(args.seed, fips, max(1, len(fips) // 4)))
    panel, pman = gen_panel(PanelDGP(seed=args.seed, beta=args.beta))
    mio.write_frame(run.path("panel.csv"), panel)
    run.extra.update({f"panel.{k}": _canon(v) for k, v in pman.items()})
    run.extra.update({k: _canon(v) for k, v in fx.manifest.items()})
    run.finish()


def _sides(s: str) -> list[str]:
    try:
        return [SIDE_FLAGS[c.strip()] for c in s.split(",") if c.strip()]
    except KeyError as exc:
        raise ValidationError(f"unknown side code {exc}; use P, S or D") from None


def cmd_clean(args) -> None:
    run = Run("clean", args)
    bonds = mio.read_bonds(run.input("bonds", args.bonds))
    trades = mio.read_trades(run.input("trades", args.trades))
    window = None
    if args.window_start or args.window_end:
        window = (args.window_start or date.min, args.window_end or date.max)
    out, report = clean(trades, bonds, window)
    mio.write_trades(run.path("trades_clean.csv"), out)
    mio.write_frame(run.path("clean_report.csv"), report.to_frame())
    run.extra["surviving_trades"] = report.surviving_trades
    run.finish()


def cmd_aggregate(args) -> None:
    run = Run("aggregate", args)
    bonds = mio.read_bonds(run.input("bonds", args.bonds))
    trades = mio.read_trades(run.input("trades", args.trades))
    obs = aggregate_monthly(trades, bonds, _sides(args.sides))
    mio.write_frame(run.path("obs.csv"), obs, OBS_COLUMNS)
    run.finish()


def cmd_spreads(args) -> None:
    run = Run("spreads", args)
    bonds = mio.read_bonds(run.input("bonds", args.bonds))
    obs = pd.read_csv(run.input("obs", args.obs), dtype={"cusip": str, "year_month": str})
    curves = mio.read_curves(run.input("curve", args.curve))
    federal = load_federal_schedule(run.input("federal", args.federal_tax_csv) if args.federal_tax_csv else None)
    state = mio.read_state_tax(run.input("state_tax", args.state_tax)) if args.state_tax else {}
    local = mio.read_local_tax(run.input("local_tax", args.local_tax)) if args.local_tax else {}
    regime = TaxRegime(federal, state, local, use_local=args.use_local)
    enriched, missing_months, missing_tax = attach_spreads(obs, curves, regime, bonds)
    mio.write_frame(run.path("obs_spreads.csv"), enriched, SPREAD_COLUMNS)
    mio.write_csv(run.path("missing_curves.csv"), [{"year_month": m} for m in missing_months], ["year_month"])
    run.extra["missing_state_rates"] = missing_tax.get("state", 0)
    run.extra["missing_local_rates"] = missing_tax.get("local", 0)
    run.finish()


def cmd_liquidity(args) -> None:
    run = Run("liquidity", args)
    bonds = mio.read_bonds(run.input("bonds", args.bonds))
    trades = mio.read_trades(run.input("trades", args.trades))
    mio.write_frame(run.path("liquidity.csv"), liquidity_table(trades, bonds), OUTPUT_COLUMNS)
    run.finish()


def cmd_match(args) -> None:
    run = Run("match", args)
    county = mio.read_county(run.input("county", args.county))
    events = mio.read_events(run.input("events", args.events))
    avg_yield = None
    features = ["unemployment_rate", "d_unemployment_rate", "log_labor_force", "d_log_labor_force"]
    if args.obs:
        bonds = mio.read_bonds(run.input("bonds", args.bonds))
        obs = pd.read_csv(run.input("obs", args.obs), dtype={"cusip": str, "year_month": str})
        obs["fips"] = obs["cusip"].map(lambda c: bonds[c].county_fips)
        obs["year"] = obs["year_month"].str[:4].astype(int)
        features.append("avg_yield")
    extra = tuple(f for f in args.extra_features.split(",") if f) if args.extra_features else ()
    rows_out, balance_in, rows_by_fips = [], [], {}
    for ev in events.sort_values(["event_id"]).to_dict("records"):
        year = ev["event_date"].year - 1
        if args.obs:
            yr = obs[obs["year"] == year]
            avg_yield = yr.groupby("fips")["vw_yield"].mean().to_dict()
        feats = county_features(county, year, avg_yield)
        if extra:
            feats = _with_extra(feats, county, year, extra)
        treated = feats.get(str(ev["treated_fips"]))
        if treated is None:
            log.warning("event %s: treated county %s lacks features for %d", ev["event_id"], ev["treated_fips"], year)
            continue
        exclude = event_exclusions(events, ev["event_date"], args.exclude_months) if args.exclude_months else frozenset()
        opts = MatchOptions(features=tuple(features), extra_features=extra, same_region=args.same_region,
                            exclude=exclude, caliper=args.caliper, raw_distance=args.raw_distance)
        res = match(treated, feats.values(), args.k, opts, event_id=str(ev["event_id"]))
        for rank, (f, d) in enumerate(res.controls, start=1):
            rows_out.append({"event_id": res.event_id, "treated_fips": res.treated_fips,
                             "control_fips": f, "rank": rank, "distance": d})
        balance_in.append(res)
        for f in [res.treated_fips] + [f for f, _ in res.controls]:
            rows_by_fips.setdefault(f, feats[f])
    mio.write_csv(run.path("matches.csv"), rows_out, ["event_id", "treated_fips", "control_fips", "rank", "distance"])
    if balance_in:
        mio.write_frame(run.path("balance.csv"), match_report(balance_in, rows_by_fips))
    run.finish()


def _with_extra(feats, county, year, extra):
    from .fiscal import interest_ratio_panel
    from .matching import FeatureRow

    ratios, _ = interest_ratio_panel(county)
    ratios = ratios[ratios["year"] == year].set_index("fips")
    out = {}
    for f, row in feats.items():
        if f not in ratios.index:
            continue
        add = {e: float(ratios.loc[f, e]) for e in extra}
        out[f] = FeatureRow(f, {**row.features, **add}, row.region)
    return out


def _load_spec(run: Run, args) -> RegressionSpec:
    spec = RegressionSpec.from_mapping(mio.read_keyvalue(run.input("spec", args.spec)))
    if spec.weights:
        log.info("weighted least squares on column %s", spec.weights)
    return spec


def _write_fit(run: Run, res) -> None:
    mio.write_frame(run.path("results.csv"), res.summary(), ["term", "estimate", "se", "t", "p"])
    mio.write_keyvalue(run.path("diagnostics.txt"), res.diagnostics())


def cmd_fit(args) -> None:
    run = Run("fit", args)
    data = pd.read_csv(run.input("data", args.data))
    spec = _load_spec(run, args)
    if spec.window and "event_time" in data.columns:
        data = data[data["event_time"].between(*spec.window)]
    res = fit(data, spec.outcome, spec.regressors, fe=spec.fe, cluster=spec.cluster, weights=spec.weights)
    _write_fit(run, res)
    run.finish()


def cmd_event_study(args) -> None:
    run = Run("event_study", args)
    data = pd.read_csv(run.input("data", args.data))
    spec = _load_spec(run, args)
    cohort = spec.extra.get("cohort", "treat")
    etime = spec.extra.get("event_time", "event_time")
    bucket = spec.extra.get("bucket", "quarter")
    if spec.window:
        data = data[data[etime].between(*spec.window)]
    design = build_event_study(data, cohort, etime, bucket,
                               spec.benchmark if spec.benchmark is not None else -1,
                               trend_unit=spec.extra.get("trend_unit"), trend_time=spec.extra.get("trend_time"))
    res = fit(design.data, spec.outcome, design.regressors + spec.regressors,
              fe=spec.fe, cluster=spec.cluster, weights=spec.weights)
    _write_fit(run, res)
    run.finish()


def cmd_impact(args) -> None:
    run = Run("impact", args)
    row = {"wealth_impact": wealth_impact(args.outstanding, args.duration, args.yield_, args.dy)}
    if args.principal is not None:
        row["annual_interest_delta"] = annual_interest_delta(args.principal, args.dy)
    for k, v in row.items():
        print(f"{k}={mio.fmt(v)}")
    mio.write_csv(run.path("impact.csv"), [row], list(row))
    run.finish()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="muni-econ", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="key=value file supplying defaults for any flag")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--out", default=".", help="output directory")
        sp.set_defaults(func=func)
        return sp

    s = add("synth", cmd_synth, "write a synthetic input set")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-bonds", type=int, default=40)
    s.add_argument("--beta", type=float, default=15.25)
    s.add_argument("--recipe", help="10 comma-separated planted violation counts, rule 0..9")

    s = add("clean", cmd_clean, "apply the trade-cleaning screens")
    s.add_argument("--bonds", required=True)
    s.add_argument("--trades", required=True)
    s.add_argument("--window-start", type=_date)
    s.add_argument("--window-end", type=_date)

    s = add("aggregate", cmd_aggregate, "volume-weighted CUSIP-month observations")
    s.add_argument("--bonds", required=True)
    s.add_argument("--trades", required=True)
    s.add_argument("--sides", default="P", help="comma-separated side codes (P,S,D)")

    s = add("spreads", cmd_spreads, "attach risk-free yields and spreads")
    s.add_argument("--bonds", required=True)
    s.add_argument("--obs", required=True)
    s.add_argument("--curve", required=True)
    s.add_argument("--state-tax")
    s.add_argument("--local-tax")
    s.add_argument("--use-local", action="store_true")
    s.add_argument("--federal-tax-csv")

    s = add("liquidity", cmd_liquidity, "markups, price dispersion and Amihud per new bond")
    s.add_argument("--bonds", required=True)
    s.add_argument("--trades", required=True)

    s = add("match", cmd_match, "nearest-neighbour control counties")
    s.add_argument("--county", required=True)
    s.add_argument("--events", required=True)
    s.add_argument("--obs", help="monthly observations for the avg_yield feature")
    s.add_argument("--bonds", help="bond file mapping obs cusips to counties")
    s.add_argument("--k", type=int, default=1)
    s.add_argument("--same-region", action="store_true")
    s.add_argument("--raw-distance", action="store_true")
    s.add_argument("--caliper", type=float)
    s.add_argument("--exclude-months", type=int, default=24)
    s.add_argument("--extra-features", help="comma list from int_rev1,int_rev2,int_rev3,int_debt,net_debt")

    s = add("fit", cmd_fit, "fixed-effects regression from a spec file")
    s.add_argument("--data", required=True)
    s.add_argument("--spec", required=True)

    s = add("event-study", cmd_event_study, "dynamic event-study regression from a spec file")
    s.add_argument("--data", required=True)
    s.add_argument("--spec", required=True)

    s = add("impact", cmd_impact, "back-of-envelope duration impact")
    s.add_argument("--outstanding", type=float, required=True)
    s.add_argument("--duration", type=float, required=True)
    s.add_argument("--yield", dest="yield_", type=float, required=True)
    s.add_argument("--dy", type=float, required=True)
    s.add_argument("--principal", type=float)
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    """Parse ``argv`` with values from ``--config`` acting as defaults for the chosen command."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    command = next((tok for tok in rest if tok in sub.choices), None)
    if known.config and command:
        cfg = mio.read_keyvalue(_existing(known.config))
        sp = sub.choices[command]
        defaults = {}
        for action in sp._actions:
            key = action.dest
            for name in dict.fromkeys((key, key.replace("_", "-"), key.rstrip("_"))):
                if name not in cfg:
                    continue
                raw = cfg[name]
                try:
                    if isinstance(action, argparse._StoreTrueAction):
                        defaults[key] = raw.lower() in ("1", "true", "yes")
                    else:
                        defaults[key] = action.type(raw) if action.type else raw
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise ValidationError(f"{known.config}: bad value for {name}: {exc}") from None
                action.required = False
        sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def thread_cap() -> int:
    """Thread cap from MUNI_ECON_THREADS (default 1).

    Every kernel runs in a fixed summation order, so the cap never changes
    results and is deliberately left out of run manifests.
    """
    raw = os.environ.get("MUNI_ECON_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise ValidationError(f"MUNI_ECON_THREADS must be a positive integer, got {raw!r}")
    return n


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = _apply_config(parser, argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        log.info("thread cap %d", thread_cap())
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MuniEconError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
