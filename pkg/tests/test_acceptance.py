"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict in ``VERDICTS``; ``conftest.py``
prints them in the terminal summary.
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from _oracles import drop_singletons, dummy_ols, multiway_sandwich, random_panel
from muni_econ.bonds import (
    annual_interest_delta,
    coupon_schedule,
    macaulay_duration,
    price_from_yield,
    wealth_impact,
    ytm_from_price,
)
from muni_econ.curve import CashflowSchedule, ZeroCurve, coupon_equivalent_riskfree_yield
from muni_econ.liquidity import IssuanceWindowTrades, amihud, markup_avg_po, markup_offering, price_dispersion
from muni_econ.matching import FeatureRow, MatchOptions, match
from muni_econ.panel import build_event_study, fit, wald_test
from muni_econ.spreads import TaxRegime, combined_retention, load_federal_schedule
from muni_econ.synth import PanelDGP, ViolationRecipe, gen_panel, gen_trades
from muni_econ.trades import RULES, clean

VERDICTS: dict[int, str] = {}


def verdict(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    VERDICTS[n] = line
    print(line)
    assert ok, line


def test_criterion_01_back_of_envelope():
    t0 = time.perf_counter()
    a = wealth_impact(631e9, 8.04, 0.0289, 0.001525)
    b = annual_interest_delta(71e6, 0.00126)
    c = wealth_impact(207e6, 8, 0.0, 0.00126)
    ms = 1e3 * (time.perf_counter() - t0)
    ok = 7.60e9 <= a <= 7.66e9 and 89_000 <= b <= 90_000 and 2.05e6 <= c <= 2.12e6 and ms < 50
    verdict(1, ok, f"wealth={a:.4e} interest={b:,.0f} county={c:.4e} ({ms:.2f} ms)")


def test_criterion_02_tax_schedule():
    fed = load_federal_schedule()
    regimes = all(fed[y] == 0.35 for y in range(2005, 2013)) and \
        all(fed[y] == 0.396 for y in range(2013, 2018)) and all(fed[y] == 0.37 for y in (2018, 2019))
    regime = TaxRegime(fed, {("TX", y): 0.0 for y in fed})
    exact = all(combined_retention(regime, "TX", None, y) == 1.0 - fed[y] for y in fed)
    verdict(2, regimes and exact, f"federal regimes {'exact' if regimes else 'WRONG'}; "
                                  f"zero-state retention {'exact' if exact else 'WRONG'}")


def test_criterion_03_estimator_oracle():
    rng = np.random.default_rng(20240603)
    t0 = time.perf_counter()
    worst_coef = worst_cov = 0.0
    floored = 0
    for _ in range(100):
        n = int(rng.integers(100, 2001))
        n_fe = int(rng.integers(1, 4))
        df, fe = random_panel(rng, n, n_fe)
        df = drop_singletons(df, fe)
        res = fit(df, "y", ["x0", "x1"], fe=fe, cluster=["ca", "cb"])
        beta, *_ = dummy_ols(df, "y", ["x0", "x1"], fe)
        worst_coef = max(worst_coef, float(np.abs(res.coef.to_numpy() - beta).max()))
        V = multiway_sandwich(df, "y", ["x0", "x1"], fe, ["ca", "cb"])
        vals, vecs = np.linalg.eigh(V)
        if vals.min() < -1e-12 * np.abs(vals).max():
            V = (vecs * np.clip(vals, 0, None)) @ vecs.T
            floored += 1
        rel = float(np.abs(res.cov.to_numpy() - V).max() / np.abs(V).max())
        worst_cov = max(worst_cov, rel)
    secs = time.perf_counter() - t0
    ok = worst_coef < 1e-7 and worst_cov < 1e-8 and secs < 60
    verdict(3, ok, f"max |coef diff|={worst_coef:.2e}, max rel cov diff={worst_cov:.2e}, "
                   f"psd floored {floored}/100, {secs:.1f} s")


def _did_fit(seed, beta=15.25):
    df, _ = gen_panel(PanelDGP(seed=seed, beta=beta))
    df["treat_x_post"] = df["treat"] * df["post"]
    return fit(df, "y", ["treat_x_post", "x"], fe=["unit", "period"], cluster=["cluster"])


def test_criterion_04_monte_carlo_recovery():
    t0 = time.perf_counter()
    est, covered = [], 0
    for seed in range(500):
        res = _did_fit(seed)
        est.append(res.coef["treat_x_post"])
        lo, hi = res.conf_int().loc["treat_x_post"]
        covered += lo <= 15.25 <= hi
    est = np.array(est)
    mc_se = est.std(ddof=1) / math.sqrt(len(est))
    z = (est.mean() - 15.25) / mc_se
    coverage = covered / len(est)
    secs = time.perf_counter() - t0
    ok = abs(z) <= 3 and 0.92 <= coverage <= 0.98 and secs < 300
    verdict(4, ok, f"mean={est.mean():.4f} ({z:+.2f} MC SE), coverage={coverage:.3f}, {secs:.1f} s")


def test_criterion_05_event_study_shape():
    reps, truth = 200, 10.0
    rejections = 0
    covered: dict[str, int] = {}
    all_covered = 0
    for seed in range(1000, 1000 + reps):
        df, _ = gen_panel(PanelDGP(seed=seed, beta=truth))
        design = build_event_study(df, "treat", "event_time", bucket="half", benchmark=-1)
        res = fit(design.data, "y", design.regressors + ["x"], fe=["unit", "period"], cluster=["cluster"])
        _, p = wald_test(res, design.terms(pre=True))
        rejections += p < 0.05
        ci = res.conf_int()
        every = True
        for term in design.terms(pre=False):
            hit = bool(ci.loc[term, "lower"] <= truth <= ci.loc[term, "upper"])
            covered[term] = covered.get(term, 0) + hit
            every &= hit
        all_covered += every
    rate = rejections / reps
    worst = min(covered.values()) / reps
    ok = rate <= 0.10 and worst >= 0.90
    verdict(5, ok, f"pre-period rejection rate={rate:.3f}; worst post-bucket coverage={worst:.3f} "
                   f"over {len(covered)} buckets (all buckets at once: {all_covered / reps:.3f})")


def test_criterion_06_cleaning_exactness():
    recipes = [ViolationRecipe(*range(3, 13)), ViolationRecipe(0, 5, 0, 1, 5, 0, 2, 0, 3, 0),
               ViolationRecipe(), ViolationRecipe(1, 1, 1, 1, 1, 1, 1, 1, 1, 1)]
    exact = idempotent = True
    for i, recipe in enumerate(recipes):
        fx = gen_trades(100 + i, 30, recipe)
        out, report = clean(fx.trades, fx.bonds, fx.window)
        exact &= [r["rule"] for r in report.rows] == [r for r, _ in RULES]
        exact &= report.drops == [fx.expected[r] for r in range(10)]
        _, again = clean(out, fx.bonds, fx.window)
        idempotent &= sum(again.drops) == 0
    verdict(6, exact and idempotent, f"{len(recipes)} fixtures: per-rule counts "
                                     f"{'exact' if exact else 'MISMATCH'}, second pass "
                                     f"{'drops nothing' if idempotent else 'DROPS'}")


def test_criterion_07_curve_bond_math():
    rng = np.random.default_rng(7)
    worst_rt = 0.0
    for _ in range(1000):
        cf = coupon_schedule(float(rng.uniform(0, 0.1)), float(rng.uniform(0.1, 40)))
        y = float(rng.uniform(-0.01, 0.2))
        worst_rt = max(worst_rt, abs(ytm_from_price(cf, price_from_yield(cf, y)) - y))
    worst_par = max(abs(price_from_yield(coupon_schedule(c, n / 2), c) - 100.0)
                    for c in (0.01, 0.025, 0.04, 0.065, 0.1) for n in range(1, 81))
    zero_exact = all(macaulay_duration(coupon_schedule(0.0, T), y) == T
                     for T in rng.uniform(0.1, 40, 200) for y in (0.0, 0.03, 0.12))
    worst_ceq = 0.0
    for r in rng.uniform(-0.01, 0.12, 200):
        cf = CashflowSchedule((float(rng.uniform(0.1, 30)),), (100.0,))
        y = coupon_equivalent_riskfree_yield(ZeroCurve.flat(float(r)), cf)
        worst_ceq = max(worst_ceq, abs(y - 2 * math.expm1(r / 2)))
    ok = worst_rt < 1e-9 and worst_par < 1e-9 and zero_exact and worst_ceq < 1e-10
    verdict(7, ok, f"roundtrip {worst_rt:.1e}, par {worst_par:.1e}, zero-coupon duration "
                   f"{'exact' if zero_exact else 'INEXACT'}, flat-curve yield {worst_ceq:.1e}")


def test_criterion_08_liquidity_identities():
    rng = np.random.default_rng(8)
    worst_markup = worst_shift = 0.0
    min_amihud = math.inf
    flat_zero = True
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        prices = rng.uniform(80, 120, n)
        vols = rng.uniform(1e3, 1e6, n)
        days = pd.Timestamp("2016-03-01") + pd.to_timedelta(rng.integers(0, 5, n), unit="D")
        O = float(rng.uniform(90, 110))
        w = IssuanceWindowTrades.from_lists("AAAAAAAA1", O, prices, vols, dates=days.sort_values())
        worst_markup = max(worst_markup, abs(markup_offering(w) - markup_avg_po(w)))
        min_amihud = min(min_amihud, amihud(w))
        try:
            base = price_dispersion(w)
        except Exception:
            continue
        shifted = IssuanceWindowTrades.from_lists("AAAAAAAA1", O, prices + 7.5, vols, dates=days.sort_values())
        worst_shift = max(worst_shift, abs(price_dispersion(shifted) - base))
        const = IssuanceWindowTrades.from_lists("AAAAAAAA1", O, np.full(n, prices[0]), vols,
                                                dates=days.sort_values())
        flat_zero &= price_dispersion(const) == 0.0
    ok = worst_markup < 1e-9 and worst_shift < 1e-9 and flat_zero and min_amihud >= 0
    verdict(8, ok, f"markup identity {worst_markup:.1e} bps, dispersion shift {worst_shift:.1e}, "
                   f"constant-price dispersion {'0' if flat_zero else 'NONZERO'}, min Amihud {min_amihud:.2e}")


def test_criterion_09_matching():
    rng = np.random.default_rng(9)
    names = ("a", "b", "c")
    opts = MatchOptions(features=names)
    copy_ok = sorted_ok = affine_ok = perm_ok = True
    for _ in range(200):
        pool = [FeatureRow(f"{i:05d}", dict(zip(names, rng.normal(size=3) * (1, 10, 0.01))))
                for i in range(1, 16)]
        treated = FeatureRow("99999", dict(pool[int(rng.integers(0, 15))].features))
        res = match(treated, pool, 1, opts)
        copy_ok &= res.controls[0][1] == 0.0
        treated = FeatureRow("99999", dict(zip(names, rng.normal(size=3) * (1, 10, 0.01))))
        k3 = match(treated, pool, 3, opts)
        d = [x for _, x in k3.controls]
        sorted_ok &= d == sorted(d)
        j, a, b = names[int(rng.integers(0, 3))], float(rng.uniform(0.1, 100)), float(rng.normal() * 50)

        def rescale(r):
            f = dict(r.features)
            f[j] = a * f[j] + b
            return FeatureRow(r.fips, f)

        moved = match(rescale(treated), [rescale(r) for r in pool], 3, opts)
        affine_ok &= [f for f, _ in moved.controls] == [f for f, _ in k3.controls]
        perm = [pool[i] for i in rng.permutation(len(pool))]
        perm_ok &= match(treated, perm, 3, opts).controls == k3.controls
    ok = copy_ok and sorted_ok and affine_ok and perm_ok
    verdict(9, ok, f"exact copy at 0: {copy_ok}; sorted k=3: {sorted_ok}; affine invariant: {affine_ok}; "
                   f"permutation invariant: {perm_ok}")


def _pipeline(root: Path, threads: str) -> dict[str, bytes]:
    env = dict(os.environ, MUNI_ECON_THREADS=threads)

    def run(*args):
        proc = subprocess.run([sys.executable, "-m", "muni_econ.cli", *args], cwd=root, env=env,
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr

    root.mkdir(parents=True)
    (root / "es.txt").write_text("outcome=y\nregressors=x\nfe=unit,period\ncluster=cluster\n"
                                 "cohort=treat\nbucket=half\nbenchmark=-1\n")
    (root / "did.txt").write_text("outcome=y\nregressors=treat,x\nfe=unit,period\ncluster=cluster,pair\n")
    run("synth", "--out", "in", "--seed", "42", "--n-bonds", "25", "--recipe", "2,2,2,2,2,2,2,2,2,2")
    run("clean", "--bonds", "in/bonds.csv", "--trades", "in/trades.csv", "--window-start", "2005-01-01",
        "--window-end", "2049-12-31", "--out", "clean")
    run("aggregate", "--bonds", "in/bonds.csv", "--trades", "clean/trades_clean.csv", "--out", "agg")
    run("spreads", "--bonds", "in/bonds.csv", "--obs", "agg/obs.csv", "--curve", "in/curve.csv",
        "--state-tax", "in/state_tax.csv", "--federal-tax-csv", "in/federal_tax.csv", "--out", "spreads")
    run("liquidity", "--bonds", "in/bonds.csv", "--trades", "in/trades.csv", "--out", "liq")
    run("match", "--county", "in/county.csv", "--events", "in/events.csv", "--k", "3", "--out", "match")
    run("fit", "--data", "in/panel.csv", "--spec", "did.txt", "--out", "fit")
    run("event-study", "--data", "in/panel.csv", "--spec", "es.txt", "--out", "es")
    run("impact", "--outstanding", "631e9", "--duration", "8.04", "--yield", "0.0289", "--dy", "0.001525",
        "--out", "impact")
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_10_determinism(tmp_path):
    a = _pipeline(tmp_path / "one", "1")
    b = _pipeline(tmp_path / "four", "4")
    csvs = [k for k in a if k.endswith(".csv")]
    same_csv = a.keys() == b.keys() and all(a[k] == b[k] for k in csvs)
    same_all = a == b
    verdict(10, same_csv and len(csvs) >= 15,
            f"{len(csvs)} CSVs byte-identical across reruns with 1 and 4 threads: {same_csv}; "
            f"manifests identical too: {same_all}")
