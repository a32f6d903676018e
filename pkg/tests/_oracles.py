"""Brute-force reference implementations used as test oracles.

Nothing here imports the estimator under test: fixed effects are expanded
into explicit dummy columns and covariance sandwiches are summed cluster by
cluster with pandas.
"""

from __future__ import annotations

import itertools

import numpy as np
import pandas as pd


def drop_singletons(df: pd.DataFrame, fe: list[str]) -> pd.DataFrame:
    while True:
        before = len(df)
        for f in fe:
            counts = df[f].map(df[f].value_counts())
            df = df[counts > 1]
        if len(df) == before:
            return df.reset_index(drop=True)


def dummy_design(df: pd.DataFrame, regressors: list[str], fe: list[str]) -> np.ndarray:
    """Regressors, an intercept and one dummy per level of every fixed-effect column."""
    blocks = [df[regressors].to_numpy(float), np.ones((len(df), 1))]
    for f in fe:
        blocks.append(pd.get_dummies(df[f].astype(str)).to_numpy(float))
    return np.hstack(blocks)


def dummy_ols(df: pd.DataFrame, outcome: str, regressors: list[str], fe: list[str], weights=None):
    """Slope estimates, full pseudo-inverse bread and residuals of the dummy regression."""
    D = dummy_design(df, regressors, fe)
    y = df[outcome].to_numpy(float)
    w = np.ones(len(df)) if weights is None else df[weights].to_numpy(float)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(D * sw[:, None], y * sw, rcond=None)
    bread = np.linalg.pinv((D * w[:, None]).T @ D)
    resid = y - D @ coef
    return coef[: len(regressors)], bread, resid, D, w


def dummy_residuals(df: pd.DataFrame, column: str, fe: list[str]) -> np.ndarray:
    D = dummy_design(df, [], fe)
    y = df[column].to_numpy(float)
    coef, *_ = np.linalg.lstsq(D, y, rcond=None)
    return y - D @ coef


def multiway_sandwich(df, outcome, regressors, fe, cluster, weights=None):
    """Slope block of the inclusion-exclusion cluster sandwich of the dummy regression.

    Each term uses G/(G-1) * (N-1)/(N-K) with K the number of slopes.
    """
    _, bread, resid, D, w = dummy_ols(df, outcome, regressors, fe, weights)
    n, k = len(df), len(regressors)
    scores = pd.DataFrame(D * (w * resid)[:, None])
    V = np.zeros((D.shape[1], D.shape[1]))
    for r in range(1, len(cluster) + 1):
        for subset in itertools.combinations(cluster, r):
            key = df[list(subset)].astype(str).agg("|".join, axis=1)
            sums = scores.groupby(key.to_numpy()).sum().to_numpy()
            g = sums.shape[0]
            c = g / (g - 1) * (n - 1) / (n - k)
            term = c * bread @ (sums.T @ sums) @ bread
            V += term if r % 2 else -term
    return V[:k, :k]


def random_panel(rng: np.random.Generator, n: int, n_fe: int, k: int = 2) -> tuple[pd.DataFrame, list[str]]:
    """Rows with ``n_fe`` crossed random categorical keys, two cluster keys and ``k`` regressors."""
    df = pd.DataFrame({"id": np.arange(n)})
    fe = []
    for d in range(n_fe):
        levels = int(rng.integers(3, max(4, n // 15)))
        df[f"f{d}"] = rng.integers(0, levels, n)
        fe.append(f"f{d}")
    df["ca"] = rng.integers(0, int(rng.integers(8, 30)), n)
    df["cb"] = rng.integers(0, int(rng.integers(6, 20)), n)
    y = rng.normal(size=n)
    for j in range(k):
        df[f"x{j}"] = rng.normal(size=n) + (0.3 * df[fe[0]] if fe else 0)
        y = y + (j + 1) * df[f"x{j}"].to_numpy()
    for f in fe:
        effects = rng.normal(0, 2, df[f].max() + 1)
        y = y + effects[df[f].to_numpy()]
    df["y"] = y
    return df, fe
