"""Weighted least squares on absorbed data with iid, robust or multiway-clustered covariance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import linalg, stats

from ..errors import (
    DegenerateCluster,
    MissingCoefficient,
    NonBinary,
    Underdetermined,
    ValidationError,
)
from .absorb import absorbed_dof, demean, fe_code_matrix, group_codes, singleton_mask, split_key

PIVOT_TOL = 1e-10
# share of a column's variation that must survive absorption for it to be kept
ABSORBED_TOL = 1e-9


@dataclass
class FitResult:
    coef: pd.Series
    cov: pd.DataFrame
    resid: np.ndarray
    nobs: int
    df_resid: int
    df_fe: int
    r2: float
    adj_r2: float
    within_r2: float
    iterations: int
    vcov_type: str
    dropped: list[str] = field(default_factory=list)
    n_singletons: int = 0
    n_clusters: dict[str, int] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    @property
    def se(self) -> pd.Series:
        return pd.Series(np.sqrt(np.clip(np.diag(self.cov.to_numpy()), 0, None)), index=self.coef.index)

    @property
    def tstat(self) -> pd.Series:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.se

    @property
    def pvalue(self) -> pd.Series:
        return pd.Series(2 * stats.t.sf(np.abs(self.tstat.to_numpy()), self.df_resid), index=self.coef.index)

    def conf_int(self, level: float = 0.95) -> pd.DataFrame:
        q = stats.t.ppf(0.5 + level / 2, self.df_resid)
        return pd.DataFrame({"lower": self.coef - q * self.se, "upper": self.coef + q * self.se})

    def summary(self) -> pd.DataFrame:
        return pd.DataFrame({
            "term": self.coef.index, "estimate": self.coef.to_numpy(), "se": self.se.to_numpy(),
            "t": self.tstat.to_numpy(), "p": self.pvalue.to_numpy(),
        })

    def diagnostics(self) -> dict[str, object]:
        out: dict[str, object] = {
            "nobs": self.nobs, "df_resid": self.df_resid, "df_fe": self.df_fe,
            "r2": self.r2, "adj_r2": self.adj_r2, "within_r2": self.within_r2,
            "iterations": self.iterations, "vcov": self.vcov_type,
            "n_singletons": self.n_singletons, "dropped": ",".join(self.dropped),
            "flags": ",".join(self.flags),
        }
        for k, g in self.n_clusters.items():
            out[f"clusters[{k}]"] = g
        return out


def _prepare(data, outcome, regressors, fe, cluster, weights):
    needed = [outcome, *regressors]
    for name in [*fe, *cluster]:
        needed.extend(split_key(name))
    if weights is not None:
        needed.append(weights)
    missing = [c for c in dict.fromkeys(needed) if c not in data.columns]
    if missing:
        raise ValidationError(f"unknown columns: {missing}")
    numeric = [outcome, *regressors] + ([weights] if weights else [])
    num = data[numeric].apply(pd.to_numeric, errors="coerce")
    ok = np.isfinite(num.to_numpy(dtype=float)).all(axis=1)
    keys = [c for c in dict.fromkeys(needed) if c not in numeric]
    if keys:
        ok &= data[keys].notna().all(axis=1).to_numpy()
    return data.loc[ok].reset_index(drop=True)


def cluster_meat(scores: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Sum over groups of the outer product of within-group score sums."""
    sums = np.column_stack([np.bincount(codes, weights=scores[:, j]) for j in range(scores.shape[1])])
    return sums.T @ sums


def _intersect_codes(data: pd.DataFrame, names: Sequence[str]) -> np.ndarray:
    cols = list(dict.fromkeys(c for n in names for c in split_key(n)))
    return group_codes(data, "#".join(cols))


def clustered_cov(
    bread: np.ndarray,
    scores: np.ndarray,
    data: pd.DataFrame,
    cluster: Sequence[str],
    n_params: int,
) -> tuple[np.ndarray, dict[str, int], list[str]]:
    """Multiway cluster-robust covariance by inclusion-exclusion.

    Every term carries its own G/(G-1) * (N-1)/(N-K) correction.  A result
    with a materially negative eigenvalue is projected back onto the PSD cone.
    """
    n = scores.shape[0]
    counts, flags = {}, []
    V = np.zeros_like(bread)
    for r in range(1, len(cluster) + 1):
        for subset in itertools.combinations(cluster, r):
            codes = _intersect_codes(data, subset)
            g = int(codes.max()) + 1
            if r == 1:
                if g < 2:
                    raise DegenerateCluster(f"cluster dimension {subset[0]!r} has a single group")
                counts[subset[0]] = g
            c = g / max(g - 1, 1) * (n - 1) / (n - n_params)
            term = c * bread @ cluster_meat(scores, codes) @ bread
            V += term if r % 2 == 1 else -term
    V = (V + V.T) / 2
    if len(cluster) > 1:
        vals, vecs = np.linalg.eigh(V)
        if vals.min() < -1e-12 * max(abs(vals).max(), np.finfo(float).tiny):
            V = (vecs * np.clip(vals, 0, None)) @ vecs.T
            flags.append("psd_floored")
    return V, counts, flags


def fit(
    data: pd.DataFrame,
    outcome: str,
    regressors: Sequence[str],
    fe: Sequence[str] = (),
    cluster: Sequence[str] = (),
    weights: str | None = None,
    vcov: str | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
    drop_singletons: bool = True,
) -> FitResult:
    """Least squares of ``outcome`` on ``regressors`` absorbing the ``fe`` dimensions.

    Fixed-effect names may be composites such as ``"state#year"``.  Without
    fixed effects a ``const`` column is added.  Covariance is clustered when
    ``cluster`` is given, otherwise ``vcov`` selects ``"iid"`` (default) or
    ``"hc1"``.
    """
    regressors = list(regressors)
    fe, cluster = list(fe), list(cluster)
    df = _prepare(data, outcome, regressors, fe, cluster, weights)
    codes = fe_code_matrix(df, fe)
    n_single = 0
    if fe and drop_singletons:
        keep = singleton_mask(codes)
        n_single = int((~keep).sum())
        if n_single:
            df = df.loc[keep].reset_index(drop=True)
            codes = codes[keep]
    n = len(df)
    w = np.ones(n) if weights is None else df[weights].to_numpy(dtype=float)
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")

    names = list(regressors) if fe else ["const", *regressors]
    X = df[regressors].to_numpy(dtype=float)
    if not fe:
        X = np.column_stack([np.ones(n), X])
    y = df[outcome].to_numpy(dtype=float)
    Z, iters = demean(np.column_stack([y, X]), codes, w, tol=tol, max_iter=max_iter)
    yt, Xt = Z[:, 0], Z[:, 1:]
    sw = np.sqrt(w)

    dropped: list[str] = []
    keep_cols = list(range(len(names)))
    if fe:
        centred = X - (w @ X) / w.sum()
        raw = np.einsum("ij,ij,i->j", centred, centred, w)
        left = np.einsum("ij,ij,i->j", Xt, Xt, w)
        keep_cols = [j for j in keep_cols if raw[j] > 0 and left[j] > ABSORBED_TOL * raw[j]]
        dropped += [names[j] for j in range(len(names)) if j not in keep_cols]
    keep_cols, collinear = _independent_columns(Xt * sw[:, None], keep_cols)
    dropped += [names[j] for j in collinear]
    dropped = [nm for nm in names if nm in dropped]

    df_fe = absorbed_dof(codes)
    k = len(keep_cols)
    if n - k - df_fe <= 0:
        raise Underdetermined(f"{n} observations cannot identify {k} coefficients and {df_fe} fixed effects")
    Xk = Xt[:, keep_cols]
    if k:
        Q, R = linalg.qr(Xk * sw[:, None], mode="economic")
        beta = linalg.solve_triangular(R, Q.T @ (yt * sw))
        Rinv = linalg.solve_triangular(R, np.eye(k))
        bread = Rinv @ Rinv.T
    else:
        beta, bread = np.zeros(0), np.zeros((0, 0))
    e = yt - Xk @ beta
    ssr = float(np.dot(w, e * e))

    flags: list[str] = []
    counts: dict[str, int] = {}
    if cluster:
        V, counts, flags = clustered_cov(bread, Xk * (w * e)[:, None], df, cluster, k)
        vtype = "cluster:" + ",".join(cluster)
        df_resid = min(counts.values()) - 1
    else:
        vtype = vcov or "iid"
        if vtype == "iid":
            V = ssr / (n - k - df_fe) * bread
        elif vtype == "hc1":
            meat = (Xk * (w * e)[:, None]).T @ (Xk * (w * e)[:, None])
            V = n / (n - k - df_fe) * bread @ meat @ bread
        else:
            raise ValidationError(f"unknown vcov {vtype!r}")
        df_resid = n - k - df_fe

    ybar = np.dot(w, y) / w.sum()
    tss = float(np.dot(w, (y - ybar) ** 2))
    wss = float(np.dot(w, yt * yt))
    n_par = k + df_fe if fe else k
    r2 = 1 - ssr / tss if tss > 0 else math.nan
    adj = 1 - (1 - r2) * (n - 1) / (n - n_par) if tss > 0 and n > n_par else math.nan
    within = 1 - ssr / wss if wss > 0 else math.nan
    kept = [names[j] for j in keep_cols]
    return FitResult(
        coef=pd.Series(beta, index=kept, dtype=float),
        cov=pd.DataFrame(V, index=kept, columns=kept),
        resid=e,
        nobs=n,
        df_resid=int(df_resid),
        df_fe=df_fe,
        r2=r2,
        adj_r2=adj,
        within_r2=within,
        iterations=iters,
        vcov_type=vtype,
        dropped=dropped,
        n_singletons=n_single,
        n_clusters=counts,
        flags=flags,
    )


def _independent_columns(X: np.ndarray, candidates: list[int]) -> tuple[list[int], list[int]]:
    """Keep columns in their given order, dropping any within PIVOT_TOL of the span of those kept.

    Columns are scaled to unit norm so the test is scale free; each residual
    is orthogonalised twice against the kept basis.
    """
    basis = np.zeros((X.shape[0], 0))
    keep, drop = [], []
    for j in candidates:
        v = X[:, j]
        nv = np.linalg.norm(v)
        if nv == 0:
            drop.append(j)
            continue
        r = v / nv
        for _ in range(2):
            r = r - basis @ (basis.T @ r)
        nr = np.linalg.norm(r)
        if nr <= PIVOT_TOL:
            drop.append(j)
        else:
            keep.append(j)
            basis = np.column_stack([basis, r / nr])
    return keep, drop


def fit_lpm(data: pd.DataFrame, outcome: str, regressors: Sequence[str], **kwargs) -> FitResult:
    """Linear probability model: ``fit`` on a 0/1 outcome, fitted values left unclipped."""
    vals = pd.to_numeric(data[outcome], errors="coerce").dropna().unique()
    if not set(vals.tolist()) <= {0.0, 1.0}:
        raise NonBinary(f"{outcome!r} must be 0/1 for a linear probability model")
    return fit(data, outcome, regressors, **kwargs)


def diff_test(res: FitResult, coef_a: str, coef_b: str) -> tuple[float, float]:
    """Difference of two coefficients and its two-sided normal p-value."""
    for c in (coef_a, coef_b):
        if c not in res.coef.index:
            raise MissingCoefficient(c)
    diff = float(res.coef[coef_a] - res.coef[coef_b])
    var = float(res.cov.loc[coef_a, coef_a] + res.cov.loc[coef_b, coef_b] - 2 * res.cov.loc[coef_a, coef_b])
    if var <= 0:
        return diff, 1.0 if diff == 0 else 0.0
    return diff, float(2 * stats.norm.sf(abs(diff) / math.sqrt(var)))


def wald_test(res: FitResult, terms: Sequence[str], dist: str = "auto") -> tuple[float, float]:
    """Joint test that ``terms`` are all zero.

    Returns (statistic, p-value) for W = b' V^-1 b:

    * ``"f"``: W/q against F(q, df_resid);
    * ``"hotelling"``: (G - q) W / (q (G - 1)) against F(q, G - q), where G
      is the smallest cluster count.  This accounts for the noise in a
      cluster covariance built from few clusters;
    * ``"chi2"``: W against chi-square(q);
    * ``"auto"`` (default): ``"hotelling"`` for clustered fits, else ``"f"``.
    """
    terms = list(terms)
    for t in terms:
        if t not in res.coef.index:
            raise MissingCoefficient(t)
    b = res.coef[terms].to_numpy()
    V = res.cov.loc[terms, terms].to_numpy()
    W = float(b @ np.linalg.pinv(V) @ b)
    q = len(terms)
    if dist == "auto":
        dist = "hotelling" if res.n_clusters else "f"
    if dist == "f":
        return W / q, float(stats.f.sf(W / q, q, res.df_resid))
    if dist == "hotelling":
        if not res.n_clusters:
            raise ValidationError("the Hotelling reference needs a clustered fit")
        g = min(res.n_clusters.values())
        if g <= q:
            raise ValidationError(f"{q} restrictions need more than {g} clusters")
        stat = W * (g - q) / (q * (g - 1))
        return stat, float(stats.f.sf(stat, q, g - q))
    if dist == "chi2":
        return W, float(stats.chi2.sf(W, q))
    raise ValidationError(f"unknown reference distribution {dist!r}")
