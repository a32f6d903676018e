"""Fixed-effect absorption by alternating weighted within-group demeaning."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ..errors import NotConverged, ValidationError


def split_key(name: str) -> list[str]:
    """``"state#year"`` -> ``["state", "year"]``."""
    return [p.strip() for p in name.split("#") if p.strip()]


def group_codes(data: pd.DataFrame, name: str) -> np.ndarray:
    """Dense integer codes for a (possibly composite) categorical key, in sorted key order."""
    cols = split_key(name)
    missing = [c for c in cols if c not in data.columns]
    if missing:
        raise ValidationError(f"fixed-effect/cluster key {name!r}: unknown columns {missing}")
    return data.groupby(cols, sort=True, dropna=False).ngroup().to_numpy(dtype=np.int64)


def fe_code_matrix(data: pd.DataFrame, names: Sequence[str]) -> np.ndarray:
    if not names:
        return np.zeros((len(data), 0), dtype=np.int64)
    return np.column_stack([group_codes(data, n) for n in names])


def _recode(codes: np.ndarray) -> np.ndarray:
    if codes.shape[1] == 0:
        return codes
    return np.column_stack([np.unique(c, return_inverse=True)[1] for c in codes.T])


def singleton_mask(codes: np.ndarray) -> np.ndarray:
    """Rows to keep after repeatedly removing singleton groups in any dimension."""
    keep = np.ones(codes.shape[0], dtype=bool)
    if codes.shape[1] == 0:
        return keep
    while True:
        changed = False
        for c in codes.T:
            counts = np.bincount(c[keep], minlength=c.max() + 1)
            single = keep & (counts[c] == 1)
            if single.any():
                keep &= ~single
                changed = True
        if not changed:
            return keep


def demean(
    X: np.ndarray,
    codes: np.ndarray,
    weights: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 10_000,
) -> tuple[np.ndarray, int]:
    """Project out every fixed-effect dimension from the columns of ``X``.

    Cycles through dimensions subtracting weighted group means until a full
    sweep changes no entry by ``tol`` or more.  One dimension needs one pass.
    Returns the transformed copy and the number of sweeps.
    """
    X = np.array(X, dtype=float, copy=True)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    codes = _recode(np.asarray(codes, dtype=np.int64).reshape(X.shape[0], -1))
    n_dim = codes.shape[1]
    if n_dim == 0:
        return (X[:, 0] if squeeze else X), 0
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    sizes = [np.bincount(c, weights=w) for c in codes.T]

    def sweep() -> float:
        change = 0.0
        for c, size in zip(codes.T, sizes):
            for j in range(X.shape[1]):
                means = np.bincount(c, weights=w * X[:, j], minlength=len(size)) / size
                step = means[c]
                X[:, j] -= step
                change = max(change, float(np.max(np.abs(step))) if len(step) else 0.0)
        return change

    if n_dim == 1:
        sweep()
        return (X[:, 0] if squeeze else X), 1
    change = np.inf
    for it in range(1, max_iter + 1):
        change = sweep()
        if change < tol:
            return (X[:, 0] if squeeze else X), it
    raise NotConverged(max_iter, change)


def absorbed_dof(codes: np.ndarray) -> int:
    """Parameters spent on the fixed effects, intercept included.

    Exact for one or two dimensions (two-way uses connected components of
    the bipartite group graph); from the third dimension on each adds its
    group count minus one, which can only overstate the rank.
    """
    codes = _recode(codes)
    d = codes.shape[1]
    if d == 0:
        return 0
    g = [int(c.max()) + 1 for c in codes.T]
    if d == 1:
        return g[0]
    n = codes.shape[0]
    adj = coo_matrix((np.ones(n), (codes[:, 0], g[0] + codes[:, 1])), shape=(g[0] + g[1],) * 2)
    n_comp, _ = connected_components(adj, directed=False)
    return g[0] + g[1] - n_comp + sum(x - 1 for x in g[2:])
