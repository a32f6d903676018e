"""Income-tax regimes and the yield-spread outcome variables."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType
from typing import Mapping

from .errors import MissingFederalRate, ValidationError

log = logging.getLogger(__name__)


def _check_rate(rate: float, what: str) -> float:
    rate = float(rate)
    if not 0.0 <= rate < 0.9:
        raise ValidationError(f"{what} rate {rate} outside [0, 0.9)")
    return rate


@dataclass(frozen=True)
class TaxRegime:
    """Top marginal income-tax rates by year (federal), state-year and county-year.

    The local layer only enters the retention factor when ``use_local`` is set.
    """

    federal: Mapping[int, float]
    state: Mapping[tuple[str, int], float] = field(default_factory=dict)
    local: Mapping[tuple[str, int], float] = field(default_factory=dict)
    use_local: bool = False

    def __post_init__(self) -> None:
        fed = {int(y): _check_rate(r, f"federal {y}") for y, r in self.federal.items()}
        st = {(s, int(y)): _check_rate(r, f"state {s} {y}") for (s, y), r in self.state.items()}
        loc = {(f, int(y)): _check_rate(r, f"local {f} {y}") for (f, y), r in self.local.items()}
        object.__setattr__(self, "federal", MappingProxyType(fed))
        object.__setattr__(self, "state", MappingProxyType(st))
        object.__setattr__(self, "local", MappingProxyType(loc))

    @classmethod
    def default(cls, **kwargs) -> "TaxRegime":
        return cls(federal=load_federal_schedule(), **kwargs)


def load_federal_schedule(path=None) -> dict[int, float]:
    """Year -> top federal rate; the bundled table when ``path`` is None."""
    if path is None:
        text = resources.files("muni_econ.data").joinpath("federal_tax.csv").read_text()
    else:
        with open(path, newline="") as fh:
            text = fh.read()
    return {int(r["year"]): float(r["top_rate"]) for r in csv.DictReader(text.splitlines())}


def combined_retention(
    regime: TaxRegime,
    state: str,
    fips: str | None,
    year: int,
    missing: Counter | None = None,
    include_state: bool = True,
) -> float:
    """Share of interest kept after federal, state (and optionally local) tax.

    Missing state or local rates count as zero and are tallied in ``missing``.
    """
    try:
        fed = regime.federal[int(year)]
    except KeyError:
        raise MissingFederalRate(f"no federal rate for {year}") from None
    retention = 1.0 - fed
    st = regime.state.get((state, int(year))) if include_state else 0.0
    if st is None:
        if missing is not None:
            missing["state"] += 1
        log.debug("no state rate for %s %s; assuming 0", state, year)
        st = 0.0
    retention *= 1.0 - st
    if regime.use_local:
        loc = regime.local.get((fips, int(year))) if fips else None
        if loc is None:
            if missing is not None:
                missing["local"] += 1
            loc = 0.0
        retention *= 1.0 - loc
    return retention


def after_tax_yield(y: float, retention: float) -> float:
    if not 0.0 < retention <= 1.0:
        raise ValidationError(f"retention {retention} outside (0, 1]")
    return y / retention


@dataclass(frozen=True)
class SpreadResult:
    yield_: float
    riskfree_yield: float
    spread: float
    after_tax_yield: float
    after_tax_spread: float


def compute_spreads(y: float, r: float, retention: float) -> SpreadResult:
    aty = after_tax_yield(y, retention)
    return SpreadResult(
        yield_=y,
        riskfree_yield=r,
        spread=y - r,
        after_tax_yield=aty,
        after_tax_spread=aty - r,
    )
