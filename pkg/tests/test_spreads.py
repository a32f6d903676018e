from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from muni_econ.errors import MissingFederalRate, ValidationError
from muni_econ.spreads import (
    TaxRegime,
    after_tax_yield,
    combined_retention,
    compute_spreads,
    load_federal_schedule,
)


def test_federal_schedule_regimes():
    fed = load_federal_schedule()
    assert all(fed[y] == 0.35 for y in range(2005, 2013))
    assert all(fed[y] == 0.396 for y in range(2013, 2018))
    assert all(fed[y] == 0.37 for y in (2018, 2019))


def test_retention_examples():
    regime = TaxRegime({2010: 0.35}, {("NY", 2010): 0.05, ("TX", 2010): 0.0})
    assert combined_retention(regime, "TX", None, 2010) == 0.65
    assert combined_retention(regime, "NY", None, 2010) == pytest.approx(0.6175, abs=1e-15)
    assert TaxRegime.default().federal[2015] == 0.396


def test_missing_state_rate_counts_as_zero():
    missing = Counter()
    regime = TaxRegime({2010: 0.35})
    assert combined_retention(regime, "CA", None, 2010, missing) == 0.65
    assert missing["state"] == 1


def test_state_layer_can_be_skipped():
    regime = TaxRegime({2010: 0.35}, {("NY", 2010): 0.05})
    missing = Counter()
    assert combined_retention(regime, "NY", None, 2010, missing, include_state=False) == 0.65
    assert not missing


def test_local_layer_only_when_enabled():
    local = {("36061", 2010): 0.03876}
    off = TaxRegime({2010: 0.35}, {("NY", 2010): 0.05}, local)
    on = TaxRegime({2010: 0.35}, {("NY", 2010): 0.05}, local, use_local=True)
    assert combined_retention(off, "NY", "36061", 2010) == pytest.approx(0.6175)
    assert combined_retention(on, "NY", "36061", 2010) == pytest.approx(0.6175 * (1 - 0.03876))
    missing = Counter()
    combined_retention(on, "NY", "99999", 2010, missing)
    assert missing["local"] == 1


def test_missing_federal_rate_raises():
    with pytest.raises(MissingFederalRate):
        combined_retention(TaxRegime.default(), "NY", None, 2030)


def test_rates_validated():
    with pytest.raises(ValidationError):
        TaxRegime({2010: 0.95})
    with pytest.raises(ValidationError):
        TaxRegime({2010: 0.35}, {("NY", 2010): -0.01})


def test_after_tax_yield_examples():
    assert after_tax_yield(0.031, 1.0) == 0.031
    assert after_tax_yield(0.028, 0.604) == pytest.approx(0.046358, abs=1e-6)
    assert after_tax_yield(0.0, 0.65) == 0.0
    with pytest.raises(ValidationError):
        after_tax_yield(0.03, 0.0)


def test_compute_spreads_examples():
    same = compute_spreads(0.025, 0.025, 1.0)
    assert same.spread == 0.0 and same.after_tax_spread == 0.0
    s = compute_spreads(0.03, 0.02, 0.6175)
    assert s.spread == pytest.approx(0.01, abs=1e-15)
    assert s.after_tax_spread == pytest.approx(0.0285830, abs=1e-7)


@given(
    fed=st.floats(0.0, 0.6),
    state=st.floats(0.0, 0.2),
)
def test_zero_state_rate_gives_one_minus_federal(fed, state):
    regime = TaxRegime({2012: fed}, {("XX", 2012): 0.0, ("YY", 2012): state})
    assert combined_retention(regime, "XX", None, 2012) == 1.0 - fed
    assert 0.0 < combined_retention(regime, "YY", None, 2012) <= 1.0 - fed


@given(y=st.floats(-0.05, 0.5), r=st.floats(-0.05, 0.5))
def test_unit_retention_spreads_agree(y, r):
    s = compute_spreads(y, r, 1.0)
    assert s.spread == s.after_tax_spread
