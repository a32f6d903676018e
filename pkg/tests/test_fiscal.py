from datetime import date

import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from muni_econ.bonds import Bond
from muni_econ.errors import MissingField, NoRatedBonds, ValidationError, ZeroBase
from muni_econ.fiscal import (
    CountyYear,
    MultiplierInputs,
    county_rating,
    interest_ratio_panel,
    interest_ratios,
    issuance_growth,
    jobs_multiplier,
    months_between,
    multiplier_table,
    revenue_measures,
)


def cy(**kw):
    base = dict(fips="01001", year=2010)
    base.update(kw)
    return CountyYear(**base)


def test_revenue_measure_example():
    r1, r2, r3 = revenue_measures(cy(total_revenue=10, state_igr=2, total_expenditure=7,
                                     interest_total=1, interest_general=1))
    assert r1 == 2
    assert r2 == 2
    assert r3 == 9


def test_revenue_cancellation():
    r1, _, _ = revenue_measures(cy(total_revenue=10, state_igr=10, total_expenditure=3,
                                   interest_total=3, interest_general=3))
    assert r1 == 0


def test_zero_interest_makes_r1_equal_r2():
    r1, r2, _ = revenue_measures(cy(total_revenue=10, state_igr=2, total_expenditure=7,
                                    interest_total=0, interest_general=0))
    assert r1 == r2


def test_missing_field_raises():
    with pytest.raises(MissingField):
        revenue_measures(cy(total_revenue=10))


def test_interest_ratio_example():
    lag = cy(year=2009, total_revenue=10, state_igr=2, total_expenditure=5, interest_total=1,
             interest_general=1, total_lt_debt=40)
    cur = cy(total_revenue=10, state_igr=2, total_expenditure=5, interest_total=1.5,
             interest_general=1, total_lt_debt=40, debt_retired=40)
    out = interest_ratios(cur, lag)
    assert revenue_measures(lag)[0] == 4
    assert out.int_rev1 == 0.25
    assert out.int_debt == 0.025
    assert out.net_debt == 0
    assert out.int_rev3 == pytest.approx(1.5 / 9)
    assert not out.flags


def test_negative_denominator_sign_preserved_and_flagged():
    lag = cy(year=2009, total_revenue=4, state_igr=2, total_expenditure=7, interest_total=1,
             interest_general=1, total_lt_debt=40)
    cur = cy(total_revenue=10, state_igr=2, total_expenditure=7, interest_total=1,
             interest_general=1, total_lt_debt=40, debt_retired=1)
    out = interest_ratios(cur, lag)
    assert out.int_rev1 == -0.25
    assert "negative:int_rev1" in out.flags
    assert not out.excluded


def test_zero_denominator_excluded():
    lag = cy(year=2009, total_revenue=4, state_igr=0, total_expenditure=5, interest_total=1,
             interest_general=1, total_lt_debt=40)
    cur = cy(total_revenue=10, state_igr=2, total_expenditure=7, interest_total=1,
             interest_general=1, total_lt_debt=40, debt_retired=1)
    out = interest_ratios(cur, lag)
    assert out.int_rev1 is None and out.excluded


def test_ratio_panel_keys_by_following_year():
    rows = [dict(fips="01001", year=y, total_revenue=10, state_igr=2, total_expenditure=5,
                 interest_total=1, interest_general=1, total_lt_debt=40, debt_retired=4)
            for y in (2008, 2009, 2010)]
    panel, excluded = interest_ratio_panel(pd.DataFrame(rows))
    assert list(panel["year"]) == [2010, 2011]
    assert excluded == 0
    assert panel["int_rev1"].iloc[0] == 0.25


def test_multiplier_examples():
    assert jobs_multiplier(MultiplierInputs("x", {"a": 1.0}, {"a": 0.2})) == 0.2
    assert jobs_multiplier(MultiplierInputs("x", {"a": 1.0, "b": 2.0}, {"a": 0.0, "b": 0.0})) == 0.0
    m = MultiplierInputs("x", {"a": 0.6, "b": 0.4}, {"a": 0.1, "b": 0.5})
    assert jobs_multiplier(m) == pytest.approx(0.26, abs=1e-15)


def test_multiplier_adds_downstream_weights():
    m = MultiplierInputs("x", {"a": 0.6}, {"a": 0.1, "b": 0.5}, {"b": 0.4})
    assert jobs_multiplier(m) == pytest.approx(0.26, abs=1e-15)
    with pytest.raises(ValidationError):
        MultiplierInputs("x", {"a": -0.1}, {"a": 0.1})


@given(st.dictionaries(st.sampled_from("abcdef"), st.floats(0, 5), min_size=1),
       st.dictionaries(st.sampled_from("abcdef"), st.floats(0, 1), min_size=1))
def test_multiplier_bounded_by_total_weight(weights, shares):
    m = jobs_multiplier(MultiplierInputs("x", weights, shares))
    assert 0.0 <= m <= sum(weights.values()) + 1e-12


def test_multiplier_table():
    weights = pd.DataFrame({"industry": ["mfg", "mfg"], "sector": ["a", "b"],
                            "weight_up": [0.6, 0.4], "weight_down": [0.0, 0.0]})
    shares = pd.DataFrame({"fips": ["01001", "01001"], "sector": ["a", "b"],
                           "wage_share": [0.1, 0.5], "emp_share": [0.2, 0.2]})
    t = multiplier_table(weights, shares)
    assert t["exposure_wage"].iloc[0] == pytest.approx(0.26)
    assert t["exposure_emp"].iloc[0] == pytest.approx(0.2)


def _rated(cusip, rating, dated):
    return Bond(cusip, dated, date(2040, 1, 1), 0.04, 1e6, rating=rating)


def test_county_rating():
    assert county_rating([_rated("AAAAAAAA1", 28, date(2010, 1, 1))] * 3) == 28.0
    pair = [_rated("AAAAAAAA1", 28, date(2010, 1, 1)), _rated("BBBBBBBB2", 26, date(2010, 1, 1))]
    assert county_rating(pair) == 27.0
    with pytest.raises(NoRatedBonds):
        county_rating([])


def test_county_rating_window():
    deal = date(2015, 6, 15)
    bonds = [_rated("AAAAAAAA1", 20, date(2014, 6, 1)), _rated("BBBBBBBB2", 10, date(2013, 6, 1)),
             _rated("CCCCCCCC3", 1, date(2015, 1, 1)), _rated("DDDDDDDD4", 1, date(2012, 1, 1))]
    assert county_rating(bonds, deal) == 15.0


def test_months_between():
    assert months_between(date(2015, 6, 30), date(2015, 7, 1)) == 1
    assert months_between(date(2015, 6, 1), date(2014, 6, 30)) == -12


def _issues(event, pars):
    """One issue at the first month of each half-year listed as (month offset, par)."""
    out = []
    for m, par in pars:
        y, mo = divmod(event.month - 1 + m, 12)
        out.append((date(event.year + y, mo + 1, 1), par))
    return out


def test_issuance_growth_examples():
    ev = date(2016, 7, 1)
    flat = _issues(ev, [(-18, 10)] + [(m, 10) for m in (-12, -6, 0, 6)])
    assert [r for _, r in issuance_growth(flat, ev, 4)] == [1.0, 1.0, 1.0, 1.0]
    jump = _issues(ev, [(-18, 10), (-12, 30)])
    out = issuance_growth(jump, ev, 3)
    assert out == [(-12, 3.0), (-6, 0.0), (0, 0.0)]
    with pytest.raises(ZeroBase):
        issuance_growth(_issues(ev, [(0, 10)]), ev, 2)
