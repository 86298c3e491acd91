from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from braid.economics import (
    CostBreakdown,
    CostRecord,
    DegenerateBaseline,
    NonPositiveN,
    PriceSheet,
    TokenUsage,
    UnknownModel,
    aggregate_model_cost,
    amortized_cost,
    cost_of_usage,
    ppd,
    solve_only_cost,
    to_cents,
)

SHEET = PriceSheet.per_million({
    "gpt-4.1": ("2.00", "8.00"),
    "gpt-5-nano": ("0.05", "0.40"),
    "gpt-5": ("1.25", "10.00"),
})


def hand_cost(tin, tout, pin_per_m, pout_per_m):
    """Independent oracle in exact rationals."""
    return Fraction(tin) * Fraction(pin_per_m) / 10**6 + Fraction(tout) * Fraction(pout_per_m) / 10**6


@pytest.mark.parametrize("model,tin,tout,expected", [
    ("gpt-4.1", 1000, 200, "0.0036"),
    ("gpt-5-nano", 123456, 7890, "0.0093288"),
    ("gpt-5", 0, 1, "0.00001"),
    ("gpt-5", 0, 0, "0"),
])
def test_cost_fixtures(model, tin, tout, expected):
    got = cost_of_usage(TokenUsage(tin, tout), model, SHEET)
    assert got == Decimal(expected)
    micro = (got * 10**6).quantize(Decimal(1))
    assert micro == (Decimal(expected) * 10**6).quantize(Decimal(1))


def test_unknown_model():
    with pytest.raises(UnknownModel, match="mystery"):
        cost_of_usage(TokenUsage(1, 1), "mystery", SHEET)


def test_negative_tokens_rejected():
    with pytest.raises(ValueError):
        TokenUsage(-1, 0)


def test_price_sheet_csv(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("# comment\nmodel_name,usd_per_1m_input,usd_per_1m_output\nm,0.15,0.6\n")
    sheet = PriceSheet.load(path)
    assert sheet["m"].p_in == Decimal("0.00000015")
    assert sheet.to_dict() == {"m": {"usd_per_1m_input": "0.15", "usd_per_1m_output": "0.6"}}
    bad = tmp_path / "bad.csv"
    bad.write_text("model,input\nm,1\n")
    with pytest.raises(ValueError, match="missing columns"):
        PriceSheet.load(bad)


def test_breakdown_excludes_judge_by_default():
    recs = [
        CostRecord.price("q", "braid_generation", TokenUsage(1000, 200), "gpt-4.1", SHEET),
        CostRecord.price("q", "braid_solve", TokenUsage(300, 50), "gpt-5-nano", SHEET),
        CostRecord.price("q", "judge", TokenUsage(400, 20), "gpt-4.1", SHEET),
    ]
    b = CostBreakdown.from_records(recs)
    assert b.c_braid == Decimal("0.0036")
    assert solve_only_cost(b) == Decimal("0.000035")
    with_judge = CostBreakdown.from_records(recs, include_judge=True)
    assert with_judge.c_inference == Decimal("0.000035") + Decimal("0.00096")
    assert aggregate_model_cost(recs, "gpt-4.1") == Decimal("0.0036") + Decimal("0.00096")
    with pytest.raises(ValueError):
        CostRecord.price("q", "thinking", TokenUsage(), "gpt-4.1", SHEET)


def test_amortization_endpoints():
    assert amortized_cost(Decimal("0.5"), Decimal("0.1"), 1) == Decimal("0.6")
    assert amortized_cost(Decimal("0.5"), Decimal("0.1"), 5) == Decimal("0.2")
    for bad in (0, -3):
        with pytest.raises(NonPositiveN):
            amortized_cost(1, 1, bad)


def test_ppd_examples():
    base_cost = Decimal("74.06") * Decimal("0.95") / Decimal("0.96")
    assert ppd(Decimal("0.96"), Decimal("1"), Decimal("0.95"), base_cost) == pytest.approx(74.06, abs=1e-9)
    assert ppd(Decimal("0.5"), Decimal("2"), Decimal("0.5"), Decimal("1")) == 0.5
    with pytest.raises(DegenerateBaseline):
        ppd(1, 1, 0, 1)
    with pytest.raises(DegenerateBaseline):
        ppd(1, 1, 1, 0)


def test_cents():
    assert to_cents(Decimal("0.0075")) == Decimal("0.75")


_money = st.decimals(min_value=Decimal("0.000001"), max_value=Decimal("1000"), places=6, allow_nan=False)
_acc = st.decimals(min_value=Decimal("0.001"), max_value=Decimal("1"), places=3, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(_acc, _money)
def test_baseline_self_ppd_exact(a, c):
    assert ppd(a, c, a, c) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**7), st.integers(0, 10**7), st.integers(0, 10**7), st.integers(0, 10**7),
       st.sampled_from(["gpt-4.1", "gpt-5-nano", "gpt-5"]))
def test_cost_linearity(i1, o1, i2, o2, model):
    a, b = TokenUsage(i1, o1), TokenUsage(i2, o2)
    assert cost_of_usage(a + b, model, SHEET) == cost_of_usage(a, model, SHEET) + cost_of_usage(b, model, SHEET)
    pin, pout = {"gpt-4.1": ("2", "8"), "gpt-5-nano": ("0.05", "0.4"), "gpt-5": ("1.25", "10")}[model]
    assert Fraction(cost_of_usage(a, model, SHEET)) == hand_cost(i1, o1, pin, pout)


@settings(max_examples=300, deadline=None)
@given(_money, _money, st.integers(1, 10**12))
def test_amortization_sandwich(c_braid, c_inf, n):
    amort = amortized_cost(c_braid, c_inf, n)
    assert c_inf <= amort <= c_inf + c_braid
    exact = Fraction(c_braid) / n + Fraction(c_inf)
    assert abs(Fraction(amort) - exact) <= exact * Fraction(1, 10**50)
