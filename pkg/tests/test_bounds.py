import logging
import math
import random
from fractions import Fraction

import mpmath
import pytest

from models.errors import InvalidInputError
from services import bounds

CTX = mpmath.MPContext()
CTX.prec = 128


def test_guaranteed_edges_small_cases():
    assert bounds.guaranteed_edges(4, 2, "0.5") == Fraction(6, 5)
    assert bounds.guaranteed_edges(6, 3, "0.5") == 2
    assert bounds.bad_denominator(10, 2, "0.6") == 1
    assert bounds.guaranteed_edges(100, 1, "0.2") == 100


def test_guaranteed_edges_is_exact_rational():
    value = bounds.guaranteed_edges(30, 3, "0.5")
    assert isinstance(value, Fraction)
    assert value == Fraction(math.comb(30, 3), bounds.bad_denominator(30, 3, "0.5"))


def test_choose_k_pins():
    assert bounds.choose_k(100, "0.2") == 1
    assert bounds.choose_k(30, "0.5") == 3


def test_windowed_choice_keeps_unit_vector_baseline():
    # the window around 0.2 * 200 / 5 is [4, 12] and every k there gives fewer than 200 edges
    assert bounds.choose_k(200, "0.2") == 1
    edges = [bounds.guaranteed_edges(d, bounds.choose_k(d, "0.2"), "0.2") for d in (50, 100, 200)]
    assert edges == sorted(edges)
    for d in (2, 7, 50, 100, 200, 400):
        assert bounds.guaranteed_edges(d, bounds.choose_k(d, "0.2"), "0.2") >= d


@pytest.mark.parametrize("d,c", [(12, "0.1"), (20, "0.3"), (40, "0.5"), (60, "0.9")])
def test_windowed_choice_never_beats_full_scan(d, c):
    windowed = bounds.choose_k(d, c)
    full = bounds.choose_k(d, c, full_scan=True)
    assert bounds.guaranteed_edges(d, windowed, c) <= bounds.guaranteed_edges(d, full, c)
    best = max(bounds.guaranteed_edges(d, k, c) for k in range(1, d + 1))
    assert bounds.guaranteed_edges(d, full, c) == best


def test_choose_k_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        bounds.choose_k(0, "0.5")
    with pytest.raises(InvalidInputError):
        bounds.choose_k(10, "1")


def test_threshold_dimension_regression():
    d, root = bounds.threshold_dimension("0.2", "0.005")
    assert d == 2
    assert abs(root**2 - 2) < 1e-30


def test_db_vanishes_on_the_diagonal():
    rng = random.Random(7)
    for _ in range(100):
        a = rng.uniform(1e-4, 0.3)
        assert abs(bounds.entropy_H_db(a, a)) < 1e-12


@pytest.mark.parametrize("c", ["0.05", "0.2", "0.5"])
def test_db_is_positive_beyond_c(c):
    rng = random.Random(13)
    limit = float(c)
    for _ in range(200):
        a = rng.uniform(1e-4, limit)
        b = rng.uniform(limit, 0.999)
        if b > limit:
            assert bounds.entropy_H_db(a, b) > 0


def test_db_example_is_positive():
    assert bounds.entropy_H_db("0.04", "0.5") > 0


def test_da_vanishes_on_the_diagonal():
    for a in ("0.01", "0.1", "0.25"):
        assert abs(bounds.entropy_H_da(a, a)) < 1e-25


def test_db_matches_finite_differences():
    rng = random.Random(11)
    ctx = mpmath.MPContext()
    ctx.prec = 256
    h = ctx.mpf("1e-30")
    for _ in range(1000):
        b = ctx.mpf(rng.uniform(0.05, 0.95))
        a = ctx.mpf(rng.uniform(0.01, 0.99))
        if 1 - 2 * a + a * (b + h) <= 0 or 1 - 2 * a + a * (b - h) <= 0:
            continue
        numeric = (bounds.entropy_H(a, b + h, prec=256) - bounds.entropy_H(a, b - h, prec=256)) / (2 * h)
        exact = bounds.entropy_H_db(a, b, prec=256)
        assert abs(numeric - exact) <= 1e-6 * max(abs(exact), 1e-12)


def test_growth_ratio_is_increasing():
    grid = [1e-4 + (0.9 - 1e-4) * i / 49 for i in range(50)]
    values = [bounds.growth_ratio(c) for c in grid]
    assert all(x < y for x, y in zip(values, values[1:]))


def test_growth_ratio_small_c_behaviour():
    c = "0.0001"
    ratio = bounds.growth_ratio(c)
    lead = bounds.growth_ratio_leading_term(c)
    assert abs(ratio - lead) <= 1e-2 * lead


def test_rate_crossover():
    rho = bounds.rho()
    crossover = bounds.rate_crossover()
    assert 0.04 < crossover < 0.08
    assert bounds.entropy_H("0.002", "0.01") < mpmath.log1p(rho * mpmath.mpf("0.01"))
    assert bounds.entropy_H("0.04", "0.2") >= mpmath.log1p(rho * mpmath.mpf("0.2"))


def test_rho_value():
    assert abs(bounds.rho() - (mpmath.log(5) - mpmath.mpf(8) / 5)) < 1e-15
    assert abs(float(bounds.rho()) - 0.009438) < 1e-6


def test_optimal_a_tends_to_a_fifth():
    c = "0.001"
    a_star = bounds.optimal_a(c)
    assert abs(a_star / mpmath.mpf(c) - mpmath.mpf(1) / 5) < 0.02
    assert abs(bounds.entropy_H_da(a_star, c)) < 1e-15


def test_analyze_h_minimum_at_b_equal_c():
    rows = bounds.analyze_h("0.05", "0.2", samples=32)
    values = [row.H_value for row in rows]
    assert values.index(min(values)) == 0
    assert rows[-1].b == 1 and rows[-1].dHdb_value is None


def test_stirling_gap_shrinks():
    rows = bounds.stirling_consistency("0.5", "0.2", [100, 1000, 10000])
    gaps = [row.relative_gap for row in rows]
    assert gaps[0] > gaps[1] > gaps[2]
    with pytest.raises(InvalidInputError):
        bounds.stirling_consistency("0.2", "0.5", [100])


def test_envelopes():
    assert bounds.lower_envelope(50, 0) == 1
    assert abs(bounds.lower_envelope(10, "1e-12") - 1) < 1e-9
    expected = (1 + (bounds.rho() - mpmath.mpf("0.005")) * mpmath.mpf("0.2")) ** 100
    assert abs(bounds.lower_envelope(100, "0.2", "0.005") - expected) < 1e-12
    assert abs(bounds.upper_envelope(10, "0.01") - CTX.mpf("1.0375") ** 10) < 1e-30
    lo, hi = bounds.erdos_furedi_envelopes(10, "0.1")
    assert abs(lo - CTX.mpf("1.01") ** 10) < 1e-30
    assert abs(hi - CTX.mpf("1.4") ** 10) < 1e-30
    with pytest.raises(InvalidInputError):
        bounds.lower_envelope(10, "0.2", "0.5")


def test_upper_envelope_warns_outside_its_range(caplog):
    with caplog.at_level(logging.WARNING, logger="services.bounds"):
        bounds.upper_envelope(10, "0.1")
    assert "not claimed" in caplog.text


def test_rankin_matches_independent_evaluation():
    ctx = mpmath.MPContext()
    ctx.prec = 200
    alpha = ctx.mpf("0.6")
    for d in (2, 10, 50):
        expected = ctx.sqrt(ctx.pi * d**3 * ctx.cos(2 * alpha) / 2) / (ctx.sqrt(2) * ctx.sin(alpha)) ** (d - 1)
        got = bounds.rankin_asymptotic("0.6", d)
        assert abs(got - expected) <= 1e-10 * expected
    with pytest.raises(InvalidInputError):
        bounds.rankin_asymptotic("0.8", 10)


def test_cap_count_forms():
    y = mpmath.mpf("0.05")
    cap = bounds.cap_count_bound(20, "0.05")
    assert abs(cap.statement_form - 400 * (1 - y) ** -20) <= 1e-10 * cap.statement_form
    assert abs(cap.proof_form - 400 * (1 - y) ** -19) <= 1e-10 * cap.proof_form
    assert cap.proof_form < cap.statement_form


def test_cap_half_angle_range():
    for y in ("0.01", "0.5", "0.99"):
        alpha = bounds.cap_half_angle(y)
        assert 0 < alpha < mpmath.pi / 4


def test_sine_ratio_margin_grid():
    for i in range(1, 101):
        c = Fraction(24, 1000) * i / 101
        value = bounds.sine_ratio_margin(c)
        assert float(value) >= 1 - 1.744 * float(c) - 1e-15


def test_sine_ratio_margin_independent_value():
    ctx = mpmath.MPContext()
    ctx.prec = 200
    c = ctx.mpf("0.02")
    expected = ctx.sin(ctx.pi / 3 - 2 * c) / ctx.sin(ctx.pi / 3 + c)
    got = bounds.sine_ratio_margin("0.02")
    assert abs(got - expected) <= 1e-10 * expected
    assert abs(float(got) - 0.96516) < 1e-5
    with pytest.raises(InvalidInputError):
        bounds.sine_ratio_margin("0.03")


def test_cosine_margin_positive():
    for c in ("0.001", "0.02", "0.3", "0.9"):
        assert bounds.cosine_margin(c) > 0


def test_upper_bound_chain():
    small = bounds.upper_bound_chain(10, "0.01")
    assert small.product_condition
    assert not small.chain_holds
    large = bounds.upper_bound_chain(20000, "0.01")
    assert large.chain_holds
    with pytest.raises(InvalidInputError):
        bounds.upper_bound_chain(10, "0.3")


def test_jung_radius():
    assert abs(3 * bounds.jung_radius(2) ** 2 - 1) < 1e-30


def test_bound_report_small_example():
    report = bounds.bound_report(4, "0.5", k=2)
    assert report.A_exact == Fraction(6, 5)
    assert report.A_ceil == 2
    assert report.threshold == 1
    assert "not claimed" in report.provenance["upper_envelope"]
    assert report.cap_count is None or report.cap_count.d == 4


def test_bound_report_chooses_k():
    report = bounds.bound_report(100, "0.2")
    assert report.k == 1
    assert report.A_exact == 100
    assert report.rankin is not None


@pytest.mark.slow
def test_full_scan_at_large_dimension():
    k = bounds.choose_k(1000, "0.2", full_scan=True)
    windowed = bounds.choose_k(1000, "0.2")
    assert bounds.guaranteed_edges(1000, windowed, "0.2") <= bounds.guaranteed_edges(1000, k, "0.2")


@pytest.mark.slow
def test_windowed_choice_can_miss_the_full_scan_optimum():
    windowed = bounds.choose_k(1000, "0.5")
    full = bounds.choose_k(1000, "0.5", full_scan=True)
    assert (windowed, full) == (119, 137)
    assert bounds.guaranteed_edges(1000, windowed, "0.5") < bounds.guaranteed_edges(1000, full, "0.5")
