import math

import numpy as np
import pytest

from locsaa import concentration as conc


# -- formulas ------------------------------------------------------------------

def test_panchenko_examples():
    assert conc.panchenko_threshold(0.0, 10, 1.0).threshold == 0.0
    assert conc.panchenko_threshold(2.0, 8, 1.0).threshold == pytest.approx(1.0)
    assert conc.panchenko_threshold(1.0, 8, 3.0).claimed == pytest.approx(2 * math.exp(-3))
    assert conc.panchenko_threshold(1.0, 8, 3.0).claimed == pytest.approx(0.0996, abs=5e-5)


def test_panchenko_rejects_bad_inputs():
    with pytest.raises(ValueError):
        conc.panchenko_threshold(-1.0, 8, 1.0)
    with pytest.raises(ValueError):
        conc.panchenko_threshold(1.0, 8, 0.0)


def test_self_normalized_examples():
    const = conc.self_normalized_threshold([3.0] * 5, 3.0, 0.0, 1.0)
    assert const.threshold == 0.0 and const.inputs["deviation"] == 0.0
    two = conc.self_normalized_threshold([0.0, 2.0], 1.0, 1.0, 1.0)
    assert two.inputs["proxy"] == pytest.approx(2.0)
    assert two.threshold == pytest.approx(2.0)


def test_self_normalized_scales_with_root_n():
    small = conc.self_normalized_threshold([0.0, 2.0], 1.0, 1.0, 1.0).threshold
    large = conc.self_normalized_threshold([0.0, 2.0] * 2, 1.0, 1.0, 1.0).threshold
    assert small / large == pytest.approx(math.sqrt(2))


def test_uniform_deviation_examples():
    assert conc.uniform_deviation_threshold(0.0, 1.0, 1.0, 8, 1.0).threshold == 0.0
    assert conc.uniform_deviation_threshold(1.0, 1.0, 1.0, 8, 1.0).threshold == \
        pytest.approx(math.sqrt(2))
    one = conc.uniform_deviation_threshold(1.0, 0.7, 1.3, 20, 2.0).threshold
    assert conc.uniform_deviation_threshold(3.5, 0.7, 1.3, 20, 2.0).threshold == \
        pytest.approx(3.5 * one)


def test_lower_tail_constant_variable():
    assert conc.lower_tail_probability_bound(1.0, 1.0, 2.0, 0.5, 100) == \
        pytest.approx(math.exp(-12.5), rel=1e-12)


def test_lower_tail_closed_form_at_two():
    rng = np.random.default_rng(0)
    for _ in range(50):
        EZ, eps, N = rng.uniform(0.1, 3), rng.uniform(0.01, 1), int(rng.integers(1, 500))
        EZ2 = EZ ** 2 * rng.uniform(1, 5)
        closed = math.exp(-eps ** 2 * EZ ** 2 * N / (2 * EZ2))
        assert conc.lower_tail_probability_bound(EZ, EZ2, 2.0, eps, N) == \
            pytest.approx(closed, rel=1e-12)


def test_lower_tail_monotone():
    b = [conc.lower_tail_probability_bound(1.0, 1.5, 1.5, 0.3, n) for n in (10, 20, 40)]
    assert b[0] >= b[1] >= b[2]
    b = [conc.lower_tail_probability_bound(1.0, 1.5, 1.5, e, 20) for e in (0.1, 0.2, 0.4)]
    assert b[0] >= b[1] >= b[2]


def test_lower_tail_domain():
    for args in ((1.0, 1.0, 1.0, 0.5), (1.0, 1.0, 2.5, 0.5), (0.0, 1.0, 2.0, 0.5),
                 (1.0, 0.5, 2.0, 0.5), (1.0, 1.0, 2.0, 0.0)):
        with pytest.raises(ValueError):
            conc.lower_tail_exponent(*args)


def test_lower_tail_constant_sample_never_hits():
    freq = conc.frequency_from_pairs(1.0 - np.ones(200), np.full(200, 0.5))
    assert freq.frequency == 0.0


def test_lower_tail_discrepancy_flag():
    # the displayed exponent and the derived one differ, even at a = 2
    rep = conc.lower_tail_discrepancy(1.0, 1.0, 2.0, 0.5)
    assert rep["proof_exponent"] == pytest.approx(0.125)
    assert rep["stated_exponent"] == pytest.approx(0.5 * math.sqrt(0.5))
    assert not rep["agree"]


# -- Monte Carlo frequencies ---------------------------------------------------

def test_wilson_example():
    lo, hi = conc.wilson_interval(450, 500)
    assert lo == pytest.approx(0.871, abs=5e-4)
    assert hi == pytest.approx(0.923, abs=5e-4)


def test_degenerate_generator_frequency_zero():
    f = conc.empirical_tail_frequency(lambda r: (0.0, 1.0), 100)
    assert f.frequency == 0.0 and f.wilson_lo == 0.0


def test_fair_coin_frequency():
    def coin(r):
        return float(np.random.default_rng(r).integers(2)), 0.5
    f = conc.empirical_tail_frequency(coin, 2000)
    assert f.wilson_lo <= 0.5 <= f.wilson_hi


def test_replications_minimum():
    with pytest.raises(ValueError):
        conc.empirical_tail_frequency(lambda r: (0.0, 1.0), 99)


def test_panchenko_pareto_at_t2():
    rows = conc.family_rows("panchenko", conc.generator_from_name("pareto-4.5"), 50, 2000, 0,
                            ts=[2.0])
    for row in rows:
        assert row["frequency"] <= 2 * math.exp(-2) + (row["wilson_hi"] - row["wilson_lo"])


def test_generator_names():
    g = conc.generator_from_name("student_t-8")
    assert g.variance == pytest.approx(8 / 6)
    with pytest.raises(ValueError):
        conc.generator_from_name("cauchy-1")
    with pytest.raises(ValueError):
        conc.generator_from_name("pareto-x")


@pytest.mark.parametrize("name", ["pareto-4.5", "student_t-8"])
def test_generator_moments_match_sampling(name):
    g = conc.generator_from_name(name)
    x = g.draw(np.random.default_rng(1), 400_000)
    assert x.mean() == pytest.approx(g.mean, abs=0.02)
    assert np.mean(x ** 2) == pytest.approx(g.second, rel=0.05)
