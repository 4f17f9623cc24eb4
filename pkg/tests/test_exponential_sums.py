import cmath
import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from biquadric.errors import PreconditionError
from biquadric.exponential_sums import (classify_arc, convergents, growth_exponent,
                                        hua_fourth_moment, hua_quadrature, major_arc_corpus,
                                        major_arc_residual, scaled_fresnel, weyl_bound_monitor,
                                        weyl_sum)
from biquadric.real_densities import fresnel_I

dyadic = st.integers(0, 2**20 - 1).map(lambda k: Fraction(k, 2**20))


def naive_weyl(alpha, x, P):
    return sum(cmath.exp(2j * math.pi * float(alpha * x * y * y % 1)) for y in range(-P, P + 1))


def test_weyl_examples():
    assert weyl_sum(0, 3, 10) == 21
    assert weyl_sum(Fraction(1, 2), 1, 10) == pytest.approx(1)
    assert weyl_sum(0.5, 1, 8) == pytest.approx(1)


@given(dyadic, st.integers(-5, 5).filter(bool), st.integers(0, 60))
def test_weyl_against_naive(alpha, x, P):
    assert abs(weyl_sum(alpha, x, P) - naive_weyl(alpha, x, P)) < 1e-9


@given(dyadic, st.integers(-5, 5).filter(bool), st.integers(0, 300))
def test_weyl_periodic_and_conjugate(alpha, x, P):
    T = weyl_sum(alpha, x, P)
    assert abs(weyl_sum(alpha + 1, x, P) - T) < 1e-10
    assert abs(weyl_sum(-alpha, x, P) - T.conjugate()) < 1e-10
    assert abs(T) <= 2 * P + 1 + 1e-9


def test_weyl_float_alpha_periodicity_reduced_first():
    a = 0.123456789
    assert abs(weyl_sum(a + 1, 2, 500) - weyl_sum(a, 2, 500)) < 1e-6


# -- arcs -------------------------------------------------------------------------------------

def test_convergents_of_rational():
    assert list(convergents(Fraction(13, 8)))[-1] == (13, 8)


def test_exact_rational_is_major():
    lab = classify_arc(Fraction(3, 7), (1, 2, -1), 10)
    assert lab.major and (lab.a, lab.q, lab.beta) == (3, 7, 0.0)


def test_tiny_alpha_is_major_near_zero():
    P, x = 20, (1, 3)
    lab = classify_arc(Fraction(1, 2 * P * P * 9), x, P)
    assert lab.major and lab.q == 1 and lab.a == 0


@given(dyadic, st.integers(2, 200))
def test_arc_labels(alpha, P):
    x = (1, -2, 3)
    lab = classify_arc(alpha, x, P)
    assert math.gcd(lab.a, lab.q) == 1
    assert abs(alpha - Fraction(lab.a, lab.q)) <= Fraction(1, lab.q) / (2 * P ** 1.05 * 3) * (1 + 1e-9)
    if not lab.major:
        # a minor label either has a large denominator or sits off the arc
        assert lab.q >= P * 3 or abs(lab.beta) >= 1 / (2 * lab.q * 3) * P ** -1.05


def test_arc_precondition():
    with pytest.raises(PreconditionError):
        classify_arc(Fraction(3, 2), (1,), 10)


def test_residual_rejects_minor():
    # best approximation 5/8 has q > P|x|
    alpha = Fraction(618, 1000)
    lab = classify_arc(alpha, (1,), 5)
    assert not lab.major and lab.q == 8
    with pytest.raises(PreconditionError):
        major_arc_residual(alpha, 1, 5, lab)


def test_residual_at_rational_points():
    for a, q in [(1, 3), (2, 5), (3, 8), (5, 12)]:
        P = 60
        lab = classify_arc(Fraction(a, q), (1,), P)
        rep = major_arc_residual(Fraction(a, q), 1, P, lab)
        assert rep["ratio"] < 3


def test_scaled_fresnel_near_zero():
    # q = 1, beta -> 0: the approximation tends to the full integral 2P
    assert scaled_fresnel(1e-12, 1, 50) == pytest.approx(100, rel=1e-6)


def test_major_arc_corpus_bounded():
    res = major_arc_corpus(500, 7, 200, seed=1)
    assert res["max_ratio"] < 5


# -- moments ----------------------------------------------------------------------------------

def test_hua_examples():
    assert hua_fourth_moment(1, 1) == 33
    assert hua_fourth_moment(1, 0) == 1
    with pytest.raises(PreconditionError):
        hua_fourth_moment(0, 5)


@pytest.mark.parametrize("P", [1, 2, 5, 9])
def test_hua_against_enumeration(P):
    r = range(-P, P + 1)
    want = sum(1 for a, b, c, d in itertools.product(r, repeat=4) if a * a + b * b == c * c + d * d)
    assert hua_fourth_moment(1, P) == want


def test_hua_quadrature_p20():
    assert hua_quadrature(1, 20) == pytest.approx(hua_fourth_moment(1, 20), rel=1e-3)


@pytest.mark.parametrize("x", [1, 2, -3])
def test_hua_independent_of_coefficient(x):
    P = 10
    assert hua_quadrature(x, P, 4096) == pytest.approx(hua_fourth_moment(x, P), rel=1e-9)


def test_hua_monotone_and_growth():
    Ps = [100, 300, 1000, 3000, 10000]
    vals = [hua_fourth_moment(1, P) for P in Ps]
    assert vals == sorted(vals)
    ratios = [v / (P * P * math.log(P)) for v, P in zip(vals, Ps)]
    assert max(ratios) < 20
    assert growth_exponent(Ps, vals) <= 2.15


def test_growth_exponent_power_law():
    assert growth_exponent([10, 100, 1000], [3e2, 3e4, 3e6]) == pytest.approx(2.0)


# -- Weyl monitor -----------------------------------------------------------------------------

def test_weyl_monitor_no_exponent_violation():
    golden = (math.sqrt(5) - 1) / 2
    rep = weyl_bound_monitor((100, 1000, 10000), (1, 2, 3, 5), n_alpha=20, seed=0,
                             extra_alphas=[golden])
    assert not rep["exponent_violation"]
    assert all(r["max_ratio"] < 5 for r in rep["rows"])


def test_weyl_monitor_small_alpha():
    # T ~ 2P + 1 against a right-hand side ~ P: bounded by a small constant
    rep = weyl_bound_monitor((100, 1000), (1,), n_alpha=0, extra_alphas=[1e-9])
    assert all(r["max_ratio"] <= 3 for r in rep["rows"])
