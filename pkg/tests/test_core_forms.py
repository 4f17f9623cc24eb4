import itertools
import math
import random

import pytest
from hypothesis import given, strategies as st

from biquadric.core_forms import (HeightContext, as_vector, content, delta_profile, evaluate_form,
                                  factorize, floor_root, height, is_primitive, is_squarefree,
                                  is_squarefull, max_radius, mertens_prefix, mobius, mobius_sieve,
                                  parse_exact_number, euler_phi)
from biquadric.errors import PreconditionError

vec7 = st.lists(st.integers(-30, 30), min_size=7, max_size=7)


def test_evaluate_form_examples():
    assert evaluate_form((1, 2), (3, 4)) == 41
    assert evaluate_form((1, 0, 0, 0), (0, 5, -2, 7)) == 0
    assert evaluate_form((1, 1, 1, 1, 1, 1, -1), (0, 0, 0, 0, 0, 1, 1)) == 0


def test_evaluate_form_rejects_mismatch():
    with pytest.raises(PreconditionError):
        evaluate_form((1, 2), (1, 2, 3))


@pytest.mark.parametrize("x,y,h", [
    ((1,) + (0,) * 6, (1,) + (0,) * 6, 1),
    ((2,) + (0,) * 6, (1,) + (0,) * 6, 64),
    ((1,) * 7, (3,) + (0,) * 6, 243),
])
def test_height_examples(x, y, h):
    assert height(x, y) == h
    assert height(x, y, HeightContext(7, 10**6)) == h


def test_height_is_exact_beyond_int64():
    assert height((10**4,) * 7, (10**4,) * 7) == 10**44


def test_height_zero_vector():
    with pytest.raises(PreconditionError):
        height((0, 0, 0), (1, 2, 3))


@given(vec7, vec7, st.integers(-9, 9).filter(bool))
def test_height_scaling(x, y, k):
    if not any(x) or not any(y):
        return
    assert height([k * t for t in x], y) == abs(k) ** 6 * height(x, y)


@given(vec7, vec7)
def test_form_sign_symmetry(x, y):
    assert evaluate_form(x, [-t for t in y]) == evaluate_form(x, y)
    assert evaluate_form([-t for t in x], y) == -evaluate_form(x, y)


def test_primitive_examples():
    assert not is_primitive((2, 4, 6))
    assert is_primitive((2, 3, 0))
    assert not is_primitive((0, 0, 0))
    assert content((0, -6, 9)) == 3


def test_mobius_examples():
    assert [mobius(n) for n in (1, 12, 30, 7)] == [1, 0, -1, -1]
    with pytest.raises(PreconditionError):
        mobius(0)


def test_mobius_sieve_self_test():
    mu = mobius_sieve(10**4)
    acc = [0] * (10**4 + 1)
    for d in range(1, 10**4 + 1):
        if mu[d]:
            for m in range(d, 10**4 + 1, d):
                acc[m] += int(mu[d])
    assert acc[1] == 1 and not any(acc[2:])
    assert all(int(mu[n]) == mobius(n) for n in range(1, 500))


def test_mertens_prefix_matches_sum():
    M = mertens_prefix(200)
    assert [int(M[n]) for n in (1, 2, 3, 10, 100)] == [1, 0, -1, -1, 1]


def test_euler_phi():
    assert [euler_phi(n) for n in (1, 2, 9, 12, 97)] == [1, 1, 6, 4, 96]


@pytest.mark.parametrize("x,delta,bad", [((2, 3, 5), 30, 1), ((2, 2, 3), 12, 4)])
def test_delta_profile_examples(x, delta, bad):
    d = delta_profile(x)
    assert (d.delta, d.delta_bad) == (delta, bad)
    assert not d.degenerate


def test_delta_profile_degenerate():
    assert delta_profile((1, 0, 1)).degenerate


def test_delta_bad_is_squarefull_corpus():
    rng = random.Random(11)
    for _ in range(1000):
        x = [rng.choice([t for t in range(-40, 41) if t]) for _ in range(rng.randint(1, 7))]
        d = delta_profile(x)
        assert is_squarefull(d.delta_bad)
        assert is_squarefree(abs(d.delta) // d.delta_bad)


@given(st.integers(1, 10**6))
def test_factorize_roundtrip(n):
    f = factorize(n)
    assert math.prod(p**e for p, e in f.items()) == n


@given(st.integers(0, 10**30), st.integers(1, 9))
def test_floor_root(n, k):
    r = floor_root(n, k)
    assert r**k <= n < (r + 1) ** k


def test_max_radius_exact_boundary():
    # |x|^6 * 2^5 <= 2^5 * 3^6 exactly at x = 3
    assert max_radius(32 * 3**6, 6, 32) == 3
    assert max_radius(32 * 3**6 - 1, 6, 32) == 2


def test_parse_exact_number():
    assert parse_exact_number("1e5") == 10**5
    assert parse_exact_number("2.5e1") == 25
    assert parse_exact_number("1000") == 1000


def test_as_vector_dimension():
    with pytest.raises(PreconditionError):
        as_vector((1, 2), s=3)
