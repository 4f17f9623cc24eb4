import itertools
import math
import random
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from biquadric.core_forms import is_primitive
from biquadric.errors import PreconditionError
from biquadric.lattice_geometry import (check_schmidt_bound, count_lattice_points_box,
                                        hermite_with_transform, lattice_from_basis, lll_reduce,
                                        schmidt_envelope, solution_lattice, successive_minima)


def naive_M1(y, R):
    return sum(1 for x in itertools.product(range(-R, R + 1), repeat=len(y))
               if sum(a * b * b for a, b in zip(x, y)) == 0)


def test_example_lattices():
    lat = solution_lattice((1, 2))
    assert [list(map(abs, r)) for r in lat.basis] == [[4, 1]]
    assert lat.det2 == 17
    assert solution_lattice((1, 1, 1)).det2 == 3
    e = solution_lattice((1, 0, 0, 0, 0, 0, 0))
    assert e.det2 == 1 and e.rank == 6
    assert sorted(tuple(map(abs, r)) for r in e.basis) == sorted(
        tuple(int(i == j) for i in range(7)) for j in range(1, 7))


def test_zero_y_rejected():
    with pytest.raises(PreconditionError):
        solution_lattice((0, 0, 0))


def test_det_identity_corpus_fast():
    rng = random.Random(7)
    done, t0 = 0, time.perf_counter()
    while done < 200:
        s = rng.randint(3, 7)
        y = [rng.randint(-20, 20) for _ in range(s)]
        if not is_primitive(y):
            continue
        assert solution_lattice(y).det2 == sum(t**4 for t in y)
        done += 1
    assert time.perf_counter() - t0 < 10


def test_basis_vectors_lie_on_hyperplane():
    y = (3, -5, 7, 2)
    lat = solution_lattice(y)
    for r in lat.basis:
        assert sum(a * b * b for a, b in zip(r, y)) == 0
    assert lat.contains((25, -9, 0, 0)) and not lat.contains((1, 0, 0, 0))


@pytest.mark.parametrize("y,R,count", [((1, 0, 0, 0, 0, 0, 0), 3, 117649), ((1, 2), 8, 5)])
def test_box_count_examples(y, R, count):
    lat = solution_lattice(y)
    assert count_lattice_points_box(lat, R) == count
    assert count_lattice_points_box(lat, R, method="enumerate") == count
    assert count_lattice_points_box(lat, 0) == 1


def test_box_count_against_naive():
    rng = random.Random(5)
    for _ in range(40):
        s = rng.randint(2, 4)
        y = [rng.randint(-6, 6) for _ in range(s)]
        if not any(y):
            continue
        R = rng.randint(0, 15 if s < 4 else 6)
        lat = solution_lattice(y)
        want = naive_M1(y, R)
        assert count_lattice_points_box(lat, R, "sumset") == want
        assert count_lattice_points_box(lat, R, "enumerate") == want


def test_real_radius_is_floored():
    lat = solution_lattice((1, 2))
    assert count_lattice_points_box(lat, 8.9) == count_lattice_points_box(lat, 8)


def test_minima_examples():
    mp = successive_minima(solution_lattice((1, 2)))
    assert mp.exact and mp.norms2 == (17,)
    mp = successive_minima(solution_lattice((1, 1, 1)))
    assert mp.norms2 == (2, 2)
    assert successive_minima(solution_lattice((1, 0, 0, 0, 0, 0, 0))).norms2 == (1,) * 6


def test_minima_skewed_lattice():
    mp = successive_minima(solution_lattice((1, 1, 1, 1, 1, 1, 10)))
    assert mp.exact
    assert mp.norms2 == (2,) * 5 + (1669,)


@given(st.lists(st.integers(-6, 6), min_size=3, max_size=5))
def test_minima_witnesses(y):
    if not any(y):
        return
    lat = solution_lattice(y)
    mp = successive_minima(lat)
    assert list(mp.norms2) == sorted(mp.norms2)
    W = np.array(mp.witnesses, dtype=float)
    assert np.linalg.matrix_rank(W) == lat.rank
    for w, n2 in zip(mp.witnesses, mp.norms2):
        assert lat.contains(w) and sum(t * t for t in w) == n2
    # Minkowski's second theorem, with the unit-ball volume constant
    k = lat.rank
    vk = math.pi ** (k / 2) / math.gamma(k / 2 + 1)
    assert math.prod(mp.minima) <= 2**k / vk * math.sqrt(lat.det2) * (1 + 1e-9)


def test_minima_brute_force_small():
    # exhaustive search over a box for the first minimum
    rng = random.Random(1)
    for _ in range(15):
        y = [rng.randint(-4, 4) for _ in range(3)]
        if not any(y):
            continue
        lat = solution_lattice(y)
        brute = min(a * a + b * b + c * c for a, b, c in itertools.product(range(-40, 41), repeat=3)
                    if (a, b, c) != (0, 0, 0) and a * y[0] ** 2 + b * y[1] ** 2 + c * y[2] ** 2 == 0)
        assert successive_minima(lat).norms2[0] == brute


def test_hnf_transform_is_unimodular():
    G = [[2, 4, 6, 3], [1, 1, 0, 5]]
    H, U, rank = hermite_with_transform(G)
    assert rank == 2
    assert round(abs(np.linalg.det(np.array(U, dtype=float)))) == 1


def test_lll_preserves_lattice():
    rows = [[1, 0, 0, 12345], [0, 1, 0, 6789], [0, 0, 1, 1011]]
    red = lll_reduce(rows)
    assert lattice_from_basis(red).det2 == lattice_from_basis(rows).det2
    assert max(sum(t * t for t in r) for r in red) < 12345**2


def test_schmidt_unit_coordinate():
    for R in (2, 5):
        rep = check_schmidt_bound(solution_lattice((1, 0, 0, 0, 0, 0, 0)), R)
        assert rep["count"] == (2 * R + 1) ** 6
        assert rep["error"] == pytest.approx((2 * R + 1) ** 6 - 64 * R**6)
        # termwise against 1 + R + ... + R^5 the binomial coefficients C(6,i) 2^i peak at 240
        assert rep["ratio"] <= 240


def test_schmidt_z2():
    lat = lattice_from_basis([[1, 0], [0, 1]])
    for r in (1, 4, 9):
        rep = check_schmidt_bound(lat, r)
        assert rep["error"] == pytest.approx(4 * r + 1)
        assert rep["error"] <= 10 * (1 + r)


def test_schmidt_example_s7():
    rep = check_schmidt_bound(solution_lattice((1, 1, 1, 1, 1, 1, 2)), 30)
    assert abs(rep["error"]) <= 100 * rep["bound"]


def test_envelope_shape():
    assert schmidt_envelope(10.0, [1.0, 1.0]) == pytest.approx(1 + 10)
    assert schmidt_envelope(10.0, [1.0, 2.0, 5.0]) == pytest.approx(1 + 100 + 10 / 2)
