import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from biquadric.core_forms import delta_profile
from biquadric.errors import PreconditionError, ToleranceUnreachable
from biquadric.real_densities import (DensityValue, QuadratureSettings, cube_slice_volume,
                                      fejer_kernel, fejer_slice_oracle, fresnel_I, j_integrals,
                                      kernel_K, rho_infinity, rho_infinity_real, sigma_infinity,
                                      sigma_slab_oracle, tau_reference)

X0 = (1, 1, 1, 1, 1, 1, -1)
nonzero = st.integers(-6, 6).filter(bool)


# -- slices and rho ---------------------------------------------------------------------------

def test_slice_examples():
    v = cube_slice_volume((1, 1))
    assert (v.rational, v.radicand) == (Fraction(2), 2)
    assert v.value == pytest.approx(2 * math.sqrt(2))
    v = cube_slice_volume((1, 4))
    assert v.value == pytest.approx(math.sqrt(17) / 2)
    for s in range(1, 8):
        assert cube_slice_volume((1,) + (0,) * (s - 1)).value == 2 ** (s - 1)


def test_slice_zero_rejected():
    with pytest.raises(PreconditionError):
        cube_slice_volume((0, 0))


@given(st.lists(st.integers(-7, 7), min_size=2, max_size=6), st.randoms())
def test_slice_symmetries(w, r):
    if not any(w):
        return
    v = cube_slice_volume(w)
    perm = list(w)
    r.shuffle(perm)
    flipped = [t * r.choice((-1, 1)) for t in perm]
    assert cube_slice_volume(flipped) == v


def test_slice_against_fejer_oracle():
    rng = random.Random(9)
    for i in range(50):
        s = rng.randint(2, 7)
        w = [rng.randint(-5, 5) for _ in range(s)]
        if not any(w):
            w[0] = 1
        est, se = fejer_slice_oracle(w, 1e-3, n=400_000, seed=100 + i)
        assert abs(est - cube_slice_volume(w).value) <= 3 * se + 1e-9


def test_slice_matches_unit_cube_section_2d():
    # the segment {x + 2y = 0} in [-1,1]^2 runs from (-1, 1/2) to (1, -1/2)
    assert cube_slice_volume((1, 2)).value == pytest.approx(math.hypot(2, 1))


def test_rho_examples():
    assert rho_infinity((1, 0, 0, 0, 0, 0, 0)).exact == 64
    assert rho_infinity((1, 1)).value == pytest.approx(2)
    assert rho_infinity((1, 2)).exact == Fraction(1, 2)


@given(st.lists(st.integers(-6, 6), min_size=2, max_size=6), st.integers(1, 5))
def test_rho_exact_scaling(y, k):
    if not any(y):
        return
    assert rho_infinity([k * t for t in y]).exact * k * k == rho_infinity(y).exact


def test_rho_real_matches_exact():
    rng = np.random.default_rng(0)
    ys = rng.integers(1, 9, size=(40, 6))
    vals, _ = rho_infinity_real(ys.astype(float))
    for row, v in zip(ys, vals):
        assert v == pytest.approx(float(rho_infinity(row.tolist()).exact), rel=1e-9)


def test_rho_sign_symmetry():
    y = np.array([[0.3, -0.7, 0.2, 0.9, -0.1]])
    assert rho_infinity_real(y)[0][0] == pytest.approx(rho_infinity_real(-y)[0][0], rel=1e-12)


# -- Fejer kernel -----------------------------------------------------------------------------

def test_fejer_kernel():
    d = 1e-2
    assert fejer_kernel(0.0, d) == pytest.approx(1 / d)
    assert fejer_kernel(d, d) == 0.0
    val, _ = integrate.quad(lambda u: fejer_kernel(u, d), -2 * d, 2 * d, points=[-d, 0, d])
    assert val == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(PreconditionError):
        fejer_kernel(0.0, 0.0)


# -- Fresnel ----------------------------------------------------------------------------------

def _fresnel_quad(psi):
    re, _ = integrate.quad(lambda u: math.cos(2 * math.pi * psi * u * u), -1, 1, limit=2000)
    im, _ = integrate.quad(lambda u: math.sin(2 * math.pi * psi * u * u), -1, 1, limit=2000)
    return complex(re, im)


@pytest.mark.parametrize("psi", [0.0, 0.01, 0.37, 1.0, -2.5, 13.2, 150.0])
def test_fresnel_against_quadrature(psi):
    assert abs(fresnel_I(psi) - _fresnel_quad(psi)) < 1e-8


def test_fresnel_examples():
    assert fresnel_I(0.0) == 2
    assert abs(fresnel_I(1e4)) <= 0.03
    assert fresnel_I(-3.3) == pytest.approx(fresnel_I(3.3).conjugate())


@given(st.floats(0.05, 1e5))
def test_fresnel_leading_term_bound(psi):
    lead = np.exp(0.25j * np.pi) / math.sqrt(2 * psi)
    assert abs(fresnel_I(psi) - lead) <= 1 / (math.pi * psi) + 1e-12


def test_kernel_K_against_quadrature():
    for th in (0.0, 0.3, 2.0, 11.0):
        if th == 0:
            want = 4.0
        else:
            # the x-integral of e(theta x y^2) over [-1, 1] is 2 sinc
            want, _ = integrate.quad(lambda y: 2 * math.sin(2 * math.pi * th * y * y) / (2 * math.pi * th * y * y)
                                     if y else 2.0, -1, 1, limit=2000)
        assert kernel_K(np.array([th]))[0] == pytest.approx(want, abs=1e-8)


# -- sigma_infinity ---------------------------------------------------------------------------

def test_sigma_definite_is_zero():
    d = sigma_infinity((1,) * 7)
    assert d.value == 0.0 and d.exact == 0


def test_sigma_frozen_value():
    d = sigma_infinity(X0)
    assert d.err <= 1e-8
    assert d.value == pytest.approx(6.2012553, abs=1e-6)


def test_sigma_against_slab_oracle():
    d = sigma_infinity(X0, QuadratureSettings(abs_tol=1e-6))
    est, se = sigma_slab_oracle(X0, 0.02, n=2_000_000, seed=3)
    assert abs(est - d.value) <= 3 * se + d.err


def test_sigma_policies_agree():
    a = sigma_infinity(X0, QuadratureSettings(abs_tol=1e-6))
    b = sigma_infinity(X0, QuadratureSettings(abs_tol=1e-6, theta_cutoff_policy="product-decay"))
    assert abs(a.value - b.value) <= a.err + b.err


@given(st.lists(nonzero, min_size=5, max_size=5), st.integers(2, 4))
def test_sigma_scaling(x, k):
    st_ = QuadratureSettings(abs_tol=1e-6)
    a = sigma_infinity(x, st_)
    b = sigma_infinity([k * t for t in x], st_)
    assert abs(k * b.value - a.value) <= k * b.err + a.err + 1e-9


@given(st.lists(nonzero, min_size=5, max_size=6), st.randoms())
def test_sigma_permutation_invariance(x, r):
    st_ = QuadratureSettings(abs_tol=1e-6)
    y = list(x)
    r.shuffle(y)
    a, b = sigma_infinity(x, st_), sigma_infinity(y, st_)
    assert abs(a.value - b.value) <= a.err + b.err


def test_sigma_delta_decay_constant():
    # observed constant for sigma_inf <= C |Delta|^(-1/2) on this corpus: about 955
    rng = random.Random(4)
    C = 0.0
    for _ in range(60):
        s = rng.randint(5, 7)
        x = [rng.choice([t for t in range(-6, 7) if t]) for _ in range(s)]
        v = sigma_infinity(x, QuadratureSettings(abs_tol=1e-6)).value
        C = max(C, abs(v) * abs(delta_profile(x).delta) ** 0.5)
    assert 0 < C < 1000


def test_sigma_preconditions():
    with pytest.raises(PreconditionError):
        sigma_infinity((1, 0, -1, 1, 1))
    with pytest.raises(ToleranceUnreachable):
        sigma_infinity(X0, QuadratureSettings(abs_tol=1e-12, max_subdivisions=1000))


def test_density_value_rejects_negative_error():
    with pytest.raises(ValueError):
        DensityValue(1.0, "quadrature", -1.0)


# -- tau and J --------------------------------------------------------------------------------

def test_tau_reference_frozen():
    d = tau_reference(7)
    assert d.value == pytest.approx(10167.2343, abs=1e-3)
    assert d.err < 1e-6 and d.value > 0


def test_tau_reference_against_direct_quadrature():
    # theta-kernel integral redone with scipy on a truncated range plus the analytic tail
    s = 5
    f = lambda t: kernel_K(np.array([t]))[0] ** s
    body, _ = integrate.quad(f, 0, 200, limit=5000)
    tail = 2 * 2.0**s * 200 ** (1 - s / 2) / (s / 2 - 1)
    assert tau_reference(s).value == pytest.approx(2 * body + tail, rel=2e-3)


def test_j2_against_closed_form():
    tau = tau_reference(7).value
    d = j_integrals(7, 1e10, side="J2", tau=tau)
    assert abs(d.meta["ratio"] - 1) <= 0.05


def test_j2_vanishes_on_empty_log():
    d = j_integrals(7, 1e10, k=1e10 ** (1 / 9), side="J2", tau=1.0)
    assert d.value == 0.0


def test_j1_against_closed_form():
    tau = tau_reference(7).value
    d = j_integrals(7, 1e10, side="J1", tau=tau, m=8, replicates=4)
    assert abs(d.meta["ratio"] - 1) <= 0.05


def test_j_rejects_empty_shell():
    with pytest.raises(PreconditionError):
        j_integrals(7, 1e10, k=1e3, side="J2")
