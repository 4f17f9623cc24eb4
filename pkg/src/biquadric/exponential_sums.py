"""Weyl sums T(alpha) = sum_{|y| <= P} e(alpha x y^2), arc labels, and moment checks."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .arithmetic_densities import gauss_sum
from .core_forms import as_vector, sup_norm
from .errors import PreconditionError
from .real_densities import fresnel_I

DEFAULT_ETA = 0.05


def _phases(alpha, t: np.ndarray) -> np.ndarray:
    """Fractional parts of alpha * t for integer t, exact for rational alpha."""
    if isinstance(alpha, (Fraction, int)):
        a = Fraction(alpha) % 1
        num, den = a.numerator, a.denominator
        if den < 2**31 and num * int(t.max(initial=0)) < 2**62:
            return ((num * t) % den) / den
        return np.array([float((num * int(v)) % den) / den for v in t])
    a = math.fmod(float(alpha), 1.0)
    return np.mod(a * t.astype(float), 1.0)


def weyl_sum(alpha, xj: int, P: int) -> complex:
    """``sum_{|y| <= P} e(alpha xj y^2)``; alpha may be a float or a Fraction."""
    if P < 0:
        raise PreconditionError("P must be nonnegative")
    y = np.arange(1, P + 1, dtype=np.int64)
    t = abs(int(xj)) * y * y
    ph = _phases(alpha, t)
    if xj < 0:
        ph = -ph
    ang = 2.0 * np.pi * ph
    return complex(1.0 + 2.0 * math.fsum(np.cos(ang)), 2.0 * math.fsum(np.sin(ang)))


@dataclass(frozen=True)
class ArcLabel:
    kind: str
    a: int
    q: int
    beta: float

    @property
    def major(self) -> bool:
        return self.kind == "major"


def convergents(alpha: Fraction):
    """Continued-fraction convergents (p, q) of a rational alpha."""
    h0, h1, k0, k1 = 0, 1, 1, 0
    a = Fraction(alpha)
    while True:
        fl = math.floor(a)
        h0, h1 = h1, fl * h1 + h0
        k0, k1 = k1, fl * k1 + k0
        yield h1, k1
        frac = a - fl
        if frac == 0:
            return
        a = 1 / frac


def classify_arc(alpha, x, P: int, eta: float = DEFAULT_ETA) -> ArcLabel:
    """Dirichlet approximation with q <= 2 P^(1+eta) |x|, labelled major when
    q <= P|x| and |alpha - a/q| < (2q|x|)^-1 P^(-1-eta)."""
    xs = sup_norm(as_vector(x)) if not isinstance(x, int) else abs(x)
    if xs == 0 or P < 1:
        raise PreconditionError("need |x| >= 1 and P >= 1")
    a_ = Fraction(alpha)
    if not 0 <= a_ < 1:
        raise PreconditionError("alpha must lie in [0, 1)")
    N = 2.0 * P ** (1.0 + eta) * xs
    best = (0, 1)
    for p, q in convergents(a_):
        if q > N:
            break
        best = (p, q)
    a, q = best
    beta = a_ - Fraction(a, q)
    lim = Fraction(1) / (2 * q * xs) * Fraction(P ** (-1.0 - eta))
    if abs(beta) > Fraction(1, q) * Fraction(1 / N) * (1 + Fraction(1, 10**12)) or math.gcd(a, q) != 1:
        raise AssertionError("convergent violates the Dirichlet inequality")
    kind = "major" if (q <= P * xs and abs(beta) < lim) else "minor"
    return ArcLabel(kind, a, q, float(beta))


def scaled_fresnel(beta: float, xj: int, P: int) -> complex:
    """``int_{-P}^{P} e(xj beta u^2) du``."""
    return P * complex(fresnel_I(xj * beta * P * P))


def major_arc_residual(alpha, xj: int, P: int, arc: ArcLabel) -> dict:
    if not arc.major:
        raise PreconditionError("residual is defined on major arcs only")
    T = weyl_sum(alpha, xj, P)
    approx = gauss_sum(xj, arc.a, arc.q) / arc.q * scaled_fresnel(arc.beta, xj, P)
    env = math.sqrt(arc.q * math.gcd(arc.q, abs(xj)))
    res = abs(T - approx)
    return {"T": T, "approx": approx, "residual": res, "envelope": env, "ratio": res / env,
            "a": arc.a, "q": arc.q, "beta": arc.beta}


def major_arc_corpus(n: int = 500, s: int = 7, P_max: int = 200, eta: float = DEFAULT_ETA,
                     seed: int = 0) -> dict:
    """Random major-arc points (a/q + beta inside the arc) and their residual ratios."""
    rng = np.random.default_rng(seed)
    ratios = []
    while len(ratios) < n:
        P = int(rng.integers(10, P_max + 1))
        x = tuple(int(v) * int(rng.choice([-1, 1])) for v in rng.integers(1, 6, size=s))
        xs = sup_norm(x)
        q = int(rng.integers(1, P * xs + 1))
        a = int(rng.integers(0, q))
        if math.gcd(a, q) != 1:
            continue
        lim = 1.0 / (2 * q * xs) * P ** (-1.0 - eta)
        beta = float(rng.uniform(-lim, lim)) * 0.999
        alpha = (Fraction(a, q) + Fraction(beta)) % 1
        arc = classify_arc(alpha, x, P, eta)
        if not arc.major:
            continue
        j = int(rng.integers(0, s))
        ratios.append(major_arc_residual(alpha, x[j], P, arc)["ratio"])
    r = np.array(ratios)
    return {"n": n, "max_ratio": float(r.max()), "mean_ratio": float(r.mean())}


def hua_fourth_moment(xj: int, P: int, block: int = 1 << 24) -> int:
    """``int_0^1 |T(alpha)|^4 d alpha = #{y in [-P,P]^4 : y1^2 + y2^2 = y3^2 + y4^2}``.

    The representation counts r(n) of n = y1^2 + y2^2 are tallied in n-blocks
    and the answer is sum r(n)^2."""
    if xj == 0:
        raise PreconditionError("xj must be nonzero")
    if P < 0:
        raise PreconditionError("P must be nonnegative")
    if P == 0:
        return 1
    t = np.arange(P + 1, dtype=np.int64)
    sq = t * t
    w = np.where(t == 0, 1, 2).astype(np.int64)
    nmax = 2 * P * P
    total = 0
    for lo in range(0, nmax + 1, block):
        hi = min(lo + block, nmax + 1)
        r = np.zeros(hi - lo, dtype=np.int64)
        for i in range(P + 1):
            b0 = np.searchsorted(sq, lo - sq[i], "left")
            b1 = np.searchsorted(sq, hi - sq[i], "left")
            if b1 > b0:
                r[sq[i] + sq[b0:b1] - lo] += w[i] * w[b0:b1]  # indices distinct for fixed i
        total += int(r @ r)
    return total


def hua_quadrature(xj: int, P: int, n_grid: int = 2048) -> float:
    """Riemann sum of |T|^4 over an equispaced alpha-grid (exact once n_grid > 4|xj|P^2)."""
    alphas = [Fraction(k, n_grid) for k in range(n_grid)]
    vals = np.array([abs(weyl_sum(a, xj, P)) ** 4 for a in alphas])
    return math.fsum(vals) / n_grid


def growth_exponent(Ps, values) -> float:
    lp, lv = np.log(np.asarray(Ps, float)), np.log(np.asarray(values, float))
    return float(np.polyfit(lp, lv, 1)[0])


def weyl_rhs(P: int, xj: int, q: int, eps: float = 0.0) -> float:
    """Right-hand side of the uniform Weyl inequality, exponents as printed:
    P^(1/2) + P^(1+eps) ((P/|x|)^(-1/2) + (q/|x|)^(-1/2) + (P^2/q)^(-1/2))."""
    ax = abs(xj)
    return P**0.5 + P ** (1 + eps) * ((P / ax) ** -0.5 + (q / ax) ** -0.5 + (P * P / q) ** -0.5)


def weyl_bound_monitor(Ps=(100, 1000, 10000), xs=(1, 2, 3, 5), n_alpha: int = 40,
                       seed: int = 0, extra_alphas=()) -> dict:
    """Max of |T| / RHS over random alpha, per P, and the fitted log-log slope of
    that maximum.  An exponent violation means slope > 0.15."""
    rng = np.random.default_rng(seed)
    alphas = [float(a) for a in rng.uniform(0, 1, size=n_alpha)] + [float(a) for a in extra_alphas]
    rows = []
    for P in Ps:
        worst = 0.0
        for xj in xs:
            for a in alphas:
                lab = classify_arc(Fraction(a), xj, P, 0.0)
                T = abs(weyl_sum(a, xj, P))
                worst = max(worst, T / weyl_rhs(P, xj, lab.q))
        rows.append({"P": P, "max_ratio": worst})
    slope = growth_exponent([r["P"] for r in rows], [r["max_ratio"] for r in rows]) if len(rows) > 1 else 0.0
    return {"rows": rows, "slope": slope, "exponent_violation": slope > 0.15,
            "orientation_holds": all(r["max_ratio"] <= 1.0 for r in rows)}
