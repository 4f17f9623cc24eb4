"""Non-archimedean side: Gauss sums, S_q(x), the singular series, psi(q),
zeta values, local densities sigma_p and the assembled leading constant."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core_forms import (as_vector, delta_profile, euler_phi, factorize, mobius,
                         primes_up_to, smallest_prime_factor)
from .errors import BudgetExceeded, PreconditionError, ToleranceUnreachable
from .real_densities import DensityValue

Q_CAP = 10**6
BRUTE_BUDGET = 3 * 10**8


# -- Gauss sums --------------------------------------------------------------------------

@lru_cache(maxsize=256)
def _roots(q: int) -> np.ndarray:
    k = np.arange(q)
    ang = 2.0 * np.pi * k / q
    out = np.cos(ang) + 1j * np.sin(ang)
    out.setflags(write=False)
    return out


def _csum(z: np.ndarray) -> complex:
    return complex(math.fsum(z.real), math.fsum(z.imag))


def gauss_sum(x: int, a: int, q: int) -> complex:
    """``sum_{b mod q} e(a x b^2 / q)`` by direct summation."""
    if q < 1:
        raise PreconditionError("q must be positive")
    if math.gcd(a, q) != 1:
        raise PreconditionError("gauss_sum needs gcd(a, q) = 1")
    b = np.arange(q, dtype=np.int64)
    r = ((a * x) % q) * (b * b % q) % q
    return _csum(_roots(q)[r])


@lru_cache(maxsize=512)
def gauss_sum_table(q: int) -> np.ndarray:
    """All ``G(m, q) = sum_b e(m b^2 / q)`` for m = 0..q-1."""
    b = np.arange(q, dtype=np.int64)
    c = np.bincount(b * b % q, minlength=q).astype(float)
    if q <= 512:
        m = np.arange(q, dtype=np.int64)
        idx = np.outer(m, np.arange(q, dtype=np.int64)) % q
        out = (_roots(q)[idx] * c[None, :]).sum(1)
    else:
        out = np.conj(np.fft.fft(c))
    out.setflags(write=False)
    return out


def _units(q: int) -> np.ndarray:
    a = np.arange(q, dtype=np.int64)
    return a[np.gcd(a, q) == 1]


def complete_sum_Sq(x: Sequence[int], q: int, method: str = "factorized") -> complex:
    """``S_q(x) = sum_{(a,q)=1} sum_{b mod q} e(a F(x;b)/q)``."""
    x = as_vector(x)
    if q < 1:
        raise PreconditionError("q must be positive")
    if q == 1:
        return 1.0 + 0j
    a = _units(q)
    if method == "factorized":
        G = gauss_sum_table(q)
        prod = np.ones(a.size, dtype=complex)
        for xj in x:
            prod *= G[(a * (xj % q)) % q]
        return _csum(prod)
    if method == "direct":
        return complex(complete_sums_direct([x], q)[0])
    raise PreconditionError(f"unknown method {method!r}")


def complete_sums_direct(X, q: int) -> np.ndarray:
    """Direct double sum for each row of ``X``: every b in (Z/q)^s is enumerated,
    F(x; b) mod q is tallied, and the a-sum is taken over roots of unity."""
    X = np.asarray(X, dtype=np.int64)
    n, s = X.shape
    if q == 1:
        return np.ones(n, dtype=complex)
    if q**s > BRUTE_BUDGET:
        raise BudgetExceeded("direct double sum exceeds budget")
    grid = np.array(list(itertools.product(range(q), repeat=s)), dtype=np.int64)
    B2 = grid * grid % q
    E = _roots(q)
    a = _units(q)
    inner = np.array([_csum(E[(a * r) % q]) for r in range(q)])  # sum over a, per residue
    out = np.empty(n, dtype=complex)
    block = max(1, 2_000_000 // B2.shape[0])
    for i in range(0, n, block):
        F = (X[i:i + block] % q) @ B2.T % q
        F += q * np.arange(F.shape[0], dtype=np.int64)[:, None]
        hist = np.bincount(F.ravel(), minlength=F.shape[0] * q).reshape(F.shape[0], q)
        out[i:i + block] = hist @ inner
    return out


def complete_sums_factorized(X, q: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.int64)
    if q == 1:
        return np.ones(X.shape[0], dtype=complex)
    G = gauss_sum_table(q)
    a = _units(q)
    prod = np.ones((X.shape[0], a.size), dtype=complex)
    for j in range(X.shape[1]):
        prod *= G[(a[None, :] * (X[:, j:j + 1] % q)) % q]
    return prod.sum(1)


# -- singular series -------------------------------------------------------------------------

@dataclass(frozen=True)
class SingularSeriesResult:
    value: float
    Q: int
    tail_bound: float
    x: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def as_dict(self):
        return {"value": self.value, "Q": self.Q, "tail_bound": self.tail_bound, "x": list(self.x),
                **self.meta}


@lru_cache(maxsize=4096)
def _local_term(x: tuple, p: int, f: int, s: int) -> float:
    """``p^{-fs} S_{p^f}(x)``; closed form when p is odd and coprime to every x_j."""
    q = p**f
    if p != 2 and all(xj % p for xj in x):
        d = math.prod(xj for xj in x)
        phi = q - q // p
        if f % 2 == 0:
            return phi * float(p) ** (s * f / 2) / float(q) ** s
        if s % 2:
            return 0.0
        # phi(p^f) (Delta|p) p^{s(f-1)/2} ((-1|p) p)^{s/2}
        val = phi * _legendre(d, p) * float(p) ** (s * (f - 1) / 2) * float(_legendre(-1, p) * p) ** (s // 2)
        return val / float(q) ** s
    return complete_sum_Sq(x, q).real / float(q) ** s


def _legendre(a: int, p: int) -> int:
    r = pow(a % p, (p - 1) // 2, p)
    return -1 if r == p - 1 else r


def _val(n: int, p: int) -> int:
    n, v = abs(n), 0
    while n % p == 0:
        n //= p
        v += 1
    return v


EXACT_LOCAL_LIMIT = 2**20


def _bad_local_weight(x, p, s, delta, exact_limit=EXACT_LOCAL_LIMIT):
    """sum_{f >= 1} |A(p^f)| p^{f delta} for a prime dividing 2 Delta(x):
    exact terms while p^f <= exact_limit, then the generic majorant
    p^{f(1-s/2)} prod_j (p^f, x_j)^{1/2} (times 2^{s/2} at p = 2), summed as
    a geometric series once f exceeds every valuation."""
    nu = [_val(xj, p) for xj in x]
    out, f = 0.0, 1
    while p**f <= exact_limit:
        out += abs(_local_term(x, p, f, s)) * p ** (f * delta)
        f += 1
    extra = 2 ** (s / 2.0) if p == 2 else 1.0
    r = p ** (1 - s / 2.0 + delta)
    if r >= 1:
        return math.inf
    top = max(nu)
    while f <= top:
        out += extra * p ** (f * (1 - s / 2.0 + delta)) * math.prod(p ** (min(f, v) / 2.0) for v in nu)
        f += 1
    head = extra * math.prod(p ** (v / 2.0) for v in nu) * r**f
    return out + head / (1 - r)


def _good_local_weight(p, s, delta):
    """sum_{f >= 1} |A(p^f)| p^{f delta} for odd p coprime to Delta(x), where
    |A(p^f)| = (1 - 1/p) p^{f(1-s/2)} (vanishing at odd f when s is odd)."""
    r = p ** (1 - s / 2.0 + delta)
    if s % 2:
        return (1 - 1 / p) * r * r / (1 - r * r)
    return (1 - 1 / p) * r / (1 - r)


def singular_series_tail(x, Q: int, s: int | None = None, prime_cut: int = 10**4) -> float:
    """Rankin bound ``sum_{q > Q} |A(q)| <= Q^{-delta} prod_p (1 + sum_f |A(p^f)| p^{f delta})``
    for the multiplicative ``A(q) = q^{-s} S_q(x)``, minimised over delta."""
    x = tuple(x)
    s = s or len(x)
    bad = sorted(set(factorize(math.prod(x)).keys()) | {2})
    # the product over good primes converges while kappa > 1
    kappa_scale = 2.0 if s % 2 else 1.0
    dmax = (s / 2.0 - 1.0) - 1.0 / kappa_scale
    if dmax <= 0:
        return math.inf
    good = [p for p in primes_up_to(prime_cut).tolist() if p not in bad]
    best = math.inf
    for delta in np.linspace(0.05, dmax - 1e-2, 40):
        kappa = kappa_scale * (s / 2.0 - 1.0 - delta)
        logc = 0.0
        for p in bad:
            logc += math.log1p(_bad_local_weight(x, p, s, delta))
        logc += math.fsum(math.log1p(_good_local_weight(p, s, delta)) for p in good)
        # primes beyond the cut: weight <= 2 p^{-kappa}
        logc += 2.0 * prime_cut ** (1 - kappa) / (kappa - 1)
        best = min(best, math.exp(logc - delta * math.log(Q)))
    return best


def _choose_Q(x, tol, s, q_max):
    hi = 2
    while singular_series_tail(x, hi, s) > tol:
        hi *= 2
        if hi > q_max:
            raise ToleranceUnreachable(f"tail bound needs Q > {q_max}", feasible=q_max)
    lo = hi // 2
    while hi - lo > max(1, lo // 64):
        mid = (lo + hi) // 2
        if singular_series_tail(x, mid, s) > tol:
            lo = mid
        else:
            hi = mid
    return hi


def singular_series(x: Sequence[int], tol: float = 1e-6, q_max: int = Q_CAP,
                    Q: int | None = None) -> SingularSeriesResult:
    """``sum_q q^{-s} S_q(x)`` truncated where the computed tail bound drops below ``tol``.

    Passing ``Q`` forces the truncation point (the tail bound is still reported)."""
    x = as_vector(x)
    s = len(x)
    if delta_profile(x).degenerate:
        raise PreconditionError("singular series needs Delta(x) != 0")
    if Q is None:
        Q = _choose_Q(x, tol, s, q_max)
    tail = singular_series_tail(x, Q, s)
    value = _multiplicative_sum(lambda p, f: _local_term(x, p, f, s), Q)
    return SingularSeriesResult(value, Q, tail, x, {"tol": tol})


def _multiplicative_sum(local, Q: int) -> float:
    """``sum_{q <= Q} A(q)`` for the multiplicative A with prime-power values ``local``."""
    spf = smallest_prime_factor(Q)
    A = np.zeros(Q + 1)
    A[1] = 1.0
    cache: dict = {}
    for q in range(2, Q + 1):
        p = int(spf[q])
        m, f = q, 0
        while m % p == 0:
            m //= p
            f += 1
        key = (p, f)
        if key not in cache:
            cache[key] = local(p, f)
        A[q] = A[m] * cache[key]
    return math.fsum(A[1:])


def singular_series_product(x, primes_upto: int = 200, fmax: int | None = None) -> float:
    """Euler-product evaluation prod_p sum_f A(p^f) (truncated), a cross-check."""
    x = as_vector(x)
    s = len(x)
    out = 1.0
    for p in primes_up_to(primes_upto).tolist():
        top = fmax or (max(_val(xj, p) for xj in x) + 8)
        out *= math.fsum(_local_term(x, p, f, s) for f in range(1, top + 1)) + 1.0
    return out


# -- Ramanujan sums and psi -----------------------------------------------------------------

def ramanujan_sum(q: int, n: int) -> int:
    if q < 1:
        raise PreconditionError("q must be positive")
    g = math.gcd(q, n)
    return sum(d * mobius(q // d) for d in range(1, g + 1) if g % d == 0)


def _ramanujan_table(q: int) -> np.ndarray:
    return np.array([ramanujan_sum(q, n) for n in range(q)], dtype=np.int64)


def psi(q: int, s: int, mode: str = "brute", budget: int = BRUTE_BUDGET) -> int:
    """``psi(q) = sum_{a, b mod q, gcd(a_1..a_s, q) = 1} c_q(F(a; b))``."""
    if q < 1:
        raise PreconditionError("q must be positive")
    if mode == "closed":
        out = 1
        for p, f in factorize(q).items() if q > 1 else []:
            out *= psi_prime_power(p, f, s)
        return out
    if mode != "brute":
        raise PreconditionError(f"unknown mode {mode!r}")
    if q == 1:
        return 1
    if q ** (2 * s) > budget:
        raise BudgetExceeded(f"q^(2s) = {q ** (2 * s)} exceeds the brute-force budget")
    grid = np.array(list(itertools.product(range(q), repeat=s)), dtype=np.int64)
    good = np.gcd.reduce(np.concatenate([grid, np.full((grid.shape[0], 1), q)], 1), axis=1) == 1
    A = grid[good]
    B2 = (grid * grid) % q
    # histogram of F(a;b) mod q over all b, row-blocked over a
    c = _ramanujan_table(q)
    total = 0
    block = max(1, 4_000_000 // B2.shape[0])
    for i in range(0, A.shape[0], block):
        F = (A[i:i + block] @ B2.T) % q
        total += int(np.bincount(F.ravel(), minlength=q) @ c)
    return total


def psi_prime_power(p: int, f: int, s: int) -> int:
    """Closed form ``phi(p^f) p^{3sf/2} (1 - p^{-s})`` for even f, 0 for odd f."""
    if f == 0:
        return 1
    if f % 2:
        return 0
    phi = p**f - p ** (f - 1)
    top = p ** (3 * s * f // 2)
    return phi * (top - top // p**s)


def euler_factor(p: int, s: int) -> float:
    return (1 - p ** (1.0 - s)) / (1 - p ** (2.0 - s))


def euler_product_psi(s: int, tol: float = 1e-12, M: int | None = None) -> dict:
    """``sum_q q^{-2s} psi(q) prod_{p|q} (1 - p^{-s})^{-1}`` over squares q = m^2.

    Each term is at most m^{2-s}, so stopping at m = M leaves a tail of at most
    ``M^{3-s}/(s-3)``."""
    if s < 4:
        raise PreconditionError("s must be at least 4")
    if M is None:
        M = max(1, math.ceil((tol * (s - 3)) ** (1.0 / (3 - s))))
    tail = M ** (3.0 - s) / (s - 3)

    def local(p, g):
        return psi_prime_power(p, 2 * g, s) / float(p) ** (4 * s * g) / (1 - float(p) ** -s)

    value = _multiplicative_sum(local, M)
    return {"value": value, "M": M, "tail_bound": tail}


# -- zeta -----------------------------------------------------------------------------------------

_BERN = [Fraction(1, 6), Fraction(-1, 30), Fraction(1, 42), Fraction(-1, 30), Fraction(5, 66),
         Fraction(-691, 2730), Fraction(7, 6)]


def zeta(n: int, tol: float = 1e-15) -> float:
    """Riemann zeta at an integer n >= 2: partial sum plus Euler-Maclaurin tail."""
    if n < 2:
        raise PreconditionError("zeta needs n >= 2")
    N = 10
    while True:
        head = math.fsum(float(k) ** -n for k in range(1, N))
        tail = [N ** (1.0 - n) / (n - 1), 0.5 * N ** (-1.0 * n)]
        rising = n
        for j, b in enumerate(_BERN, start=1):
            term = float(b) / math.factorial(2 * j) * rising * N ** (-n - 2.0 * j + 1)
            tail.append(term)
            rising *= (n + 2 * j - 1) * (n + 2 * j)
        # remainder is bounded by the first omitted term
        rem = abs(float(Fraction(-3617, 510)) / math.factorial(16) * rising * N ** (-n - 15.0))
        if rem < tol or N > 10**6:
            return math.fsum([head] + tail)
        N *= 2


# -- local densities --------------------------------------------------------------------------------

@dataclass(frozen=True)
class PadicDensity:
    p: int
    value: float
    method: str
    l: int | None = None
    exact: Fraction | None = None

    def as_dict(self):
        out = {"p": self.p, "value": self.value, "method": self.method, "l": self.l}
        if self.exact is not None:
            out["exact"] = str(self.exact)
        return out


def local_density_closed(p: int, s: int) -> Fraction:
    return Fraction(p**s - 1, p**s) / Fraction(p ** (s - 2) - 1, p ** (s - 2))


def local_solution_count(p: int, s: int, l: int, budget: int = BRUTE_BUDGET) -> int:
    """``n(p^l) = #{(x, y) mod p^l : F(x; y) = 0 mod p^l}``, stratified by y.

    For fixed y the x-solutions form a subgroup of index p^l / gcd(y_i^2, p^l),
    so only the distribution of min_i v_p(y_i) is needed.  That distribution is
    a product over coordinates, counted exactly."""
    q = p**l
    if q**s > budget * 100:
        raise BudgetExceeded("local density stratification exceeds budget")
    # number of residues mod p^l with valuation >= j
    ge = [q // p**j if j < l else 1 for j in range(l + 1)]
    total = 0
    for j in range(l + 1):
        # y with min valuation exactly j (j = l means y = 0)
        at_least = ge[j] ** s
        above = ge[j + 1] ** s if j < l else 0
        n_j = at_least - above
        g = p ** min(2 * j, l)
        total += n_j * q ** (s - 1) * g
    return total


def local_solution_count_naive(p: int, s: int, l: int, budget: int = 5 * 10**7) -> int:
    q = p**l
    if q ** (2 * s) > budget:
        raise BudgetExceeded("naive local count exceeds budget")
    grid = np.array(list(itertools.product(range(q), repeat=s)), dtype=np.int64)
    return int(np.count_nonzero((grid @ ((grid * grid) % q).T) % q == 0))


def local_density(p: int, s: int, l: int | str = "closed") -> PadicDensity:
    if s < 2:
        raise PreconditionError("s must be at least 2")
    if l == "closed":
        v = local_density_closed(p, s)
        return PadicDensity(p, float(v), "closed-form", None, v)
    l = int(l)
    if l < 1:
        raise PreconditionError("level must be positive")
    n = local_solution_count(p, s, l)
    v = Fraction(n, p ** ((2 * s - 1) * l))
    return PadicDensity(p, float(v), "brute-force", l, v)


# -- leading constant -----------------------------------------------------------------------------

@dataclass(frozen=True)
class PeyreResult:
    direct: float
    product: float
    tau: float
    zeta_s: float
    zeta_s1: float
    zeta_s2: float
    sigma_product: float
    sigma_tail_factor: float
    prime_cutoff: int

    @property
    def relative_gap(self) -> float:
        return abs(self.direct - self.product) / abs(self.direct) if self.direct else 0.0

    def as_dict(self):
        d = dict(self.__dict__)
        d["relative_gap"] = self.relative_gap
        return d


def peyre_constant(s: int, tau: DensityValue | float, prime_cutoff: int = 10**4) -> PeyreResult:
    """``c = tau / (4 zeta(s-1) zeta(s))`` together with the local-density product route."""
    if s < 4:
        raise PreconditionError("s must be at least 4")
    t = tau.value if isinstance(tau, DensityValue) else float(tau)
    z0, z1, z2 = zeta(s), zeta(s - 1), zeta(s - 2)
    logs = [math.log(float(local_density_closed(p, s))) for p in primes_up_to(prime_cutoff).tolist()]
    prod = math.exp(math.fsum(logs))
    # sigma_p <= (1 - p^{2-s})^{-1} so the omitted primes contribute at most this factor
    tail = math.exp(2.0 * (prime_cutoff ** (3.0 - s)) / (s - 3))
    direct = t / (4.0 * z1 * z0)
    product = t * prod / (4.0 * z1 * z2)
    return PeyreResult(direct, product, t, z0, z1, z2, prod, tail, prime_cutoff)
