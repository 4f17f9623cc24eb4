"""Integer vectors, the form F(x; y) = sum x_i y_i^2, heights and Moebius.

Vectors are plain tuples of Python ints so arithmetic never overflows;
numpy enters only in the sieves, which produce small integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import PreconditionError

CoeffVector = tuple  # tuple[int, ...]


def as_vector(v: Iterable[int], s: int | None = None) -> CoeffVector:
    """Return ``v`` as a tuple of Python ints, checking the dimension."""
    out = tuple(int(c) for c in v)
    if len(out) < 1:
        raise PreconditionError("empty vector")
    if s is not None and len(out) != s:
        raise PreconditionError(f"expected dimension {s}, got {len(out)}")
    return out


def sup_norm(v: Sequence[int]) -> int:
    return max((abs(int(c)) for c in v), default=0)


@dataclass(frozen=True)
class HeightContext:
    s: int
    B: int | Fraction | float

    def __post_init__(self):
        if self.s < 2:
            raise PreconditionError("s must be at least 2")
        if not self.B > 0:
            raise PreconditionError("height bound must be positive")


@dataclass(frozen=True)
class DeltaProfile:
    delta: int
    delta_bad: int

    @property
    def degenerate(self) -> bool:
        return self.delta == 0


@dataclass(frozen=True)
class PointPair:
    x: CoeffVector
    y: CoeffVector

    @property
    def s(self) -> int:
        return len(self.x)

    @property
    def height(self) -> int:
        return height(self.x, self.y)

    @property
    def is_solution(self) -> bool:
        return evaluate_form(self.x, self.y) == 0


def evaluate_form(x: Sequence[int], y: Sequence[int]) -> int:
    if len(x) != len(y):
        raise PreconditionError(f"dimension mismatch: {len(x)} vs {len(y)}")
    return sum(int(a) * int(b) * int(b) for a, b in zip(x, y))


def height(x: Sequence[int], y: Sequence[int], ctx: HeightContext | None = None) -> int:
    """Anticanonical height ``|x|^(s-1) |y|^(s-2)`` as an exact integer."""
    if len(x) != len(y):
        raise PreconditionError("dimension mismatch")
    s = len(x)
    if ctx is not None and ctx.s != s:
        raise PreconditionError(f"context has s={ctx.s}, vectors have s={s}")
    hx, hy = sup_norm(x), sup_norm(y)
    if hx == 0 or hy == 0:
        raise PreconditionError("height undefined for the zero vector")
    return hx ** (s - 1) * hy ** (s - 2)


def content(v: Iterable[int]) -> int:
    g = 0
    for c in v:
        g = math.gcd(g, int(c))
    return g


def is_primitive(v: Iterable[int]) -> bool:
    return content(v) == 1


def factorize(n: int) -> dict[int, int]:
    """Prime factorisation of ``|n|`` by trial division (desk-scale inputs)."""
    n = abs(int(n))
    if n == 0:
        raise PreconditionError("cannot factor 0")
    out: dict[int, int] = {}
    for p in (2, 3):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    p, step = 5, 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += step
        step = 6 - step
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def mobius(n: int) -> int:
    if n < 1:
        raise PreconditionError("mobius is defined for n >= 1")
    f = factorize(n)
    if any(e > 1 for e in f.values()):
        return 0
    return -1 if len(f) % 2 else 1


def euler_phi(n: int) -> int:
    r = n
    for p in factorize(n):
        r -= r // p
    return r


@lru_cache(maxsize=64)
def _mobius_table(n: int) -> np.ndarray:
    mu = np.ones(n + 1, dtype=np.int8)
    mu[0] = 0
    is_comp = np.zeros(n + 1, dtype=bool)
    for p in range(2, n + 1):
        if is_comp[p]:
            continue
        is_comp[2 * p::p] = True
        mu[p::p] *= -1
        if p * p <= n:
            mu[p * p::p * p] = 0
    mu.setflags(write=False)
    return mu


def mobius_sieve(n: int) -> np.ndarray:
    """Array ``mu`` with ``mu[k]`` the Moebius function for ``0 <= k <= n`` (``mu[0] = 0``)."""
    return _mobius_table(max(int(n), 1))[: int(n) + 1]


def mertens_prefix(n: int) -> np.ndarray:
    """Prefix sums ``M[k] = sum_{d <= k} mu(d)``."""
    return np.cumsum(mobius_sieve(n), dtype=np.int64)


def primes_up_to(n: int) -> np.ndarray:
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    sieve = np.ones(n + 1, dtype=bool)
    sieve[:2] = False
    for p in range(2, math.isqrt(n) + 1):
        if sieve[p]:
            sieve[p * p::p] = False
    return np.nonzero(sieve)[0].astype(np.int64)


def smallest_prime_factor(n: int) -> np.ndarray:
    spf = np.zeros(n + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if spf[p] == 0:
            block = spf[p::p]
            block[block == 0] = p
    return spf


def delta_profile(x: Sequence[int]) -> DeltaProfile:
    delta = math.prod(int(c) for c in x)
    if delta == 0:
        return DeltaProfile(0, 0)
    bad = 1
    for p, e in factorize(delta).items():
        if e >= 2:
            bad *= p**e
    return DeltaProfile(delta, bad)


def is_squarefull(n: int) -> bool:
    return all(e >= 2 for e in factorize(n).values())


def is_squarefree(n: int) -> bool:
    return all(e == 1 for e in factorize(n).values())


def floor_root(n, k: int) -> int:
    """Largest integer r >= 0 with r**k <= n, for an int or Fraction ``n``."""
    if k < 1:
        raise PreconditionError("root index must be positive")
    n = Fraction(n)
    if n < 0:
        raise PreconditionError("negative radicand")
    m = n.numerator // n.denominator  # r^k <= n  <=>  r^k <= floor(n)
    if m < 2:
        return int(m)
    r = int(round(m ** (1.0 / k))) if m < 2**1000 else 1 << (m.bit_length() // k)
    while r**k > m:
        r -= 1
    while (r + 1) ** k <= m:
        r += 1
    return r


def max_radius(B, exponent: int, weight: int = 1) -> int:
    """Largest integer r >= 0 with ``r**exponent * weight <= B``."""
    if weight <= 0:
        raise PreconditionError("weight must be positive")
    return floor_root(Fraction(B) / weight, exponent)


def parse_exact_number(text: str):
    """Parse ``1e5``/``100000``/``2.5e3`` exactly; integral values become ints."""
    val = Fraction(text.strip())
    return int(val) if val.denominator == 1 else val
