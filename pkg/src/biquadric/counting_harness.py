"""Exact counters for points on sum x_i y_i^2 = 0 and their predicted main terms.

All counters return Python ints.  The heavy lifting is done by the
partial-sum matcher in :mod:`biquadric.sumsets`; symmetry classes
(permutations, signs) collapse the outer loops of the global count.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from . import sumsets
from .arithmetic_densities import singular_series, zeta
from .core_forms import (as_vector, content, delta_profile, max_radius, mertens_prefix,
                         sup_norm)
from .errors import BudgetExceeded, PreconditionError
from .lattice_geometry import (check_schmidt_bound, count_lattice_points_box, schmidt_envelope,
                               solution_lattice, successive_minima)
from .real_densities import QuadratureSettings, rho_infinity, sigma_infinity

SCHEMA_VERSION = 1


# -- records ------------------------------------------------------------------------------

@dataclass
class CountRecord:
    counter: str
    params: dict
    value: int
    elapsed: float = 0.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("counts are nonnegative")

    def as_dict(self, timings: bool = False) -> dict:
        out = {"counter": self.counter, **self.params, "value": self.value}
        if timings:
            out["elapsed_s"] = round(self.elapsed, 6)
        return out


@dataclass
class PredictionRecord:
    target: str
    params: dict
    main_term: float
    main_err: float
    constituents: dict = field(default_factory=dict)
    error_envelope: float = 0.0

    def as_dict(self, timings: bool = False) -> dict:
        return {"prediction": self.target, **self.params, "main_term": self.main_term,
                "main_err": self.main_err, "error_envelope": self.error_envelope,
                **{f"c_{k}": v for k, v in self.constituents.items()}}


def records_to_json(rows: Sequence[dict], meta: dict | None = None) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "meta": meta or {}, "rows": list(rows)}
    return json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + "\n"


def records_to_csv(rows: Sequence[dict]) -> str:
    cols: list[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["schema_version"] + cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({"schema_version": SCHEMA_VERSION,
                    **{k: _csv_cell(v) for k, v in r.items()}})
    return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, (list, tuple)):
        return " ".join(str(t) for t in v)
    return v


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


# -- Moebius inversion ---------------------------------------------------------------------------

def primitive_count(counter: Callable[[int], int], P: int) -> int:
    """``sum_d mu(d) (counter(P // d) - 1)``: nonzero primitive solutions in the
    box of radius P, given a box counter that includes the zero vector."""
    if P < 1:
        return 0
    M = mertens_prefix(P)
    total, d = 0, 1
    while d <= P:
        v = P // d
        d2 = P // v
        mu_sum = int(M[d2] - M[d - 1])
        if mu_sum:
            total += mu_sum * (counter(v) - 1)
        d = d2 + 1
    return total


def primitive_nonzero_count(counter: Callable[[int], int], P: int) -> int:
    """Variant for counters of all-nonzero vectors (which never include 0)."""
    if P < 1:
        return 0
    M = mertens_prefix(P)
    total, d = 0, 1
    while d <= P:
        v = P // d
        d2 = P // v
        mu_sum = int(M[d2] - M[d - 1])
        if mu_sum:
            total += mu_sum * counter(v)
        d = d2 + 1
    return total


# -- M counters ---------------------------------------------------------------------------------

def count_M1(y, R) -> int:
    """#{x in Z^s : |x| <= R, F(x; y) = 0} (zero vector included)."""
    return count_lattice_points_box(solution_lattice(y), R)


def count_M2(y, R) -> int:
    """Primitive x only."""
    y = as_vector(y)
    w = [c * c for c in y]
    return primitive_count(lambda r: sumsets.count_weighted_box(w, r), math.floor(R))


def count_M3(x, P: int) -> int:
    """#{y in Z^s : |y| <= P, F(x; y) = 0} (zero vector included)."""
    x = as_vector(x)
    if P < 0:
        raise PreconditionError("P must be nonnegative")
    return sumsets.count_diagonal_box(x, int(P))


def count_M4(x, P: int) -> int:
    x = as_vector(x)
    return primitive_count(lambda r: sumsets.count_diagonal_box(x, r), int(P))


def naive_M3(x, P: int, primitive: bool = False) -> int:
    x = np.asarray(as_vector(x), dtype=np.int64)
    grid = np.array(list(itertools.product(range(-P, P + 1), repeat=x.size)), dtype=np.int64)
    ok = (grid * grid) @ x == 0
    if primitive:
        ok &= np.gcd.reduce(grid, axis=1) == 1
    return int(np.count_nonzero(ok))


# -- symmetry classes -----------------------------------------------------------------------------

def _perm_count(t: Sequence[int]) -> int:
    out = math.factorial(len(t))
    for c in Counter(t).values():
        out //= math.factorial(c)
    return out


def y_classes(s: int, lo: int, hi: int):
    """Primitive y with lo <= |y| <= hi, grouped by the sorted tuple of |y_i|.

    Yields ``(abs_tuple, multiplicity)`` where multiplicity counts all signed,
    permuted vectors in the class.  F(x; y) only sees y_i^2."""
    for t in itertools.combinations_with_replacement(range(hi + 1), s):
        m = t[-1]
        if m < lo or m == 0 or content(t) != 1:
            continue
        nz = sum(1 for c in t if c)
        yield t, _perm_count(t) * 2**nz


def x_classes(s: int, lo: int, hi: int, nonzero: bool = True):
    """Primitive x with lo <= |x| <= hi up to permutation and global sign.

    Yields ``(representative, multiplicity)``."""
    vals = [v for v in range(-hi, hi + 1) if not (nonzero and v == 0)]
    seen = set()
    for t in itertools.combinations_with_replacement(vals, s):
        if sup_norm(t) < lo or not any(t) or content(t) != 1:
            continue
        neg = tuple(sorted(-v for v in t))
        key = min(t, neg)
        if key in seen:
            continue
        seen.add(key)
        mult = _perm_count(t) * (1 if neg == t else 2)
        yield key, mult


# -- N counters ------------------------------------------------------------------------------------

def _R_of_y(B, ym: int, s: int) -> int:
    return max_radius(B, s - 1, ym ** (s - 2))


def _P_of_x(B, xm: int, s: int) -> int:
    return max_radius(B, s - 2, xm ** (s - 1))


def count_N1(s: int, Y: int, B, primitive_x: bool = False) -> int:
    """sum over primitive y with Y <= |y| < 2Y of M1(y; R(y)) (M2 if ``primitive_x``)."""
    if Y < 1:
        raise PreconditionError("window needs Y >= 1")
    total = 0
    for t, mult in y_classes(s, Y, 2 * Y - 1):
        R = _R_of_y(B, t[-1], s)
        w = [c * c for c in t]
        if primitive_x:
            total += mult * primitive_count(lambda r: sumsets.count_weighted_box(w, r), R)
        else:
            total += mult * sumsets.count_weighted_box(w, R)
    return total


def count_N2(s: int, Y: int, B) -> int:
    return count_N1(s, Y, B, primitive_x=True)


def count_N3(s: int, X: int, B, primitive_y: bool = False, nondegenerate_only: bool = False) -> int:
    """sum over primitive x with X <= |x| < 2X of M3(x; P(x)) (M4 if ``primitive_y``)."""
    if X < 1:
        raise PreconditionError("window needs X >= 1")
    total = 0
    for x, mult in x_classes(s, X, 2 * X - 1, nonzero=nondegenerate_only):
        P = _P_of_x(B, sup_norm(x), s)
        if primitive_y:
            total += mult * primitive_count(lambda r: sumsets.count_diagonal_box(x, r), P)
        else:
            total += mult * sumsets.count_diagonal_box(x, P)
    return total


def count_N4(s: int, X: int, B, nondegenerate_only: bool = False) -> int:
    return count_N3(s, X, B, primitive_y=True, nondegenerate_only=nondegenerate_only)


# -- global count -----------------------------------------------------------------------------------

def default_split(s: int, B) -> int:
    """Largest integer Y0 with Y0^(s+2) <= B."""
    return max_radius(B, s + 2)


def _region_y_job(args):
    t, mult, B, s = args
    R = _R_of_y(B, t[-1], s)
    w = [c * c for c in t]
    return mult * primitive_nonzero_count(lambda r: sumsets.count_weighted_box(w, r, nonzero=True), R)


def _region_x_job(args):
    x, mult, B, s, split = args
    P = _P_of_x(B, sup_norm(x), s)
    if P <= split:
        return 0
    cache = {}

    def m3(r):
        if r not in cache:
            cache[r] = sumsets.count_diagonal_box(x, r)
        return cache[r]

    return mult * (primitive_count(m3, P) - primitive_count(m3, split))


def global_jobs(s: int, B, split: int | None = None):
    split = default_split(s, B) if split is None else int(split)
    y_jobs = [(t, m, B, s) for t, m in y_classes(s, 1, split)] if split >= 1 else []
    # |x| admits some y with |y| > split only if |x|^(s-1) (split+1)^(s-2) <= B
    xmax = max_radius(B, s - 1, (split + 1) ** (s - 2))
    x_jobs = [(x, m, B, s, split) for x, m in x_classes(s, 1, xmax)] if xmax >= 1 else []
    return split, y_jobs, x_jobs


def estimate_global_cost(s: int, B, split: int | None = None) -> dict:
    split, yj, xj = global_jobs(s, B, split)
    tables = 0
    for t, *_ in yj:
        R = _R_of_y(B, t[-1], s)
        tables = max(tables, sum(c * c for c in t) * R)
    for x, *_ in xj:
        P = _P_of_x(B, sup_norm(x), s)
        tables = max(tables, sum(abs(v) for v in x) * P * P)
    return {"split": split, "y_classes": len(yj), "x_classes": len(xj), "max_table": tables}


def count_global(s: int, B, split: int | None = None, workers: int = 1) -> CountRecord:
    """Projective count of primitive pairs with Delta(x) != 0, F = 0 and height <= B.

    The pairs are split exactly: |y| <= split is handled by looping over y
    classes and counting primitive all-nonzero x; |y| > split by looping over x
    classes and counting primitive y in the shell.  The raw count of signed
    representatives is divided by 4."""
    if s < 3:
        raise PreconditionError("s must be at least 3")
    t0 = time.perf_counter()
    est = estimate_global_cost(s, B, split)
    if est["max_table"] > sumsets.TABLE_LIMIT:
        raise BudgetExceeded("global count exceeds the table budget")
    split, yj, xj = global_jobs(s, B, split)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            a = sum(ex.map(_region_y_job, yj, chunksize=4))
            b = sum(ex.map(_region_x_job, xj, chunksize=4))
    else:
        a = sum(map(_region_y_job, yj))
        b = sum(map(_region_x_job, xj))
    raw = a + b
    if raw % 4:
        raise AssertionError("signed representative count is not divisible by 4")
    return CountRecord("global", {"s": s, "B": _num(B), "split": split, "small_y": a // 4,
                                  "large_y": b // 4}, raw // 4, time.perf_counter() - t0)


def _num(B):
    f = Fraction(B)
    return int(f) if f.denominator == 1 else str(f)


def naive_global_count(s: int, B, chunk: int = 20000) -> int:
    """Direct double enumeration over x and y boxes (oracle, small B only)."""
    B = Fraction(B)
    xmax = max_radius(B, s - 1)
    total = 0
    for m in range(1, xmax + 1):
        P = max_radius(B / m ** (s - 1), s - 2)
        if P < 1:
            continue
        vals = [v for v in range(-m, m + 1) if v]
        X = np.array(list(itertools.product(vals, repeat=s)), dtype=np.int64)
        X = X[(np.abs(X).max(1) == m) & (np.gcd.reduce(X, axis=1) == 1)]
        Y = np.array(list(itertools.product(range(-P, P + 1), repeat=s)), dtype=np.int64)
        Y = Y[np.gcd.reduce(Y, axis=1) == 1]
        Y2 = (Y * Y).T
        for i in range(0, X.shape[0], chunk):
            total += int(np.count_nonzero(X[i:i + chunk] @ Y2 == 0))
    assert total % 4 == 0
    return total // 4


# -- predictions --------------------------------------------------------------------------------------

def _gcd_products(x, Q: int):
    q = np.arange(1, Q + 1, dtype=np.int64)
    g = np.ones(Q)
    for xj in x:
        g *= np.sqrt(np.gcd(q, abs(int(xj))).astype(float))
    return q, g


def predict_M3(x, P: int, eta: float = 0.05, eps: float = 0.0, c_eta: float = 1.0,
               settings: QuadratureSettings | None = None, tol: float = 1e-6) -> PredictionRecord:
    """P^(s-2) sigma_inf(x) S(x; P) with S truncated at q <= P|x|, plus the
    three error magnitudes with all implied constants set to 1."""
    x = as_vector(x)
    s = len(x)
    if delta_profile(x).degenerate:
        raise PreconditionError("predict_M3 requires Delta(x) != 0")
    sig = sigma_infinity(x, settings)
    Qt = P * sup_norm(x)
    if sig.value == 0.0 and sig.err == 0.0:
        ss_val, ss_tail, full = 1.0, 0.0, None
    else:
        trunc = singular_series(x, Q=Qt)
        ss_val, ss_tail = trunc.value, 0.0
        full = singular_series(x, tol)
    main = P ** (s - 2) * sig.value * ss_val
    err = P ** (s - 2) * sig.err * abs(ss_val)
    D = abs(math.prod(x))
    xs = sup_norm(x)
    q, g = _gcd_products(x, Qt)
    E1 = P ** (s / 2 + eps) * D ** ((s - 4) / (2 * s))
    E2 = P ** (s - 2 - eta) / xs * float(np.sum(q ** (1 - s / 2) * g))
    E3 = P ** (s / 2 - 1 + c_eta * eta) * D**-0.5 * xs ** (s / 2 - 1) * float(np.sum(g))
    cons = {"sigma_inf": sig.value, "sigma_err": sig.err, "singular_series_trunc": ss_val,
            "truncation_Q": Qt, "E1": E1, "E2": E2, "E3": E3}
    if full is not None:
        cons.update({"singular_series": full.value, "singular_series_Q": full.Q,
                     "singular_series_tail": full.tail_bound})
    return PredictionRecord("M3", {"x": list(x), "P": P}, main, err, cons, E1 + E2 + E3)


def predict_M1(y, R) -> PredictionRecord:
    y = as_vector(y)
    s = len(y)
    rho = rho_infinity(y)
    lat = solution_lattice(y)
    mp = successive_minima(lat)
    main = rho.value * float(R) ** (s - 1)
    return PredictionRecord("M1", {"y": list(y), "R": _num(R)}, main, 0.0,
                            {"rho_inf": rho.value, "rho_exact": str(rho.exact), "det2": lat.det2,
                             "minima": list(mp.minima)},
                            schmidt_envelope(float(R), mp.minima))


# -- reports --------------------------------------------------------------------------------------------

def asymptotic_report(s: int, B_grid: Iterable, c: float, workers: int = 1) -> list[dict]:
    if not c > 0:
        raise PreconditionError("leading constant must be positive")
    rows = []
    for B in B_grid:
        rec = count_global(s, B, workers=workers)
        Bf = float(B)
        pred = c * Bf * math.log(Bf)
        rows.append({"B": _num(B), "N": rec.value, "c_B_logB": pred, "ratio": rec.value / pred,
                     "small_y": rec.params["small_y"], "large_y": rec.params["large_y"]})
    return rows


def verify_lemma41(s: int, Y: int, B) -> dict:
    """Exact N2(Y; B) against B/zeta(s-1) sum rho_inf(y)/|y|^(s-2) over the window."""
    if Y < 1:
        raise PreconditionError("window needs Y >= 1")
    count = count_N2(s, Y, B)
    dens = Fraction(0)
    for t, mult in y_classes(s, Y, 2 * Y - 1):
        r = rho_infinity(t).exact
        dens += mult * r / Fraction(t[-1]) ** (s - 2)
    main = float(B) / zeta(s - 1) * float(dens)
    return {"lemma": "N2", "s": s, "Y": Y, "B": _num(B), "count": count, "main_term": main,
            "ratio": count / main}


def verify_lemma44(s: int, X: int, B, tol: float = 1e-6,
                   settings: QuadratureSettings | None = None) -> dict:
    """Exact N4(X; B) (Delta(x) != 0 only) against
    B/zeta(s-2) sum sigma_inf(x) S(x) / |x|^(s-1) over the window."""
    if X < 1:
        raise PreconditionError("window needs X >= 1")
    count = count_N4(s, X, B, nondegenerate_only=True)
    dens = 0.0
    for x, mult in x_classes(s, X, 2 * X - 1, nonzero=True):
        sig = sigma_infinity(x, settings)
        if sig.value == 0.0:
            continue
        dens += mult * sig.value * singular_series(x, tol).value / sup_norm(x) ** (s - 1)
    main = float(B) / zeta(s - 2) * dens
    return {"lemma": "N4", "s": s, "X": X, "B": _num(B), "count": count, "main_term": main,
            "ratio": count / main if main else float("nan")}


def verify_lemma22(y, R) -> dict:
    return check_schmidt_bound(solution_lattice(y), R)
