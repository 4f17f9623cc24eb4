"""Exact counting of solutions to a linear equation over finite value sets.

A *column* is a pair ``(values, weights)``: the i-th unknown takes value
``values[k]`` with multiplicity ``weights[k]``.  ``count_zero_sums`` returns
the weighted number of tuples whose values add up to ``target``.  The
columns are split into two halves, each half is expanded into a dense
histogram of partial sums by repeated shift-and-add, and the halves are
matched with one dot product.  This is the dense-table form of a
meet-in-the-middle search; everything stays in exact int64 arithmetic.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import BudgetExceeded

TABLE_LIMIT = 2**31
_INT64_SAFE = 2**62


def column(values, weights=None):
    v = np.asarray(values, dtype=np.int64)
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=np.int64)
    if v.shape != w.shape or v.ndim != 1 or v.size == 0:
        raise ValueError("a column needs matching, non-empty 1-d values and weights")
    return v, w


def square_column(coeff: int, P: int, nonzero: bool = False):
    """Values ``coeff*t^2`` for ``|t| <= P`` folded onto ``t >= 0``."""
    t = np.arange(1 if nonzero else 0, P + 1, dtype=np.int64)
    if t.size == 0:
        return None
    w = np.where(t == 0, 1, 2).astype(np.int64)
    if coeff == 0:
        return column([0], [int(w.sum())])
    return column(coeff * t * t, w)


def linear_column(coeff: int, R: int, nonzero: bool = False):
    """Values ``coeff*t`` for ``|t| <= R`` (optionally ``t != 0``)."""
    t = np.arange(-R, R + 1, dtype=np.int64)
    if nonzero:
        t = t[t != 0]
    if t.size == 0:
        return None
    if coeff == 0:
        return column([0], [t.size])
    return column(coeff * t, None)


def _span(col):
    return int(col[0].max() - col[0].min())


def histogram(columns: Sequence) -> tuple[np.ndarray, int]:
    """Dense histogram of partial sums; returns ``(hist, offset)`` so that
    ``hist[k]`` counts tuples with sum ``k + offset``."""
    offset = sum(int(c[0].min()) for c in columns)
    length = sum(_span(c) for c in columns) + 1
    if length > TABLE_LIMIT:
        raise BudgetExceeded(f"partial-sum table of {length} entries exceeds 2^31")
    hist = np.zeros(1, dtype=np.int64)
    hist[0] = 1
    for vals, wts in columns:
        lo = int(vals.min())
        new = np.zeros(hist.size + int(vals.max()) - lo, dtype=np.int64)
        n = hist.size
        for v, w in zip((vals - lo).tolist(), wts.tolist()):
            if w == 1:
                new[v:v + n] += hist
            else:
                new[v:v + n] += w * hist
        hist = new
    return hist, offset


def _split(columns):
    # Balance the two table lengths; spans are additive.
    order = sorted(range(len(columns)), key=lambda i: -_span(columns[i]))
    left, right, sl, sr = [], [], 0, 0
    for i in order:
        if sl <= sr:
            left.append(columns[i])
            sl += _span(columns[i])
        else:
            right.append(columns[i])
            sr += _span(columns[i])
    return left, right


def total_tuples(columns) -> int:
    out = 1
    for _, w in columns:
        out *= int(w.sum())
    return out


def table_estimate(columns) -> int:
    left, right = _split(list(columns))
    return max(sum(_span(c) for c in half) + 1 for half in (left, right))


def count_zero_sums(columns: Sequence, target: int = 0) -> int:
    """Weighted number of tuples from ``columns`` whose sum equals ``target``."""
    columns = [c for c in columns]
    if any(c is None for c in columns):
        return 0
    if not columns:
        return int(target == 0)
    if total_tuples(columns) >= _INT64_SAFE:
        raise BudgetExceeded("solution count could overflow 64-bit accumulators")
    if table_estimate(columns) > TABLE_LIMIT:
        raise BudgetExceeded("partial-sum table exceeds 2^31 entries")
    if len(columns) == 1:
        vals, wts = columns[0]
        return int(wts[vals == target].sum())
    left, right = _split(columns)
    hl, ol = histogram(left)
    # right half enters with negated values so the match is a plain overlap
    neg = [(-v, w) for v, w in right]
    hr, orr = histogram(neg)
    # need a + b = target with a in left sums, -b in negated right sums:
    # left index i <-> a = i + ol ; right index j <-> -b = j + orr ; a = target - b = target + (j + orr)
    shift = target + orr - ol  # i = j + shift
    lo_j = max(0, -shift)
    hi_j = min(hr.size, hl.size - shift)
    if hi_j <= lo_j:
        return 0
    return int(np.dot(hl[lo_j + shift:hi_j + shift], hr[lo_j:hi_j]))


def count_weighted_box(coeffs: Sequence[int], R: int, nonzero: bool = False) -> int:
    """``#{x in [-R, R]^s : sum c_i x_i = 0}``; with ``nonzero`` all x_i != 0."""
    return count_zero_sums([linear_column(int(c), R, nonzero) for c in coeffs])


def count_diagonal_box(coeffs: Sequence[int], P: int, nonzero: bool = False) -> int:
    """``#{y in [-P, P]^s : sum c_i y_i^2 = 0}``."""
    return count_zero_sums([square_column(int(c), P, nonzero) for c in coeffs])
