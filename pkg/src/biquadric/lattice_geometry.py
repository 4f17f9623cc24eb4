"""Kernel lattices of the linear form x -> sum y_i^2 x_i.

Bases are stored as tuples of integer row vectors.  Everything that decides
membership, norms or counts is exact; floating point is used only to steer
enumeration, and every candidate it produces is re-checked in integers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core_forms import as_vector
from .errors import BudgetExceeded, PreconditionError
from . import sumsets

ENUM_LIMIT = 50_000_000
NODE_LIMIT = 1_000_000


# -- exact integer linear algebra ------------------------------------------------

def hermite_with_transform(G: Sequence[Sequence[int]]):
    """Row-echelon Hermite form ``H = U G`` with ``U`` unimodular.

    Returns ``(H, U, rank)``; rows ``rank..`` of ``U`` span the integer
    left kernel of ``G``.
    """
    H = [list(map(int, r)) for r in G]
    n = len(H)
    m = len(H[0]) if n else 0
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    row = 0
    for col in range(m):
        if row >= n:
            break
        # gcd-combine all rows below into the pivot row
        for i in range(row + 1, n):
            a, b = H[row][col], H[i][col]
            if b == 0:
                continue
            g, p, q = _xgcd(a, b)
            ra, rb = a // g, b // g
            H[row], H[i] = (
                [p * u + q * v for u, v in zip(H[row], H[i])],
                [-rb * u + ra * v for u, v in zip(H[row], H[i])],
            )
            U[row], U[i] = (
                [p * u + q * v for u, v in zip(U[row], U[i])],
                [-rb * u + ra * v for u, v in zip(U[row], U[i])],
            )
        piv = H[row][col]
        if piv == 0:
            continue
        if piv < 0:
            H[row] = [-v for v in H[row]]
            U[row] = [-v for v in U[row]]
            piv = -piv
        for i in range(row):
            f = H[i][col] // piv
            if f:
                H[i] = [u - f * v for u, v in zip(H[i], H[row])]
                U[i] = [u - f * v for u, v in zip(U[i], U[row])]
        row += 1
    return H, U, row


def _xgcd(a, b):
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        qt, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - qt * x1
        y0, y1 = y1, y0 - qt * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def integer_kernel(M: Sequence[Sequence[int]]):
    """Basis (rows) of {c in Z^n : c M = 0} for an n x m integer matrix M."""
    _, U, r = hermite_with_transform(M)
    return [row for row in U[r:]]


def hermite_normal_form(rows):
    H, _, r = hermite_with_transform(rows)
    return [h for h in H[:r]]


def bareiss_det(M) -> int:
    A = [list(map(int, r)) for r in M]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            for i in range(k + 1, n):
                if A[i][k]:
                    A[k], A[i] = A[i], A[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def gram(rows):
    return [[sum(a * b for a, b in zip(u, v)) for v in rows] for u in rows]


def _dot(u, v):
    return sum(a * b for a, b in zip(u, v))


def lll_reduce(rows, lo: int = 0, delta=Fraction(3, 4)):
    """Exact LLL on ``rows``; vectors before ``lo`` are frozen (used only for
    size reduction), so the span of ``rows[:lo]`` is preserved."""
    b = [list(r) for r in rows]
    n = len(b)
    if n == 0:
        return b

    def gso():
        bs, mu = [], [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            v = [Fraction(x) for x in b[i]]
            for j in range(i):
                mu[i][j] = sum(x * y for x, y in zip(b[i], bs[j][0])) / bs[j][1]
                v = [vi - mu[i][j] * yj for vi, yj in zip(v, bs[j][0])]
            bs.append((v, sum(t * t for t in v)))
        return bs, mu

    bs, mu = gso()
    k = max(lo, 1)
    while k < n:
        for j in range(k - 1, -1, -1):
            r = round(mu[k][j])
            if r:
                b[k] = [x - r * y for x, y in zip(b[k], b[j])]
                for l in range(j + 1):
                    mu[k][l] -= r * (mu[j][l] if l < j else 1)
        if k > lo and bs[k][1] < (delta - mu[k][k - 1] ** 2) * bs[k - 1][1]:
            b[k], b[k - 1] = b[k - 1], b[k]
            bs, mu = gso()
            k = max(k - 1, max(lo, 1))
        else:
            k += 1
    return b


# -- lattice containers --------------------------------------------------------------

@dataclass(frozen=True)
class SolutionLattice:
    basis: tuple  # rows, integer
    det2: int
    normal: tuple | None = None
    reduced: tuple = field(default=(), compare=False)

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def dim(self) -> int:
        return len(self.basis[0]) if self.basis else (len(self.normal) if self.normal else 0)

    @property
    def det(self) -> float:
        return math.sqrt(self.det2)

    def contains(self, v) -> bool:
        if self.normal is not None:
            return _dot(self.normal, v) == 0
        return _solve_coordinates(self.basis, v) is not None


def lattice_from_basis(rows) -> SolutionLattice:
    rows = tuple(tuple(int(c) for c in r) for r in rows)
    d2 = bareiss_det(gram(rows))
    if d2 <= 0:
        raise PreconditionError("basis vectors are linearly dependent")
    red = tuple(tuple(r) for r in lll_reduce(rows))
    return SolutionLattice(rows, d2, None, red)


def solution_lattice(y) -> SolutionLattice:
    y = as_vector(y)
    if all(c == 0 for c in y):
        raise PreconditionError("y must be nonzero")
    w = [c * c for c in y]
    kernel = integer_kernel([[c] for c in w])
    basis = tuple(tuple(r) for r in hermite_normal_form(kernel))
    det2 = bareiss_det(gram(basis)) if basis else 1
    red = tuple(tuple(r) for r in lll_reduce(basis))
    return SolutionLattice(basis, det2, tuple(w), red)


def _solve_coordinates(rows, v):
    """Integer c with c * rows = v, or None."""
    k = len(rows)
    M = [list(r) + [0] for r in rows] + [list(v) + [1]]
    for c in integer_kernel(M):
        if abs(c[-1]) == 1:
            return [-x * c[-1] for x in c[:-1]]
    return None


# -- counting -----------------------------------------------------------------------------

def _coordinate_bounds(rows, R: int):
    """Bounds |c_j| <= C_j for all lattice points with sup-norm <= R, from the
    exact left inverse (B B^T)^{-1} B."""
    k = len(rows)
    G = [[Fraction(v) for v in r] for r in gram(rows)]
    inv = _invert(G)
    P = [[sum(inv[j][l] * rows[l][i] for l in range(k)) for i in range(len(rows[0]))] for j in range(k)]
    return [math.floor(R * sum(abs(p) for p in P[j])) for j in range(k)]


def _invert(G):
    n = len(G)
    A = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(G)]
    for c in range(n):
        p = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        piv = A[c][c]
        A[c] = [v / piv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return [row[n:] for row in A]


def enumerate_box_count(lat: SolutionLattice, R) -> int:
    """Box count by walking lattice coordinates; the innermost coordinate is
    counted as an integer interval, the others are enumerated."""
    R = math.floor(R)
    if R < 0:
        return 0
    rows = [list(r) for r in (lat.reduced or lat.basis)]
    k = len(rows)
    if k == 0:
        return 1
    C = _coordinate_bounds(rows, R)
    outer = math.prod(2 * c + 1 for c in C[:-1])
    if outer > ENUM_LIMIT:
        raise BudgetExceeded(f"{outer} outer lattice coordinates exceed the enumeration budget")
    Bm = np.array(rows, dtype=np.int64)
    last = Bm[-1]
    total = 0
    grids = [np.arange(-c, c + 1, dtype=np.int64) for c in C[:-1]]
    for partial in _partial_sums(grids, Bm[:-1]):
        lo = np.full(partial.shape[0], -C[-1], dtype=np.int64)
        hi = np.full(partial.shape[0], C[-1], dtype=np.int64)
        ok = np.ones(partial.shape[0], dtype=bool)
        for i in range(Bm.shape[1]):
            b = int(last[i])
            p = partial[:, i]
            if b == 0:
                ok &= np.abs(p) <= R
            elif b > 0:
                lo = np.maximum(lo, -((R + p) // b))  # ceil((-R - p)/b)
                hi = np.minimum(hi, (R - p) // b)
            else:
                bb = -b
                lo = np.maximum(lo, -((R - p) // bb))
                hi = np.minimum(hi, (R + p) // bb)
        total += int(np.clip(hi - lo + 1, 0, None)[ok].sum())
    return total


def _partial_sums(grids, rows, chunk=1 << 20):
    if not grids:
        yield np.zeros((1, rows.shape[1]), dtype=np.int64)
        return
    # split off leading coordinates so each block has at most ``chunk`` rows
    inner = 1
    split = len(grids)
    while split > 0 and inner * grids[split - 1].size <= chunk:
        split -= 1
        inner *= grids[split].size
    inner_mesh = np.stack(np.meshgrid(*grids[split:], indexing="ij"), -1).reshape(-1, len(grids) - split) if split < len(grids) else np.zeros((1, 0), dtype=np.int64)
    inner_part = inner_mesh @ rows[split:]
    if split == 0:
        yield inner_part
        return
    import itertools
    for head in itertools.product(*[g.tolist() for g in grids[:split]]):
        shift = np.asarray(head, dtype=np.int64) @ rows[:split]
        yield inner_part + shift


def count_lattice_points_box(lat: SolutionLattice, R, method: str = "auto") -> int:
    """#{x in lat : |x|_inf <= R}, including the zero vector.

    ``method="sumset"`` counts solutions of the defining linear equation with
    the partial-sum matcher (solution lattices only); ``"enumerate"`` walks
    lattice coordinates.  ``"auto"`` picks the sumset route when available.
    """
    if R < 0:
        raise PreconditionError("R must be nonnegative")
    R = math.floor(R)
    if method == "auto":
        method = "sumset" if lat.normal is not None else "enumerate"
    if method == "sumset":
        if lat.normal is None:
            raise PreconditionError("sumset counting needs the defining linear form")
        return sumsets.count_weighted_box(lat.normal, R)
    if method == "enumerate":
        return enumerate_box_count(lat, R)
    raise PreconditionError(f"unknown method {method!r}")


# -- successive minima --------------------------------------------------------------------

@dataclass(frozen=True)
class MinimaProfile:
    minima: tuple
    norms2: tuple
    witnesses: tuple
    exact: bool = True


def _gso_float(rows):
    B = np.array(rows, dtype=float)
    k = B.shape[0]
    bstar = np.zeros_like(B)
    mu = np.zeros((k, k))
    b2 = np.zeros(k)
    for i in range(k):
        v = B[i].copy()
        for j in range(i):
            mu[i, j] = B[i] @ bstar[j] / b2[j]
            v -= mu[i, j] * bstar[j]
        bstar[i] = v
        b2[i] = v @ v
    return mu, b2


def _shortest_outside(rows, n_fixed: int):
    """Shortest vector of the lattice spanned by ``rows`` with some coefficient
    of index >= n_fixed nonzero, i.e. outside span(rows[:n_fixed])."""
    k = len(rows)
    mu, b2 = _gso_float(rows)
    best2 = min(_dot(r, r) for r in rows[n_fixed:])
    best_vec = list(min(rows[n_fixed:], key=lambda r: _dot(r, r)))
    slack = lambda v: v * (1 + 1e-9) + 1e-9
    bound = slack(best2)
    c = [0] * k
    nodes = 0

    def rec(level, partial):
        nonlocal best2, best_vec, bound, nodes
        nodes += 1
        if nodes > NODE_LIMIT:
            raise BudgetExceeded("minima enumeration exceeded node budget")
        center = -sum(c[l] * mu[l, level] for l in range(level + 1, k))
        if level == n_fixed - 1 and all(c[l] == 0 for l in range(n_fixed, k)):
            return
        rad = math.sqrt(max(bound - partial, 0.0) / b2[level])
        lo, hi = math.ceil(center - rad), math.floor(center + rad)
        for xj in sorted(range(lo, hi + 1), key=lambda t: (abs(t - center), t)):
            d = (xj - center) ** 2 * b2[level]
            if partial + d > bound:
                continue
            c[level] = xj
            if level == 0:
                if n_fixed == 0 and not any(c):
                    continue
                v = [sum(c[i] * rows[i][t] for i in range(k)) for t in range(len(rows[0]))]
                n2 = _dot(v, v)
                if n2 and n2 < best2:
                    best2, best_vec, bound = n2, v, slack(n2)
            else:
                rec(level - 1, partial + d)
        c[level] = 0

    rec(k - 1, 0.0)
    return best2, best_vec


def successive_minima(lat: SolutionLattice) -> MinimaProfile:
    rows = [list(r) for r in (lat.reduced or lat.basis)]
    k = len(rows)
    if k == 0:
        raise PreconditionError("rank-0 lattice has no minima")
    if k > 8:
        return _approximate_minima(rows)
    witnesses = []
    norms = []
    try:
        for i in range(k):
            adapted = _adapted_basis(rows, witnesses)
            n2, v = _shortest_outside(adapted, len(witnesses))
            witnesses.append(v)
            norms.append(n2)
    except BudgetExceeded:
        return _approximate_minima(rows)
    return MinimaProfile(
        tuple(math.sqrt(n) for n in norms), tuple(norms), tuple(tuple(w) for w in witnesses), True
    )


def _approximate_minima(rows) -> MinimaProfile:
    red = sorted(lll_reduce(rows), key=lambda r: _dot(r, r))
    n2 = [_dot(r, r) for r in red]
    return MinimaProfile(tuple(math.sqrt(v) for v in n2), tuple(n2), tuple(tuple(r) for r in red), False)


def _adapted_basis(rows, witnesses):
    """A reduced basis of the lattice whose first len(witnesses) vectors span
    the saturation of span(witnesses)."""
    if not witnesses:
        return lll_reduce(rows)
    k = len(rows)
    # coordinates c with c*rows in span(witnesses)  <=>  (c*rows) . z = 0 for z in witnesses^perp
    perp = integer_kernel([list(col) for col in zip(*witnesses)])  # z with W z = 0
    Gm = [[_dot(r, z) for z in perp] for r in rows]
    _, U, r = hermite_with_transform(Gm)
    sub, comp = U[r:], U[:r]
    to_vec = lambda cvec: [sum(cc * rows[i][t] for i, cc in enumerate(cvec)) for t in range(len(rows[0]))]
    s_rows = lll_reduce([to_vec(cv) for cv in sub])
    c_rows = [to_vec(cv) for cv in comp]
    return lll_reduce(s_rows + c_rows, lo=len(s_rows))


# -- error envelope -------------------------------------------------------------------------

def schmidt_envelope(R: float, minima: Sequence[float]) -> float:
    """1 + sum_{j<k} R^(k-j) / (lambda_1 ... lambda_j)."""
    k = len(minima)
    env, prod = 1.0, 1.0
    for j in range(1, k):
        prod *= minima[j - 1]
        env += R ** (k - j) / prod
    return env


def check_schmidt_bound(lat: SolutionLattice, R, minima: MinimaProfile | None = None) -> dict:
    from .real_densities import cube_slice_volume

    if R <= 0:
        raise PreconditionError("R must be positive")
    count = count_lattice_points_box(lat, R)
    k = lat.rank
    if lat.normal is not None:
        V = cube_slice_volume(lat.normal)
        vol = V.value
        if V.radicand == lat.det2:
            vol_over_det = float(V.rational)
        else:
            vol_over_det = vol / lat.det
    else:
        vol_over_det = 2.0**lat.dim / lat.det
    main = vol_over_det * float(R) ** k
    mp = minima or successive_minima(lat)
    env = schmidt_envelope(float(R), mp.minima)
    err = count - main
    return {
        "count": count,
        "main_term": main,
        "error": err,
        "bound": env,
        "ratio": abs(err) / env,
        "minima": list(mp.minima),
        "minima_exact": mp.exact,
    }
