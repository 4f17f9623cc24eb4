"""Archimedean densities: cube slices, rho_inf(y), sigma_inf(x), tau_inf.

Conventions: ``e(t) = exp(2 pi i t)`` and ``I(psi) = int_{-1}^{1} e(psi u^2) du``.
For real ``psi > 0``, ``I(psi) = (C(z) + i S(z)) / sqrt(psi)`` with ``z = 2 sqrt(psi)``
and ``C, S`` the standard Fresnel integrals; ``I(-psi)`` is the conjugate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import special
from scipy.stats import qmc

from .core_forms import as_vector
from .errors import PreconditionError, ToleranceUnreachable

EXACT = "exact-rational"
QUADRATURE = "quadrature"
MONTE_CARLO = "monte-carlo"

DEFAULT_SEED = 20240611


@dataclass(frozen=True)
class DensityValue:
    value: float
    method: str
    err: float = 0.0
    exact: Fraction | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.err < 0:
            raise ValueError("error bound must be nonnegative")

    def as_dict(self) -> dict:
        out = {"value": self.value, "method": self.method, "err": self.err}
        if self.exact is not None:
            out["exact"] = str(self.exact)
        out.update({k: v for k, v in self.meta.items() if _jsonable(v)})
        return out


def _jsonable(v):
    return isinstance(v, (int, float, str, bool, type(None), list, tuple, dict))


@dataclass(frozen=True)
class QuadratureSettings:
    abs_tol: float = 1e-8
    theta_cutoff_policy: str = "asymptotic"  # or "product-decay"
    max_subdivisions: int = 2_000_000

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise PreconditionError("abs_tol must be positive")
        if self.theta_cutoff_policy not in ("asymptotic", "product-decay"):
            raise PreconditionError(f"unknown cutoff policy {self.theta_cutoff_policy!r}")


# -- cube slices --------------------------------------------------------------------

@dataclass(frozen=True)
class SliceVolume:
    """Volume ``rational * sqrt(radicand)``."""

    rational: Fraction
    radicand: int

    @property
    def value(self) -> float:
        return float(self.rational) * math.sqrt(self.radicand)


def _signed_corner_sum(a: Sequence[int]) -> int:
    """sum_eps (-1)^|eps| ((sum a - 2 sum_eps a)_+)^(k-1), exactly."""
    k = len(a)
    sums = {0: 1}
    for ai in a:
        nxt = dict(sums)
        for t, c in sums.items():
            nxt[t + ai] = nxt.get(t + ai, 0) - c
        sums = {t: c for t, c in nxt.items() if c}
    total = sum(a)
    out = 0
    for t, c in sums.items():
        r = total - 2 * t
        if r > 0:
            out += c * r ** (k - 1)
    return out


def cube_slice_volume(w: Sequence[int]) -> SliceVolume:
    """(s-1)-volume of ``{x in [-1,1]^s : w.x = 0}`` for an integer vector ``w``."""
    w = as_vector(w)
    a = [abs(c) for c in w if c != 0]
    if not a:
        raise PreconditionError("w must be nonzero")
    zeros = len(w) - len(a)
    k = len(a)
    num = _signed_corner_sum(a) * 2**zeros
    den = math.factorial(k - 1) * math.prod(a)
    return SliceVolume(Fraction(num, den), sum(c * c for c in w))


def rho_infinity(y: Sequence[int]) -> DensityValue:
    """Real density of x in [-1,1]^s on the hyperplane sum y_i^2 x_i = 0.

    Equals V(w)/||w|| with w = y^2; this ratio is rational."""
    y = as_vector(y)
    if all(c == 0 for c in y):
        raise PreconditionError("y must be nonzero")
    v = cube_slice_volume([c * c for c in y])
    return DensityValue(float(v.rational), EXACT, 0.0, v.rational, {"y": list(y)})


def _corner_matrix(k: int) -> np.ndarray:
    return ((np.arange(1 << k)[:, None] >> np.arange(k)) & 1).astype(np.float64)


def rho_infinity_real(y: np.ndarray, rel_guard: float = 1e-9) -> tuple[np.ndarray, int]:
    """Vectorised rho_inf for real rows of ``y`` (all entries nonzero).

    Rows whose corner sum loses more than ``rel_guard`` of relative accuracy
    to cancellation are recomputed in exact rational arithmetic.  Returns the
    values and the number of rows that needed the exact path."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    a = y * y
    n, k = a.shape
    E = _corner_matrix(k)
    sign = np.where(E.sum(1) % 2 == 0, 1.0, -1.0)
    r = a.sum(1)[:, None] - 2.0 * (a @ E.T)
    terms = np.where(r > 0, r, 0.0) ** (k - 1) * sign
    num = terms.sum(1)
    mag = np.abs(terms).sum(1)
    den = math.factorial(k - 1) * np.prod(a, axis=1)
    out = num / den
    bad = ~(np.abs(num) > mag * (1 << k) * 2.2e-16 / rel_guard)
    idx = np.nonzero(bad)[0]
    for i in idx:
        # dyadic inputs: scale to integers, the density is homogeneous of degree -1
        fa = [Fraction(float(v)) for v in a[i]]
        scale = max(f.denominator for f in fa)
        ints = [int(f * scale) for f in fa]
        out[i] = float(Fraction(_signed_corner_sum(ints), math.factorial(k - 1) * math.prod(ints)) * scale)
    return out, int(idx.size)


def _exact_corner_density(a: list[Fraction]) -> Fraction:
    k = len(a)
    sums = {Fraction(0): 1}
    for ai in a:
        nxt = dict(sums)
        for t, c in sums.items():
            nxt[t + ai] = nxt.get(t + ai, 0) - c
        sums = {t: c for t, c in nxt.items() if c}
    total = sum(a)
    num = sum(c * (total - 2 * t) ** (k - 1) for t, c in sums.items() if total - 2 * t > 0)
    return num / (math.factorial(k - 1) * math.prod(a))


# -- Fejer kernel ----------------------------------------------------------------------

def fejer_kernel(u, delta: float):
    if not delta > 0:
        raise PreconditionError("delta must be positive")
    u = np.asarray(u, dtype=float)
    out = np.clip(delta - np.abs(u), 0.0, None) / delta**2
    return float(out) if out.ndim == 0 else out


def fejer_slice_oracle(w: Sequence[int], delta: float = 1e-3, n: int = 1_000_000,
                       seed: int = DEFAULT_SEED, chunk: int = 200_000) -> tuple[float, float]:
    """Monte Carlo estimate of V(w) as the integral of K(w.x/|w|; delta) over the cube.

    Returns ``(estimate, standard_error)``."""
    w = np.asarray(w, dtype=float)
    wn = w / np.linalg.norm(w)
    rng = np.random.default_rng(seed)
    s = w.size
    vol = 2.0**s
    acc, acc2, done = 0.0, 0.0, 0
    while done < n:
        m = min(chunk, n - done)
        x = rng.uniform(-1.0, 1.0, size=(m, s))
        kv = fejer_kernel(x @ wn, delta)
        acc += kv.sum()
        acc2 += (kv * kv).sum()
        done += m
    mean = acc / n
    var = max(acc2 / n - mean * mean, 0.0)
    return vol * mean, vol * math.sqrt(var / n)


# -- Fresnel integral --------------------------------------------------------------------

def fresnel_I(psi):
    """``int_{-1}^{1} e(psi u^2) du`` (vectorised)."""
    psi = np.asarray(psi, dtype=float)
    a = np.abs(psi)
    z = 2.0 * np.sqrt(a)
    S, C = special.fresnel(z)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = np.where(a > 0, (C + 1j * S) / np.sqrt(np.where(a > 0, a, 1.0)), 2.0 + 0j)
    val = np.where(psi < 0, np.conj(val), val)
    return complex(val) if val.ndim == 0 else val


def fresnel_leading(psi):
    """Leading asymptotic ``e^{i pi/4 sgn psi} (2|psi|)^{-1/2}`` of ``fresnel_I``."""
    psi = np.asarray(psi, dtype=float)
    return np.exp(0.25j * np.pi * np.sign(psi)) / np.sqrt(2.0 * np.abs(psi))


# |I(psi) - leading(psi)| <= 1/(pi |psi|) for all psi != 0 (integration by parts on the
# tail int_1^inf), and |leading| = (2|psi|)^(-1/2).  Products of such factors integrate in
# closed form, which drives the cutoff choice below.

def _tail_bound(alpha, beta, theta, leading_removed: bool) -> float:
    """Bound for 2 * int_Theta^inf |prod_j (lead_j + err_j) - [lead]| dtheta, where
    |lead_j| = alpha_j theta^-1/2 and |err_j| <= beta_j theta^-1."""
    s = len(alpha)
    poly = np.array([1.0])
    for a, b in zip(alpha, beta):
        poly = np.convolve(poly, [a, b])  # coefficient m <-> u^m beyond u^s
    total = 0.0
    for m, c in enumerate(poly):
        if m == 0 and leading_removed:
            continue
        p = (s + m) / 2.0
        total += c * theta ** (1.0 - p) / (p - 1.0)
    return 2.0 * total


def _choose_cutoff(alpha, beta, tol, leading_removed, theta_min=1.0):
    f = lambda t: _tail_bound(alpha, beta, t, leading_removed)
    hi = max(theta_min, 1.0)
    while f(hi) > tol:
        hi *= 2.0
        if hi > 1e12:
            return hi
    lo = hi / 2.0
    for _ in range(40):
        mid = math.sqrt(lo * hi)
        if f(mid) > tol:
            lo = mid
        else:
            hi = mid
    return hi


_GL = {n: np.polynomial.legendre.leggauss(n) for n in (8, 12, 16)}


def _panel_integral(fun, a, b, h, n=12, m=8):
    """Gauss-Legendre on equal panels; returns (high-order value, |high - low|)."""
    npan = max(1, math.ceil((b - a) / h))
    edges = np.linspace(a, b, npan + 1)
    res = []
    for nn in (n, m):
        x, w = _GL[nn]
        mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        nodes = (mid + half * x[None, :]).ravel()
        vals = fun(nodes).reshape(npan, nn)
        res.append(float(np.sum(vals * (half * w[None, :]))))
    return res[0], abs(res[0] - res[1]), npan


def _sigma_core(x: np.ndarray, settings: QuadratureSettings, strict: bool) -> DensityValue:
    s = x.size
    ax = np.abs(x)
    alpha = 1.0 / np.sqrt(2.0 * ax)
    beta = 1.0 / (np.pi * ax)
    removed = settings.theta_cutoff_policy == "asymptotic"
    theta = _choose_cutoff(alpha, beta, settings.abs_tol / 2.0, removed, 1.0 / ax.min())
    h = 1.0 / max(1.0, float(ax.sum()))
    capped = False
    if math.ceil(theta / h) > settings.max_subdivisions:
        if strict:
            raise ToleranceUnreachable(
                f"theta cutoff {theta:.3g} needs more than {settings.max_subdivisions} panels")
        theta = settings.max_subdivisions * h
        capped = True

    def integrand(t):
        vals = fresnel_I(np.multiply.outer(t, x))
        return np.prod(vals, axis=1).real

    body, qerr, npan = _panel_integral(integrand, 0.0, theta, h)
    value = 2.0 * body
    tail = 0.0
    if removed:
        A = complex(np.prod(fresnel_leading(x)))
        tail = 2.0 * (A * theta ** (1.0 - s / 2.0) / (s / 2.0 - 1.0)).real
    bound = _tail_bound(alpha, beta, theta, removed)
    err = 2.0 * qerr + bound
    return DensityValue(value + tail, QUADRATURE, err, None,
                        {"theta_cutoff": theta, "panels": npan, "tail_term": tail,
                         "tail_bound": bound, "capped": capped})


def sigma_infinity(x: Sequence[int], settings: QuadratureSettings | None = None,
                   strict: bool = True) -> DensityValue:
    """Singular integral ``int_R prod_j I(theta x_j) d theta`` of the diagonal form."""
    settings = settings or QuadratureSettings()
    xa = np.asarray([float(v) for v in x])
    if xa.size < 3:
        raise PreconditionError("sigma_infinity needs s >= 3 for convergence")
    if np.any(xa == 0):
        raise PreconditionError("sigma_infinity requires all x_j != 0")
    if np.all(xa > 0) or np.all(xa < 0):
        return DensityValue(0.0, EXACT, 0.0, Fraction(0), {"reason": "definite"})
    return _sigma_core(xa, settings, strict)


def sigma_slab_oracle(x: Sequence[int], delta: float, n: int = 2_000_000,
                      seed: int = DEFAULT_SEED, chunk: int = 250_000) -> tuple[float, float]:
    """vol{y in [-1,1]^s : |F(x;y)| < delta} / (2 delta) by plain Monte Carlo."""
    xa = np.asarray(x, dtype=float)
    rng = np.random.default_rng(seed)
    hits, done = 0, 0
    while done < n:
        m = min(chunk, n - done)
        y = rng.uniform(-1.0, 1.0, size=(m, xa.size))
        hits += int(np.count_nonzero(np.abs((y * y) @ xa) < delta))
        done += m
    p = hits / n
    scale = 2.0**xa.size / (2.0 * delta)
    return scale * p, scale * math.sqrt(p * (1 - p) / n)


# -- tau_infinity ----------------------------------------------------------------------------

def kernel_K(theta):
    """``K(theta) = int_{[-1,1]^2} e(theta x y^2) dx dy`` (real, even)."""
    t = np.asarray(theta, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        val = 4.0 * np.real(fresnel_I(t)) - 2.0 * np.sin(2 * np.pi * t) / (np.pi * t)
    return np.where(t == 0, 4.0, val)


def tau_reference(s: int, tol: float = 1e-9) -> DensityValue:
    """tau_inf = int_R K(theta)^s d theta, a one-dimensional reference value.

    K(theta) = 2 theta^-1/2 + O(1/theta) with |remainder| <= 6/(pi theta)."""
    if s < 3:
        raise PreconditionError("s must be at least 3")
    alpha = np.full(s, 2.0)
    beta = np.full(s, 6.0 / np.pi)
    theta = _choose_cutoff(alpha, beta, tol / 2.0, True, 10.0)
    body, qerr, npan = _panel_integral(lambda t: kernel_K(t) ** s, 0.0, theta, 0.25, 16, 12)
    tail = 2.0 * 2.0**s * theta ** (1.0 - s / 2.0) / (s / 2.0 - 1.0)
    bound = _tail_bound(alpha, beta, theta, True)
    return DensityValue(2.0 * body + tail, QUADRATURE, 2.0 * qerr + bound, None,
                        {"theta_cutoff": theta, "panels": npan, "route": "theta-kernel"})


def _replicate_mean(estimates):
    est = np.asarray(estimates, dtype=float)
    mean = float(est.mean())
    se = float(est.std(ddof=1) / math.sqrt(est.size)) if est.size > 1 else float("inf")
    return mean, se


def _sobol_streams(d, seed, replicates):
    seqs = np.random.SeedSequence(seed).spawn(replicates)
    return [qmc.Sobol(d, scramble=True, seed=np.random.default_rng(sq)) for sq in seqs]


def tau_rho_side(s: int, m: int = 16, replicates: int = 16, seed: int = DEFAULT_SEED,
                 chunk: int = 1 << 14) -> DensityValue:
    """tau_inf = int_{[-1,1]^s} rho_inf(y) dy by randomised Sobol points (2^m per replicate)."""
    ests, exact_rows = [], 0
    for eng in _sobol_streams(s, seed, replicates):
        pts = eng.random_base2(m)
        pts = np.where(pts == 0.0, 2.0**-60, pts)
        vals = []
        for i in range(0, pts.shape[0], chunk):
            v, nex = rho_infinity_real(pts[i:i + chunk])
            vals.append(v)
            exact_rows += nex
        ests.append(2.0**s * math.fsum(np.concatenate(vals)) / pts.shape[0])
    mean, se = _replicate_mean(ests)
    return DensityValue(mean, MONTE_CARLO, se, None,
                        {"route": "rho", "points": replicates << m, "replicates": replicates,
                         "seed": seed, "exact_rows": exact_rows})


def _sigma_batch(points, signs, settings):
    out = np.empty(points.shape[0])
    err = np.empty(points.shape[0])
    for i, p in enumerate(points):
        dv = _sigma_core(p * signs, settings, strict=False)
        out[i], err[i] = dv.value, dv.err
    return out, err


def tau_sigma_side(s: int, m: int = 10, replicates: int = 8, seed: int = DEFAULT_SEED,
                   settings: QuadratureSettings | None = None, workers: int = 1) -> DensityValue:
    """tau_inf = int_{[-1,1]^s} sigma_inf(x) dx, stratified by the number of
    negative coordinates (definite sign patterns contribute exactly 0)."""
    settings = settings or QuadratureSettings(abs_tol=1e-3, max_subdivisions=200_000)
    total, var, qerr = 0.0, 0.0, 0.0
    strata = []
    for neg in range(1, s):
        if neg > s - neg:
            break
        mult = math.comb(s, neg) * (2 if neg < s - neg else 1)
        strata.append((neg, mult))
    jobs = []
    for idx, (neg, mult) in enumerate(strata):
        signs = np.array([-1.0] * neg + [1.0] * (s - neg))
        for r, eng in enumerate(_sobol_streams(s, seed + 7919 * (idx + 1), replicates)):
            pts = eng.random_base2(m)
            pts = np.where(pts == 0.0, 2.0**-30, pts)
            jobs.append((idx, pts, signs))
    results = _map(lambda job: _sigma_batch(job[1], job[2], settings), jobs, workers)
    per = {i: [] for i in range(len(strata))}
    for (idx, pts, _), (vals, errs) in zip(jobs, results):
        per[idx].append(math.fsum(vals) / vals.size)
        qerr = max(qerr, float(errs.mean()))
    for idx, (neg, mult) in enumerate(strata):
        mean, se = _replicate_mean(per[idx])
        total += mult * mean
        var += (mult * se) ** 2
    err = math.sqrt(var) + 2.0**s * qerr
    return DensityValue(total, MONTE_CARLO, err, None,
                        {"route": "sigma", "points": len(jobs) << m, "replicates": replicates,
                         "seed": seed, "quadrature_err": qerr})


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def tau_infinity(s: int, settings: QuadratureSettings | None = None, seed: int = DEFAULT_SEED,
                 rho_m: int = 14, sigma_m: int = 10, replicates: int = 8,
                 workers: int = 1) -> dict:
    """Both Monte Carlo routes for tau_inf plus the one-dimensional reference."""
    if s < 5:
        raise PreconditionError("tau_infinity needs s >= 5")
    a = tau_sigma_side(s, sigma_m, replicates, seed, settings, workers)
    b = tau_rho_side(s, rho_m, 2 * replicates, seed)
    ref = tau_reference(s)
    return {"sigma": a, "rho": b, "reference": ref}


# -- J integrals --------------------------------------------------------------------------------

def _face_points(u: np.ndarray, s: int):
    """Map uniform points of [0,1]^s to the unit sup-sphere: u[:,0] selects the
    face (coordinate and sign), the rest fill it uniformly."""
    face = np.minimum((u[:, 0] * 2 * s).astype(int), 2 * s - 1)
    coord, sign = face // 2, np.where(face % 2 == 0, 1.0, -1.0)
    rest = 2.0 * u[:, 1:] - 1.0
    pts = np.empty((u.shape[0], s))
    for i in range(u.shape[0]):
        c = coord[i]
        pts[i, :c] = rest[i, :c]
        pts[i, c] = sign[i]
        pts[i, c + 1:] = rest[i, c:]
    return pts


def j_integrals(s: int, B: float, k: float = 1.0, side: str = "J2", tau: float | None = None,
                eta: float | None = None, m: int = 12, replicates: int = 8,
                seed: int = DEFAULT_SEED, settings: QuadratureSettings | None = None) -> DensityValue:
    """Shell integrals of rho_inf(y)/|y|^(s-2) (``J2``) or sigma_inf(x)/|x|^(s-1) (``J1``).

    Radii are sampled log-uniformly and directions uniformly on the sup-sphere.
    ``meta['ratio']`` compares with the closed form built from ``tau``."""
    if side not in ("J1", "J2"):
        raise PreconditionError("side must be J1 or J2")
    if side == "J2":
        r0, r1 = 1.0, B ** (1.0 / (s + 2)) / k
        deg = s - 2
    else:
        eta = 1.0 / (2 * s**4) if eta is None else eta
        r0, r1 = B ** (3 * s * eta) / k, B ** (4.0 / ((s + 2) * (s - 1))) / k
        deg = s - 1
    if r1 < r0 * (1 - 1e-12):
        raise PreconditionError("empty shell")
    L = math.log(r1 / r0) if r1 > r0 else 0.0
    settings = settings or QuadratureSettings(abs_tol=1e-5, max_subdivisions=200_000)
    ests = []
    for eng in _sobol_streams(s + 1, seed, replicates):
        u = eng.random_base2(m)
        u = np.clip(u, 2.0**-40, 1 - 2.0**-40)
        radii = r0 * np.exp(L * u[:, 0])
        dirs = _face_points(u[:, 1:], s)
        y = dirs * radii[:, None]
        if side == "J2":
            g, _ = rho_infinity_real(y)
        else:
            g = np.array([_sigma_core(row, settings, strict=False).value for row in y])
        sup = np.max(np.abs(y), axis=1)
        jac = radii * L * 2 * s * (2 * radii) ** (s - 1)
        ests.append(math.fsum(g / sup**deg * jac) / y.shape[0])
    mean, se = _replicate_mean(ests) if L > 0 else (0.0, 0.0)
    meta = {"side": side, "s": s, "B": B, "k": k, "r0": r0, "r1": r1, "log_length": L}
    if tau is not None:
        closed = (deg * tau * L)
        meta["closed_form"] = closed
        meta["ratio"] = mean / closed if closed else float("nan")
    return DensityValue(mean, MONTE_CARLO, se, None, meta)
