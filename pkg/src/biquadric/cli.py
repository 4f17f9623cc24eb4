"""Command-line front end.

Every computation is a two-level subcommand (``count m3``, ``arith psi`` ...).
Results go to ``--out`` (default stdout) as JSON or CSV.  JSON documents carry
``schema_version``, the resolved parameters under ``meta`` and a list of
``rows``; CSV has one header line whose first column is ``schema_version``
followed by the row keys in first-seen order.

Exit codes: 0 success, 2 precondition violation, 3 budget exhausted,
64 usage error.
"""
from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from fractions import Fraction
from typing import Callable

from . import arithmetic_densities as ad
from . import counting_harness as ch
from . import exponential_sums as es
from . import lattice_geometry as lg
from . import real_densities as rd
from . import sumsets
from .core_forms import as_vector, parse_exact_number
from .errors import BudgetExceeded, PreconditionError

EX_OK, EX_PRECONDITION, EX_BUDGET, EX_USAGE = 0, 2, 3, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


# -- run configuration ------------------------------------------------------------------

@dataclasses.dataclass
class RunConfig:
    s: int | None = None
    tol: float | None = None
    seed: int = rd.DEFAULT_SEED
    time_budget: float | None = None
    memory_budget: int = sumsets.TABLE_LIMIT * 8
    q_cap: int = ad.Q_CAP
    p_cap: int | None = None
    out: str = "-"
    format: str = "json"
    threads: int = 1
    timings: bool = False
    dry_run: bool = False
    params: dict = dataclasses.field(default_factory=dict)

    def public(self) -> dict:
        """Parameters that determine the output (thread count excluded)."""
        d = {"s": self.s, "tol": self.tol, "seed": self.seed, "q_cap": self.q_cap,
             "p_cap": self.p_cap, "memory_budget": self.memory_budget}
        d.update(self.params)
        return {k: _plain(v) for k, v in d.items() if v is not None}


def _plain(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else str(v)
    if isinstance(v, tuple):
        return list(v)
    return v


def read_config_file(path: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys use flag spelling
    with or without leading dashes."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key = value")
            k, v = (t.strip() for t in line.split("=", 1))
            out[k.lstrip("-").replace("-", "_")] = v
    return out


def _threads_default() -> int:
    env = os.environ.get("BIQUADRIC_THREADS", "1").strip().lower()
    if env in ("auto", "0"):
        return os.cpu_count() or 1
    try:
        return max(1, int(env))
    except ValueError:
        raise UsageError(f"BIQUADRIC_THREADS must be an integer or 'auto', got {env!r}")


# -- value parsers ------------------------------------------------------------------------

def int_vector(text: str) -> tuple:
    try:
        return tuple(int(t) for t in str(text).split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def exact_int(text: str) -> int:
    """Integer, possibly written in scientific notation (``1e5``)."""
    v = parse_exact_number(str(text))
    if isinstance(v, Fraction):
        if v.denominator != 1:
            raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
        v = int(v)
    return int(v)


def exact_number(text: str):
    v = parse_exact_number(str(text))
    if isinstance(v, Fraction) and v.denominator == 1:
        return int(v)
    return v


def number_list(text: str) -> tuple:
    return tuple(exact_int(t) for t in str(text).split(",") if t.strip())


def threads_arg(text: str) -> int:
    if str(text).lower() == "auto":
        return os.cpu_count() or 1
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be positive")
    return n


# flag name -> argparse keywords; leaves pick the subset they use
FLAGS: dict[str, dict] = {
    "s": dict(type=int, help="number of variables"),
    "x": dict(type=int_vector, help="coefficient vector, e.g. 1,1,-1"),
    "y": dict(type=int_vector, help="vector y, e.g. 1,2,3"),
    "w": dict(type=int_vector, help="hyperplane normal"),
    "p": dict(type=exact_int, dest="P", help="box size P"),
    "r": dict(type=exact_number, dest="R", help="box size R"),
    "B": dict(type=exact_number, help="height bound (scientific notation allowed)"),
    "B-grid": dict(type=number_list, dest="B_grid", help="comma-separated height bounds"),
    "X": dict(type=exact_int, help="dyadic window start for |x|"),
    "Y": dict(type=exact_int, help="dyadic window start for |y|"),
    "q": dict(type=exact_int, help="modulus"),
    "a": dict(type=int, help="numerator a"),
    "Q": dict(type=exact_int, help="force the truncation point"),
    "n": dict(type=int, help="argument of zeta / corpus size"),
    "prime": dict(type=int, help="prime p"),
    "l": dict(type=str, default=None, help="level l, or 'closed'"),
    "split": dict(type=int, help="split point Y0 for the global count"),
    "c": dict(type=float, help="leading constant (default: computed)"),
    "eta": dict(type=float, help="arc parameter eta"),
    "alpha": dict(type=str, help="alpha as a fraction (3/7) or decimal"),
    "xj": dict(type=int, help="single coefficient x_j"),
    "grid": dict(type=int, help="alpha-grid size for the quadrature"),
    "method": dict(type=str, help="evaluation route"),
    "mode": dict(type=str, choices=("brute", "closed", "both"), help="psi evaluation mode"),
    "primitive": dict(action="store_const", const=True, help="count primitive vectors only"),
    "nondegenerate": dict(action="store_const", const=True, help="restrict to Delta(x) != 0"),
    "sigma-m": dict(type=int, dest="sigma_m", help="log2 points per sigma-side replicate"),
    "rho-m": dict(type=int, dest="rho_m", help="log2 points per rho-side replicate"),
    "replicates": dict(type=int, help="randomised replicates"),
    "policy": dict(type=str, choices=("asymptotic", "product-decay"), help="theta cutoff policy"),
    "prime-cutoff": dict(type=exact_int, dest="prime_cutoff", help="truncation of the Euler product"),
}


def _flag_dest(name: str) -> str:
    return FLAGS[name].get("dest", name.replace("-", "_"))


# -- handlers -----------------------------------------------------------------------------

def _need(cfg: RunConfig, *names):
    missing = [n for n in names if cfg.params.get(n) is None and getattr(cfg, n, None) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m for m in missing))


def _p(cfg: RunConfig, name, default=None):
    v = cfg.params.get(name)
    return default if v is None else v


def _check_P(cfg: RunConfig, P):
    if cfg.p_cap is not None and P > cfg.p_cap:
        raise BudgetExceeded(f"box size {P} exceeds the P cap {cfg.p_cap}", feasible=cfg.p_cap)


def _check_columns(cfg: RunConfig, columns):
    est = sumsets.table_estimate(columns) * 8
    if est > cfg.memory_budget:
        raise BudgetExceeded(f"histogram needs about {est} bytes, budget {cfg.memory_budget}")


def _settings(cfg: RunConfig, default_tol=1e-8):
    return rd.QuadratureSettings(abs_tol=cfg.tol or default_tol,
                                 theta_cutoff_policy=_p(cfg, "policy", "asymptotic"))


def _count_rec(rec: ch.CountRecord, cfg):
    return [rec.as_dict(cfg.timings)]


def _timed(counter, params, fn):
    import time

    t0 = time.perf_counter()
    v = fn()
    return ch.CountRecord(counter, params, v, time.perf_counter() - t0)


def h_count_box(kind):
    def run(cfg):
        if kind in ("M1", "M2"):
            _need(cfg, "y", "R")
            y, R = as_vector(cfg.params["y"]), cfg.params["R"]
            _check_P(cfg, math.floor(R))
            fn = ch.count_M1 if kind == "M1" else ch.count_M2
            return _count_rec(_timed(kind, {"y": list(y), "R": _plain(R)}, lambda: fn(y, R)), cfg)
        _need(cfg, "x", "P")
        x, P = as_vector(cfg.params["x"]), cfg.params["P"]
        _check_P(cfg, P)
        _check_columns(cfg, [sumsets.square_column(c, P, False) for c in x])
        fn = ch.count_M3 if kind == "M3" else ch.count_M4
        return _count_rec(_timed(kind, {"x": list(x), "P": P}, lambda: fn(x, P)), cfg)

    return run


def est_count_box(kind):
    def est(cfg):
        if kind in ("M1", "M2"):
            y = cfg.params.get("y") or ()
            R = cfg.params.get("R") or 0
            cols = [sumsets.linear_column(c * c, math.floor(R), False) for c in y if c]
        else:
            x = cfg.params.get("x") or ()
            cols = [sumsets.square_column(c, cfg.params.get("P") or 0, False) for c in x]
        cols = [c for c in cols if c is not None]
        return {"histogram_entries": sumsets.table_estimate(cols) if cols else 0,
                "tuples": sumsets.total_tuples(cols) if cols else 0}

    return est


def h_count_global(cfg):
    _need(cfg, "s", "B")
    rec = ch.count_global(cfg.s, cfg.params["B"], _p(cfg, "split"), workers=cfg.threads)
    return _count_rec(rec, cfg)


def est_count_global(cfg):
    _need(cfg, "s", "B")
    return ch.estimate_global_cost(cfg.s, cfg.params["B"], _p(cfg, "split"))


def h_count_N(kind):
    def run(cfg):
        s, B = cfg.s, cfg.params.get("B")
        if kind in ("N1", "N2"):
            _need(cfg, "s", "Y", "B")
            Y = cfg.params["Y"]
            if kind == "N1":
                fn = lambda: ch.count_N1(s, Y, B, primitive_x=bool(_p(cfg, "primitive", False)))
            else:
                fn = lambda: ch.count_N2(s, Y, B)
            params = {"s": s, "Y": Y, "B": _plain(B)}
        else:
            _need(cfg, "s", "X", "B")
            X = cfg.params["X"]
            nd = bool(_p(cfg, "nondegenerate", False))
            if kind == "N3":
                fn = lambda: ch.count_N3(s, X, B, primitive_y=bool(_p(cfg, "primitive", False)),
                                         nondegenerate_only=nd)
            else:
                fn = lambda: ch.count_N4(s, X, B, nondegenerate_only=nd)
            params = {"s": s, "X": X, "B": _plain(B), "nondegenerate_only": nd}
        return _count_rec(_timed(kind, params, fn), cfg)

    return run


def _peyre_c(cfg, s):
    if cfg.params.get("c") is not None:
        return cfg.params["c"]
    return ad.peyre_constant(s, rd.tau_reference(s)).direct


def h_predict_m1(cfg):
    _need(cfg, "y", "R")
    return [ch.predict_M1(cfg.params["y"], cfg.params["R"]).as_dict()]


def h_predict_m3(cfg):
    _need(cfg, "x", "P")
    rec = ch.predict_M3(cfg.params["x"], cfg.params["P"], eta=_p(cfg, "eta", 0.05),
                        settings=_settings(cfg), tol=1e-6)
    return [rec.as_dict()]


def h_predict_global(cfg):
    _need(cfg, "s", "B")
    s, B = cfg.s, cfg.params["B"]
    c = _peyre_c(cfg, s)
    Bf = float(B)
    rec = ch.PredictionRecord("global", {"s": s, "B": _plain(B)}, c * Bf * math.log(Bf), 0.0,
                              {"peyre": c, "tau_route": "reference" if cfg.params.get("c") is None else "given"})
    return [rec.as_dict()]


def h_const_tau(cfg):
    _need(cfg, "s")
    res = rd.tau_infinity(cfg.s, seed=cfg.seed, rho_m=_p(cfg, "rho_m", 14),
                          sigma_m=_p(cfg, "sigma_m", 10), replicates=_p(cfg, "replicates", 8),
                          workers=cfg.threads)
    return [{"route": k, **v.as_dict()} for k, v in res.items()]


def h_const_zeta(cfg):
    n = _p(cfg, "n", cfg.s)
    if n is None:
        raise UsageError("missing --n")
    return [{"n": n, "zeta": ad.zeta(n, cfg.tol or 1e-15)}]


def h_const_sigma_p(cfg):
    _need(cfg, "s", "prime")
    l = _p(cfg, "l", "closed")
    l = l if l == "closed" else int(l)
    d = ad.local_density(cfg.params["prime"], cfg.s, l)
    return [_dc(d)]


def _dc(obj) -> dict:
    out = {}
    for k, v in dataclasses.asdict(obj).items():
        out[k] = str(v) if isinstance(v, Fraction) else v
    return out


def h_const_peyre(cfg):
    _need(cfg, "s")
    tau = rd.tau_reference(cfg.s)
    res = ad.peyre_constant(cfg.s, tau, _p(cfg, "prime_cutoff", 10**4))
    return [{"c_peyre": res.direct, **res.as_dict(), "tau_route": "reference", "tau_err": tau.err}]


def h_density_rho(cfg):
    _need(cfg, "y")
    return [rd.rho_infinity(cfg.params["y"]).as_dict()]


def h_density_sigma(cfg):
    _need(cfg, "x")
    return [{"x": list(cfg.params["x"]), **rd.sigma_infinity(cfg.params["x"], _settings(cfg)).as_dict()}]


def h_density_slice(cfg):
    _need(cfg, "w")
    v = rd.cube_slice_volume(cfg.params["w"])
    return [{"w": list(cfg.params["w"]), "rational": str(v.rational), "radicand": v.radicand,
             "value": v.value}]


def h_arith_gauss(cfg):
    _need(cfg, "x", "q")
    x, q = cfg.params["x"], cfg.params["q"]
    if len(x) != 1:
        raise PreconditionError("gauss takes a single coefficient --x")
    a_list = [cfg.params["a"]] if cfg.params.get("a") is not None else [a for a in range(q) if math.gcd(a, q) == 1]
    rows = []
    for a in a_list:
        g = ad.gauss_sum(x[0], a, q)
        rows.append({"x": x[0], "a": a, "q": q, "re": g.real, "im": g.imag, "abs2": abs(g) ** 2,
                     "q_gcd": q * math.gcd(q, x[0])})
    return rows


def h_arith_sq(cfg):
    _need(cfg, "x", "q")
    method = _p(cfg, "method", "factorized")
    v = ad.complete_sum_Sq(cfg.params["x"], cfg.params["q"], method)
    return [{"x": list(cfg.params["x"]), "q": cfg.params["q"], "method": method, "re": v.real, "im": v.imag}]


def h_arith_ss(cfg):
    _need(cfg, "x")
    res = ad.singular_series(cfg.params["x"], cfg.tol or 1e-6, q_max=cfg.q_cap, Q=_p(cfg, "Q"))
    return [{"x": list(res.x), "value": res.value, "Q": res.Q, "tail_bound": res.tail_bound}]


def h_arith_psi(cfg):
    _need(cfg, "q", "s")
    mode = _p(cfg, "mode", "brute")
    q, s = cfg.params["q"], cfg.s
    row = {"q": q, "s": s}
    if mode in ("brute", "both"):
        row["brute"] = ad.psi(q, s, "brute")
    if mode in ("closed", "both"):
        row["closed"] = ad.psi(q, s, "closed")
    return [row]


def h_arith_euler(cfg):
    _need(cfg, "s")
    res = ad.euler_product_psi(cfg.s, cfg.tol or 1e-12)
    ref = ad.zeta(cfg.s - 2) / ad.zeta(cfg.s - 1)
    return [{"s": cfg.s, **res, "zeta_ratio": ref, "difference": res["value"] - ref}]


def _alpha(text):
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse alpha {text!r}")


def h_sums_weyl(cfg):
    if cfg.params.get("alpha") is not None:
        _need(cfg, "xj", "P")
        a = _alpha(cfg.params["alpha"])
        T = es.weyl_sum(a, cfg.params["xj"], cfg.params["P"])
        return [{"alpha": str(a), "xj": cfg.params["xj"], "P": cfg.params["P"], "re": T.real,
                 "im": T.imag, "abs": abs(T)}]
    mon = es.weyl_bound_monitor(seed=cfg.seed)
    return [{**r, "slope": mon["slope"], "exponent_violation": mon["exponent_violation"],
             "orientation_holds": mon["orientation_holds"]} for r in mon["rows"]]


def h_sums_hua(cfg):
    _need(cfg, "P")
    xj = _p(cfg, "xj", 1)
    P = cfg.params["P"]
    row = {"xj": xj, "P": P, "moment": es.hua_fourth_moment(xj, P)}
    if cfg.params.get("grid"):
        row["quadrature"] = es.hua_quadrature(xj, P, cfg.params["grid"])
    return [row]


def h_sums_arcs(cfg):
    eta = _p(cfg, "eta", es.DEFAULT_ETA)
    if cfg.params.get("alpha") is not None:
        _need(cfg, "x", "P")
        lab = es.classify_arc(_alpha(cfg.params["alpha"]), cfg.params["x"], cfg.params["P"], eta)
        return [{"alpha": cfg.params["alpha"], **dataclasses.asdict(lab)}]
    res = es.major_arc_corpus(n=_p(cfg, "n", 500), s=cfg.s or 7, eta=eta, seed=cfg.seed % 2**32)
    return [res]


def h_verify_lemma22(cfg):
    _need(cfg, "y", "R")
    rep = ch.verify_lemma22(cfg.params["y"], cfg.params["R"])
    return [{"y": list(cfg.params["y"]), "R": _plain(cfg.params["R"]), **{k: _plain(v) for k, v in rep.items()}}]


def h_verify_appendix(cfg):
    _need(cfg, "y", "R")
    y = as_vector(cfg.params["y"])
    lat = lg.solution_lattice(y)
    mp = lg.successive_minima(lat)
    R = cfg.params["R"]
    return [{"y": list(y), "R": _plain(R), "det2": lat.det2, "minima": list(mp.minima),
             "minima_exact": mp.exact, "envelope": lg.schmidt_envelope(float(R), mp.minima),
             "minkowski_product": math.prod(mp.minima) / math.sqrt(lat.det2)}]


def h_verify_hl(cfg):
    _need(cfg, "x", "P")
    x, P = as_vector(cfg.params["x"]), cfg.params["P"]
    pred = ch.predict_M3(x, P, settings=_settings(cfg), tol=1e-6)
    m = ch.count_M3(x, P)
    main = pred.constituents.get("sigma_inf", 0.0) * P ** (len(x) - 2) * pred.constituents.get(
        "singular_series", pred.constituents["singular_series_trunc"])
    return [{"x": list(x), "P": P, "count": m, "main_term_truncated": pred.main_term,
             "main_term_full": main, "ratio": m / main if main else None,
             "error_envelope": pred.error_envelope}]


def h_verify_lemma41(cfg):
    _need(cfg, "s", "Y", "B")
    return [ch.verify_lemma41(cfg.s, cfg.params["Y"], cfg.params["B"])]


def h_verify_lemma44(cfg):
    _need(cfg, "s", "X", "B")
    return [ch.verify_lemma44(cfg.s, cfg.params["X"], cfg.params["B"], settings=_settings(cfg, 1e-6))]


def h_verify_psi(cfg):
    _need(cfg, "q", "s")
    q, s = cfg.params["q"], cfg.s
    b, c = ad.psi(q, s, "brute"), ad.psi(q, s, "closed")
    return [{"q": q, "s": s, "brute": b, "closed": c, "equal": b == c}]


def h_verify_gauss(cfg):
    _need(cfg, "q", "x")
    q, x = cfg.params["q"], cfg.params["x"]
    worst = 0.0
    n = 0
    for xj in x:
        for a in range(q):
            if math.gcd(a, q) != 1:
                continue
            g = ad.gauss_sum(xj, a, q)
            worst = max(worst, abs(abs(g) ** 2 - q * math.gcd(q, xj)))
            n += 1
    return [{"q": q, "x": list(x), "checked": n, "max_abs_deviation": worst}]


def h_verify_tau(cfg):
    _need(cfg, "s")
    tol = cfg.tol or 0.01
    res = rd.tau_infinity(cfg.s, seed=cfg.seed, rho_m=_p(cfg, "rho_m", 14),
                          sigma_m=_p(cfg, "sigma_m", 10), replicates=_p(cfg, "replicates", 8),
                          workers=cfg.threads)
    a, b = res["sigma"], res["rho"]
    rel = abs(a.value - b.value) / abs(b.value)
    overlap = abs(a.value - b.value) <= 2.0 * (a.err + b.err)
    return [{"s": cfg.s, "sigma_side": a.value, "sigma_err": a.err, "rho_side": b.value,
             "rho_err": b.err, "reference": res["reference"].value, "relative_difference": rel,
             "tol": tol, "error_bars_overlap": overlap, "agree": rel <= tol and overlap}]


def h_report(cfg):
    _need(cfg, "s", "B_grid")
    c = _peyre_c(cfg, cfg.s)
    return ch.asymptotic_report(cfg.s, cfg.params["B_grid"], c, workers=cfg.threads)


def est_report(cfg):
    _need(cfg, "s", "B_grid")
    return {"per_B": [{"B": _plain(B), **ch.estimate_global_cost(cfg.s, B)} for B in cfg.params["B_grid"]]}


# (group, leaf) -> (handler, flags, estimator, help)
Leaf = tuple[Callable, tuple, Callable | None, str]
COMMANDS: dict[str, dict[str, Leaf]] = {
    "count": {
        "global": (h_count_global, ("s", "B", "split"), est_count_global, "projective count N(B)"),
        "m1": (h_count_box("M1"), ("y", "r"), est_count_box("M1"), "x in the box with sum x_i y_i^2 = 0"),
        "m2": (h_count_box("M2"), ("y", "r"), est_count_box("M2"), "primitive variant of m1"),
        "m3": (h_count_box("M3"), ("x", "p"), est_count_box("M3"), "y in the box with sum x_i y_i^2 = 0"),
        "m4": (h_count_box("M4"), ("x", "p"), est_count_box("M4"), "primitive variant of m3"),
        "n1": (h_count_N("N1"), ("s", "Y", "B", "primitive"), None, "dyadic y-window count"),
        "n2": (h_count_N("N2"), ("s", "Y", "B"), None, "dyadic y-window count, primitive x"),
        "n3": (h_count_N("N3"), ("s", "X", "B", "primitive", "nondegenerate"), None, "dyadic x-window count"),
        "n4": (h_count_N("N4"), ("s", "X", "B", "nondegenerate"), None, "dyadic x-window count, primitive y"),
    },
    "predict": {
        "m1": (h_predict_m1, ("y", "r"), None, "rho_inf(y) R^(s-1) with the lattice envelope"),
        "m3": (h_predict_m3, ("x", "p", "eta", "policy"), None, "P^(s-2) sigma_inf S with E1-E3"),
        "global": (h_predict_global, ("s", "B", "c"), None, "c B log B"),
    },
    "constants": {
        "tau": (h_const_tau, ("s", "sigma-m", "rho-m", "replicates"), None, "tau_inf by both routes"),
        "zeta": (h_const_zeta, ("s", "n"), None, "zeta(n)"),
        "sigma-p": (h_const_sigma_p, ("s", "prime", "l"), None, "local density at p"),
        "peyre": (h_const_peyre, ("s", "prime-cutoff"), None, "leading constant with breakdown"),
    },
    "density": {
        "rho": (h_density_rho, ("y",), None, "rho_inf(y), exact"),
        "sigma": (h_density_sigma, ("x", "policy"), None, "sigma_inf(x) by theta quadrature"),
        "slice": (h_density_slice, ("w",), None, "volume of a central cube slice"),
    },
    "arith": {
        "gauss": (h_arith_gauss, ("x", "a", "q"), None, "quadratic Gauss sums"),
        "sq": (h_arith_sq, ("x", "q", "method"), None, "complete sum S_q(x)"),
        "singular-series": (h_arith_ss, ("x", "Q"), None, "singular series with tail bound"),
        "psi": (h_arith_psi, ("q", "s", "mode"), None, "psi(q)"),
        "euler-product": (h_arith_euler, ("s",), None, "sum q^-2s psi(q) ... vs zeta ratio"),
    },
    "sums": {
        "weyl": (h_sums_weyl, ("alpha", "xj", "p"), None, "Weyl sum, or the bound monitor without --alpha"),
        "hua": (h_sums_hua, ("xj", "p", "grid"), None, "fourth moment"),
        "arcs": (h_sums_arcs, ("alpha", "x", "p", "eta", "n", "s"), None, "arc label, or the residual corpus"),
    },
    "verify": {
        "lemma22": (h_verify_lemma22, ("y", "r"), None, "lattice count vs rho_inf R^(s-1)"),
        "hl": (h_verify_hl, ("x", "p", "policy"), None, "count_M3 vs predicted main term"),
        "lemma41": (h_verify_lemma41, ("s", "Y", "B"), None, "N2 window vs density sum"),
        "lemma44": (h_verify_lemma44, ("s", "X", "B"), None, "N4 window vs density sum"),
        "appendixA": (h_verify_appendix, ("y", "r"), None, "successive minima and envelope"),
        "psi": (h_verify_psi, ("q", "s"), None, "brute-force psi vs closed form"),
        "gauss": (h_verify_gauss, ("q", "x"), None, "|S|^2 = q (q, x) for all units a"),
        "tau-crosscheck": (h_verify_tau, ("s", "sigma-m", "rho-m", "replicates"), None,
                           "sigma-side vs rho-side tau_inf"),
    },
    "report": {
        "asymptotic": (h_report, ("s", "B-grid", "c"), est_report, "ratio N / (c B log B) over a grid"),
    },
}

CSV_HELP = ("CSV output: header 'schema_version' then the row keys in first-seen order; "
            "vectors are space-separated.  JSON output: {schema_version, meta, rows}.")


def _common_parent() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    g = p.add_argument_group("run configuration")
    g.add_argument("--s", type=int, help="number of variables")
    g.add_argument("--config", help="key = value file; command-line flags take precedence")
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--format", choices=("json", "csv"))
    g.add_argument("--seed", type=int, help="64-bit seed for every random stream")
    g.add_argument("--threads", type=threads_arg, help="worker count or 'auto' (env BIQUADRIC_THREADS)")
    g.add_argument("--tol", type=float, help="target tolerance")
    g.add_argument("--time-budget", dest="time_budget", type=float, help="seconds (reported in dry runs)")
    g.add_argument("--memory-budget", dest="memory_budget", type=exact_int, help="bytes for histogram tables")
    g.add_argument("--q-cap", dest="q_cap", type=exact_int, help="largest modulus for series truncation")
    g.add_argument("--p-cap", dest="p_cap", type=exact_int, help="largest box size accepted")
    g.add_argument("--timings", action="store_const", const=True, help="include elapsed_s (breaks byte-identity)")
    g.add_argument("--dry-run", dest="dry_run", action="store_const", const=True,
                   help="print resolved parameters and cost estimate, compute nothing")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="biquadric", description=__doc__.split("\n\n")[0], epilog=CSV_HELP)
    parent = _common_parent()
    groups = parser.add_subparsers(dest="group", metavar="group", required=True)
    for gname, leaves in COMMANDS.items():
        gp = groups.add_parser(gname, help=f"{gname} commands")
        sub = gp.add_subparsers(dest="leaf", metavar="command", required=True)
        for lname, (_, flags, _, hlp) in leaves.items():
            lp = sub.add_parser(lname, help=hlp, parents=[parent], epilog=CSV_HELP)
            for f in flags:
                if f == "s":
                    continue
                kw = dict(FLAGS[f])
                kw.setdefault("default", None)
                lp.add_argument("--" + f, **kw)
    return parser


_CONFIG_KEYS = {"s", "tol", "seed", "time_budget", "memory_budget", "q_cap", "p_cap", "out",
                "format", "threads", "timings", "dry_run"}


def resolve_config(ns: argparse.Namespace, flags: tuple) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    cfg = RunConfig(threads=_threads_default())
    file_vals = read_config_file(ns.config) if getattr(ns, "config", None) else {}
    converters = {"s": int, "tol": float, "seed": int, "time_budget": float,
                  "memory_budget": exact_int, "q_cap": exact_int, "p_cap": exact_int, "out": str,
                  "format": str, "threads": threads_arg,
                  "timings": lambda v: str(v).lower() in ("1", "true", "yes"),
                  "dry_run": lambda v: str(v).lower() in ("1", "true", "yes")}
    leaf_dests = {_flag_dest(f): f for f in flags}
    for k, v in file_vals.items():
        if k in converters:
            setattr(cfg, k, converters[k](v))
        elif k in leaf_dests or k in {f.replace("-", "_") for f in flags}:
            flag = leaf_dests.get(k, k.replace("_", "-"))
            spec = FLAGS[flag]
            if "type" in spec:
                cfg.params[_flag_dest(flag)] = spec["type"](v)
            else:
                cfg.params[_flag_dest(flag)] = str(v).lower() in ("1", "true", "yes")
        else:
            raise UsageError(f"unknown config key {k!r}")
    for k in _CONFIG_KEYS:
        v = getattr(ns, k, None)
        if v is not None:
            setattr(cfg, k, v)
    for f in flags:
        if f == "s":
            continue
        d = _flag_dest(f)
        v = getattr(ns, d, None)
        if v is not None:
            cfg.params[d] = v
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    vec = cfg.params.get("x") or cfg.params.get("y")
    if cfg.s is None and vec:
        cfg.s = len(vec)
    for key in ("x", "y"):
        v = cfg.params.get(key)
        if v is not None and cfg.s is not None and len(v) != cfg.s and ns.group != "arith":
            raise PreconditionError(f"--{key} has {len(v)} entries but s = {cfg.s}")
    return cfg


def emit(rows, cfg: RunConfig, command: str) -> None:
    meta = {"command": command, "config": cfg.public()}
    if cfg.format == "csv":
        text = ch.records_to_csv(rows)
    else:
        text = ch.records_to_json(rows, meta)
    if cfg.out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(cfg.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    handler, flags, estimator, _ = COMMANDS[ns.group][ns.leaf]
    command = f"{ns.group} {ns.leaf}"
    try:
        cfg = resolve_config(ns, flags)
        if cfg.dry_run:
            est = estimator(cfg) if estimator else {"estimate": "not modelled"}
            row = {"command": command, **cfg.public(), "threads": cfg.threads,
                   "time_budget": cfg.time_budget, **{f"estimate_{k}": v for k, v in est.items()}}
            emit([row], dataclasses.replace(cfg, format=cfg.format), command)
            return EX_OK
        rows = handler(cfg)
        emit(rows, cfg, command)
        return EX_OK
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"biquadric: error: {e}", file=sys.stderr)
        return EX_USAGE
    except (argparse.ArgumentTypeError, OSError) as e:
        print(f"biquadric: error: {e}", file=sys.stderr)
        return EX_USAGE
    except BudgetExceeded as e:
        print(f"biquadric: budget exceeded: {e}", file=sys.stderr)
        return EX_BUDGET
    except PreconditionError as e:
        print(f"biquadric: precondition violated: {e}", file=sys.stderr)
        return EX_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
