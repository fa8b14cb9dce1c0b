"""Batch runner: read a JSON config, run the iteration, evaluate the requested
bounds against brute force, and write CSV files.

Statuses of a result row: ``pass``, ``fail`` (always with a concrete
witness), ``vacuous`` (no premise was met, nothing was tested) and
``resource`` (the check could not be decided within the step budget).
"""
from __future__ import annotations

import json
import math
import os
import tempfile
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional

import jsonschema
import numpy as np

from . import banach as bn
from . import hilbert as hb
from . import selfcheck
from .distances import LpSpace, metric_distance, phi_eval
from .framework import ApproximationFamily, CheckReport, FejerInstance, check_approx_point_bound
from .framework import check_closedness, check_f_monotone, check_quasi_fejer, check_uniform_modulus
from .moduli import CounterFunction, NatModulus, to_fraction
from .rates import DEFAULT_BUDGET, MetastabilityNotFound, RateResult
from .rates import brute_force_metastability

STATUSES = ("pass", "fail", "vacuous", "resource")
DIGIT_LIMIT = 10_000
DEFAULT_WINDOW = 1000
RUN_CAP = 200_000  # longest trajectory the brute-force checks may ask for

SELF_CHECKS = ("duality", "consistency", "rate_oracle", "conversions")
CHECKS = {
    "hilbert": ("averaged", "fejer", "summed_residual", "odd_step", "fejer_approx", "quasi_fejer",
                "f_monotone", "uniform_modulus", "closedness", "phi_bound", "metastability", "rate")
    + SELF_CHECKS,
    "banach": ("monotone", "resolvent_residual", "resolvent_bound", "fejer", "kt", "quant_kt", "liminf",
               "crosscheck_p2", "quasi_fejer", "uniform_modulus", "phi_bound", "metastability", "rate")
    + SELF_CHECKS,
    "synthetic": ("metastability", "rate") + SELF_CHECKS,
}

_RATIONAL = {"oneOf": [{"type": "number"}, {"type": "string", "pattern": r"^-?\d+(\.\d+)?(/\d+)?$"}]}
_G_DESC = {"type": "string", "pattern": r"^(const:\d+|linear:\d+,\d+)$"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["name", "app", "x0", "n_max", "checks"],
    "properties": {
        "name": {"type": "string", "pattern": r"^[A-Za-z0-9_.-]+$"},
        "app": {"enum": list(CHECKS)},
        "description": {"type": "string"},
        "map": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["rotation-average", "projection-average", "resolvent"]},
                "theta_rot": {"type": "number"},
                "lam": _RATIONAL,
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "space": {
            "type": "object", "additionalProperties": False, "required": ["p"],
            "properties": {"p": _RATIONAL},
        },
        "operator": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["scaled-duality", "coordinatewise", "zero"]},
                "c": _RATIONAL,
                "h": {"enum": ["linear", "cubic"]},
                "scale": _RATIONAL,
            },
        },
        "synthetic": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["constant", "oscillating"]},
                "amplitude": {"type": "number"},
                "claimed_psi": {"type": "integer", "minimum": 0},
                "claimed_mu": {"type": "integer", "minimum": 0},
            },
        },
        "schedule": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "alpha_k": _RATIONAL,
                "alpha_n": {"oneOf": [_RATIONAL, {"type": "array", "items": _RATIONAL, "minItems": 1}]},
                "r_n": {"oneOf": [_RATIONAL, {"type": "array", "items": _RATIONAL, "minItems": 1}]},
                "alpha_bar": _RATIONAL,
                "r_bar": _RATIONAL,
            },
        },
        "x0": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "n_max": {"type": "integer", "minimum": 0, "maximum": 1_000_000},
        "checks": {"type": "array", "items": {"type": "string"}, "uniqueItems": True},
        "k_list": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "g_list": {"type": "array", "items": _G_DESC},
        "delta_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "eps_list": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        "phi_k_max": {"type": "integer", "minimum": 0},
        "b": _RATIONAL,
        "M": _RATIONAL,
        "seed": {"type": "integer", "minimum": 0},
        "window": {"type": "integer", "minimum": 0},
        "samples": {"type": "integer", "minimum": 1},
        "instances": {"type": "integer", "minimum": 1},
        "budget": {"type": "integer", "minimum": 1},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
    },
}


class ConfigError(ValueError):
    pass


def _path(err) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(cfg: dict) -> dict:
    """Schema plus semantic checks; returns ``cfg`` with defaults filled in."""
    v = jsonschema.Draft7Validator(SCHEMA)
    errs = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errs:
        e = errs[0]
        raise ConfigError(f"config error at {_path(e)}: {e.message}")
    cfg = dict(cfg)
    app = cfg["app"]
    for c in cfg["checks"]:
        if c not in CHECKS[app]:
            raise ConfigError(f"config error at checks: unknown check {c!r} for app {app!r}")
    need = {"hilbert": "map", "banach": "operator", "synthetic": "synthetic"}[app]
    if need not in cfg:
        raise ConfigError(f"config error at {need}: required for app {app!r}")
    cfg.setdefault("seed", 0)
    cfg.setdefault("k_list", [0, 1, 2])
    cfg.setdefault("g_list", ["const:0"])
    cfg.setdefault("delta_list", [0.1])
    cfg.setdefault("eps_list", [0.1, 0.01])
    cfg.setdefault("phi_k_max", 30)
    cfg.setdefault("window", DEFAULT_WINDOW)
    cfg.setdefault("samples", 1000)
    cfg.setdefault("tolerances", {})
    cfg.setdefault("schedule", {})
    sch = cfg["schedule"]
    try:
        if app == "hilbert":
            T = _make_map(cfg)
            a_k = to_fraction(sch.get("alpha_k", 0))
            if not 0 <= a_k <= T.max_inertia:
                raise ConfigError(f"config error at schedule.alpha_k: inertia out of range: {a_k} "
                                  f"not in [0, {T.max_inertia}]")
            if len(cfg["x0"]) != 2 and cfg["map"]["kind"] == "rotation-average":
                raise ConfigError("config error at x0: the rotation example lives in R^2")
        elif app == "banach":
            p = to_fraction(cfg.get("space", {}).get("p", 2))
            if p < 2:
                raise ConfigError("config error at space.p: p must be at least 2")
            _make_schedule(sch)
        for key in ("b", "M"):
            if key in cfg and to_fraction(cfg[key]) <= 0:
                raise ConfigError(f"config error at {key}: must be positive")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"config error: {exc}") from exc
    return cfg


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return validate_config(cfg)


# --------------------------------------------------------------------------
# number formatting


def _int_to_str(v: int) -> str:
    # split so no single conversion exceeds the interpreter's digit limit
    if v < 0:
        return "-" + _int_to_str(-v)
    if v < 10 ** 4000:
        return str(v)
    half = _digits(v) // 2
    hi, lo = divmod(v, 10 ** half)
    return _int_to_str(hi) + _int_to_str(lo).rjust(half, "0")


def _digits(v: int) -> int:
    if v == 0:
        return 1
    d = int(v.bit_length() * math.log10(2))
    p = 10 ** d
    while p <= v:
        p *= 10
        d += 1
    while d > 1 and p // 10 > v:
        p //= 10
        d -= 1
    return d


def format_int(v: int) -> str:
    """Decimal string; past ``DIGIT_LIMIT`` digits only the leading 20 digits
    and the exact digit count are given."""
    v = int(v)
    if v < 0:
        return "-" + format_int(-v)
    if v.bit_length() < 3.3 * DIGIT_LIMIT:
        s = _int_to_str(v)
        if len(s) <= DIGIT_LIMIT:
            return s
    n = _digits(v)
    if n <= DIGIT_LIMIT:
        return _int_to_str(v)
    lead = v // 10 ** (n - 20)
    return f"{lead}...({n} digits)"


def format_bound(r) -> str:
    if isinstance(r, RateResult):
        return format_int(r.value) if r.exact else ">=" + format_int(r.value)
    if isinstance(r, (int, np.integer)):
        return format_int(int(r))
    return fmt_float(r)


def fmt_float(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# rows


@dataclass(frozen=True)
class ResultRow:
    check: str
    status: str
    witness: str = ""
    bound: str = ""
    slack: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"bad status {self.status!r}")
        if self.status == "fail" and not self.witness:
            raise ValueError("fail rows need a witness")

    def as_list(self) -> list[str]:
        return [self.check, self.status, self.witness, self.bound, self.slack]


def _wit(x) -> str:
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, float):
        return fmt_float(x)
    if isinstance(x, (list, tuple)):
        return "(" + " ".join(_wit(v) for v in x) + ")"
    return str(x)


def _wkey(kv):
    k = kv[0]
    return (0, k, "") if isinstance(k, int) else (1, 0, str(k))


def row_from_report(check: str, rep: CheckReport, bound: str = "") -> ResultRow:
    slack = "" if math.isinf(rep.min_slack) else fmt_float(rep.min_slack)
    if rep.violations:
        return ResultRow(check, "fail", _wit(rep.violations[0]) + f" [{len(rep.violations)} of {rep.checked}]",
                         bound, slack)
    if rep.vacuous:
        return ResultRow(check, "vacuous", "no premise met", bound, slack)
    wit = ";".join(f"{k}={_wit(v)}" for k, v in sorted(rep.witnesses.items(), key=_wkey))
    return ResultRow(check, "pass", wit or f"checked={rep.checked}", bound, slack)


# --------------------------------------------------------------------------
# experiments


class SyntheticRun:
    """``x_n = x0`` (constant) or ``x_n = x0 + (-1)^n a e_0`` (oscillating)."""

    def __init__(self, kind: str, x0, amplitude: float = 1.0):
        self.kind = kind
        self.x0 = np.array(x0, dtype=float)
        self.amp = float(amplitude)
        self.d = self.x0.shape[0]
        self.stationary_from = 0 if kind == "constant" else None
        self._n = 0

    def __len__(self):
        return self._n + 1

    def extend(self, n: int):
        self._n = max(self._n, n)
        return self

    def point(self, n: int) -> np.ndarray:
        if self.kind == "constant":
            return self.x0.copy()
        e = np.zeros(self.d)
        e[0] = self.amp if n % 2 == 0 else -self.amp
        return self.x0 + e

    def points(self, n: Optional[int] = None) -> np.ndarray:
        n = self._n if n is None else n
        return np.array([self.point(i) for i in range(n + 1)]).reshape(n + 1, self.d)


@dataclass
class Experiment:
    cfg: dict
    run: object
    d: int
    solution: np.ndarray
    residual: Callable
    dist_to_sol: Callable
    phi_to_sol: Callable
    dist: object
    family: ApproximationFamily
    extra: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.cfg["name"]

    @property
    def n_max(self) -> int:
        return self.cfg["n_max"]


def _make_map(cfg) -> hb.AveragedMap:
    m = cfg["map"]
    d = len(cfg["x0"])
    kind = m["kind"]
    if kind == "rotation-average":
        return hb.rotation_average(float(m.get("theta_rot", math.pi / 2)), d)
    if kind == "projection-average":
        return hb.projection_average(m.get("lam", 1), d, float(m.get("radius", 1.0)))
    return hb.resolvent_identity(m.get("lam", 1), d)


def _seq_fn(v):
    if isinstance(v, list):
        vals = [to_fraction(x) for x in v]
        return (lambda n: vals[n % len(vals)]), len(vals) == 1, vals
    c = to_fraction(v)
    return (lambda n: c), True, [c]


def _make_schedule(sch: dict) -> bn.MannSchedule:
    a_fn, a_const, a_vals = _seq_fn(sch.get("alpha_n", "1/4"))
    r_fn, r_const, r_vals = _seq_fn(sch.get("r_n", 1))
    a_bar = to_fraction(sch.get("alpha_bar", "1/2"))
    r_bar = to_fraction(sch.get("r_bar", min(r_vals)))
    s = bn.MannSchedule(a_fn, r_fn, a_bar, r_bar, constant=a_const and r_const)
    for n in range(max(len(a_vals), len(r_vals))):
        s.validate(n)
    return s


def _ceil_frac(x: float) -> Fraction:
    return Fraction(math.ceil(x * (1 + 1e-12)))


def build_experiment(cfg: dict) -> Experiment:
    app = cfg["app"]
    if app == "hilbert":
        T = _make_map(cfg)
        sched = hb.InertiaSchedule.constant(cfg["schedule"].get("alpha_k", 0))
        run = hb.HilbertRun(T, sched, cfg["x0"])
        run.extend(cfg["n_max"])
        xhat = run.xhat
        M = to_fraction(cfg["M"]) if "M" in cfg else Fraction(run.certify_M(cfg["n_max"]))
        if "b" in cfg:
            b = to_fraction(cfg["b"])
        else:
            b = _ceil_frac(max(np.linalg.norm(run.point(0) - xhat), np.linalg.norm(run.point(1) - xhat)))
        nrm = lambda x: float(np.linalg.norm(np.asarray(x) - xhat))
        return Experiment(cfg, run, run.d, xhat, lambda x: hb.af_residual_hilbert(T, x), nrm, nrm,
                          metric_distance(2), hb.hilbert_family(T, xhat, M), {"T": T, "M": M, "b": b})
    if app == "banach":
        d = len(cfg["x0"])
        sp = LpSpace(d, cfg.get("space", {}).get("p", 2))
        T = bn.operator_from_spec(cfg["operator"], d)
        sched = _make_schedule(cfg["schedule"])
        run = bn.BanachRun(sp, T, sched, cfg["x0"])
        run.extend(cfg["n_max"])
        z = T.zero_point
        M = to_fraction(cfg["M"]) if "M" in cfg else Fraction(run.certify_M(cfg["n_max"]))
        if "b" in cfg:
            b = to_fraction(cfg["b"])
        else:
            b = max(Fraction(1), _ceil_frac(float(phi_eval(sp, z, run.point(0)))))
        prob = bn.BanachProblem(sp, T, sched, M, b)

        def residual(x):
            r = sched.r_fn(0)
            return float(sp.norm(np.asarray(x) - bn.resolvent_banach(sp, T, r, x)))

        return Experiment(cfg, run, d, z, residual, lambda x: float(sp.norm(np.asarray(x) - z)),
                          lambda x: float(phi_eval(sp, z, x)), metric_distance(sp.p),
                          bn.banach_family(run, M), {"space": sp, "T": T, "prob": prob, "M": M, "b": b})
    syn = cfg["synthetic"]
    run = SyntheticRun(syn["kind"], cfg["x0"], syn.get("amplitude", 1.0))
    run.extend(cfg["n_max"])
    x0 = run.x0
    nrm = lambda x: float(np.linalg.norm(np.asarray(x) - x0))
    fam = ApproximationFamily(member_fn=lambda k, x: True)
    return Experiment(cfg, run, run.d, x0, lambda x: 0.0, nrm, nrm, metric_distance(2), fam, {})


def trajectory(exp: Experiment, steps: Optional[int] = None) -> list[list[str]]:
    """Rows ``n, coord_0..coord_{d-1}, residual, dist_to_sol, phi_to_sol`` for
    ``n = 0..steps`` (default ``n_max``; ``-1`` gives no rows)."""
    run = exp.run
    steps = exp.n_max if steps is None else steps
    pts = run.points(steps) if steps >= 0 else np.zeros((0, exp.d))
    rows = []
    for n, x in enumerate(pts):
        if exp.cfg["app"] == "synthetic":
            res = float(np.linalg.norm(run.point(n + 1) - x))
        elif exp.cfg["app"] == "banach":
            res = float(exp.extra["space"].norm(x - run.resolvent_point(n)))
        else:
            res = exp.residual(x)
        rows.append([str(n)] + [fmt_float(c) for c in x]
                    + [fmt_float(res), fmt_float(exp.dist_to_sol(x)), fmt_float(exp.phi_to_sol(x))])
    return rows


# --------------------------------------------------------------------------
# the checks


def _rng(cfg, check: str):
    return np.random.default_rng([cfg["seed"], zlib.crc32(check.encode())])


def _tol(cfg, name: str, default: float) -> float:
    return float(cfg["tolerances"].get(name, default))


def _lemma_steps(exp) -> int:
    return max(1, (exp.n_max - 1) // 2)


def _window_pair(seq_point, dist, family, k, N, end):
    """A witness that the window ``[N, end]`` is not ``1/(k+1)``-metastable."""
    thr = 1.0 / (k + 1)
    pts = np.array([seq_point(i) for i in range(N, end + 1)])
    for i in range(len(pts)):
        if not family.member(k, pts[i]):
            return f"x_{N + i} not in AF_{k}"
        row = np.asarray(dist(pts[i][None, :], pts))
        j = int(np.argmax(row))
        if row[j] > thr:
            return f"N={N}: d(x_{N + i},x_{N + j})={fmt_float(row[j])} > {fmt_float(thr)}"
    return ""


def _brute_force(exp: Experiment, k: int, g: CounterFunction, limit: int, cap: int):
    """Minimal ``N`` (extending the run as the search asks for it); ``None`` past ``cap``."""
    while True:
        try:
            return brute_force_metastability(exp.run, exp.dist, exp.family, k, g, limit=limit)
        except MetastabilityNotFound as exc:
            need = exc.required_length
            if need is None or limit >= cap:
                return None
            limit = min(cap, max(need, 2 * limit))
            exp.run.extend(limit)


def _psi(exp: Experiment, k: int, g: CounterFunction, budget: int) -> RateResult:
    app = exp.cfg["app"]
    if app == "hilbert":
        return hb.metastability_hilbert(exp.run, k, g, M=exp.extra["M"], budget=budget)
    if app == "banach":
        return bn.metastability_banach(exp.extra["prob"], k, g, budget=budget)
    claim = exp.cfg["synthetic"].get("claimed_psi", 0)
    return RateResult(int(claim), exact=True, steps=0)


def check_metastability(exp: Experiment, k: int, gdesc: str, budget: int) -> ResultRow:
    g = CounterFunction.parse(gdesc)
    cid = f"metastability[k={k},g={gdesc}]"
    psi = _psi(exp, k, g, budget)
    if psi.exact and psi.value <= RUN_CAP:
        cap = max(exp.n_max + 1, psi.value + g(psi.value) + 1)
    else:
        cap = RUN_CAP
    N = _brute_force(exp, k, g, max(exp.n_max + 1, 1), min(cap, RUN_CAP))
    bound = format_bound(psi)
    if N is not None and (N <= psi.value):
        slack = format_int(psi.value - N)
        if psi.exact:
            return ResultRow(cid, "pass", f"N={N}", bound, slack)
        return ResultRow(cid, "pass", f"N={N} (bound >= budget > N)", bound, ">=" + slack)
    if psi.exact and psi.value + g(psi.value) < RUN_CAP:
        # every window start up to Psi was examined
        w = _window_pair(exp.run.point, exp.dist, exp.family, k, psi.value, psi.value + g(psi.value))
        return ResultRow(cid, "fail", (f"N={N} > bound; " if N is not None else "no N <= bound; ") + w, bound,
                         format_int(psi.value - N) if N is not None else "")
    return ResultRow(cid, "resource", f"run too short; needs length > {RUN_CAP}", bound, "")


def _rate_mu(exp: Experiment, delta) -> int:
    app = exp.cfg["app"]
    if app == "hilbert":
        T = exp.extra["T"]
        if T.rho is None:
            raise ValueError("no modulus of regularity for this map")
        return hb.convergence_rate_hilbert(T.rho, T.alpha, exp.extra["b"], delta)
    if app == "banach":
        T = exp.extra["T"]
        if T.kind != "scaled-duality":
            raise ValueError("a modulus of regularity is known only for T = cJ")
        return bn.convergence_rate_banach(bn.regularity_scaled_duality(T.c), exp.extra["prob"], delta)
    return int(exp.cfg["synthetic"].get("claimed_mu", 0))


def check_rate(exp: Experiment, delta: float, window: int, max_steps: int = RUN_CAP) -> ResultRow:
    """``max_{n in [mu, mu+window]} ||x_n - x_{mu+window}|| < delta``."""
    cid = f"rate[delta={fmt_float(delta)}]"
    mu = _rate_mu(exp, to_fraction(delta))
    end = mu + window
    run = exp.run
    stat = getattr(run, "stationary_from", None)
    if stat is None and end > max_steps:
        run.extend(max_steps)
        stat = getattr(run, "stationary_from", None)
    if stat is None and end > max_steps:
        return ResultRow(cid, "resource", f"run too short; required length {format_int(end + 1)}",
                         format_int(mu), "")
    if stat is not None and mu > stat + 1:
        worst, arg = 0.0, mu  # all points from mu on coincide
    else:
        last = run.point(end)
        top = end if stat is None else min(end, stat + 2)
        idx = list(range(mu, top + 1))
        dists = [float(exp.dist(run.point(n), last)) for n in idx]
        j = int(np.argmax(dists))
        worst, arg = dists[j], idx[j]
    slack = fmt_float(delta - worst)
    if worst < delta:
        return ResultRow(cid, "pass", f"mu={format_int(mu)}", format_int(mu), slack)
    return ResultRow(cid, "fail", f"pair ({arg},{format_int(end)}) at distance {fmt_float(worst)}",
                     format_int(mu), slack)


def _hilbert_solutions(exp, rng, count=5):
    T = exp.extra["T"]
    if T.provenance == "projection-average":
        r = 0.99 * float(T.params["radius"])
        u = rng.normal(size=(count, exp.d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        return list(u * rng.uniform(0, r, (count, 1)))
    return [exp.solution]


def _hilbert_check(exp: Experiment, name: str, budget: int) -> list[ResultRow]:
    cfg, run, T = exp.cfg, exp.run, exp.extra["T"]
    rng = _rng(cfg, name)
    steps = _lemma_steps(exp)
    if name == "averaged":
        return [row_from_report(name, hb.averagedness_check(T, exp.d, cfg["samples"], rng,
                                                            _tol(cfg, "averaged", 1e-10)))]
    if name == "fejer":
        return [row_from_report(name, hb.check_fejer_exact(run, steps, _tol(cfg, "fejer", 1e-12)))]
    if name == "summed_residual":
        return [row_from_report(name, hb.check_summed_residual(run, steps, _tol(cfg, name, 1e-9)))]
    if name == "odd_step":
        return [row_from_report(name, hb.check_odd_step(run, steps, _tol(cfg, name, 1e-12)))]
    if name == "fejer_approx":
        xs = hb.sample_approx_fixed_points(T, exp.solution, 0.05, 5, rng)
        return [row_from_report(name, hb.check_fejer_approx(run, xs, steps, _tol(cfg, name, 1e-10)))]
    inst = hb.hilbert_instance(run, exp.extra["M"])
    n_small = min(steps, 60)
    if name == "quasi_fejer":
        return [row_from_report(name, check_quasi_fejer(inst, _hilbert_solutions(exp, rng), n_small,
                                                        _tol(cfg, name, 1e-12)))]
    if name == "f_monotone":
        return [row_from_report(name, check_f_monotone(inst, _hilbert_solutions(exp, rng), n_small,
                                                       _tol(cfg, name, 1e-12)))]
    if name == "uniform_modulus":
        grid = [(n, m, r) for n in range(3) for m in range(3) for r in range(3)]
        ks = sorted({inst.chi(*t) for t in grid} | {inst.zeta(*t) for t in grid})
        samples = np.vstack([hb.sample_approx_fixed_points(T, exp.solution, 1.0 / (k + 1), 2, rng) for k in ks])
        out = []
        for which in ("chi", "zeta"):
            rep = check_uniform_modulus(inst, which, grid, samples, _tol(cfg, "uniform_modulus", 1e-12))
            out.append(row_from_report(f"uniform_modulus[{which}]", rep))
        return out
    if name == "closedness":
        fam = hb.hilbert_family(T)
        pairs = []
        for k in cfg["k_list"]:
            w, dl = hb.closedness_nonexpansive(k)
            for q in hb.sample_approx_fixed_points(T, exp.solution, 1.0 / (dl + 1), 20, rng):
                u = rng.normal(size=exp.d)
                u /= np.linalg.norm(u)
                pairs.append((q, q + u * rng.uniform(0.5, 1.0) / (w + 1)))
        rep = check_closedness(fam, metric_distance(2), lambda k: 4 * k + 3, lambda k: 2 * k + 1, pairs,
                               cfg["k_list"])
        return [row_from_report(name, rep)]
    if name == "phi_bound":
        b = exp.extra["b"]
        inst2 = FejerInstance(seq=inst.seq, dist=inst.dist, family=hb.hilbert_family(T),
                              Phi=NatModulus(lambda k: hb.phi_bound_hilbert(T.alpha, b, k), monotone=True))
        ks = range(cfg["phi_k_max"] + 1)
        rep = check_approx_point_bound(inst2, ks)
        return [row_from_report(f"phi_bound[k=0..{cfg['phi_k_max']}]", rep,
                                format_int(inst2.Phi(cfg["phi_k_max"])))]
    raise KeyError(name)


def _banach_check(exp: Experiment, name: str, budget: int) -> list[ResultRow]:
    cfg, run = exp.cfg, exp.run
    sp, T, prob = exp.extra["space"], exp.extra["T"], exp.extra["prob"]
    rng = _rng(cfg, name)
    n = exp.n_max
    r0 = run.sched.r_fn(0)
    if name == "monotone":
        return [row_from_report(name, bn.monotonicity_check(sp, T, cfg["samples"], rng, _tol(cfg, name, 1e-12)))]
    if name == "resolvent_residual":
        res = run.solver_residuals(n)
        tol = _tol(cfg, name, 1e-10)
        rep = CheckReport(name)
        for i, v in enumerate(res):
            rep.note(tol - float(v), 0.0, (i, float(v)))
        return [row_from_report(name, rep)]
    if name == "resolvent_bound":
        return [row_from_report(name, bn.check_resolvent_bound(run, n, _tol(cfg, name, 1e-12)))]
    if name == "fejer":
        return [row_from_report(name, bn.check_fejer_banach(run, exp.solution, n, _tol(cfg, name, 1e-10)))]
    if name == "kt":
        ys = rng.uniform(-2, 2, (cfg["samples"], exp.d))
        return [row_from_report(name, bn.kt_inequality_check(sp, T, exp.solution, ys, r0, _tol(cfg, name, 1e-10)))]
    if name == "quant_kt":
        m = min(cfg["samples"], 200)
        scale = 10.0 ** rng.uniform(-14, -1, m)
        xs = rng.normal(size=(m, exp.d)) * scale[:, None]
        ys = rng.uniform(-1, 1, (m, exp.d))
        out = []
        for k in cfg["k_list"]:
            rep = bn.quant_kt_integer_check(sp, T, xs, ys, r0, r0, k, _tol(cfg, name, 1e-10))
            out.append(row_from_report(f"quant_kt[k={k}]", rep))
        return out
    if name == "liminf":
        out = []
        for eps in cfg["eps_list"]:
            rep = bn.check_liminf_bound(run, exp.extra["b"], eps)
            bound = 2 * math.ceil(to_fraction(exp.extra["b"]) / (to_fraction(eps) * (1 - run.sched.alpha_bar)))
            out.append(row_from_report(f"liminf[eps={fmt_float(eps)}]", rep, format_int(bound)))
        return out
    if name == "crosscheck_p2":
        return [_crosscheck_p2(exp)]
    inst = bn.banach_instance(run, prob)
    if name == "quasi_fejer":
        return [row_from_report(name, check_quasi_fejer(inst, [exp.solution], min((n - 1) // 2, 60),
                                                        _tol(cfg, name, 1e-10)))]
    if name == "uniform_modulus":
        grid = [(a, m, r) for a in range(2) for m in range(3) for r in range(2)]
        samples = [exp.solution] + [exp.solution + 1e-300 * rng.normal(size=exp.d) for _ in range(3)]
        out = []
        for which in ("chi", "zeta"):
            rep = check_uniform_modulus(inst, which, grid, samples, _tol(cfg, "uniform_modulus", 1e-10))
            out.append(row_from_report(f"uniform_modulus[{which}]", rep))
        return out
    if name == "phi_bound":
        rep = check_approx_point_bound(inst, cfg["k_list"])
        return [row_from_report(f"phi_bound[k={','.join(map(str, cfg['k_list']))}]", rep,
                                format_int(prob.Phi(max(cfg["k_list"]))))]
    raise KeyError(name)


def _crosscheck_p2(exp: Experiment) -> ResultRow:
    """The same problem in l_2 against the closed-form Hilbert iteration."""
    cfg = exp.cfg
    name = "crosscheck_p2"
    op = cfg["operator"]
    sched = _make_schedule(cfg["schedule"])
    if not sched.constant:
        return ResultRow(name, "vacuous", "needs a constant schedule")
    if op["kind"] == "scaled-duality":
        c = float(to_fraction(op.get("c", 1)))
    elif op["kind"] == "coordinatewise" and op.get("h") == "linear":
        c = float(to_fraction(op.get("scale", 1)))
    elif op["kind"] == "zero":
        c = 0.0
    else:
        return ResultRow(name, "vacuous", "no closed form for this operator")
    d = len(cfg["x0"])
    sp2 = LpSpace(d, 2)
    run2 = bn.BanachRun(sp2, bn.operator_from_spec(op, d), sched, cfg["x0"])
    n = exp.n_max
    ref = bn.hilbert_reference(cfg["x0"], float(sched.alpha_fn(0)), float(sched.r_fn(0)) * c, n)
    diff = np.max(np.abs(run2.points(n) - ref), axis=1)
    tol = _tol(cfg, name, 1e-12)
    j = int(np.argmax(diff))
    if diff[j] <= tol:
        return ResultRow(name, "pass", f"max at n={j}", "", fmt_float(tol - diff[j]))
    return ResultRow(name, "fail", f"n={j} differs by {fmt_float(diff[j])}", "", fmt_float(tol - diff[j]))


def _self_check(exp: Experiment, name: str) -> list[ResultRow]:
    cfg = exp.cfg
    rng = _rng(cfg, name)
    if name == "duality":
        return [row_from_report(name, selfcheck.duality_suite(rng, cfg["samples"]))]
    if name == "consistency":
        return [row_from_report(name, selfcheck.consistency_suite(rng, 10 * cfg["samples"]))]
    if name == "rate_oracle":
        return [row_from_report(name, selfcheck.rate_oracle_suite(rng, cfg.get("instances", 50)))]
    if name == "conversions":
        reps = selfcheck.conversion_suite(rng, cfg.get("instances", 100))
        return [row_from_report(f"conversions[{k}]", v) for k, v in reps.items()]
    raise KeyError(name)


def check_bounds(exp: Experiment, which: str, budget: int = DEFAULT_BUDGET) -> list[ResultRow]:
    """Evaluate one check identifier; one or more rows come back."""
    cfg = exp.cfg
    if which in SELF_CHECKS:
        return _self_check(exp, which)
    if which == "metastability":
        return [check_metastability(exp, k, g, budget) for k in cfg["k_list"] for g in cfg["g_list"]]
    if which == "rate":
        out = []
        for d in cfg["delta_list"]:
            try:
                out.append(check_rate(exp, d, cfg["window"]))
            except ValueError as exc:
                out.append(ResultRow(f"rate[delta={fmt_float(d)}]", "vacuous", str(exc)))
        return out
    if cfg["app"] == "hilbert":
        return _hilbert_check(exp, which, budget)
    if cfg["app"] == "banach":
        return _banach_check(exp, which, budget)
    raise KeyError(which)


def run_experiment(cfg: dict, seed: Optional[int] = None, budget: Optional[int] = None,
                   only: Optional[str] = None):
    """Build and run the configured iteration and evaluate its checks.

    Returns ``(experiment, rows)``; deterministic for a fixed seed.
    """
    cfg = validate_config(cfg)
    if seed is not None:
        cfg["seed"] = int(seed)
    budget = int(budget or cfg.get("budget", DEFAULT_BUDGET))
    if only is not None and only not in CHECKS[cfg["app"]]:
        raise ConfigError(f"unknown check {only!r} for app {cfg['app']!r}")
    exp = build_experiment(cfg)
    rows: list[ResultRow] = []
    for c in ([only] if only else cfg["checks"]):
        rows.extend(check_bounds(exp, c, budget))
    return exp, rows


# --------------------------------------------------------------------------
# output


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_line(cells) -> str:
    out = []
    for c in cells:
        c = str(c)
        if any(ch in c for ch in ',"\n'):
            c = '"' + c.replace('"', '""') + '"'
        out.append(c)
    return ",".join(out) + "\n"


def emit_csv(exp: Experiment, rows: list[ResultRow], out_dir, steps: Optional[int] = None) -> tuple[Path, Path]:
    """Write ``<name>_trajectory.csv`` (plus a whitespace-separated ``.dat``
    copy for gnuplot) and ``<name>_results.csv``."""
    out = Path(out_dir)
    head = ["n"] + [f"coord_{i}" for i in range(exp.d)] + ["residual", "dist_to_sol", "phi_to_sol"]
    traj = trajectory(exp, steps)
    tpath = out / f"{exp.name}_trajectory.csv"
    _atomic_write(tpath, _csv_line(head) + "".join(_csv_line(r) for r in traj))
    _atomic_write(out / f"{exp.name}_trajectory.dat",
                  "# " + " ".join(head) + "\n" + "".join(" ".join(r) + "\n" for r in traj))
    rpath = out / f"{exp.name}_results.csv"
    _atomic_write(rpath, _csv_line(["check", "status", "witness", "bound", "slack"])
                  + "".join(_csv_line(r.as_list()) for r in rows))
    return tpath, rpath
