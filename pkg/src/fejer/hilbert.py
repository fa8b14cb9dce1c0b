"""Alternating-inertia iteration for alpha-averaged maps on R^d.

    xbar^k = x^k                                  (k even)
    xbar^k = x^k + alpha_k (x^k - x^{k-1})        (k odd)
    x^{k+1} = T xbar^k

with ``0 <= alpha_k <= (1 - alpha)/alpha``. Trajectories are computed in
double precision; every bound is evaluated exactly over a certified rational
radius ``M``.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .distances import metric_distance
from .framework import ApproximationFamily, CheckReport, FejerInstance, MemoSequence
from .moduli import (CounterFunction, NatModulus, RealModulus, StepFunction, ceil_sqrt, monus,
                     to_fraction)
from .rates import DEFAULT_BUDGET, DEFAULT_MAX_BITS, RateResult, iterate_recursion


@dataclass(frozen=True)
class AveragedMap:
    """An alpha-averaged map together with what is known about it.

    ``fixed_point`` is one known fixed point, ``rho`` a modulus of regularity
    w.r.t. ``Fix T`` if one is available in closed form, and ``fix_dist``
    the distance to ``Fix T`` (used only for diagnostics).
    """

    alpha: Fraction
    eval: Callable[[np.ndarray], np.ndarray]
    provenance: str = "user"
    params: dict = field(default_factory=dict)
    fixed_point: Optional[np.ndarray] = None
    rho: Optional[RealModulus] = None
    fix_dist: Optional[Callable[[np.ndarray], float]] = None

    def __post_init__(self):
        a = to_fraction(self.alpha)
        if not 0 < a < 1:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "alpha", a)

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)

    @property
    def max_inertia(self) -> Fraction:
        return (1 - self.alpha) / self.alpha


def _shrunk(c: float) -> Fraction:
    # a rational strictly below the float constant, to keep rho a valid modulus
    return to_fraction(c) * (1 - Fraction(1, 10 ** 12))


def rotation_average(theta_rot: float = math.pi / 2, d: int = 2) -> AveragedMap:
    """``T = (Id + R)/2`` with ``R`` the rotation by ``theta_rot`` in the first
    coordinate plane (identity on the rest when ``d > 2`` is not allowed since
    then ``Fix T`` would not be ``{0}``)."""
    if d != 2:
        raise ValueError("the rotation example lives in R^2")
    c, s = math.cos(theta_rot), math.sin(theta_rot)
    R = np.array([[c, -s], [s, c]])
    A = 0.5 * (np.eye(2) + R)
    # ||x - Tx|| = sin(theta/2) ||x|| and Fix T = {0}
    scale = _shrunk(math.sin(theta_rot / 2))
    return AveragedMap(
        Fraction(1, 2), lambda x: x @ A.T, "rotation-average", {"theta_rot": theta_rot},
        fixed_point=np.zeros(2), rho=RealModulus(lambda e: scale * e, "sin(theta/2)*eps"),
        fix_dist=lambda x: float(np.linalg.norm(x)),
    )


def projection_average(lam, d: int = 2, radius: float = 1.0) -> AveragedMap:
    """``T = (1 - lam) Id + lam P`` with ``P`` the projection onto the closed ball
    ``B(0, radius)``; ``T`` is ``lam/2``-averaged and ``Fix T`` is the ball."""
    lam = to_fraction(lam)
    if not 0 < lam <= 1:
        raise ValueError("lam must lie in (0, 1]")
    lf = float(lam)

    def P(x):
        n = np.linalg.norm(x, axis=-1, keepdims=True)
        return np.where(n > radius, x * (radius / np.maximum(n, 1e-300)), x)

    def T(x):
        return (1 - lf) * x + lf * P(x)

    return AveragedMap(
        lam / 2, T, "projection-average", {"lam": lam, "radius": radius, "d": d},
        fixed_point=np.zeros(d), rho=RealModulus(lambda e: lam * e, "lam*eps"),
        fix_dist=lambda x: max(float(np.linalg.norm(x)) - radius, 0.0),
    )


def resolvent_identity(lam, d: int = 2) -> AveragedMap:
    """Resolvent of ``A = Id``: ``x -> x/(1+lam)``, firmly nonexpansive."""
    lam = to_fraction(lam)
    if lam <= 0:
        raise ValueError("lam must be positive")
    f = 1.0 / (1.0 + float(lam))
    ratio = lam / (1 + lam)
    return AveragedMap(
        Fraction(1, 2), lambda x: f * x, "resolvent", {"lam": lam, "d": d},
        fixed_point=np.zeros(d), rho=RealModulus(lambda e: _shrunk(float(ratio)) * e, "lam/(1+lam)*eps"),
        fix_dist=lambda x: float(np.linalg.norm(x)),
    )


def averagedness_check(T: AveragedMap, d: int, trials: int = 1000, rng=None, tol: float = 1e-10,
                       scale: float = 2.0) -> CheckReport:
    """``(1-a)||(x-Tx)-(y-Ty)||^2 <= a(||x-y||^2 - ||Tx-Ty||^2)`` on random pairs."""
    rng = np.random.default_rng(rng)
    x = rng.uniform(-scale, scale, (trials, d))
    y = rng.uniform(-scale, scale, (trials, d))
    Tx, Ty = T(x), T(y)
    a = float(T.alpha)
    lhs = (1 - a) * np.sum(((x - Tx) - (y - Ty)) ** 2, axis=1)
    rhs = a * (np.sum((x - y) ** 2, axis=1) - np.sum((Tx - Ty) ** 2, axis=1))
    rep = CheckReport("averaged")
    for i, s in enumerate(rhs - lhs):
        rep.note(float(s), tol, (x[i].tolist(), y[i].tolist()))
    return rep


@dataclass(frozen=True)
class InertiaSchedule:
    """The inertia parameters ``alpha_k`` (only odd ``k`` are used)."""

    fn: Callable[[int], Fraction]
    name: str = ""
    constant_value: Optional[Fraction] = None

    @classmethod
    def constant(cls, c) -> "InertiaSchedule":
        c = to_fraction(c)
        return cls(lambda k: c, name=f"const {c}", constant_value=c)

    def __call__(self, k: int) -> Fraction:
        return to_fraction(self.fn(k))

    def validate(self, alpha: Fraction, k: int) -> Fraction:
        v = self(k)
        if not 0 <= v <= (1 - alpha) / alpha:
            raise ValueError(f"inertia out of range: alpha_{k} = {v} not in [0, {(1 - alpha) / alpha}]")
        return v


class HilbertRun:
    """Lazily extended trajectory ``x^k`` with its extrapolated points ``xbar^k``.

    Once ``x^{k+1} = x^k`` and ``T x^{k+1} = x^{k+1}`` hold bitwise, every later
    point equals ``x^k`` and further requests are answered without iterating.
    """

    def __init__(self, T: AveragedMap, sched: InertiaSchedule, x0, xhat=None):
        self.T = T
        self.sched = sched
        x0 = np.array(x0, dtype=float)
        if x0.ndim != 1:
            raise ValueError("x0 must be a vector")
        self.d = x0.shape[0]
        xhat = T.fixed_point if xhat is None else xhat
        if xhat is None or np.shape(xhat) != x0.shape:
            raise ValueError("a fixed point of matching dimension is required")
        self.xhat = np.asarray(xhat, dtype=float)
        self._pts = [x0]
        self._lock = threading.RLock()
        self.stationary_from: Optional[int] = None
        if sched.constant_value is not None:
            sched.validate(T.alpha, 1)

    def __len__(self):
        return len(self._pts)

    def _bar_of(self, k: int) -> np.ndarray:
        x = self._pts[k]
        if k % 2 == 0:
            return x
        a = float(self.sched.validate(self.T.alpha, k))
        return x + a * (x - self._pts[k - 1])

    def _step(self):
        k = len(self._pts) - 1
        nxt = self.T(self._bar_of(k))
        self._pts.append(nxt)
        if np.array_equal(nxt, self._pts[k]) and np.array_equal(self.T(nxt), nxt):
            self.stationary_from = k

    def extend(self, n: int) -> "HilbertRun":
        """Make sure ``x^0 .. x^n`` are recorded (or known by stationarity)."""
        with self._lock:
            while len(self._pts) <= n and self.stationary_from is None:
                self._step()
        return self

    def point(self, n: int) -> np.ndarray:
        with self._lock:
            self.extend(n)
            if n >= len(self._pts):
                if self.sched.constant_value is None:
                    self.sched.validate(self.T.alpha, n)
                return self._pts[-1]
            return self._pts[n]

    def bar(self, n: int) -> np.ndarray:
        with self._lock:
            self.extend(n)
            if n >= len(self._pts):
                return self._pts[-1]
            return self._bar_of(n)

    def points(self, n: Optional[int] = None) -> np.ndarray:
        """``x^0 .. x^n`` as an array (default: everything recorded)."""
        if n is None:
            return np.array(self._pts)
        return np.array([self.point(i) for i in range(n + 1)])

    def bars(self, n: int) -> np.ndarray:
        return np.array([self.bar(i) for i in range(n + 1)])

    def residuals(self, n: int) -> np.ndarray:
        pts = self.points(n)
        return np.linalg.norm(pts - self.T(pts), axis=1)

    def certify_M(self, n: Optional[int] = None) -> int:
        """Smallest integer ``M`` with ``M >= ||x^k - xhat||, ||xbar^k - xhat||`` over the run."""
        n = len(self._pts) - 1 if n is None else n
        self.extend(n)
        top = max(len(self._pts) - 1, n)
        pts = self.points(top)
        bars = self.bars(top)
        m = max(np.linalg.norm(pts - self.xhat, axis=1).max(), np.linalg.norm(bars - self.xhat, axis=1).max())
        return max(1, math.ceil(m))


def iterate_alternating(T: AveragedMap, sched: InertiaSchedule, x0, n: int, xhat=None) -> HilbertRun:
    if n < 0:
        raise ValueError("n must be nonnegative")
    return HilbertRun(T, sched, x0, xhat).extend(n)


def af_residual_hilbert(T: AveragedMap, x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - T(x)))


def hilbert_family(T: AveragedMap, center=None, M=None) -> ApproximationFamily:
    """``AF_k = {x in B(center, M) : ||x - Tx|| <= 1/(k+1)}`` (no ball when ``M`` is None)."""
    dom = None
    if M is not None:
        c = np.asarray(center, dtype=float)
        Mf = float(M)
        dom = lambda x: float(np.linalg.norm(x - c)) <= Mf * (1 + 1e-12)
    return ApproximationFamily(residual=lambda x: af_residual_hilbert(T, x), domain=dom)


# --------------------------------------------------------------------------
# closed-form moduli


def _check_alpha(alpha) -> Fraction:
    a = to_fraction(alpha)
    if not 0 < a < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return a


def _ceil(q) -> int:
    q = to_fraction(q)
    return -((-q.numerator) // q.denominator)


def phi_bound_hilbert(alpha, b, k: int) -> int:
    """``2 max{1, ceil(alpha/(1-alpha) b^2 (k+1)^2)}``."""
    a = _check_alpha(alpha)
    b = to_fraction(b)
    return 2 * max(1, _ceil(a / (1 - a) * b * b * (k + 1) ** 2))


def _fejer_coefficient(alpha, extra: int) -> int:
    a = _check_alpha(alpha)
    return _ceil((3 - a) / (a * a) + extra)


def chi_zeta_hilbert(alpha, M, n: int, m: int, r: int) -> tuple[int, int]:
    """Moduli of uniform Fejer monotonicity for the even and the odd points."""
    M = to_fraction(M)
    out = []
    for extra in (2, 4):
        c = _fejer_coefficient(alpha, extra)
        out.append(monus(_ceil(2 * m * m * c * M * (r + 1) ** 2), 1))
    return out[0], out[1]


def gamma_box(d: int, M, k: int) -> int:
    """``ceil(2(k+1) sqrt(d) M)^d``, a modulus of total boundedness of a ball of radius M in R^d."""
    if d < 1:
        raise ValueError("d must be positive")
    M = to_fraction(M)
    if M <= 0:
        raise ValueError("M must be positive")
    c = 2 * (k + 1) * M
    return ceil_sqrt(c * c * d) ** d


def closedness_nonexpansive(k: int) -> tuple[int, int]:
    return 4 * k + 3, 2 * k + 1


@dataclass(frozen=True)
class HilbertRateParts:
    """The pieces of the metastability rate, exposed for tracing and testing."""

    k_inner: int
    r0: int
    P: int
    Phi: NatModulus
    eta: NatModulus
    g_shift: CounterFunction


def metastability_parts(alpha, d: int, M, k: int, g: CounterFunction) -> HilbertRateParts:
    a = _check_alpha(alpha)
    M = to_fraction(M)
    kk = 2 * k + 1
    gs = g.shifted(3, 3)
    c4 = _fejer_coefficient(a, 4)
    ratio = a / (1 - a)

    def eta(n, r):
        h = gs(2 * n) // 2
        return max(2 * kk + 1, monus(_ceil(2 * h * h * c4 * M * (2 * r + 4) ** 2), 1))

    def Phi(j):
        return 2 * max(1, _ceil(ratio * M * M * (j + 1) ** 2)) + 1

    c = (64 * k + 64) * M
    P = ceil_sqrt(c * c * d) ** d
    return HilbertRateParts(
        kk, 4 * kk + 3, P,
        NatModulus(Phi, name="Phi", monotone=True),
        NatModulus(eta, arity=2, name="eta", monotone=g.monotone),
        gs,
    )


def metastability_hilbert(run: HilbertRun, k: int, g: CounterFunction, M=None,
                          budget: int = DEFAULT_BUDGET, max_bits: int = DEFAULT_MAX_BITS,
                          keep_trace: bool = False) -> RateResult:
    """``Psi(k,g) = 2 Psi_0(P) + 3`` with ``Psi_0(n+1) = Phi^M(eta^M(Psi_0(n), 4k'+3))``,
    ``k' = 2k+1`` and ``g'(n) = g(n+3) + 3``."""
    from .moduli import majorize

    M = run.certify_M() if M is None else M
    parts = metastability_parts(run.T.alpha, run.d, M, k, g)
    etaM = majorize(parts.eta, scan_limit=budget)
    r0 = parts.r0
    Phi = parts.Phi
    res = iterate_recursion(parts.P, lambda v: Phi(etaM(v, r0)), monotone=True, budget=budget,
                            max_bits=max_bits, keep_trace=keep_trace)
    return res.map(lambda v: 2 * v + 3)


def convergence_rate_hilbert(rho: RealModulus, alpha, b, delta) -> int:
    """``max{3, 2 ceil(alpha/(1-alpha) b^2 (ceil(1/rho(delta/4)) + 1)^2)}``."""
    a = _check_alpha(alpha)
    b = to_fraction(b)
    inv = _ceil(1 / rho(to_fraction(delta) / 4))
    return max(3, 2 * _ceil(a / (1 - a) * b * b * (inv + 1) ** 2))


# --------------------------------------------------------------------------
# empirical lemma checks on a run


def _dists(pts, p):
    return np.linalg.norm(pts - p, axis=-1)


def check_summed_residual(run: HilbertRun, steps: int = 500, tol: float = 1e-9) -> CheckReport:
    """``(1-a)/a * sum_{i<steps} ||x^{2i+2} - xbar^{2i+1}||^2 <= ||x^0 - xhat||^2``."""
    run.extend(2 * steps + 1)
    a = float(run.T.alpha)
    diffs = np.array([run.point(2 * i + 2) - run.bar(2 * i + 1) for i in range(steps)])
    total = (1 - a) / a * float(np.sum(diffs ** 2))
    rep = CheckReport("summed_residual")
    rep.note(float(np.sum((run.point(0) - run.xhat) ** 2)) - total, tol, steps)
    return rep


def check_odd_step(run: HilbertRun, steps: int = 500, tol: float = 1e-12) -> CheckReport:
    """``||x^{2k+3} - x^{2k+2}|| <= ||x^{2k+2} - xbar^{2k+1}||``."""
    rep = CheckReport("odd_step")
    for k in range(steps):
        lhs = float(np.linalg.norm(run.point(2 * k + 3) - run.point(2 * k + 2)))
        rhs = float(np.linalg.norm(run.point(2 * k + 2) - run.bar(2 * k + 1)))
        rep.note(rhs - lhs, tol, k)
    return rep


def check_fejer_exact(run: HilbertRun, steps: int = 500, tol: float = 1e-12, p=None) -> CheckReport:
    """``||x^{2k+2} - p|| <= ||x^{2k} - p||`` and ``||x^{2k+3} - p|| <= ||x^{2k} - p||`` for a fixed point ``p``."""
    p = run.xhat if p is None else np.asarray(p, dtype=float)
    pts = run.points(2 * steps + 3)
    dist = _dists(pts, p)
    rep = CheckReport("fejer_exact")
    for k in range(steps):
        rep.note(dist[2 * k] - dist[2 * k + 2], tol, ("even", k))
        rep.note(dist[2 * k] - dist[2 * k + 3], tol, ("odd", k))
    return rep


def fejer_slack_radius(run: HilbertRun, xstar, steps: int) -> float:
    """The ``b`` of the approximate-point Fejer lemma:
    max of ``||x^k - x*||, ||x^k - Tx*||, ||Tx^k - x*||, ||x^k - Tx^k||`` over the run."""
    pts = run.points(2 * steps + 3)
    Tp = run.T(pts)
    xs = np.asarray(xstar, dtype=float)
    Txs = run.T(xs)
    return float(max(_dists(pts, xs).max(), _dists(pts, Txs).max(), _dists(Tp, xs).max(),
                     _dists(pts, Tp).max()))


def check_fejer_approx(run: HilbertRun, xstars, steps: int = 500, tol: float = 1e-10) -> CheckReport:
    """For approximate fixed points ``x*`` with residual ``eps``:
    ``||x^{2k+2}-x*||^2 <= ||x^{2k}-x*||^2 + ((3-a)/a^2 + 2) b eps`` and the
    same for ``x^{2k+3}`` with ``+4``."""
    a = float(run.T.alpha)
    c2 = (3 - a) / a ** 2 + 2
    c4 = (3 - a) / a ** 2 + 4
    pts = run.points(2 * steps + 3)
    rep = CheckReport("fejer_approx")
    for si, xs in enumerate(xstars):
        xs = np.asarray(xs, dtype=float)
        eps = af_residual_hilbert(run.T, xs)
        b = fejer_slack_radius(run, xs, steps)
        sq = _dists(pts, xs) ** 2
        for k in range(steps):
            rep.note(sq[2 * k] + c2 * b * eps - sq[2 * k + 2], tol, (si, "even", k))
            rep.note(sq[2 * k] + c4 * b * eps - sq[2 * k + 3], tol, (si, "odd", k))
    return rep


def sample_approx_fixed_points(T: AveragedMap, center, eps: float, count: int, rng=None,
                               t_max: float = 10.0) -> np.ndarray:
    """Points ``center + t u`` (random unit ``u``) whose residual is about ``eps`` and never above it."""
    rng = np.random.default_rng(rng)
    c = np.asarray(center, dtype=float)
    out = []
    while len(out) < count:
        u = rng.normal(size=c.shape)
        u /= np.linalg.norm(u)
        lo, hi = 0.0, t_max
        if af_residual_hilbert(T, c + hi * u) <= eps:
            out.append(c + hi * u)
            continue
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if af_residual_hilbert(T, c + mid * u) <= eps:
                lo = mid
            else:
                hi = mid
        out.append(c + lo * u)
    return np.array(out)


def hilbert_instance(run: HilbertRun, M=None) -> FejerInstance:
    """Framework view of a run: metric distance, ``f = id``, no errors, and the
    closed-form moduli of this module."""
    M = run.certify_M() if M is None else M
    a = run.T.alpha
    chi = NatModulus(lambda n, m, r: chi_zeta_hilbert(a, M, n, m, r)[0], arity=3, name="chi")
    zeta = NatModulus(lambda n, m, r: chi_zeta_hilbert(a, M, n, m, r)[1], arity=3, name="zeta")
    return FejerInstance(
        seq=MemoSequence(run), dist=metric_distance(2), family=hilbert_family(run.T, run.xhat, M),
        f=StepFunction.identity(), chi=chi, zeta=zeta,
        Phi=NatModulus(lambda k: phi_bound_hilbert(a, M, k), name="Phi", monotone=True),
        omega=NatModulus(lambda k: 4 * k + 3, name="omega", monotone=True),
        delta=NatModulus(lambda k: 2 * k + 1, name="delta", monotone=True),
        gamma=NatModulus(lambda k: gamma_box(run.d, M, k), name="gamma", monotone=True),
    )
