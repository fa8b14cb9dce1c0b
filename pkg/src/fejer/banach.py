"""Mann-type proximal point algorithm in ``l_p^d``:

    x_{n+1} = J^{-1}(alpha_n J x_n + (1 - alpha_n) J J_{r_n} x_n),
    J_r x = (J + r T)^{-1} J x,

for a monotone operator ``T : X -> X*``. The resolvent is solved numerically
(closed form where available); every bound is evaluated in exact arithmetic.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .distances import (LpSpace, bregman_distance, duality_map, duality_map_inverse,
                        phi_eval)
from .framework import ApproximationFamily, CheckReport, FejerInstance, MemoSequence
from .hilbert import gamma_box
from .moduli import (CounterFunction, NatModulus, RealModulus, StepFunction, ceil_sqrt, majorize,
                     monus, to_fraction)
from .rates import DEFAULT_BUDGET, DEFAULT_MAX_BITS, RateResult, iterate_recursion


class ResolventError(RuntimeError):
    """The resolvent equation could not be solved to tolerance."""


def _ceil(q) -> int:
    q = to_fraction(q)
    return -((-q.numerator) // q.denominator)


@dataclass(frozen=True)
class MonotoneOperatorBanach:
    """A single-valued monotone ``T : l_p^d -> l_q^d``.

    kinds: ``scaled-duality`` (``T = c J``), ``coordinatewise`` (``(Tx)_i = h(x_i)``
    with ``h`` nondecreasing, derivative ``dh``), ``zero`` and ``user``.
    ``(c_pt, d_pt)`` is a point of the graph with norm bounds ``C`` and ``D``;
    ``zero_point`` is a known zero when there is one.
    """

    kind: str
    apply: Callable[[np.ndarray], np.ndarray]
    dapply: Optional[Callable[[np.ndarray], np.ndarray]] = None
    c: Fraction = Fraction(0)
    c_pt: Optional[np.ndarray] = None
    d_pt: Optional[np.ndarray] = None
    C: Fraction = Fraction(0)
    D: Fraction = Fraction(0)
    zero_point: Optional[np.ndarray] = None
    name: str = ""

    def __call__(self, space: LpSpace, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "scaled-duality":
            return float(self.c) * duality_map(space, x)
        return np.asarray(self.apply(x), dtype=float)


def scaled_duality_operator(c, dim: int) -> MonotoneOperatorBanach:
    c = to_fraction(c)
    if c < 0:
        raise ValueError("c must be nonnegative")
    z = np.zeros(dim)
    return MonotoneOperatorBanach("scaled-duality", lambda x: x, None, c, z, z, Fraction(0), Fraction(0), z,
                                  name=f"{c}*J")


def coordinatewise_operator(h: Callable, dh: Callable, dim: int, name: str = "") -> MonotoneOperatorBanach:
    """``(Tx)_i = h(x_i)`` for a nondecreasing ``h`` with ``h(0) = 0``."""
    z = np.zeros(dim)
    if float(h(np.zeros(1))[0]) != 0.0:
        raise ValueError("h(0) must be 0 so that 0 is a zero of T")
    return MonotoneOperatorBanach("coordinatewise", h, dh, Fraction(0), z, z, Fraction(0), Fraction(0), z,
                                  name=name or "coordinatewise")


def zero_operator(dim: int) -> MonotoneOperatorBanach:
    z = np.zeros(dim)
    return MonotoneOperatorBanach("zero", lambda x: np.zeros_like(x), lambda x: np.zeros_like(x),
                                  Fraction(0), z, z, Fraction(0), Fraction(0), z, name="0")


def operator_from_spec(spec: dict, dim: int) -> MonotoneOperatorBanach:
    """Build one of the shipped operators from a config fragment."""
    kind = spec["kind"]
    if kind == "scaled-duality":
        return scaled_duality_operator(spec.get("c", 1), dim)
    if kind == "zero":
        return zero_operator(dim)
    if kind == "coordinatewise":
        fam = spec.get("h", "cubic")
        s = float(to_fraction(spec.get("scale", 1)))
        if fam == "linear":
            return coordinatewise_operator(lambda x: s * x, lambda x: np.full_like(x, s), dim, f"{s}*t")
        if fam == "cubic":
            return coordinatewise_operator(lambda x: s * x ** 3, lambda x: 3 * s * x ** 2, dim, f"{s}*t^3")
        raise ValueError(f"unknown coordinatewise family {fam!r}")
    raise ValueError(f"unknown operator kind {kind!r}")


def monotonicity_check(space: LpSpace, T: MonotoneOperatorBanach, trials: int = 1000, rng=None,
                       tol: float = 1e-12, scale: float = 2.0) -> CheckReport:
    """``<x - y, Tx - Ty> >= 0`` on random pairs."""
    rng = np.random.default_rng(rng)
    x = rng.uniform(-scale, scale, (trials, space.dim))
    y = rng.uniform(-scale, scale, (trials, space.dim))
    v = space.pair(x - y, T(space, x) - T(space, y))
    rep = CheckReport("monotone")
    for i in range(trials):
        rep.note(float(v[i]), tol, (x[i].tolist(), y[i].tolist()))
    return rep


# --------------------------------------------------------------------------
# resolvent


def duality_jacobian(space: LpSpace, z: np.ndarray) -> np.ndarray:
    """Derivative of ``J`` at ``z != 0``:
    ``||z||^{2-p} [(p-1) diag(|z|^{p-2}) + (2-p) g g^T / ||z||^p]`` with ``g_i = |z_i|^{p-1} sgn z_i``."""
    p = space.pf
    if p == 2.0:
        return np.eye(space.dim)
    nz = float(space.norm(z))
    a = np.abs(z)
    g = a ** (p - 1) * np.sign(z)
    return nz ** (2 - p) * ((p - 1) * np.diag(a ** (p - 2)) + (2 - p) * np.outer(g, g) / nz ** p)


def resolvent_residual(space: LpSpace, T: MonotoneOperatorBanach, r, x, z) -> float:
    """``||Jz + r Tz - Jx||_q``."""
    rf = float(r)
    return float(space.dual_norm(duality_map(space, z) + rf * T(space, z) - duality_map(space, x)))


def resolvent_banach(space: LpSpace, T: MonotoneOperatorBanach, r, x, tol: float = 1e-12,
                     max_iter: int = 200) -> np.ndarray:
    """``J_r x``: the solution ``z`` of ``Jz + r Tz = Jx``."""
    rf = float(r)
    if rf <= 0:
        raise ValueError("r must be positive")
    x = np.asarray(x, dtype=float)
    if T.kind == "zero":
        return x.copy()
    if T.kind == "scaled-duality":
        return x / (1.0 + rf * float(T.c))
    Jx = duality_map(space, x)
    if float(space.dual_norm(Jx)) <= tol and T.zero_point is not None and not np.any(T.zero_point):
        return np.zeros_like(x)
    if T.dapply is None:
        return _resolvent_fallback(space, T, rf, x, Jx, tol)

    def Theta(z):
        return duality_map(space, z) + rf * T(space, z) - Jx

    z = x.copy()
    F = Theta(z)
    res = float(space.dual_norm(F))
    for _ in range(max_iter):
        if res <= tol:
            return z
        if not np.any(z):
            Jac = np.diag(rf * T.dapply(z) + (1.0 if space.pf == 2.0 else 0.0))
        else:
            Jac = duality_jacobian(space, z) + rf * np.diag(T.dapply(z))
        step = np.linalg.lstsq(Jac, -F, rcond=None)[0]
        merit = float(F @ F)
        t = 1.0
        while t > 1e-12:
            cand = z + t * step
            Fc = Theta(cand)
            if float(Fc @ Fc) < (1 - 1e-4 * t) * merit:
                break
            t *= 0.5
        else:
            break
        z, F = cand, Fc
        res = float(space.dual_norm(F))
    if res <= tol:
        return z
    return _resolvent_fallback(space, T, rf, x, Jx, tol, start=z)


def _resolvent_fallback(space, T, rf, x, Jx, tol, start=None):
    fun = lambda z: duality_map(space, z) + rf * T(space, z) - Jx
    sol = optimize.root(fun, x if start is None else start, method="hybr", tol=1e-15)
    z = sol.x
    res = float(space.dual_norm(fun(z)))
    if res > tol:
        raise ResolventError(f"resolvent residual {res:.3e} above tolerance {tol:.1e}")
    return z


# --------------------------------------------------------------------------
# schedules and runs


@dataclass(frozen=True)
class MannSchedule:
    """``alpha_n`` in ``[0, alpha_bar)`` and ``r_n >= r_bar > 0``."""

    alpha_fn: Callable[[int], Fraction]
    r_fn: Callable[[int], Fraction]
    alpha_bar: Fraction
    r_bar: Fraction
    constant: bool = False

    @classmethod
    def constant_schedule(cls, alpha, r, alpha_bar, r_bar=None) -> "MannSchedule":
        a, rr = to_fraction(alpha), to_fraction(r)
        s = cls(lambda n: a, lambda n: rr, to_fraction(alpha_bar), to_fraction(r if r_bar is None else r_bar),
                constant=True)
        s.validate(0)
        return s

    def __post_init__(self):
        object.__setattr__(self, "alpha_bar", to_fraction(self.alpha_bar))
        object.__setattr__(self, "r_bar", to_fraction(self.r_bar))
        if not 0 < self.alpha_bar < 1:
            raise ValueError("alpha_bar must lie in (0, 1)")
        if self.r_bar <= 0:
            raise ValueError("r_bar must be positive")

    def validate(self, n: int) -> tuple[Fraction, Fraction]:
        a, r = to_fraction(self.alpha_fn(n)), to_fraction(self.r_fn(n))
        if not 0 <= a < self.alpha_bar:
            raise ValueError(f"alpha_{n} = {a} not in [0, {self.alpha_bar})")
        if r < self.r_bar:
            raise ValueError(f"r_{n} = {r} below r_bar = {self.r_bar}")
        return a, r

    def r_max(self, n: int) -> Fraction:
        """``max{r_i : i <= n}``."""
        if self.constant:
            return to_fraction(self.r_fn(0))
        return max(to_fraction(self.r_fn(i)) for i in range(n + 1))


def mann_step(space: LpSpace, T: MonotoneOperatorBanach, sched: MannSchedule, x, n: int,
              tol: float = 1e-12) -> np.ndarray:
    a, r = sched.validate(n)
    y = resolvent_banach(space, T, r, x, tol)
    af = float(a)
    return duality_map_inverse(space, af * duality_map(space, x) + (1 - af) * duality_map(space, y))


class BanachRun:
    """Lazily extended trajectory ``x_n`` with the resolvent points ``J_{r_n} x_n``.

    With a constant schedule the update map does not depend on ``n``; once
    ``x_{n+1} = x_n`` bitwise the run is stationary.
    """

    def __init__(self, space: LpSpace, T: MonotoneOperatorBanach, sched: MannSchedule, x0,
                 tol: float = 1e-12):
        self.space = space
        self.T = T
        self.sched = sched
        self.tol = tol
        x0 = np.array(x0, dtype=float)
        if x0.shape != (space.dim,):
            raise ValueError("x0 has the wrong dimension")
        self._pts = [x0]
        self._res_pts: list[np.ndarray] = []
        self._solver_res: list[float] = []
        self._lock = threading.RLock()
        self.stationary_from: Optional[int] = None

    def __len__(self):
        return len(self._pts)

    def _step(self):
        n = len(self._pts) - 1
        x = self._pts[n]
        a, r = self.sched.validate(n)
        y = resolvent_banach(self.space, self.T, r, x, self.tol)
        self._res_pts.append(y)
        self._solver_res.append(resolvent_residual(self.space, self.T, r, x, y))
        af = float(a)
        sp = self.space
        nxt = duality_map_inverse(sp, af * duality_map(sp, x) + (1 - af) * duality_map(sp, y))
        self._pts.append(nxt)
        if self.sched.constant and np.array_equal(nxt, x):
            self.stationary_from = n

    def extend(self, n: int) -> "BanachRun":
        with self._lock:
            while len(self._pts) <= n and self.stationary_from is None:
                self._step()
        return self

    def point(self, n: int) -> np.ndarray:
        with self._lock:
            self.extend(n)
            return self._pts[n] if n < len(self._pts) else self._pts[-1]

    def resolvent_point(self, n: int) -> np.ndarray:
        """``J_{r_n} x_n``."""
        with self._lock:
            self.extend(n + 1)
            if n < len(self._res_pts):
                return self._res_pts[n]
            return self._res_pts[-1]

    def points(self, n: Optional[int] = None) -> np.ndarray:
        if n is None:
            return np.array(self._pts)
        return np.array([self.point(i) for i in range(n + 1)])

    def solver_residuals(self, n: int) -> np.ndarray:
        self.extend(n + 1)
        return np.array(self._solver_res[: n + 1])

    def residuals(self, n: int) -> np.ndarray:
        """``||x_k - J_{r_k} x_k||`` for ``k <= n``."""
        return np.array([float(self.space.norm(self.point(k) - self.resolvent_point(k))) for k in range(n + 1)])

    def certify_M(self, n: Optional[int] = None) -> int:
        n = len(self._pts) - 1 if n is None else n
        pts = self.points(max(n, len(self._pts) - 1))
        return max(1, math.ceil(float(np.max(self.space.norm(pts)))))


# --------------------------------------------------------------------------
# moduli of this application


def mu_resolvent_bound(C, D, R, b) -> Fraction:
    """``max{(1+C)(b+RD)+C, 1}``, a bound on ``||J_r x||`` for ``r <= R``, ``||x|| <= b``."""
    C, D, R, b = (to_fraction(v) for v in (C, D, R, b))
    return max((1 + C) * (b + R * D) + C, Fraction(1))


def omega_duality(p) -> NatModulus:
    """Integer modulus of uniform continuity of ``J`` on ``l_p``, ``p >= 2``:
    ``omega(k, b) = ceil((p-1)(k+1)) ∸ 1``. ``J`` is globally ``(p-1)``-Lipschitz
    there, so the radius ``b`` does not enter."""
    p = to_fraction(p)
    return NatModulus(lambda k, b: monus(_ceil((p - 1) * (k + 1)), 1), arity=2, name="omega_J", monotone=True)


def omega_duality_real(p) -> Callable:
    """``omega(eps, b) = eps/(p-1)`` (never above ``eps``)."""
    p = to_fraction(p)
    return lambda eps, b=None: to_fraction(eps) / (p - 1)


def kt_E(C, D, r, s, b) -> int:
    """Smallest integer ``E >= max{2(mu(r,b)+b), 2 r/s (mu(r,b)+mu(s,b))}``."""
    r, s, b = to_fraction(r), to_fraction(s), to_fraction(b)
    mr, ms = mu_resolvent_bound(C, D, r, b), mu_resolvent_bound(C, D, s, b)
    return _ceil(max(2 * (mr + b), 2 * r / s * (mr + ms)))


def E0(C, D, M, sched: MannSchedule, n: int, m: int) -> int:
    """``max{2(mu(rhat,M)+M), 2 rhat/r_n (mu(rhat,M)+mu(r_n,M))}`` rounded up,
    ``rhat = max{r_i : i <= n+m ∸ 1}``."""
    M = to_fraction(M)
    rhat = sched.r_max(monus(n + m, 1))
    rn = to_fraction(sched.r_fn(n))
    mh = mu_resolvent_bound(C, D, rhat, M)
    return _ceil(max(2 * (mh + M), 2 * rhat / rn * (mh + mu_resolvent_bound(C, D, rn, M))))


def E1(C, D, M, sched: MannSchedule, k: int) -> int:
    """``max{2(mu(rt,M)+M), 2 rt (mu(rt,M)/r_bar + max{(1+C)(M/r_bar+D)+C, 1/r_bar})}``
    rounded up, ``rt = max{r_i : i <= k}``."""
    C, D, M = to_fraction(C), to_fraction(D), to_fraction(M)
    rt = sched.r_max(k)
    rb = sched.r_bar
    mt = mu_resolvent_bound(C, D, rt, M)
    return _ceil(max(2 * (mt + M), 2 * rt * (mt / rb + max((1 + C) * (M / rb + D) + C, 1 / rb))))


def E_rate(C, D, M, r_bar) -> int:
    """The ``E`` of the rate-of-convergence theorem (resolvent parameter 1)."""
    C, D, M, rb = (to_fraction(v) for v in (C, D, M, r_bar))
    m1 = mu_resolvent_bound(C, D, 1, M)
    return _ceil(max(2 * (m1 + M), 2 * (m1 / rb + max((1 + C) * (M / rb + D) + C, 1 / rb))))


def chi_banach(n: int, m: int, r: int, M, E0_val: int, omega: NatModulus) -> int:
    """``max{n, omega(2 E0 ((r+1)(m ∸ 1) ∸ 1 + 1) + 1, M + 1)}``."""
    inner = monus((r + 1) * monus(m, 1), 1) + 1
    return max(n, omega(2 * E0_val * inner + 1, _ceil(to_fraction(M)) + 1))


@dataclass(frozen=True)
class BanachProblem:
    """Everything the bounds need: space, operator, schedule and the certified radii."""

    space: LpSpace
    T: MonotoneOperatorBanach
    sched: MannSchedule
    M: Fraction
    b: Fraction
    omega: NatModulus = None

    def __post_init__(self):
        object.__setattr__(self, "M", to_fraction(self.M))
        object.__setattr__(self, "b", to_fraction(self.b))
        if self.omega is None:
            object.__setattr__(self, "omega", omega_duality(self.space.p))

    @property
    def radius(self) -> Fraction:
        return self.M + 1

    def eta(self):
        return self.space.eta

    def lam(self, k: int) -> int:
        """``ceil(L/(M+1)^2 / eta(1/(4(M+1)(k+1)))) ∸ 1``."""
        R = self.radius
        return monus(_ceil(self.space.L_high / (R * R * self.space.eta(Fraction(1, 4 * (k + 1)) / R))), 1)

    def Lam(self, k: int) -> int:
        """``ceil(16 (M+1)(k+1) / L) ∸ 1``."""
        return monus(_ceil(16 * self.radius * (k + 1) / self.space.L_low), 1)

    def theta(self, k: int) -> int:
        return self.lam(2 * k + 1)

    def chi(self, n: int, m: int, r: int) -> int:
        T = self.T
        return chi_banach(n, m, r, self.M, E0(T.C, T.D, self.M, self.sched, n, m), self.omega)

    def Phi(self, k: int) -> int:
        """``2 ceil((lam(omega(2 E1_k (lam(k)+1) + 1, M+1)) + 1) b / (1 - alpha_bar))``."""
        T = self.T
        lk = self.lam(k)
        e1 = E1(T.C, T.D, self.M, self.sched, k)
        w = self.omega(2 * e1 * (lk + 1) + 1, _ceil(self.M) + 1)
        return 2 * _ceil((self.lam(w) + 1) * self.b / (1 - self.sched.alpha_bar))

    def gamma(self, k: int) -> int:
        """Total boundedness of the ``p``-ball of radius ``M``, via the Euclidean box
        bound on a Euclidean ball of radius ``sqrt(d) M`` (``p >= 2``)."""
        d = self.space.dim
        Mt = self.M if self.space.p == 2 else self.M * ceil_sqrt(d)
        return gamma_box(d, Mt, k)


def phi_bound_banach(k: int, M, b, alpha_bar, lam: Callable, omega: NatModulus, E1_val: int) -> int:
    """Stand-alone form of the approximate-point bound with all inputs explicit."""
    lk = lam(k)
    w = omega(2 * E1_val * (lk + 1) + 1, _ceil(to_fraction(M)) + 1)
    return 2 * _ceil((lam(w) + 1) * to_fraction(b) / (1 - to_fraction(alpha_bar)))


@dataclass(frozen=True)
class BanachRateParts:
    k_outer: int
    k0: int
    r0: int
    P: int
    Phi: NatModulus
    eta: NatModulus


def metastability_parts_banach(prob: BanachProblem, k: int, g: CounterFunction,
                               overrides: Optional[dict] = None) -> BanachRateParts:
    """Constants of the metastability rate. ``overrides`` may replace any of
    ``lam, Lam, theta, chi, Phi, gamma, omega_F, delta_F`` (callables) for small tests."""
    o = dict(overrides or {})
    lam = o.get("lam", prob.lam)
    Lam = o.get("Lam", prob.Lam)
    theta = o.get("theta", prob.theta)
    chi = o.get("chi", prob.chi)
    Phi = o.get("Phi", prob.Phi)
    gamma = o.get("gamma", prob.gamma)
    omega_F = o.get("omega_F", lambda j: 4 * j + 3)
    delta_F = o.get("delta_F", lambda j: 2 * j + 1)

    kl = lam(k)
    k0 = max(kl, lam(omega_F(kl)))
    tk = theta(k0)
    P = gamma(Lam(16 * tk + 15))
    dF = delta_F(k0)

    def eta(n, r):
        h = g(2 * n) // 2
        chi_p = max(dF, chi(2 * n, 2 * h, r))
        zeta = chi(2 * n, 2 * h + 1, r)
        dl = chi(n, 0, 4 * r + 3)  # f = id
        return max(chi_p, zeta, dl)

    mono = g.monotone and prob.sched.constant and "chi" not in o
    return BanachRateParts(kl, k0, 2 * tk + 1, P,
                           NatModulus(Phi, name="Phi", monotone="Phi" not in o),
                           NatModulus(eta, arity=2, name="eta_k", monotone=mono))


def metastability_banach(prob: BanachProblem, k: int, g: CounterFunction, overrides: Optional[dict] = None,
                         budget: int = DEFAULT_BUDGET, max_bits: int = DEFAULT_MAX_BITS,
                         keep_trace: bool = False) -> RateResult:
    """``Psi~(lam(k), g) = 2 Psi_0(P, k0, g)`` with ``k0 = max{lam(k), lam(omega_F(lam(k)))}``,
    ``P = gamma(Lam(16 theta(k0) + 15))`` and
    ``Psi_0(n+1) = Phi^M(eta_{k0}^M(Psi_0(n), 2 theta(k0) + 1))``."""
    parts = metastability_parts_banach(prob, k, g, overrides)
    PhiM = majorize(parts.Phi, scan_limit=budget)
    etaM = majorize(parts.eta, scan_limit=budget)
    r0 = parts.r0
    res = iterate_recursion(parts.P, lambda v: PhiM(etaM(v, r0)), monotone=True, budget=budget,
                            max_bits=max_bits, keep_trace=keep_trace)
    return res.map(lambda v: 2 * v)


def regularity_scaled_duality(c) -> RealModulus:
    """For ``T = cJ``: ``||x - J_1 x|| = c/(1+c) ||x||`` and ``zer T = {0}``, so
    ``rho(eps) = eps c/(1+c)`` (shrunk by a relative ``1e-12`` for the strict inequality)."""
    c = to_fraction(c)
    if c <= 0:
        raise ValueError("c must be positive for a regularity modulus")
    f = c / (1 + c) * (1 - Fraction(1, 10 ** 12))
    return RealModulus(lambda e: f * e, name="c/(1+c)*eps")


def convergence_rate_banach(rho: RealModulus, prob: BanachProblem, delta) -> int:
    """``mu(delta) = 2 tau(rho'(theta(lam~(delta))/2))`` with
    ``tau(eps) = 2 ceil(b / (lam~(omega(lam~(eps)/(2E), M)) (1 - alpha_bar)))``."""
    sp = prob.space
    R = prob.radius
    eta = sp.eta
    scale = max(prob.b, Fraction(1))

    def lam_t(e):
        return R * R / sp.L_high * eta(to_fraction(e) / (4 * scale * R))

    def Lam_t(e):
        return to_fraction(e) * sp.L_low / (16 * R)

    def theta(e):
        return lam_t(to_fraction(e) / 2)

    def rho_p(e):
        return rho(Lam_t(to_fraction(e) / 2))

    T = prob.T
    E = E_rate(T.C, T.D, prob.M, prob.sched.r_bar)
    om = omega_duality_real(sp.p)

    def tau(e):
        inner = lam_t(om(lam_t(e) / (2 * E), prob.M))
        return 2 * _ceil(prob.b / (inner * (1 - prob.sched.alpha_bar)))

    return 2 * tau(rho_p(theta(lam_t(to_fraction(delta))) / 2))


# --------------------------------------------------------------------------
# empirical checks


def kt_inequality_check(space: LpSpace, T: MonotoneOperatorBanach, z, ys, r, tol: float = 1e-10) -> CheckReport:
    """``phi(z, J_r y) + phi(J_r y, y) <= phi(z, y)`` for a zero ``z`` of ``T``."""
    z = np.asarray(z, dtype=float)
    rep = CheckReport("kt_inequality")
    for i, y in enumerate(np.atleast_2d(ys)):
        w = resolvent_banach(space, T, r, y)
        lhs = float(phi_eval(space, z, w) + phi_eval(space, w, y))
        rhs = float(phi_eval(space, z, y))
        rep.note(rhs - lhs, tol, i)
    return rep


def quant_kt_inequality(space: LpSpace, T: MonotoneOperatorBanach, xs, ys, r, s, eps,
                        tol: float = 1e-10) -> CheckReport:
    """Approximate-zero version: with ``b >= ||x||, ||y||`` and ``E`` as in :func:`kt_E`,
    ``||x - J_s x|| <= omega(eps/(2E), max{b, mu(s,b)})`` implies
    ``phi(x, J_r y) + phi(J_r y, y) <= phi(x, y) + eps``. Pairs whose premise fails
    are skipped (they count towards vacuity)."""
    om = omega_duality_real(space.p)
    rep = CheckReport("quant_kt")
    for i, (x, y) in enumerate(zip(np.atleast_2d(xs), np.atleast_2d(ys))):
        b = _ceil(to_fraction(max(float(space.norm(x)), float(space.norm(y)))) * (1 + Fraction(1, 10 ** 9)))
        E = kt_E(T.C, T.D, r, s, b)
        bound = float(om(to_fraction(eps) / (2 * E)))
        if float(space.norm(x - resolvent_banach(space, T, s, x))) > bound:
            continue
        w = resolvent_banach(space, T, r, y)
        lhs = float(phi_eval(space, x, w) + phi_eval(space, w, y))
        rep.note(float(phi_eval(space, x, y)) + float(eps) - lhs, tol, i)
    return rep


def quant_kt_integer_check(space: LpSpace, T: MonotoneOperatorBanach, xs, ys, r, s, k: int,
                           tol: float = 1e-10) -> CheckReport:
    """Integer form: ``||x - J_s x|| <= 1/(omega(2E(k+1)+1, B+1)+1)`` implies the KT
    inequality up to ``1/(k+1)``."""
    om = omega_duality(space.p)
    rep = CheckReport("quant_kt_integer")
    for i, (x, y) in enumerate(zip(np.atleast_2d(xs), np.atleast_2d(ys))):
        B = _ceil(to_fraction(max(float(space.norm(x)), float(space.norm(y)))) * (1 + Fraction(1, 10 ** 9)))
        E = kt_E(T.C, T.D, r, s, B)
        bound = 1.0 / (om(2 * E * (k + 1) + 1, B + 1) + 1)
        if float(space.norm(x - resolvent_banach(space, T, s, x))) > bound:
            continue
        w = resolvent_banach(space, T, r, y)
        lhs = float(phi_eval(space, x, w) + phi_eval(space, w, y))
        rep.note(float(phi_eval(space, x, y)) + 1.0 / (k + 1) - lhs, tol, i)
    return rep


def check_fejer_banach(run: BanachRun, z, steps: int = 500, tol: float = 1e-10) -> CheckReport:
    """``phi(z, x_{n+1}) <= phi(z, x_n)``."""
    pts = run.points(steps)
    v = phi_eval(run.space, np.asarray(z, dtype=float)[None, :], pts)
    rep = CheckReport("fejer_phi")
    for n in range(steps):
        rep.note(float(v[n] - v[n + 1]), tol, n)
    return rep


def check_liminf_bound(run: BanachRun, b, eps: float) -> CheckReport:
    """``exists n <= 2 ceil(b/(eps (1 - alpha_bar)))`` with ``phi(J_{r_{2n}} x_{2n}, x_{2n}) <= eps``."""
    bound = 2 * _ceil(to_fraction(b) / (to_fraction(eps) * (1 - run.sched.alpha_bar)))
    rep = CheckReport("liminf_bound")
    rep.checked = 1
    for n in range(bound + 1):
        x = run.point(2 * n)
        if float(phi_eval(run.space, run.resolvent_point(2 * n), x)) <= eps:
            rep.witnesses["n"] = n
            rep.min_slack = float(bound - n)
            return rep
    rep.violations.append(("no index up to", bound))
    return rep


def check_resolvent_bound(run: BanachRun, steps: int, tol: float = 1e-12) -> CheckReport:
    """``||J_{r_n} x_n|| <= mu(r_n, ||x_n||)`` on every recorded step."""
    rep = CheckReport("resolvent_bound")
    T = run.T
    for n in range(steps + 1):
        x = run.point(n)
        r = run.sched.r_fn(n)
        mu = float(mu_resolvent_bound(T.C, T.D, r, to_fraction(float(run.space.norm(x)))))
        rep.note(mu - float(run.space.norm(run.resolvent_point(n))), tol, n)
    return rep


def hilbert_reference(x0, alpha: float, r: float, steps: int) -> np.ndarray:
    """``x_{n+1} = alpha x_n + (1 - alpha) x_n/(1 + r)`` (Mann-resolvent iteration for ``A = Id``)."""
    out = [np.asarray(x0, dtype=float)]
    for _ in range(steps):
        x = out[-1]
        out.append(alpha * x + (1 - alpha) * x / (1 + r))
    return np.array(out)


def banach_family(run: BanachRun, M) -> ApproximationFamily:
    """``AF_k = {x in B(0, M) : ||x - J_{r_n} x|| <= 1/(k+1) for all n <= k}``."""
    sp, T, sched = run.space, run.T, run.sched
    Mf = float(M)

    def member(k, x):
        if float(sp.norm(x)) > Mf * (1 + 1e-12):
            return False
        rs = [to_fraction(sched.r_fn(0))] if sched.constant else sorted({to_fraction(sched.r_fn(n)) for n in range(k + 1)})
        return all(float(sp.norm(x - resolvent_banach(sp, T, r, x))) <= 1.0 / (k + 1) for r in rs)

    return ApproximationFamily(member_fn=member)


def banach_instance(run: BanachRun, prob: BanachProblem) -> FejerInstance:
    """Framework view: ``phi(z, x_n)``, ``G = H = id``, ``f = id``, the even/odd
    split of the full-sequence modulus."""
    dist = bregman_distance(run.space, prob.radius)
    return FejerInstance(
        seq=MemoSequence(run), dist=dist, family=banach_family(run, prob.M), f=StepFunction.identity(),
        chi=NatModulus(lambda n, m, r: prob.chi(2 * n, 2 * m, r), arity=3, name="chi'"),
        zeta=NatModulus(lambda n, m, r: prob.chi(2 * n, 2 * m + 1, r), arity=3, name="zeta"),
        Phi=NatModulus(prob.Phi, name="Phi", monotone=True),
    )
