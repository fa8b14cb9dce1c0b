"""Generalized distances on finite-dimensional spaces.

The main object is the Bregman-type distance

    phi(x, y) = ||x||^2 - 2 <x, Jy> + ||y||^2

on ``l_p^d`` (``p >= 2``), where ``J`` is the normalized duality map. Each
distance comes bundled with its triangularity and consistency moduli.
All vector functions act along the last axis so they broadcast over batches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .moduli import NatModulus, RealModulus, monus, to_fraction

#: Figiel constant split: 1 on the side where a smaller L is the safe choice,
#: 3.18 where a larger one is.
L_LOW = Fraction(1)
L_HIGH = Fraction(318, 100)


def clarkson_eta(p) -> RealModulus:
    """``eps^p / (p 2^p)``, a modulus of uniform convexity for ``l_p``, ``p >= 2``."""
    p = to_fraction(p)
    if p.denominator == 1:
        P = int(p)
        return RealModulus(lambda e: e ** P / (P * 2 ** P), name=f"eps^{P}/{P * 2 ** P}")

    def fn(e):
        # irrational power: round the float value down a little so the
        # modulus stays below the true one
        v = (float(e) / 2.0) ** float(p) / float(p)
        return Fraction(v) * (1 - Fraction(1, 10 ** 9))

    return RealModulus(fn, name=f"eps^{p}/(p 2^p)")


@dataclass(frozen=True)
class LpSpace:
    """``R^dim`` with the ``p``-norm, ``p >= 2`` rational."""

    dim: int
    p: Fraction = Fraction(2)
    M: Fraction = Fraction(1)
    eta: RealModulus | None = None
    L_low: Fraction = L_LOW
    L_high: Fraction = L_HIGH

    def __post_init__(self):
        object.__setattr__(self, "p", to_fraction(self.p))
        object.__setattr__(self, "M", to_fraction(self.M))
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.p < 2:
            raise ValueError("only p >= 2 is supported")
        if self.M <= 0:
            raise ValueError("ambient radius must be positive")
        if self.eta is None:
            object.__setattr__(self, "eta", clarkson_eta(self.p))

    @property
    def q(self) -> Fraction:
        return self.p / (self.p - 1)

    @property
    def pf(self) -> float:
        return float(self.p)

    @property
    def qf(self) -> float:
        return float(self.q)

    def norm(self, x) -> np.ndarray:
        return _pnorm(np.asarray(x, dtype=float), self.pf)

    def dual_norm(self, u) -> np.ndarray:
        return _pnorm(np.asarray(u, dtype=float), self.qf)

    @staticmethod
    def pair(x, u) -> np.ndarray:
        return np.sum(np.asarray(x, dtype=float) * np.asarray(u, dtype=float), axis=-1)


def _pnorm(x: np.ndarray, p: float) -> np.ndarray:
    # scaled to avoid under/overflow of |x|^p
    s = np.max(np.abs(x), axis=-1, keepdims=True)
    safe = np.where(s > 0, s, 1.0)
    y = np.abs(x) / safe
    if p == 2.0:
        n = np.sqrt(np.sum(y * y, axis=-1))
    else:
        n = np.sum(y ** p, axis=-1) ** (1.0 / p)
    return n * s[..., 0]


def _duality(x: np.ndarray, p: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if p == 2.0:
        return x.copy()
    # J is positively homogeneous of degree one: J(x) = s J(x/s)
    s = np.max(np.abs(x), axis=-1, keepdims=True)
    safe = np.where(s > 0, s, 1.0)
    y = x / safe
    ny = np.sum(np.abs(y) ** p, axis=-1, keepdims=True) ** (1.0 / p)
    ny = np.where(ny > 0, ny, 1.0)
    out = ny ** (2.0 - p) * np.abs(y) ** (p - 1.0) * np.sign(y)
    return np.where(s > 0, out * safe, 0.0)


def duality_map(space: LpSpace, x) -> np.ndarray:
    """``Jx = ||x||_p^{2-p} (|x_i|^{p-1} sgn x_i)_i``, with ``J0 = 0``."""
    return _duality(x, space.pf)


def duality_map_inverse(space: LpSpace, u) -> np.ndarray:
    """Inverse of :func:`duality_map`: the duality map of the dual exponent."""
    return _duality(u, float(space.q))


def phi_eval(space: LpSpace, x, y) -> np.ndarray:
    """``phi(x, y) = ||x||^2 - 2 <x, Jy> + ||y||^2`` (clipped at 0 against roundoff).

    Written as ``(||x|| - ||y||)(||x|| + ||y||) - 2 <x - y, Jy>`` which uses
    ``<y, Jy> = ||y||^2`` and loses less to cancellation when ``x`` is near ``y``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = space.norm(x), space.norm(y)
    v = (nx - ny) * (nx + ny) - 2.0 * space.pair(x - y, duality_map(space, y))
    return np.maximum(v, 0.0)


def phi_consistency_moduli(space: LpSpace, b) -> tuple[RealModulus, RealModulus]:
    """Real consistency moduli ``(lam, Lam)`` of ``phi`` on the ball of radius ``b``.

    ``phi(x,y) <= lam(eps)`` forces ``||x-y|| <= eps`` and
    ``||x-y|| <= Lam(eps)`` forces ``phi(x,y) <= eps``.
    """
    b = to_fraction(b)
    eta, Lh, Ll = space.eta, space.L_high, space.L_low
    lam = RealModulus(lambda e: b * b / Lh * eta(e / (4 * b)), name="lam~")
    Lam = RealModulus(lambda e: e * Ll / (16 * b), name="Lam~")
    return lam, Lam


def phi_consistency_moduli_nat(space: LpSpace, b) -> tuple[NatModulus, NatModulus]:
    """Integer forms of the consistency moduli.

    ``lam(k) = ceil(L_high / (b^2 eta(1/(4b(k+1))))) ∸ 1`` and
    ``Lam(k) = ceil(16 b (k+1) / L_low) ∸ 1``; so ``phi <= 1/(lam(k)+1)``
    gives ``||x-y|| <= 1/(k+1)`` and ``||x-y|| <= 1/(Lam(k)+1)`` gives
    ``phi <= 1/(k+1)``.
    """
    b = to_fraction(b)
    eta, Lh, Ll = space.eta, space.L_high, space.L_low

    def lam(k):
        return monus(math.ceil(Lh / (b * b * eta(Fraction(1, 4 * (k + 1)) / b))), 1)

    def Lam(k):
        return monus(math.ceil(16 * b * (k + 1) / Ll), 1)

    return (NatModulus(lam, name="lam", monotone=True), NatModulus(Lam, name="Lam", monotone=True))


def consistency_to_triangularity(lam, Lam=None, form: str = "integer"):
    """Triangularity moduli ``(theta, theta_weak)`` derived from consistency moduli.

    Integer form: ``theta(k) = lam(2k+1)``, ``theta_weak(k) = lam(2 Lam(k) + 1)``.
    Real form: ``theta(eps) = lam(eps/2)``, ``theta_weak(eps) = lam(Lam(eps)/2)``.
    ``theta_weak`` is ``None`` when ``Lam`` is not given.
    """
    if form == "integer":
        theta = NatModulus(lambda k: lam(2 * k + 1), name="theta", monotone=True)
        weak = None
        if Lam is not None:
            weak = NatModulus(lambda k: lam(2 * Lam(k) + 1), name="theta_weak", monotone=True)
        return theta, weak
    if form == "real":
        theta = RealModulus(lambda e: lam(e / 2), name="theta")
        weak = None if Lam is None else RealModulus(lambda e: lam(Lam(e) / 2), name="theta_weak")
        return theta, weak
    raise ValueError(f"unknown form {form!r}")


@dataclass(frozen=True)
class GeneralizedDistance:
    """A function ``X x X -> [0, inf)`` with the moduli known for it.

    ``eval`` broadcasts over leading axes.
    """

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    theta: NatModulus | None = None
    theta_weak: NatModulus | None = None
    lam: object = None
    Lam: object = None
    symmetric: bool = False
    reflexive: bool = False
    name: str = ""

    def __call__(self, x, y):
        return self.eval(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def metric_distance(p=2) -> GeneralizedDistance:
    """``||x - y||_p``."""
    pf = float(to_fraction(p))
    return GeneralizedDistance(
        eval=lambda x, y: _pnorm(x - y, pf),
        theta=NatModulus(lambda k: 2 * k + 1, name="2k+1", monotone=True),
        theta_weak=NatModulus(lambda k: 2 * k + 1, name="2k+1", monotone=True),
        symmetric=True,
        reflexive=True,
        name=f"metric_l{p}",
    )


def bregman_distance(space: LpSpace, b) -> GeneralizedDistance:
    """``phi`` on the ball of radius ``b`` with its integer moduli."""
    lam, Lam = phi_consistency_moduli_nat(space, b)
    theta, weak = consistency_to_triangularity(lam, Lam)
    return GeneralizedDistance(
        eval=lambda x, y: phi_eval(space, x, y),
        theta=theta,
        theta_weak=weak,
        lam=lam,
        Lam=Lam,
        symmetric=space.p == 2,
        reflexive=True,
        name=f"phi_l{space.p}",
    )


def _two_k_plus_one():
    return NatModulus(lambda k: 2 * k + 1, name="2k+1", monotone=True)


def catalog_distance(kind: str, **params) -> GeneralizedDistance:
    """Standard examples of (weakly) triangular distances on ``R^d``.

    kinds and parameters:

    * ``metric`` (``p``, default 2): ``||x - y||``
    * ``norm_sum``: ``||x|| + ||y||``
    * ``norm_right``: ``||y||``
    * ``constant`` (``c > 0``): the constant ``c``
    * ``map_pullback`` (``T``: callable on arrays): ``max{||Tx - y||, ||Tx - Ty||}``
    * ``set_restricted`` (``member``: boolean predicate on arrays, ``c > 0``):
      the metric on pairs inside the set and the constant ``c`` otherwise;
      ``c`` must not be smaller than the diameter of the set.
    """
    p = float(to_fraction(params.get("p", 2)))

    def nrm(v):
        return _pnorm(v, p)

    if kind == "metric":
        return metric_distance(params.get("p", 2))
    if kind == "norm_sum":
        return GeneralizedDistance(lambda x, y: nrm(x) + nrm(y), _two_k_plus_one(), _two_k_plus_one(),
                                   symmetric=True, name="norm_sum")
    if kind == "norm_right":
        return GeneralizedDistance(lambda x, y: nrm(y) + 0.0 * nrm(x), _two_k_plus_one(), _two_k_plus_one(),
                                   name="norm_right")
    if kind == "constant":
        c = to_fraction(params["c"])
        if c <= 0:
            raise ValueError("constant distance needs c > 0")
        cbar = math.ceil(1 / c) - 1  # smallest cbar with c >= 1/(cbar+1)
        th = NatModulus(lambda k: cbar + 1, name=f"{cbar + 1}", monotone=True)
        cf = float(c)
        return GeneralizedDistance(lambda x, y: np.full(np.broadcast(x, y).shape[:-1], cf), th, th,
                                   symmetric=True, name=f"constant_{c}")
    if kind == "map_pullback":
        T = params["T"]

        def ev(x, y):
            tx = T(x)
            return np.maximum(nrm(tx - y), nrm(tx - T(y)))

        return GeneralizedDistance(ev, _two_k_plus_one(), _two_k_plus_one(), name="map_pullback")
    if kind == "set_restricted":
        member = params["member"]
        c = to_fraction(params["c"])
        if c <= 0:
            raise ValueError("set_restricted distance needs c > 0")
        cf = float(c)

        def ev(x, y):
            inside = member(x) & member(y)
            return np.where(inside, nrm(x - y), cf)

        def th(k):
            n0 = math.ceil(1 / (c * (k + 1))) + 1
            return monus(2 * n0 * (k + 1), 1)

        m = NatModulus(th, name="2n0(k+1)-1")
        return GeneralizedDistance(ev, m, m, symmetric=True, name="set_restricted")
    raise ValueError(f"unknown distance kind {kind!r}")


def alber_bounds_check(space: LpSpace, b, trials: int, rng=None) -> list[tuple]:
    """Sample pairs in the ``b``-ball and report violations of

    ``(2/L_high) b^2 eta(||x-y||/4b) <= phi(x,y) <= 16 b ||x-y||``.
    """
    rng = np.random.default_rng(rng)
    b = to_fraction(b)
    bf = float(b)
    x = sample_ball(space, trials, bf, rng)
    # mix far pairs with close ones at random scales
    y = sample_ball(space, trials, bf, rng)
    close = rng.random(trials) < 0.5
    scales = 10.0 ** rng.uniform(-8, 0, trials)
    y = np.where(close[:, None], x + scales[:, None] * (y - x), y)
    ph = phi_eval(space, x, y)
    dist = space.norm(x - y)
    out = []
    for i in range(trials):
        d = dist[i]
        if d == 0:
            continue
        lower = float(2 * b * b / space.L_high * space.eta(to_fraction(d) / (4 * b)))
        upper = 16 * bf * d
        if not (lower <= ph[i] * (1 + 1e-12) + 1e-15 and ph[i] <= upper):
            out.append((x[i], y[i], lower, ph[i], upper))
    return out


def sample_ball(space, n: int, radius: float, rng) -> np.ndarray:
    """``n`` points drawn uniformly from the ``p``-ball of the given radius (rejection)."""
    p = space.pf if hasattr(space, "pf") else float(space)
    d = space.dim
    out = np.empty((0, d))
    while out.shape[0] < n:
        cand = rng.uniform(-1.0, 1.0, size=(2 * n + 16, d))
        keep = cand[_pnorm(cand, p) <= 1.0]
        out = np.vstack([out, keep])
    return radius * out[:n]
