"""Generalized (quasi-)Fejer monotonicity: data, empirical checkers and the
conversions between the various moduli.

A *partially* quasi-Fejer sequence only needs its even-indexed elements to be
quasi-Fejer; the odd-indexed ones are tied to earlier even ones through a
step function ``f`` (``f``-monotonicity). The checkers below evaluate the
defining inequalities on recorded data and report every violation they find.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .distances import GeneralizedDistance
from .moduli import ErrorSchedule, NatModulus, StepFunction, as_nat_modulus


@dataclass(frozen=True)
class ApproximationFamily:
    """The sets ``AF_k`` of ``k``-good approximate solutions.

    Either residual-defined (``x in AF_k`` iff ``residual(x) <= 1/(k+1)``,
    optionally intersected with ``domain``) or given by an explicit predicate.
    """

    residual: Callable | None = None
    member_fn: Callable[[int, np.ndarray], bool] | None = None
    domain: Callable[[np.ndarray], bool] | None = None

    def member(self, k: int, x) -> bool:
        x = np.asarray(x, dtype=float)
        if self.domain is not None and not self.domain(x):
            return False
        if self.member_fn is not None:
            return bool(self.member_fn(k, x))
        return float(self.residual(x)) <= 1.0 / (k + 1)


class MemoSequence:
    """Thread-safe memoized view of ``n -> x_n``.

    Accepts an array-like (fixed length), an object with ``point(n)`` (lazy
    iteration runs), or a plain callable.
    """

    def __init__(self, src):
        self._lock = threading.Lock()
        self._cache: dict[int, np.ndarray] = {}
        if hasattr(src, "point"):
            self._fn = src.point
            self._len = None
        elif callable(src):
            self._fn = src
            self._len = None
        else:
            arr = np.asarray(src, dtype=float)
            if arr.ndim == 1:
                arr = arr[:, None]
            self._fn = lambda n: arr[n]
            self._len = arr.shape[0]

    def __len__(self):
        if self._len is None:
            raise TypeError("unbounded sequence")
        return self._len

    @property
    def bounded(self) -> bool:
        return self._len is not None

    def __getitem__(self, n: int) -> np.ndarray:
        if n < 0 or (self._len is not None and n >= self._len):
            raise IndexError(n)
        with self._lock:
            v = self._cache.get(n)
            if v is None:
                v = np.asarray(self._fn(n), dtype=float)
                v.setflags(write=False)
                self._cache[n] = v
            return v

    def block(self, idx: Iterable[int]) -> np.ndarray:
        return np.stack([self[i] for i in idx])


def _identity(t):
    return t


@dataclass
class FejerInstance:
    """A candidate partially quasi-Fejer sequence together with its moduli.

    ``dist`` is either one :class:`GeneralizedDistance` (used for every index)
    or a callable ``n -> GeneralizedDistance``. ``G`` and ``H`` act on
    floats. Moduli that are not needed for a given check may stay ``None``.
    """

    seq: object
    dist: object
    G: Callable = _identity
    H: Callable = _identity
    alphaG: NatModulus | None = None
    betaH: NatModulus | None = None
    family: ApproximationFamily | None = None
    f: StepFunction = field(default_factory=StepFunction.identity)
    errors: ErrorSchedule = field(default_factory=ErrorSchedule.none)
    chi: NatModulus | None = None
    zeta: NatModulus | None = None
    Phi: NatModulus | None = None
    omega: NatModulus | None = None
    delta: NatModulus | None = None
    gamma: NatModulus | None = None

    def __post_init__(self):
        if not isinstance(self.seq, MemoSequence):
            self.seq = MemoSequence(self.seq)

    def dist_at(self, n: int) -> GeneralizedDistance:
        return self.dist(n) if not isinstance(self.dist, GeneralizedDistance) else self.dist

    def _phi(self, p, n: int) -> float:
        return float(self.dist_at(n)(p, self.seq[n]))

    def _applyGH(self, fn, vals):
        if fn is _identity:
            return np.asarray(vals, dtype=float)
        return np.array([float(fn(v)) for v in vals])


@dataclass
class CheckReport:
    """Outcome of an empirical check: all violations plus bookkeeping."""

    name: str
    violations: list = field(default_factory=list)
    checked: int = 0
    min_slack: float = math.inf
    witnesses: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def vacuous(self) -> bool:
        return self.checked == 0

    def note(self, slack: float, tol: float, witness) -> None:
        self.checked += 1
        if slack < self.min_slack:
            self.min_slack = slack
        if slack < -tol:
            self.violations.append(witness)


def _error_prefix(inst: FejerInstance, n: int) -> np.ndarray:
    return np.asarray(inst.errors.prefix_sums(n), dtype=float)


def check_quasi_fejer(inst: FejerInstance, solutions, n_max: int, tol: float = 0.0) -> CheckReport:
    """``H(phi_{2j}(p, x_{2j})) <= G(phi_{2n}(p, x_{2n})) + sum_{i=n}^{j-1} eps_i``.

    Checked for all ``n <= j <= n_max`` and every given solution ``p``.
    Violations are reported as ``(p_index, n, m)`` with ``j = n + m``.
    """
    rep = CheckReport("quasi_fejer")
    S = _error_prefix(inst, n_max + 1)
    for pi, p in enumerate(solutions):
        vals = np.array([inst._phi(p, 2 * j) for j in range(n_max + 1)])
        lhs = inst._applyGH(inst.H, vals)
        base = inst._applyGH(inst.G, vals)
        # slack[n, j] = base[n] + S[j] - S[n] - lhs[j]
        slack = base[:, None] + S[None, : n_max + 1] - S[: n_max + 1, None] - lhs[None, :]
        upper = np.triu(np.ones_like(slack, dtype=bool))
        rep.checked += int(upper.sum())
        rep.min_slack = min(rep.min_slack, float(slack[upper].min()))
        bad = np.argwhere(upper & (slack < -tol))
        for n, j in bad:
            rep.violations.append((pi, int(n), int(j - n)))
    return rep


def check_f_monotone(inst: FejerInstance, solutions, n_max: int, tol: float = 0.0) -> CheckReport:
    """``H(phi_{2j+1}(p, x_{2j+1})) <= G(phi_{2f(n)}(p, x_{2f(n)})) + sum_{i=f(n)}^{j} eps_i``.

    Checked for all ``n <= j <= n_max``; violations are ``(p_index, n, m)``.
    """
    rep = CheckReport("f_monotone")
    S = _error_prefix(inst, n_max + 2)
    fn = [inst.f(n) for n in range(n_max + 1)]
    for pi, p in enumerate(solutions):
        odd = np.array([inst._phi(p, 2 * j + 1) for j in range(n_max + 1)])
        even = np.array([inst._phi(p, 2 * j) for j in range(n_max + 1)])
        lhs = inst._applyGH(inst.H, odd)
        base = inst._applyGH(inst.G, even)
        for n in range(n_max + 1):
            j = np.arange(n, n_max + 1)
            slack = base[fn[n]] + S[j + 1] - S[fn[n]] - lhs[j]
            rep.checked += len(j)
            rep.min_slack = min(rep.min_slack, float(slack.min()))
            for jj in j[slack < -tol]:
                rep.violations.append((pi, n, int(jj - n)))
    return rep


def check_uniform_modulus(inst: FejerInstance, which: str, grid: Iterable[tuple[int, int, int]],
                          sample_points, tol: float = 0.0) -> CheckReport:
    """Test a modulus of uniform quasi-Fejer (``which="chi"``) or uniform
    quasi-``f``-monotonicity (``which="zeta"``) on sampled approximate solutions.

    For each ``(n, m, r)`` and each sample ``p`` in ``AF_{chi(n,m,r)}`` and
    each ``l <= m``:

    * chi: ``H(phi_{2(n+l)}(p, x_{2(n+l)})) < G(phi_{2n}(p, x_{2n})) + sum_{i=n}^{n+l-1} eps_i + 1/(r+1)``
    * zeta: ``H(phi_{2(n+l)+1}(p, x_{2(n+l)+1})) < G(phi_{2f(n)}(p, x_{2f(n)})) + sum_{i=f(n)}^{n+l} eps_i + 1/(r+1)``

    The strict inequality is tested non-strictly up to ``tol``.
    """
    if which not in ("chi", "zeta"):
        raise ValueError("which must be 'chi' or 'zeta'")
    mod = inst.chi if which == "chi" else inst.zeta
    if mod is None or inst.family is None:
        raise ValueError(f"instance has no {which} modulus or no approximation family")
    rep = CheckReport(f"uniform_{which}")
    samples = [np.asarray(p, dtype=float) for p in sample_points]
    eps = inst.errors
    for n, m, r in grid:
        k = mod(n, m, r)
        inside = [p for p in samples if inst.family.member(k, p)]
        if not inside:
            continue
        extra = 1.0 / (r + 1)
        for p in inside:
            if which == "chi":
                base = float(inst.G(inst._phi(p, 2 * n)))
                for l in range(m + 1):
                    lhs = float(inst.H(inst._phi(p, 2 * (n + l))))
                    rhs = base + float(eps.partial_sum(n, n + l - 1)) + extra
                    rep.note(rhs - lhs, tol, (n, m, r, l, tuple(p)))
            else:
                fn = inst.f(n)
                base = float(inst.G(inst._phi(p, 2 * fn)))
                for l in range(m + 1):
                    lhs = float(inst.H(inst._phi(p, 2 * (n + l) + 1)))
                    rhs = base + float(eps.partial_sum(fn, n + l)) + extra
                    rep.note(rhs - lhs, tol, (n, m, r, l, tuple(p)))
    return rep


def check_approx_point_bound(inst: FejerInstance, ks: Iterable[int], stride: int = 2) -> CheckReport:
    """``exists n <= Phi(k)`` with ``x_{stride*n} in AF_k``; violation entries are ``k``.

    The witness recorded for each ``k`` is the smallest such ``n``.
    """
    rep = CheckReport("approx_point_bound")
    for k in ks:
        bound = inst.Phi(k)
        found = None
        n = 0
        while n <= bound:
            try:
                x = inst.seq[stride * n]
            except IndexError:
                break
            if inst.family.member(k, x):
                found = n
                break
            n += 1
        rep.checked += 1
        if found is None:
            rep.violations.append(k)
        else:
            rep.witnesses[k] = found
            rep.min_slack = min(rep.min_slack, float(bound - found))
    return rep


# --------------------------------------------------------------------------
# conversions between moduli


@dataclass(frozen=True)
class PartialModuli:
    chi: NatModulus
    eta: NatModulus
    errors: ErrorSchedule


def derive_partial_from_full(chi, eps: ErrorSchedule) -> PartialModuli:
    """From a modulus for a fully quasi-Fejer sequence to the partial data.

    ``chi'(n,m,r) = chi(2n, 2m, r)`` serves the even subsequence,
    ``eta(n,m,r) = chi(2n, 2m+1, r)`` the odd elements (with ``f = id``),
    and the errors are paired up: ``eps~_n = eps_{2n} + eps_{2n+1}`` with
    Cauchy rate ``xi~(k) = ceil(xi(k)/2)``.
    """
    chi = as_nat_modulus(chi, arity=3)
    chi_p = NatModulus(lambda n, m, r: chi(2 * n, 2 * m, r), arity=3, name="chi'")
    eta = NatModulus(lambda n, m, r: chi(2 * n, 2 * m + 1, r), arity=3, name="eta")
    xi = eps.xi
    xi_t = None if xi is None else NatModulus(lambda k: -(-xi(k) // 2), name="xi~", monotone=xi.monotone)
    errs = ErrorSchedule(lambda n: eps(2 * n) + eps(2 * n + 1), xi_t, name="paired", zero=eps.zero)
    return PartialModuli(chi_p, eta, errs)


def mixed_gh_f_modulus(chi, zeta2, f: StepFunction) -> NatModulus:
    """``zeta^(n,m,r) = max{chi(f(n), f(n+m) - f(n), 2r+1), zeta(n+m, 2r+1)}``."""
    chi = as_nat_modulus(chi, arity=3)
    zeta2 = as_nat_modulus(zeta2, arity=2)

    def fn(n, m, r):
        a, b = f(n), f(n + m)
        return max(chi(a, b - a, 2 * r + 1), zeta2(n + m, 2 * r + 1))

    return NatModulus(fn, arity=3, name="zeta^")


class HatSequence:
    """``a^_n = a_n`` for ``n >= s`` or even ``n``; ``a_{n-1}`` for odd ``n < s``."""

    def __init__(self, a, s: int):
        self.a = a
        self.s = s

    def index(self, n: int) -> int:
        return n - 1 if (n < self.s and n % 2 == 1) else n

    def __getitem__(self, n: int):
        return self.a[self.index(n)]

    def __len__(self):
        return len(self.a)

    def point(self, n: int):
        return self[n]


@dataclass(frozen=True)
class ShiftResult:
    s: int
    f: StepFunction
    zeta_hat: NatModulus | None
    Phi_prime: NatModulus | None
    hat: HatSequence | None

    def hat_of(self, a) -> HatSequence:
        return HatSequence(a, self.s)


def affine_shift(s: int, seq=None, zeta=None, chi=None, Phi=None) -> ShiftResult:
    """Turn a sequence whose odd elements are controlled with offset ``s`` into an
    ``f``-monotone one via the hat-sequence.

    With ``s = 2s' + 1``: ``f(n) = n ∸ s'`` (divergence rate ``L + s'``),
    ``zeta^(n,m,r) = max{zeta(n,m,r), chi(0,s',r)}`` and ``Phi'(k) = Phi(k) + s'``.
    """
    if s < 1 or s % 2 == 0:
        raise ValueError("the offset s must be odd")
    sp = (s - 1) // 2
    f = StepFunction.lag(sp)
    zeta_hat = None
    if zeta is not None and chi is not None:
        zeta = as_nat_modulus(zeta, arity=3)
        chi = as_nat_modulus(chi, arity=3)
        zeta_hat = NatModulus(lambda n, m, r: max(zeta(n, m, r), chi(0, sp, r)), arity=3, name="zeta^")
    Phi_p = None
    if Phi is not None:
        Phi = as_nat_modulus(Phi)
        Phi_p = NatModulus(lambda k: Phi(k) + sp, name="Phi'", monotone=Phi.monotone)
    hat = HatSequence(seq, s) if seq is not None else None
    return ShiftResult(s, f, zeta_hat, Phi_p, hat)


def convert_tb_modulus(mod, theta, direction: str) -> NatModulus:
    """Switch between cover-style and sequence-style total boundedness moduli.

    ``cover->sequence``: ``gamma(k) = alpha(theta(k)) + 1``;
    ``sequence->cover``: ``alpha(k) = gamma(theta(k)) - 1`` (needs ``gamma >= 1``).
    """
    mod = as_nat_modulus(mod)
    theta = as_nat_modulus(theta)
    if direction == "cover->sequence":
        return NatModulus(lambda k: mod(theta(k)) + 1, name="gamma")
    if direction == "sequence->cover":
        def fn(k):
            v = mod(theta(k))
            if v == 0:
                raise ValueError("gamma(theta(k)) = 0, no cover can be read off")
            return v - 1
        return NatModulus(fn, name="alpha")
    raise ValueError(f"unknown direction {direction!r}")


def convert_closedness_and_tb(gamma, omega, delta, lam, Lam):
    """Metric moduli to ``phi``-moduli: ``(gamma o Lam, lam o omega, delta)``."""
    gamma, omega, delta, lam, Lam = (as_nat_modulus(m) for m in (gamma, omega, delta, lam, Lam))
    g2 = NatModulus(lambda k: gamma(Lam(k)), name="gamma'")
    w2 = NatModulus(lambda k: lam(omega(k)), name="omega'")
    return g2, w2, delta


def pigeonhole_witness(points: np.ndarray, dist: GeneralizedDistance, k: int, count: int):
    """First pair ``i < j < count`` with ``dist(x_j, x_i) <= 1/(k+1)``, or ``None``."""
    pts = np.asarray(points, dtype=float)[:count]
    thr = 1.0 / (k + 1)
    for j in range(1, len(pts)):
        d = dist(pts[j][None, :], pts[:j])
        hit = np.nonzero(d <= thr)[0]
        if hit.size:
            return int(hit[0]), j
    return None


def check_closedness(family: ApproximationFamily, dist: GeneralizedDistance, omega, delta,
                     pairs, ks: Iterable[int]) -> CheckReport:
    """``q in AF_{delta(k)}`` and ``dist(q, p) <= 1/(omega(k)+1)`` imply ``p in AF_k``."""
    omega = as_nat_modulus(omega)
    delta = as_nat_modulus(delta)
    rep = CheckReport("closedness")
    for k in ks:
        dk, wk = delta(k), omega(k)
        for q, p in pairs:
            if family.member(dk, q) and float(dist(q, p)) <= 1.0 / (wk + 1):
                rep.checked += 1
                if not family.member(k, p):
                    rep.violations.append((k, tuple(q), tuple(p)))
    return rep
