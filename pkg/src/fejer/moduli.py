"""Natural-number and real-valued moduli and the small algebra on them.

Every bound in this package is built out of functions ``N -> N`` (or
``N^2 -> N``, ``N^3 -> N``) that are composed, majorized and maxed together.
They are evaluated over Python ints so nothing ever overflows, and the
real-valued moduli work over :class:`fractions.Fraction` whenever the formula
is rational.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence


class ScanBudgetExceeded(RuntimeError):
    """Raised when a majorant would need to scan past its allowed range."""


def monus(a: int, b: int) -> int:
    """Truncated subtraction ``max(a - b, 0)``."""
    return a - b if a > b else 0


def to_fraction(x) -> Fraction:
    """Convert ints, decimal strings, ``"p/q"`` strings and floats to a Fraction.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(repr(float(x)))
    if isinstance(x, str):
        return Fraction(x.strip())
    # numpy scalars and the like
    if hasattr(x, "item"):
        return to_fraction(x.item())
    raise TypeError(f"cannot convert {type(x).__name__} to Fraction")


def ceil_sqrt(q) -> int:
    """Smallest natural ``c`` with ``c*c >= q`` for a nonnegative rational ``q``."""
    q = to_fraction(q)
    if q < 0:
        raise ValueError("negative argument")
    # c^2 >= a/b  <=>  c^2 * b >= a
    a, b = q.numerator, q.denominator
    c = math.isqrt(a // b)
    while c * c * b < a:
        c += 1
    return c


def nat(value) -> int:
    """Coerce a modulus output to a Python int and reject negatives."""
    v = int(value)
    if v != value:
        raise ValueError(f"modulus returned a non-integer {value!r}")
    if v < 0:
        raise ValueError(f"modulus returned a negative value {v}")
    return v


@dataclass(frozen=True)
class NatModulus:
    """A function from naturals to naturals of fixed arity.

    ``monotone`` declares the function nondecreasing in its first argument;
    :func:`majorize` then skips the max-scan. The flag is a promise by the
    constructor and can be spot-checked with :meth:`monotone_violations`.
    """

    fn: Callable[..., int]
    arity: int = 1
    name: str = ""
    monotone: bool = False

    def __post_init__(self):
        if self.arity not in (1, 2, 3):
            raise ValueError("arity must be 1, 2 or 3")

    def __call__(self, *args) -> int:
        if len(args) != self.arity:
            raise TypeError(f"{self.name or 'modulus'} takes {self.arity} arguments, got {len(args)}")
        return nat(self.fn(*args))

    def monotone_violations(self, grid: Iterable[int], rest: tuple = ()) -> list[tuple[int, int]]:
        """Pairs of consecutive grid points where the first argument's order is broken."""
        pts = sorted(set(grid))
        vals = [self(k, *rest) for k in pts]
        return [(pts[i], pts[i + 1]) for i in range(len(pts) - 1) if vals[i] > vals[i + 1]]

    def __repr__(self):
        return f"NatModulus({self.name or self.fn!r}, arity={self.arity})"


def as_nat_modulus(f, arity: int = 1, name: str = "", monotone: bool = False) -> NatModulus:
    if isinstance(f, NatModulus):
        return f
    if isinstance(f, int):
        c = nat(f)
        return NatModulus(lambda *a: c, arity=arity, name=name or f"const {c}", monotone=True)
    return NatModulus(f, arity=arity, name=name, monotone=monotone)


def identity() -> NatModulus:
    return NatModulus(lambda k: k, name="id", monotone=True)


def constant(c: int, arity: int = 1) -> NatModulus:
    return as_nat_modulus(c, arity=arity)


def compose(outer: NatModulus, inner: NatModulus, name: str = "") -> NatModulus:
    """``outer(inner(...))``; monotone when both are."""
    if outer.arity != 1:
        raise ValueError("outer function must be unary")
    return NatModulus(
        lambda *a: outer(inner(*a)),
        arity=inner.arity,
        name=name or f"{outer.name}∘{inner.name}",
        monotone=outer.monotone and inner.monotone,
    )


def pointwise_max(*fs: NatModulus, name: str = "") -> NatModulus:
    arity = fs[0].arity
    if any(f.arity != arity for f in fs):
        raise ValueError("arity mismatch")
    return NatModulus(
        lambda *a: max(f(*a) for f in fs),
        arity=arity,
        name=name or "max(" + ",".join(f.name for f in fs) + ")",
        monotone=all(f.monotone for f in fs),
    )


class _Majorant:
    """Running maximum in the first argument, cached per value of the others."""

    def __init__(self, f: NatModulus, scan_limit: int | None):
        self.f = f
        self.scan_limit = scan_limit
        self._cache: dict[tuple, list[int]] = {}
        self._lock = threading.Lock()

    def __call__(self, n, *rest):
        n = nat(n)
        with self._lock:
            prefix = self._cache.setdefault(rest, [])
            if n < len(prefix):
                return prefix[n]
            if self.scan_limit is not None and n > self.scan_limit:
                raise ScanBudgetExceeded(
                    f"majorant of {self.f.name or 'modulus'} needs a scan up to {n}"
                )
            best = prefix[-1] if prefix else -1
            for j in range(len(prefix), n + 1):
                v = self.f(j, *rest)
                if v > best:
                    best = v
                prefix.append(best)
            return prefix[n]


def majorize(f: NatModulus, scan_limit: int | None = None) -> NatModulus:
    """``f^M(k, *rest) = max{f(j, *rest) : j <= k}``.

    Functions declared monotone are returned unchanged. Otherwise values are
    obtained by a cached running max; ``scan_limit`` caps how far that scan may
    go (it raises :class:`ScanBudgetExceeded` beyond it).
    """
    f = as_nat_modulus(f)
    if f.monotone:
        return f
    return NatModulus(_Majorant(f, scan_limit), arity=f.arity, name=f"{f.name}^M", monotone=True)


def combine_gh(aG1, aG2, bH1, bH2) -> tuple[NatModulus, NatModulus]:
    """Moduli for ``G = max{G1, G2}`` and ``H = min{H1, H2}`` (pointwise maxima)."""
    aG1, aG2, bH1, bH2 = (as_nat_modulus(m) for m in (aG1, aG2, bH1, bH2))
    return pointwise_max(aG1, aG2, name="alphaG"), pointwise_max(bH1, bH2, name="betaH")


def _as_frac_fn(G):
    return lambda a: to_fraction(G(a))


def gh_modulus_check(G, alphaG, samples: Sequence, ks: Iterable[int] = range(21),
                     include_boundary: bool = True) -> list[tuple[int, Fraction, Fraction]]:
    """Violations ``(k, a, G(a))`` of ``a <= 1/(alphaG(k)+1) -> G(a) <= 1/(k+1)``.

    ``G`` should accept Fractions. The boundary point ``1/(alphaG(k)+1)`` is
    always tested in addition to the samples unless ``include_boundary`` is off.
    """
    alphaG = as_nat_modulus(alphaG)
    G = _as_frac_fn(G)
    samples = [to_fraction(a) for a in samples]
    out = []
    for k in ks:
        cut = Fraction(1, alphaG(k) + 1)
        pts = [a for a in samples if 0 <= a <= cut]
        if include_boundary:
            pts.append(cut)
        for a in pts:
            v = G(a)
            if v > Fraction(1, k + 1):
                out.append((k, a, v))
    return out


def h_modulus_check(H, betaH, samples: Sequence, ks: Iterable[int] = range(21),
                    include_boundary: bool = True) -> list[tuple[int, Fraction, Fraction]]:
    """Violations ``(k, a, H(a))`` of ``H(a) <= 1/(betaH(k)+1) -> a <= 1/(k+1)``."""
    betaH = as_nat_modulus(betaH)
    H = _as_frac_fn(H)
    samples = [to_fraction(a) for a in samples]
    out = []
    for k in ks:
        cut = Fraction(1, betaH(k) + 1)
        pts = list(samples)
        if include_boundary:
            pts.append(Fraction(1, k + 1))
        for a in pts:
            v = H(a)
            if v <= cut and a > Fraction(1, k + 1):
                out.append((k, a, v))
    return out


def min_partial_sum_bound(a: Sequence, A, k: int) -> Fraction:
    """Smallest of the first ``k`` terms, which cannot exceed ``A/k`` when ``sum(a) <= A``."""
    if k < 1 or len(a) < k:
        raise ValueError("need k >= 1 and at least k terms")
    vals = [to_fraction(x) for x in a]
    A = to_fraction(A)
    if any(v < 0 for v in vals):
        raise ValueError("terms must be nonnegative")
    if sum(vals) > A:
        raise ValueError("sum of the terms exceeds A")
    m = min(vals[:k])
    assert m <= A / k
    return m


@dataclass(frozen=True)
class RealModulus:
    """A map from positive rationals to positive rationals."""

    fn: Callable[[Fraction], Fraction]
    name: str = ""

    def __call__(self, eps) -> Fraction:
        e = to_fraction(eps)
        if e <= 0:
            raise ValueError("real moduli are defined on positive arguments")
        v = to_fraction(self.fn(e))
        if v <= 0:
            raise ValueError(f"{self.name or 'modulus'}({e}) = {v} is not positive")
        return v


def real_identity() -> RealModulus:
    return RealModulus(lambda e: e, name="id")


def real_scale(c, name: str = "") -> RealModulus:
    c = to_fraction(c)
    return RealModulus(lambda e: c * e, name=name or f"{c}*eps")


@dataclass(frozen=True)
class CounterFunction:
    """The counterfunction ``g`` of a metastability statement."""

    fn: Callable[[int], int]
    monotone: bool = False
    desc: str = ""

    def __call__(self, n: int) -> int:
        return nat(self.fn(n))

    @classmethod
    def const(cls, c: int) -> "CounterFunction":
        c = nat(c)
        return cls(lambda n: c, monotone=True, desc=f"const:{c}")

    @classmethod
    def linear(cls, a: int, b: int) -> "CounterFunction":
        a, b = nat(a), nat(b)
        return cls(lambda n: a * n + b, monotone=True, desc=f"linear:{a},{b}")

    @classmethod
    def parse(cls, desc: str) -> "CounterFunction":
        """Parse ``const:c`` or ``linear:a,b`` (meaning ``a*n + b``)."""
        kind, _, arg = desc.partition(":")
        kind = kind.strip()
        try:
            if kind == "const":
                return cls.const(int(arg))
            if kind == "linear":
                a, b = (int(t) for t in arg.split(","))
                return cls.linear(a, b)
        except ValueError as exc:
            raise ValueError(f"bad counterfunction descriptor {desc!r}") from exc
        raise ValueError(f"bad counterfunction descriptor {desc!r}")

    def shifted(self, s: int, c: int) -> "CounterFunction":
        """``n -> g(n+s) + c``."""
        return CounterFunction(lambda n: self(n + s) + c, monotone=self.monotone,
                               desc=f"{self.desc}(n+{s})+{c}")


@dataclass(frozen=True)
class StepFunction:
    """A nondecreasing ``f`` with ``f(n) <= n`` and an optional rate of divergence."""

    fn: Callable[[int], int]
    kappa: NatModulus | None = None
    name: str = ""

    def __call__(self, n: int) -> int:
        return nat(self.fn(n))

    @classmethod
    def identity(cls) -> "StepFunction":
        return cls(lambda n: n, NatModulus(lambda L: L, name="id", monotone=True), name="id")

    @classmethod
    def lag(cls, s: int) -> "StepFunction":
        """``n -> n ∸ s`` with divergence rate ``L -> L + s``."""
        return cls(lambda n: monus(n, s), NatModulus(lambda L: L + s, name=f"L+{s}", monotone=True),
                   name=f"n-{s}")

    def violations(self, n_max: int, L_max: int = 50) -> list[str]:
        out = []
        prev = None
        for n in range(n_max + 1):
            v = self(n)
            if v > n:
                out.append(f"f({n})={v} > {n}")
            if prev is not None and v < prev:
                out.append(f"f decreases at {n}")
            prev = v
        if self.kappa is not None:
            for L in range(L_max + 1):
                start = self.kappa(L)
                for n in range(start, start + 20):
                    if self(n) < L:
                        out.append(f"f({n}) < {L} although n >= kappa({L})")
                        break
        return out


@dataclass(frozen=True)
class ErrorSchedule:
    """Summable nonnegative errors ``eps`` with a Cauchy rate ``xi`` for their series."""

    eps: Callable[[int], Fraction]
    xi: NatModulus | None = None
    name: str = ""
    zero: bool = False

    def __call__(self, n: int) -> Fraction:
        return to_fraction(self.eps(n))

    @classmethod
    def none(cls) -> "ErrorSchedule":
        return cls(lambda n: Fraction(0), NatModulus(lambda k: 0, name="0", monotone=True),
                   name="zero", zero=True)

    def partial_sum(self, a: int, b: int) -> Fraction:
        """``sum_{i=a}^{b} eps_i`` (empty when ``b < a``)."""
        if self.zero:
            return Fraction(0)
        return sum((self(i) for i in range(a, b + 1)), Fraction(0))

    def prefix_sums(self, n: int) -> list[float]:
        """Floating prefix sums ``S[j] = sum_{i<j} eps_i`` for ``j <= n``."""
        out = [0.0]
        for i in range(n):
            out.append(out[-1] + float(self(i)))
        return out
