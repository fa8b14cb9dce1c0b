"""Exact evaluation of rates of metastability and rates of convergence.

A rate of metastability is obtained from a recursion

    Psi_0(0) = 0,   Psi_0(n+1) = Phi(eta^M(Psi_0(n), r0), k_hat),

iterated ``P`` times and doubled. All quantities are Python ints. Because
``P`` and the iterates can be astronomically large, evaluation stops early
in two harmless situations and one budgeted one:

* the iterate hits a fixed point of the step map (then every later value
  is the same, so the result is exact);
* ``P`` steps are done;
* the step budget or the bit-size budget runs out. If the step map is known
  to be monotone the iterates are nondecreasing, so the last iterate is a
  certified lower bound of the true value and the result is flagged inexact.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .moduli import (CounterFunction, NatModulus, RealModulus, ScanBudgetExceeded, StepFunction,
                     as_nat_modulus, majorize, nat, to_fraction)

DEFAULT_BUDGET = 10 ** 6
DEFAULT_MAX_BITS = 1 << 18

VARIANTS = ("general", "with-closedness", "single-distance", "single-distance-error-free",
            "metric-version")


class RateBudgetError(RuntimeError):
    """The budget ran out and no lower bound could be certified."""


class MetastabilityNotFound(RuntimeError):
    """No index with the metastability property inside the recorded range."""

    def __init__(self, msg: str, required_length: int | None = None):
        super().__init__(msg)
        self.required_length = required_length


@dataclass(frozen=True)
class RateResult:
    """Value of a rate. When ``exact`` is false, ``value`` is a certified lower bound."""

    value: int
    exact: bool = True
    steps: int = 0
    trace: Optional[tuple] = None
    reason: str = ""

    def __int__(self):
        return self.value

    def certifies_at_least(self, N: int) -> bool:
        """Whether the true value is known to be ``>= N``."""
        return self.value >= N

    def map(self, fn: Callable[[int], int]) -> "RateResult":
        """Apply a nondecreasing ``fn`` to the value (keeps lower bounds valid)."""
        return replace(self, value=fn(self.value))


def iterate_recursion(P: int, step: Callable[[int], int], monotone: bool,
                      budget: int = DEFAULT_BUDGET, max_bits: int = DEFAULT_MAX_BITS,
                      keep_trace: bool = False) -> RateResult:
    """``v_0 = 0``, ``v_{n+1} = step(v_n)``; returns ``v_P``.

    ``monotone`` states that ``step`` is nondecreasing, which makes the
    iterates nondecreasing and lets an early stop certify a lower bound.
    """
    P = nat(P)
    v = 0
    trace = [0] if keep_trace else None
    i = 0
    while i < P:
        stop = ""
        if i >= budget:
            stop = f"step budget {budget} reached"
        elif v.bit_length() > max_bits:
            stop = f"iterate exceeds {max_bits} bits"
        if not stop:
            try:
                nv = step(v)
            except ScanBudgetExceeded as exc:
                stop = str(exc)
        if stop:
            if not monotone:
                raise RateBudgetError(stop + " and the step map is not known to be monotone")
            return RateResult(v, exact=False, steps=i, trace=tuple(trace) if keep_trace else None,
                              reason=stop)
        i += 1
        if keep_trace:
            trace.append(nv)
        if nv == v:
            # fixed point: all later iterates coincide
            break
        v = nv
    return RateResult(v, exact=True, steps=i, trace=tuple(trace) if keep_trace else None)


@dataclass(frozen=True)
class MetastabilityInputs:
    """Everything a metastability rate is assembled from.

    ``Phi`` is binary (liminf bound, level then start index) except in the
    error-free single-distance variant where it is a unary approximate-point
    bound. ``eta`` may be given directly, otherwise it is built from ``chi``,
    ``zeta``, ``f`` and ``g``. ``eta_monotone`` declares eta nondecreasing in
    its first argument, so its majorant need not be scanned.
    """

    k: int
    g: CounterFunction
    gamma: NatModulus
    Phi: NatModulus
    alphaG: NatModulus = field(default_factory=lambda: NatModulus(lambda k: k, name="id", monotone=True))
    betaH: NatModulus = field(default_factory=lambda: NatModulus(lambda k: k, name="id", monotone=True))
    A: NatModulus = field(default_factory=lambda: NatModulus(lambda k: k, name="id", monotone=True))
    theta: NatModulus = field(default_factory=lambda: NatModulus(lambda k: k, name="id", monotone=True))
    chi: NatModulus | None = None
    zeta: NatModulus | None = None
    f: StepFunction = field(default_factory=StepFunction.identity)
    xi: NatModulus | None = None
    kappa: NatModulus | None = None
    pi: NatModulus | None = None
    omega: NatModulus | None = None
    delta: NatModulus | None = None
    eta: NatModulus | None = None
    eta_monotone: bool = False
    variant: str = "general"


def _require(inp: MetastabilityInputs, names):
    missing = [n for n in names if getattr(inp, n) is None]
    if missing:
        raise ValueError(f"variant {inp.variant!r} needs the moduli {', '.join(missing)}")


def build_eta(inp: MetastabilityInputs) -> NatModulus:
    """``eta(n,r) = max{chi(n, g~, r), zeta(n, g~, r), chi(f(n), n-f(n), 4 betaH(alphaG(r)) + 3)}``
    with ``g~ = floor(g(2n)/2)``."""
    if inp.eta is not None:
        return as_nat_modulus(inp.eta, arity=2, monotone=inp.eta_monotone)
    _require(inp, ("chi", "zeta"))
    chi, zeta, f, g, aG, bH = inp.chi, inp.zeta, inp.f, inp.g, inp.alphaG, inp.betaH

    def eta(n, r):
        half = g(2 * n) // 2
        fn = f(n)
        return max(chi(n, half, r), zeta(n, half, r), chi(fn, n - fn, 4 * bH(aG(r)) + 3))

    return NatModulus(eta, arity=2, name="eta", monotone=inp.eta_monotone)


@dataclass(frozen=True)
class _Constants:
    theta_k: int
    r0: int  # 4 betaH(A(theta(k))) + 3
    c1: int
    c2: int
    P: int


def _constants(inp: MetastabilityInputs, theta: NatModulus) -> _Constants:
    aG, bH, A = inp.alphaG, inp.betaH, inp.A
    t = theta(inp.k)
    r0 = 4 * bH(A(t)) + 3
    c1 = 2 * aG(r0) + 1
    c2 = 2 * aG(2 * bH(aG(r0)) + 1) + 1
    P = inp.gamma(max(c1, c2))
    return _Constants(t, r0, c1, c2, P)


def _k_hat(inp: MetastabilityInputs, c: _Constants, with_pi: bool) -> int:
    aG, bH, A, xi, kappa = inp.alphaG, inp.betaH, inp.A, inp.xi, inp.kappa
    s = 2 * bH(A(c.theta_k)) + 1
    terms = [kappa(xi(4 * bH(aG(c.r0)) + 3)), xi(s), kappa(xi(s))]
    if with_pi:
        terms.append(kappa(inp.pi(max(c.c2, c.c1))))
    return max(terms)


def _closed(inp: MetastabilityInputs):
    """theta~ = max{theta, omega} and eta~ = max{delta(k), eta}."""
    _require(inp, ("omega", "delta"))
    theta, omega = inp.theta, inp.omega
    theta_t = NatModulus(lambda k: max(theta(k), omega(k)), name="theta~",
                         monotone=theta.monotone and omega.monotone)
    eta = build_eta(inp)
    dk = inp.delta(inp.k)
    eta_t = NatModulus(lambda n, r: max(dk, eta(n, r)), arity=2, name="eta~", monotone=eta.monotone)
    return theta_t, eta_t


def _run(inp, theta, eta, unary_phi: bool, with_pi: bool, errors: bool, budget, max_bits,
         keep_trace) -> RateResult:
    c = _constants(inp, theta)
    if c.P == 0:
        return RateResult(0, exact=True, steps=0, trace=(0,) if keep_trace else None)
    etaM = majorize(eta, scan_limit=budget)
    r0 = c.r0
    Phi = inp.Phi
    if unary_phi:
        step = lambda v: Phi(etaM(v, r0))
    else:
        kh = _k_hat(inp, c, with_pi) if errors else 0
        step = lambda v: Phi(etaM(v, r0), kh)
    res = iterate_recursion(c.P, step, monotone=Phi.monotone, budget=budget, max_bits=max_bits,
                            keep_trace=keep_trace)
    return res.map(lambda v: 2 * v)


def psi_general(inp: MetastabilityInputs, budget: int = DEFAULT_BUDGET,
                max_bits: int = DEFAULT_MAX_BITS, keep_trace: bool = False) -> RateResult:
    """``Psi(k,g) = 2 Psi_0(P,k,g)`` for partially quasi-Fejer sequences with a
    changing distance (needs ``xi``, ``kappa`` and ``pi``)."""
    _require(inp, ("xi", "kappa", "pi"))
    if inp.Phi.arity != 2:
        raise ValueError("the liminf bound Phi must be binary")
    return _run(inp, inp.theta, build_eta(inp), False, True, True, budget, max_bits, keep_trace)


def psi_with_closedness(inp: MetastabilityInputs, budget: int = DEFAULT_BUDGET,
                        max_bits: int = DEFAULT_MAX_BITS, keep_trace: bool = False) -> RateResult:
    """As :func:`psi_general` with ``theta~ = max{theta, omega}`` and
    ``eta~(n,r) = max{delta(k), eta(n,r)}``; also bounds membership in ``AF_k``."""
    _require(inp, ("xi", "kappa", "pi"))
    theta_t, eta_t = _closed(inp)
    return _run(inp, theta_t, eta_t, False, True, True, budget, max_bits, keep_trace)


def psi_single(inp: MetastabilityInputs, error_free: bool | None = None, closedness: bool = False,
               budget: int = DEFAULT_BUDGET, max_bits: int = DEFAULT_MAX_BITS,
               keep_trace: bool = False) -> RateResult:
    """Rate for a single (unchanging) distance.

    With errors, ``k_hat`` drops the ``pi`` term. Without errors ``Phi`` is a
    unary approximate-point bound and ``Psi_0(n+1) = Phi(eta^M(Psi_0(n), r0))``.
    ``closedness`` applies the ``theta~``/``eta~`` substitutions.
    """
    if error_free is None:
        error_free = inp.variant == "single-distance-error-free"
    if closedness:
        theta, eta = _closed(inp)
    else:
        theta, eta = inp.theta, build_eta(inp)
    if error_free:
        if inp.Phi.arity != 1:
            raise ValueError("the approximate-point bound Phi must be unary")
        return _run(inp, theta, eta, True, False, False, budget, max_bits, keep_trace)
    _require(inp, ("xi", "kappa"))
    return _run(inp, theta, eta, False, False, True, budget, max_bits, keep_trace)


def psi_metric(inp: MetastabilityInputs, lam: NatModulus, Lam: NatModulus, psi_lam: NatModulus | None = None,
               closedness: bool = False, budget: int = DEFAULT_BUDGET, max_bits: int = DEFAULT_MAX_BITS,
               keep_trace: bool = False) -> RateResult:
    """Rate when total boundedness is only known for the metric.

    ``gamma' = gamma o Lam``. When ``closedness`` is requested and the
    closedness moduli are metric ones, ``psi_lam`` (the consistency modulus
    of ``psi``) turns them into ``omega' = psi_lam o omega``, ``delta' = delta``.
    ``lam`` is accepted for symmetry with the consistency pair.
    """
    gamma = inp.gamma
    new = replace(inp, gamma=NatModulus(lambda k: gamma(Lam(k)), name="gamma'"))
    if closedness:
        if psi_lam is not None:
            omega = inp.omega
            new = replace(new, omega=NatModulus(lambda k: psi_lam(omega(k)), name="omega'"))
        return psi_with_closedness(new, budget, max_bits, keep_trace)
    return psi_general(new, budget, max_bits, keep_trace)


# --------------------------------------------------------------------------
# full rates from a modulus of regularity


@dataclass(frozen=True)
class RegularityInputs:
    """Inputs of a rate of convergence obtained from a modulus of regularity ``rho``.

    ``tau`` takes ``(eps, n)`` (``tau_arity=2``) or just ``eps``; the real
    moduli default to the identity.
    """

    rho: RealModulus
    tau: Callable
    tau_arity: int = 2
    alphaG: RealModulus = field(default_factory=lambda: RealModulus(lambda e: e, "id"))
    betaH: RealModulus = field(default_factory=lambda: RealModulus(lambda e: e, "id"))
    A: RealModulus = field(default_factory=lambda: RealModulus(lambda e: e, "id"))
    theta: RealModulus = field(default_factory=lambda: RealModulus(lambda e: e, "id"))
    xi: Callable | None = None
    kappa: Callable | None = None
    pi: Callable | None = None
    Lambda: RealModulus | None = None


def translated_regularity(rho: RealModulus, Lam: RealModulus) -> RealModulus:
    """``rho'(eps) = rho(Lam(eps/2))``."""
    return RealModulus(lambda e: rho(Lam(e / 2)), name="rho'")


def mu_rate(inp: RegularityInputs, delta, variant: str = "general") -> int:
    """Index bound ``mu(delta)``; the sequence satisfies ``psi(x_n, x_m) < delta``
    for ``n, m >= 2 mu(delta)``.

    variants: ``general``, ``single``, ``single-error-free`` and ``metric``
    (``rho`` replaced by ``rho'``; the remaining shape is picked from what is
    supplied: unary ``tau`` means error free, no ``pi`` means single).
    """
    d = to_fraction(delta)
    rho = inp.rho
    shape = variant
    if variant == "metric":
        if inp.Lambda is None:
            raise ValueError("metric variant needs Lambda")
        rho = translated_regularity(inp.rho, inp.Lambda)
        if inp.tau_arity == 1:
            shape = "single-error-free"
        elif inp.pi is None:
            shape = "single"
        else:
            shape = "general"
    D = inp.betaH(inp.A(inp.theta(d))) / 2
    e = rho(inp.alphaG(D) / 2)
    if shape == "single-error-free":
        if inp.tau_arity != 1:
            raise ValueError("error-free variant needs a unary tau")
        return nat(inp.tau(e))
    if inp.tau_arity != 2:
        raise ValueError("variants with errors need a binary tau")
    if inp.xi is None or inp.kappa is None:
        raise ValueError(f"variant {variant!r} needs xi and kappa")
    start = nat(inp.kappa(nat(inp.xi(D))))
    if shape == "general":
        if inp.pi is None:
            raise ValueError("general variant needs pi")
        start = max(start, nat(inp.kappa(nat(inp.pi(inp.alphaG(D) / 2)))))
    elif shape != "single":
        raise ValueError(f"unknown variant {variant!r}")
    return nat(inp.tau(e, start))


# --------------------------------------------------------------------------
# brute force


def brute_force_metastability(run, psi_dist, family, k: int, g: CounterFunction,
                              require_membership: bool = True, limit: int | None = None) -> int:
    """Smallest ``N`` with ``psi(x_i, x_j) <= 1/(k+1)`` for all ``i, j`` in
    ``[N, N + g(N)]`` (and ``x_i in AF_k`` when membership is required).

    Only windows inside the first ``limit`` points are examined (default: the
    recorded length of ``run``).
    """
    from .framework import MemoSequence

    seq = run if isinstance(run, MemoSequence) else MemoSequence(run)
    if limit is None:
        limit = len(run) if hasattr(run, "__len__") else len(seq)
    thr = 1.0 / (k + 1)
    pts = seq.block(range(limit)) if limit else np.zeros((0, 1))
    if require_membership:
        bad = np.array([0 if family.member(k, pts[i]) else 1 for i in range(limit)], dtype=np.int64)
    else:
        bad = np.zeros(limit, dtype=np.int64)
    bad_prefix = np.concatenate([[0], np.cumsum(bad)])
    shortest_missing = None
    for N in range(limit):
        end = N + g(N)
        if end >= limit:
            if shortest_missing is None or end + 1 < shortest_missing:
                shortest_missing = end + 1
            continue
        if bad_prefix[end + 1] - bad_prefix[N]:
            continue
        win = pts[N:end + 1]
        if np.any(np.asarray(psi_dist(win[0][None, :], win)) > thr):
            continue
        ok = True
        for i in range(len(win)):
            row = np.asarray(psi_dist(win[i][None, :], win))
            if np.any(row > thr):
                ok = False
                break
        if ok:
            return N
    raise MetastabilityNotFound(
        f"not found within recorded range of {limit} points"
        + (f"; a window needs length {shortest_missing}" if shortest_missing else ""),
        required_length=shortest_missing,
    )
