"""Randomized self-checks of the library: duality identities, consistency
moduli, the rate recursions against the straight-line replay, and the
conversions between moduli.

Each suite returns a :class:`CheckReport` so the harness can turn it into a
result row. All randomness flows from the ``rng`` argument.
"""
from __future__ import annotations

from dataclasses import replace
from fractions import Fraction

import numpy as np

from .distances import (GeneralizedDistance, LpSpace, bregman_distance, duality_map, duality_map_inverse,
                        phi_consistency_moduli, phi_consistency_moduli_nat, phi_eval, sample_ball)
from .framework import (ApproximationFamily, CheckReport, FejerInstance, MemoSequence, affine_shift,
                        check_approx_point_bound, check_closedness, check_uniform_modulus,
                        convert_closedness_and_tb, convert_tb_modulus, derive_partial_from_full,
                        mixed_gh_f_modulus, pigeonhole_witness)
from .hilbert import gamma_box
from .moduli import CounterFunction, ErrorSchedule, NatModulus, StepFunction
from .rates import MetastabilityInputs, psi_general, psi_single, psi_with_closedness
from . import replay


# --------------------------------------------------------------------------
# duality map and consistency moduli


def duality_suite(rng, trials: int = 1000, ps=(2, 3, 4), dims=(2, 5)) -> CheckReport:
    """``<x,Jx> = ||x||^2``, ``||Jx||_q = ||x||`` and ``J^{-1} J = id`` on random points."""
    rng = np.random.default_rng(rng)
    rep = CheckReport("duality")
    for p in ps:
        for d in dims:
            sp = LpSpace(d, p)
            u = rng.normal(size=(trials, d))
            scale = 10.0 ** rng.uniform(-3, 1, trials)
            x = u / np.linalg.norm(u, axis=1, keepdims=True) * scale[:, None]
            J = duality_map(sp, x)
            nx = sp.norm(x)
            e1 = np.abs(sp.pair(x, J) - nx ** 2) - 1e-10 * (1 + nx ** 2)
            e2 = np.abs(sp.dual_norm(J) - nx) - 1e-9
            e3 = np.max(np.abs(duality_map_inverse(sp, J) - x), axis=1) - 1e-12
            for i in range(trials):
                rep.note(-float(max(e1[i], e2[i], e3[i])), 0.0, (p, d, x[i].tolist()))
    return rep


def consistency_suite(rng, pairs: int = 10_000, p=4, d=2, eps_list=(0.1, 0.01, 0.001)) -> CheckReport:
    """Both implications of the real consistency moduli on pairs of the unit ball.

    Half the pairs are pulled together at log-uniform scales so the premises
    are met at every ``eps``.
    """
    rng = np.random.default_rng(rng)
    sp = LpSpace(d, p)
    lam, Lam = phi_consistency_moduli(sp, 1)
    x = sample_ball(sp, pairs, 1.0, rng)
    y = sample_ball(sp, pairs, 1.0, rng)
    close = rng.random(pairs) < 0.5
    t = 10.0 ** rng.uniform(-10, 0, pairs)
    y = np.where(close[:, None], x + t[:, None] * (y - x), y)
    ph = phi_eval(sp, x, y)
    dist = sp.norm(x - y)
    rep = CheckReport("consistency")
    for eps in eps_list:
        lo, hi = float(lam(eps)), float(Lam(eps))
        for i in np.nonzero(ph <= lo)[0]:
            rep.note(eps - float(dist[i]), 0.0, ("lam", eps, int(i)))
        for i in np.nonzero(dist <= hi)[0]:
            rep.note(eps - float(ph[i]), 0.0, ("Lam", eps, int(i)))
    return rep


# --------------------------------------------------------------------------
# rate recursions against the replay


def _table_fn(rng, arity: int, cap: int, lo: int = 0):
    """A bounded, generally non-monotone function ``N^arity -> [lo, cap]``."""
    L = int(rng.integers(3, 12))
    tab = [int(v) for v in rng.integers(lo, cap + 1, L)]
    w = [int(v) for v in rng.integers(1, 7, arity)]

    def fn(*args):
        return tab[sum(a * b for a, b in zip(w, args)) % L]

    return fn


def random_rate_instance(rng, cap: int = 20, p_cap: int = 6) -> dict:
    """Plain-callable moduli of a small metastability instance."""
    T = lambda ar, c=cap, lo=0: _table_fn(rng, ar, c, lo)
    g = (CounterFunction.const(int(rng.integers(0, 4))) if rng.random() < 0.5
         else CounterFunction.linear(int(rng.integers(0, 3)), int(rng.integers(0, 4))))
    return dict(
        k=int(rng.integers(0, 5)), g=g, gamma=T(1, p_cap), Phi2=T(2), Phi1=T(1),
        aG=T(1), bH=T(1), A=T(1), theta=T(1), chi=T(3), zeta=T(3), s=int(rng.integers(0, 4)),
        xi=T(1), kappa=T(1), pi=T(1), omega=T(1), delta=T(1),
    )


def rate_oracle_suite(rng, instances: int = 50) -> CheckReport:
    """Every recursion variant equals :func:`replay.replay_psi` exactly."""
    rng = np.random.default_rng(rng)
    rep = CheckReport("rate_oracle")
    for idx in range(instances):
        d = random_rate_instance(rng)
        f = StepFunction.lag(d["s"])
        nm = lambda fn, ar=1: NatModulus(fn, arity=ar)
        base = MetastabilityInputs(
            k=d["k"], g=d["g"], gamma=nm(d["gamma"]), Phi=nm(d["Phi2"], 2), alphaG=nm(d["aG"]),
            betaH=nm(d["bH"]), A=nm(d["A"]), theta=nm(d["theta"]), chi=nm(d["chi"], 3),
            zeta=nm(d["zeta"], 3), f=f, xi=nm(d["xi"]), kappa=nm(d["kappa"]), pi=nm(d["pi"]),
            omega=nm(d["omega"]), delta=nm(d["delta"]),
        )
        eta = replay.replay_eta(d["chi"], d["zeta"], f, d["g"], d["aG"], d["bH"])
        common = dict(gamma=d["gamma"], aG=d["aG"], bH=d["bH"], A=d["A"], theta=d["theta"], eta=eta,
                      xi=d["xi"], kappa=d["kappa"], pi=d["pi"], omega=d["omega"], delta=d["delta"])
        unary = replace(base, Phi=nm(d["Phi1"]))
        runs = [
            ("general", psi_general(base), d["Phi2"]),
            ("with-closedness", psi_with_closedness(base), d["Phi2"]),
            ("single-distance", psi_single(base, error_free=False), d["Phi2"]),
            ("single-distance-error-free", psi_single(unary, error_free=True), d["Phi1"]),
        ]
        for variant, got, Phi in runs:
            want, _ = replay.replay_psi(d["k"], d["g"], Phi=Phi, variant=variant, **common)
            rep.checked += 1
            if not got.exact or got.value != want:
                rep.violations.append((idx, variant, got.value, want))
    return rep


# --------------------------------------------------------------------------
# conversions between moduli
#
# The test sequences are x_{n+1} = c R x_n + e_n in R^2 with R a rotation,
# c in [0.9, 1] and |e_n| <= eps_n. The map x -> cRx is nonexpansive with
# fixed point 0, so for AF_k = {p : |p - cRp| <= 1/(k+1)} one has
# |x_j - p| <= |x_i - p| + (j - i) res(p) + sum_{i <= l < j} eps_l, which is
# what the moduli below are read off from.


def _euclid2(x, y):
    d = x - y
    return np.sqrt(d[..., 0] * d[..., 0] + d[..., 1] * d[..., 1])


_EUCLID2 = GeneralizedDistance(eval=_euclid2, symmetric=True, reflexive=True, name="euclid2")


def _contraction_run(rng, length: int):
    th = rng.uniform(0.2, np.pi)
    c = rng.uniform(0.9, 1.0)
    R = c * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    # dyadic errors keep the exact partial sums cheap
    a = int(rng.integers(0, 50_000))
    eps = [Fraction(a, 2 ** (n + 20)) for n in range(length + 1)]
    x = [rng.uniform(-2, 2, 2)]
    for n in range(length):
        e = rng.normal(size=2)
        e *= float(eps[n]) * rng.uniform(0, 1) / max(np.linalg.norm(e), 1e-300)
        x.append(R @ x[-1] + e)
    res = lambda p: float(np.linalg.norm(np.asarray(p) - R @ np.asarray(p)))
    errs = ErrorSchedule(lambda n: eps[n] if n < len(eps) else Fraction(0), name="rand")
    return np.array(x), res, errs, R


def _boundary_samples(rng, R, ks, extra: int = 4):
    """Points whose residual sits just below ``1/(k+1)`` for each ``k``."""
    M = np.eye(2) - R
    out = []
    for k in ks:
        u = rng.normal(size=2)
        u /= np.linalg.norm(u)
        t = 1.0 / ((k + 1) * np.linalg.norm(M @ u)) * (1 - 1e-9)
        out.append(t * u)
    for _ in range(extra):
        out.append(rng.normal(size=2) * 10.0 ** rng.uniform(-4, 0))
    return out


def _grid(rng, size: int, top: int = 5):
    return [tuple(int(v) for v in rng.integers(0, top + 1, 3)) for _ in range(size)]


def _merge(rep: CheckReport, sub: CheckReport, tag):
    rep.checked += sub.checked
    rep.min_slack = min(rep.min_slack, sub.min_slack)
    rep.violations.extend((tag, v) for v in sub.violations)


def _conv_partial(rng, rep: CheckReport, idx: int):
    x, res, errs, R = _contraction_run(rng, 40)
    chi_full = lambda n, m, r: m * (r + 1)
    part = derive_partial_from_full(chi_full, errs)
    fam = ApproximationFamily(residual=res)
    inst = FejerInstance(seq=x, dist=_EUCLID2, family=fam, errors=part.errors,
                         chi=part.chi, zeta=part.eta)
    grid = _grid(rng, 6)
    ks = {part.chi(*t) for t in grid} | {part.eta(*t) for t in grid}
    samples = _boundary_samples(rng, R, sorted(ks))
    _merge(rep, check_uniform_modulus(inst, "chi", grid, samples, tol=1e-12), ("partial-chi", idx))
    _merge(rep, check_uniform_modulus(inst, "zeta", grid, samples, tol=1e-12), ("partial-eta", idx))


def _conv_mixed(rng, rep: CheckReport, idx: int):
    # even points x_{2n} = y_n, odd points x_{2n+1} = y_{n+1}
    y, res, errs, R = _contraction_run(rng, 40)
    seq = np.empty((2 * (len(y) - 1), 2))
    seq[0::2] = y[:-1]
    seq[1::2] = y[1:]
    sp = int(rng.integers(0, 4))
    f = StepFunction.lag(sp)
    chi = lambda n, m, r: m * (r + 1)
    zeta2 = lambda n, r: (n + 1 - f(n)) * (r + 1)
    zh = mixed_gh_f_modulus(chi, zeta2, f)
    inst = FejerInstance(seq=seq, dist=_EUCLID2, family=ApproximationFamily(residual=res),
                         f=f, errors=errs, zeta=zh)
    grid = _grid(rng, 6)
    samples = _boundary_samples(rng, R, sorted({zh(*t) for t in grid}))
    _merge(rep, check_uniform_modulus(inst, "zeta", grid, samples, tol=1e-12), ("mixed", idx))


def _conv_shift(rng, rep: CheckReport, idx: int):
    y, res, errs, R = _contraction_run(rng, 60)
    sp = int(rng.integers(0, 4))
    s = 2 * sp + 1
    # errors of the even subsequence are paired: eps~_n = eps_{2n} + eps_{2n+1}
    paired = ErrorSchedule(lambda n: errs(2 * n) + errs(2 * n + 1), name="paired")
    chi = lambda n, m, r: 2 * m * (r + 1)
    zeta = lambda n, m, r: (2 * m + s) * (r + 1)
    k_hit = [next((n for n in range(len(y) // 2) if res(y[2 * n]) <= 1 / (k + 1)), None) for k in range(6)]
    Phi = lambda k: k_hit[k] if k < len(k_hit) and k_hit[k] is not None else 10 ** 6
    out = affine_shift(s, seq=y, zeta=zeta, chi=chi, Phi=Phi)
    hat = np.array([out.hat[n] for n in range(len(y))])
    fam = ApproximationFamily(residual=res)
    inst = FejerInstance(seq=hat, dist=_EUCLID2, family=fam, f=out.f, errors=paired,
                         zeta=out.zeta_hat)
    grid = [t for t in _grid(rng, 6) if 2 * (t[0] + t[1]) + 1 < len(y)]
    samples = _boundary_samples(rng, R, sorted({out.zeta_hat(*t) for t in grid}))
    _merge(rep, check_uniform_modulus(inst, "zeta", grid, samples, tol=1e-12), ("shift", idx))
    # Phi' bounds the subsequence x_{2 f(n)}
    sub = MemoSequence(lambda n: y[2 * out.f(n)] if 2 * out.f(n) < len(y) else y[-1])
    inst2 = FejerInstance(seq=sub, dist=_EUCLID2, family=fam, Phi=out.Phi_prime)
    ks = [k for k in range(6) if k_hit[k] is not None]
    _merge(rep, check_approx_point_bound(inst2, ks, stride=1), ("shift-Phi'", idx))


_GRID_X0 = None


def _grid_x0():
    global _GRID_X0
    if _GRID_X0 is None:
        t = np.linspace(-1.0, 1.0, 129)  # step 2^-6
        X, Y = np.meshgrid(t, t, indexing="ij")
        _GRID_X0 = np.column_stack([X.ravel(), Y.ravel()])
    return _GRID_X0


def _farthest_first(pool: np.ndarray, start: int, count: int, dist) -> np.ndarray:
    """Greedy spread-out sequence: each new point maximizes its smallest
    distance to the points already chosen (``dist(new, old)``)."""
    chosen = [start]
    best = dist(pool, pool[start][None, :])
    while len(chosen) < count:
        j = int(np.argmax(best))
        chosen.append(j)
        best = np.minimum(best, dist(pool, pool[j][None, :]))
    return pool[chosen]


def _conv_tb(rng, rep: CheckReport, idx: int):
    X0 = _grid_x0()
    met = _EUCLID2
    theta = lambda k: 2 * k + 1
    k = int(rng.integers(0, 3))

    # cover -> sequence: a shifted square grid of centers covers at 1/(k+1)
    shift = rng.uniform(0, 1)

    def centers(j):
        h = np.sqrt(2.0) / (j + 1) * (1 - 1e-12)
        n = int(np.ceil(2.0 / h)) + 1
        t = -1.0 - shift * h + h / 2 + h * np.arange(n)
        X, Y = np.meshgrid(t, t, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    alpha = lambda j: len(centers(j)) - 1
    kc = theta(k)
    C = centers(kc)
    cover_gap = float(np.max(np.min(met(X0[::7, None, :], C[None, :, :]), axis=1))) - 1 / (kc + 1)
    gamma = convert_tb_modulus(alpha, theta, "cover->sequence")
    gk = gamma(k)
    seqs = [_farthest_first(X0, int(rng.integers(len(X0))), gk + 1, met),
            X0[rng.integers(0, len(X0), gk + 1)]]
    rep.checked += 1
    if cover_gap > 0:
        rep.violations.append((("tb-cover", idx), "cover fails", cover_gap))
    for s in seqs:
        rep.checked += 1
        if pigeonhole_witness(s, met, k, gk + 1) is None:
            rep.violations.append((("tb-cover->seq", idx), k, gk))

    # sequence -> cover: greedy centers are pairwise > 1/(k+1) apart, so a
    # valid sequence modulus caps their number
    Mb = Fraction(int(rng.integers(3, 5)), 2)
    gam = lambda j: gamma_box(2, Mb, j)
    alpha2 = convert_tb_modulus(gam, theta, "sequence->cover")
    thr = 1.0 / (k + 1)
    pts = X0[rng.permutation(len(X0))]
    covered = np.zeros(len(pts), dtype=bool)
    n_centers = 0
    while not covered.all():
        i = int(np.argmin(covered))  # first uncovered point in the random order
        n_centers += 1
        covered |= met(pts, pts[i][None, :]) <= thr
    rep.checked += 1
    if n_centers > alpha2(k) + 1:
        rep.violations.append((("tb-seq->cover", idx), k, n_centers, alpha2(k) + 1))


def _random_nonexpansive(rng, d: int):
    """Coordinate permutation, sign flips, a scaling and a box clip: nonexpansive in every l_p."""
    perm = rng.permutation(d)
    signs = rng.choice([-1.0, 1.0], d)
    c = rng.uniform(0.3, 1.0)
    lo = -rng.uniform(0.1, 1.0, d)
    hi = rng.uniform(0.1, 1.0, d)
    return lambda x: np.clip(c * signs * np.asarray(x)[..., perm], lo, hi)


def _conv_closed_tb(rng, rep: CheckReport, idx: int):
    p = int(rng.choice([2, 3, 4]))
    d = 2
    sp = LpSpace(d, p)
    lam, Lam = phi_consistency_moduli_nat(sp, 1)
    phi = bregman_distance(sp, 1)
    Tm = _random_nonexpansive(rng, d)
    res = lambda x: float(sp.norm(np.asarray(x) - Tm(x)))
    fam = ApproximationFamily(residual=res, domain=lambda x: float(sp.norm(x)) <= 1.0)
    gamma_m = lambda k: gamma_box(d, 2, k)  # the unit p-ball (p >= 2) sits in the Euclidean 2-ball
    g2, w2, d2 = convert_closedness_and_tb(gamma_m, lambda k: 4 * k + 3, lambda k: 2 * k + 1, lam, Lam)
    ks = [int(rng.integers(0, 3))]
    # closedness: q near the AF_{delta(k)} boundary, p a tiny perturbation
    k = ks[0]
    pairs = []
    for _ in range(20):
        q = sample_ball(sp, 1, 0.9, rng)[0]
        for _ in range(60):
            if res(q) <= 1.0 / (d2(k) + 1):
                break
            q = 0.5 * (q + Tm(q))
        u = rng.normal(size=d)
        u /= np.linalg.norm(u)
        for t in 10.0 ** rng.uniform(-8, -1, 4):
            if float(sp.norm(q + t * u)) <= 1.0:  # consistency only holds inside the ball
                pairs.append((q, q + t * u))
    sub = check_closedness(fam, phi, w2, d2, pairs, ks)
    _merge(rep, sub, ("closedness", idx))
    # total boundedness in phi: a phi-spread sequence in the unit ball
    pool = sample_ball(sp, 2000, 1.0, rng)
    thr = 1.0 / (k + 1)
    ev = lambda a, b: phi_eval(sp, a, b)
    chosen = [0]
    best = ev(pool, pool[0][None, :])
    while len(chosen) <= g2(k) and float(np.max(best)) > thr:
        j = int(np.argmax(best))
        chosen.append(j)
        best = np.minimum(best, ev(pool, pool[j][None, :]))
    chosen.append(int(rng.integers(len(pool))))
    seq = pool[chosen]
    rep.checked += 1
    if pigeonhole_witness(seq, phi, k, g2(k) + 1) is None:
        rep.violations.append((("phi-tb", idx), k, len(seq)))


CONVERSIONS = {
    "derive_partial_from_full": _conv_partial,
    "mixed_gh_f_modulus": _conv_mixed,
    "affine_shift": _conv_shift,
    "convert_tb_modulus": _conv_tb,
    "convert_closedness_and_tb": _conv_closed_tb,
}


def conversion_suite(rng, instances: int = 100, which=None) -> dict[str, CheckReport]:
    """Defining implications of every conversion on ``instances`` random instances each."""
    rng = np.random.default_rng(rng)
    out = {}
    for name, fn in CONVERSIONS.items():
        if which is not None and name not in which:
            continue
        rep = CheckReport(name)
        for i in range(instances):
            fn(rng, rep, i)
        out[name] = rep
    return out
