"""Straight-line re-evaluation of the rate formulas, used as a test oracle.

Deliberately naive: no caching, no fixed-point shortcut, majorants by a full
scan, every constant spelled out in place. Only usable on small instances.
The functions take plain callables so they share no code with ``rates``.
"""
from __future__ import annotations

from fractions import Fraction
from math import ceil, isqrt


def _maj1(f, k):
    return max(f(j) for j in range(k + 1))


def _maj2(f, n, r):
    return max(f(j, r) for j in range(n + 1))


def replay_eta(chi, zeta, f, g, aG, bH):
    def eta(n, r):
        return max(chi(n, g(2 * n) // 2, r), zeta(n, g(2 * n) // 2, r), chi(f(n), n - f(n), 4 * bH(aG(r)) + 3))
    return eta


def replay_psi(k, g, gamma, Phi, aG, bH, A, theta, eta, xi=None, kappa=None, pi=None,
               omega=None, delta=None, variant="general"):
    """``2 Psi_0(P)`` for the variants general / with-closedness / single-distance /
    single-distance-error-free, recomputed from the displays."""
    if variant == "with-closedness":
        th = lambda j: max(theta(j), omega(j))
        dk = delta(k)
        et = lambda n, r: max(dk, eta(n, r))
    else:
        th, et = theta, eta
    P = gamma(max(2 * aG(2 * bH(aG(4 * bH(A(th(k))) + 3)) + 1) + 1, 2 * aG(4 * bH(A(th(k))) + 3) + 1))
    if variant in ("general", "with-closedness"):
        khat = max(
            kappa(xi(4 * bH(aG(4 * bH(A(th(k))) + 3)) + 3)),
            xi(2 * bH(A(th(k))) + 1),
            kappa(xi(2 * bH(A(th(k))) + 1)),
            kappa(pi(max(2 * aG(2 * bH(aG(4 * bH(A(th(k))) + 3)) + 1) + 1, 2 * aG(4 * bH(A(th(k))) + 3) + 1))),
        )
    elif variant == "single-distance":
        khat = max(
            kappa(xi(4 * bH(aG(4 * bH(A(th(k))) + 3)) + 3)),
            xi(2 * bH(A(th(k))) + 1),
            kappa(xi(2 * bH(A(th(k))) + 1)),
        )
    else:
        khat = None
    vals = [0]
    for _ in range(P):
        arg = _maj2(et, vals[-1], 4 * bH(A(th(k))) + 3)
        vals.append(Phi(arg) if khat is None else Phi(arg, khat))
    return 2 * vals[-1], vals


def replay_hilbert_rate(alpha: Fraction, d: int, M, k: int, g, g_nondecreasing: bool = False,
                        scan_cap: int = 10 ** 5):
    """``2 Psi_0(P, 2k+1, g') + 3`` for the alternating-inertia iteration.

    ``Phi`` is nondecreasing, so its majorant is itself. The majorant of
    ``eta`` is a scan unless ``g_nondecreasing`` says ``eta`` is nondecreasing
    in its first argument already; scans beyond ``scan_cap`` are refused."""
    M = Fraction(M)
    a = Fraction(alpha)
    kk = 2 * k + 1
    c4 = ceil((3 - a) / a ** 2 + 4)

    def gp(n):
        return g(n + 3) + 3

    def eta(n, r):
        v = Fraction(2 * (gp(2 * n) // 2) ** 2 * c4) * M * (2 * r + 4) ** 2
        return max(2 * kk + 1, max(ceil(v) - 1, 0))

    def Phi(j):
        return 2 * max(1, ceil(a / (1 - a) * M ** 2 * (j + 1) ** 2)) + 1

    c = (64 * k + 64) * M
    s = isqrt(ceil(c * c * d))
    while s * s < c * c * d:
        s += 1
    P = s ** d
    v = 0
    for i in range(P):
        if g_nondecreasing:
            e = eta(v, 4 * kk + 3)
        else:
            if v > scan_cap:
                raise OverflowError("replay would need an infeasible scan")
            e = _maj2(eta, v, 4 * kk + 3)
        v = Phi(e)
    return 2 * v + 3


def replay_phi_banach(k, lam, omega, E1, M, b, alpha_bar):
    """``2 ceil((lam(omega(2 E1 (lam(k)+1) + 1, M+1)) + 1) b / (1 - alpha_bar))``."""
    w = omega(2 * E1 * (lam(k) + 1) + 1, M + 1)
    return 2 * ceil(Fraction(lam(w) + 1) * Fraction(b) / (1 - Fraction(alpha_bar)))


def replay_banach_rate(k, g, lam, Lam, theta, chi, Phi, gamma, omega_F, delta_F):
    """``2 Psi_0(P, k0, g)`` of the Mann proximal point theorem with ``f = id``."""
    k1 = lam(k)
    k0 = max(k1, lam(omega_F(k1)))

    def eta(n, r):
        return max(
            max(delta_F(k0), chi(2 * n, 2 * (g(2 * n) // 2), r)),
            chi(2 * n, 2 * (g(2 * n) // 2) + 1, r),
            chi(n, n - n, 4 * r + 3),
        )

    P = gamma(Lam(16 * theta(k0) + 15))
    v = 0
    for _ in range(P):
        v = _maj1(Phi, _maj2(eta, v, 2 * theta(k0) + 1))
    return 2 * v
