from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fejer import banach as bn
from fejer import replay
from fejer.distances import LpSpace, metric_distance, phi_eval
from fejer.moduli import CounterFunction
from fejer.rates import brute_force_metastability

import oracles

HALF = Fraction(1, 2)


def problem(p=2, c=1, M=1, b=1, alpha="1/4", alpha_bar=HALF, r=1):
    sp = LpSpace(2, p)
    T = bn.scaled_duality_operator(c, 2)
    sched = bn.MannSchedule.constant_schedule(Fraction(alpha), r, alpha_bar)
    return bn.BanachProblem(sp, T, sched, M, b)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_resolvent_examples(p):
    sp = LpSpace(2, p)
    x = np.array([0.7, -0.2])
    assert np.allclose(bn.resolvent_banach(sp, bn.zero_operator(2), 1, x), x, atol=1e-14)
    assert np.allclose(bn.resolvent_banach(sp, bn.scaled_duality_operator(1, 2), 1, x), x / 2, atol=1e-12)


def test_resolvent_p2_matches_hilbert():
    sp = LpSpace(3, 2)
    x = np.array([1.0, -2.0, 0.5])
    for r in (0.5, 1, 3):
        z = bn.resolvent_banach(sp, bn.operator_from_spec({"kind": "coordinatewise", "h": "linear"}, 3), r, x)
        assert np.allclose(z, x / (1 + r), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([2, 3, 4]), st.floats(0.1, 5), st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_resolvent_solves_its_equation(p, r, x):
    sp = LpSpace(2, p)
    T = bn.operator_from_spec({"kind": "coordinatewise", "h": "cubic"}, 2)
    x = np.array(x)
    z = bn.resolvent_banach(sp, T, r, x)
    assert bn.resolvent_residual(sp, T, r, x, z) <= 1e-10


def test_mu_resolvent_bound_examples():
    assert bn.mu_resolvent_bound(0, 0, 5, Fraction(1, 2)) == 1
    assert bn.mu_resolvent_bound(0, 0, 5, 3) == 3
    assert bn.mu_resolvent_bound(1, 1, 1, 2) == 7


def test_resolvent_bound_cubic_samples():
    sp = LpSpace(2, 3)
    T = bn.operator_from_spec({"kind": "coordinatewise", "h": "cubic"}, 2)
    rng = np.random.default_rng(0)
    for x in rng.uniform(-2, 2, (1000, 2)):
        b = Fraction(float(sp.norm(x)))
        assert float(sp.norm(bn.resolvent_banach(sp, T, 1, x))) <= float(bn.mu_resolvent_bound(T.C, T.D, 1, b)) + 1e-12


def test_kt_inequality():
    sp = LpSpace(2, 4)
    T = bn.scaled_duality_operator(1, 2)
    z = np.zeros(2)
    assert bn.kt_inequality_check(sp, T, z, [z], 1).ok
    ys = np.random.default_rng(1).uniform(-2, 2, (1000, 2))
    assert bn.kt_inequality_check(sp, T, z, ys, 1, 1e-10).ok


def test_kt_p2_is_firm_nonexpansiveness():
    sp = LpSpace(2, 2)
    T = bn.scaled_duality_operator(1, 2)
    y = np.array([0.8, -0.6])
    w = bn.resolvent_banach(sp, T, 1, y)
    # phi is the squared distance, so the inequality reads ||w||^2 + ||w - y||^2 <= ||y||^2
    lhs = float(phi_eval(sp, 0 * y, w) + phi_eval(sp, w, y))
    assert lhs == pytest.approx(float(w @ w + (w - y) @ (w - y)), abs=1e-15)
    assert lhs <= float(y @ y) + 1e-15


def test_quantitative_kt():
    sp = LpSpace(2, 4)
    T = bn.scaled_duality_operator(1, 2)
    rng = np.random.default_rng(2)
    xs = rng.normal(size=(100, 2)) * 1e-9
    ys = rng.uniform(-1, 1, (100, 2))
    rep = bn.quant_kt_inequality(sp, T, xs, ys, 1, 1, Fraction(1, 1000))
    assert rep.ok and rep.checked == 100
    rep = bn.quant_kt_integer_check(sp, T, xs, ys, 1, 1, 9)
    assert rep.ok and rep.checked == 100
    zero = bn.quant_kt_inequality(sp, T, np.zeros((5, 2)), ys[:5], 1, 1, Fraction(1, 10 ** 9))
    assert zero.ok and zero.checked == 5


def test_mann_step_examples():
    sp = LpSpace(2, 2)
    T = bn.scaled_duality_operator(1, 2)
    x = np.array([1.0, 0.0])
    s = bn.MannSchedule.constant_schedule(HALF, 1, Fraction(3, 4))
    assert np.allclose(bn.mann_step(sp, T, s, x, 0), [0.75, 0.0], atol=1e-15)
    s0 = bn.MannSchedule.constant_schedule(0, 1, HALF)
    assert np.allclose(bn.mann_step(sp, T, s0, x, 0), bn.resolvent_banach(sp, T, 1, x), atol=1e-15)
    # alpha_n = 1 lies outside [0, alpha_bar); the Mann average then keeps x
    s1 = bn.MannSchedule(lambda n: Fraction(1), lambda n: Fraction(1), Fraction(1, 2), Fraction(1))
    with pytest.raises(ValueError):
        bn.mann_step(sp, T, s1, x, 0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        bn.MannSchedule.constant_schedule(HALF, 1, HALF)
    with pytest.raises(ValueError):
        bn.MannSchedule.constant_schedule(0, Fraction(1, 2), HALF, 1)


def test_consistency_and_phi_bound_frozen():
    prob = problem()
    assert prob.lam(0) == 407 == oracles.banach_lam(2, 1, 0)
    assert prob.Lam(0) == 31 == oracles.banach_Lam(1, 0)
    assert prob.Phi(0) == 17367185452 == oracles.banach_phi_cj(2, 1, 1, 1, HALF, 0)
    T = prob.T
    for k in range(4):
        e1 = bn.E1(T.C, T.D, prob.M, prob.sched, k)
        want = replay.replay_phi_banach(k, prob.lam, prob.omega, e1, 1, 1, HALF)
        assert prob.Phi(k) == want == oracles.banach_phi_cj(2, 1, 1, 1, HALF, k)
        assert bn.phi_bound_banach(k, 1, 1, HALF, prob.lam, prob.omega, e1) == want


def test_phi_bound_alpha_bar_doubles():
    lo = problem(alpha="0", alpha_bar=Fraction(1, 10 ** 9))
    hi = problem(alpha="0", alpha_bar=HALF)
    for k in range(3):
        assert hi.Phi(k) / lo.Phi(k) == pytest.approx(2, rel=1e-6)


def test_chi_banach_substitution():
    om = bn.omega_duality(2)
    assert bn.chi_banach(0, 0, 5, 1, 4, om) == om(2 * 4 * 1 + 1, 2)
    assert bn.chi_banach(0, 1, 5, 1, 4, om) == om(9, 2)
    assert bn.chi_banach(10 ** 6, 2, 0, 1, 1, om) == 10 ** 6


def test_metastability_replay_small():
    prob = problem()
    clamp = lambda v: min(v, 10)
    ov = dict(lam=lambda k: clamp(k + 1), Lam=lambda k: clamp(2 * k), theta=lambda k: clamp(k),
              chi=lambda n, m, r: clamp(n + m + r), Phi=lambda k: clamp(3 * k + 1), gamma=lambda k: clamp(k) % 4 + 1,
              omega_F=lambda k: 4 * k + 3, delta_F=lambda k: 2 * k + 1)
    for k in range(3):
        for g in (CounterFunction.const(0), CounterFunction.linear(1, 1)):
            got = bn.metastability_banach(prob, k, g, overrides=ov, keep_trace=True)
            assert got.trace[0] == 0
            want = replay.replay_banach_rate(k, g, ov["lam"], ov["Lam"], ov["theta"], ov["chi"], ov["Phi"],
                                             ov["gamma"], ov["omega_F"], ov["delta_F"])
            assert got.value == want


def test_metastability_k0_spot_check():
    prob = problem()
    parts = bn.metastability_parts_banach(prob, 0, CounterFunction.const(0))
    assert parts.k0 == max(407, prob.lam(4 * 407 + 3)) == oracles.banach_lam(2, 1, 1631)


def test_regularity_cj():
    for c in (Fraction(1, 2), 1, 3):
        rho = bn.regularity_scaled_duality(c)
        for p in (2, 3, 4):
            sp = LpSpace(2, p)
            T = bn.scaled_duality_operator(c, 2)
            for x in np.random.default_rng(3).uniform(-2, 2, (20, 2)):
                res = float(sp.norm(x - bn.resolvent_banach(sp, T, 1, x)))
                assert res == pytest.approx(float(c) / (1 + float(c)) * float(sp.norm(x)), rel=1e-9)
        assert rho(Fraction(1)) < Fraction(c) / (1 + Fraction(c))


def _rate_oracle_p2(delta):
    # the displayed formula with p = 2, c = 1, M = b = 1, alpha_bar = 1/2, E = 4
    R, L, Ll = 2, Fraction(318, 100), 1
    eta = lambda e: e * e / 8
    lam_t = lambda e: R * R / L * eta(e / (4 * R))
    theta = lambda e: lam_t(e / 2)
    rho = lambda e: e * Fraction(1, 2) * (1 - Fraction(1, 10 ** 12))
    rho_p = lambda e: rho(e / 2 * Ll / (16 * R))
    tau = lambda e: 2 * oracles.ceil(1 / (lam_t(lam_t(e) / 8) * HALF))
    return 2 * tau(rho_p(theta(lam_t(Fraction(delta))) / 2))


def test_convergence_rate_end_to_end():
    prob = problem()
    rho = bn.regularity_scaled_duality(1)
    got = bn.convergence_rate_banach(rho, prob, HALF)
    assert got == _rate_oracle_p2(HALF)
    assert bn.convergence_rate_banach(rho, prob, Fraction(1, 10)) >= got


def test_run_checks_p4():
    sp = LpSpace(2, 4)
    T = bn.scaled_duality_operator(1, 2)
    sched = bn.MannSchedule.constant_schedule(Fraction(1, 4), 1, HALF)
    run = bn.BanachRun(sp, T, sched, [0.6, -0.3]).extend(500)
    assert np.max(run.solver_residuals(500)) <= 1e-10
    assert bn.check_fejer_banach(run, np.zeros(2), 500, 1e-10).ok
    assert bn.check_resolvent_bound(run, 500).ok
    for eps in (0.1, 0.01):
        assert bn.check_liminf_bound(run, 1, eps).ok
    run2 = bn.BanachRun(LpSpace(2, 2), T, sched, [0.6, -0.3]).extend(500)
    assert np.max(np.abs(run2.points(500) - bn.hilbert_reference([0.6, -0.3], 0.25, 1.0, 500))) <= 1e-12


def test_brute_force_below_bound_p4():
    sp = LpSpace(2, 4)
    T = bn.scaled_duality_operator(1, 2)
    sched = bn.MannSchedule.constant_schedule(Fraction(1, 4), 1, HALF)
    run = bn.BanachRun(sp, T, sched, [0.6, -0.3]).extend(200)
    prob = bn.BanachProblem(sp, T, sched, 1, 1)
    for k in (0, 1):
        g = CounterFunction.const(0)
        N = brute_force_metastability(run, metric_distance(4), bn.banach_family(run, 1), k, g, limit=200)
        assert N <= bn.metastability_banach(prob, k, g).value


def test_monotonicity():
    for spec in ({"kind": "scaled-duality", "c": 2}, {"kind": "coordinatewise", "h": "cubic"}, {"kind": "zero"}):
        for p in (2, 3, 4):
            T = bn.operator_from_spec(spec, 3)
            assert bn.monotonicity_check(LpSpace(3, p), T, 1000, np.random.default_rng(4)).ok
    with pytest.raises(ValueError):
        bn.operator_from_spec({"kind": "nope"}, 2)
