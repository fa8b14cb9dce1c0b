import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fejer import hilbert as hb
from fejer import replay
from fejer.distances import metric_distance
from fejer.moduli import CounterFunction, RealModulus
from fejer.rates import brute_force_metastability

import oracles

HALF = Fraction(1, 2)


def rotation_run(alpha_k=0, n=200):
    return hb.HilbertRun(hb.rotation_average(), hb.InertiaSchedule.constant(alpha_k), [1.0, 0.0]).extend(n)


def test_iteration_hand_values():
    run = rotation_run(alpha_k=1, n=2)
    assert np.allclose(run.point(1), [0.5, 0.5], atol=1e-15)
    assert np.allclose(run.bar(1), [0.0, 1.0], atol=1e-15)
    assert np.allclose(run.point(2), [-0.5, 0.5], atol=1e-15)


def test_identity_map_and_picard():
    T = hb.AveragedMap(HALF, lambda x: x, fixed_point=np.zeros(2))
    run = hb.iterate_alternating(T, hb.InertiaSchedule.constant(1), [0.3, 0.4], 10)
    assert all(np.array_equal(run.point(k), [0.3, 0.4]) for k in range(11))
    rot = hb.rotation_average()
    run = rotation_run(alpha_k=0, n=10)
    for k in range(10):
        assert np.allclose(run.point(k + 1), rot(run.point(k)), atol=0)


def test_residual_examples():
    T = hb.rotation_average()
    assert hb.af_residual_hilbert(T, [0.0, 0.0]) == 0
    assert hb.af_residual_hilbert(T, [1.0, 0.0]) == pytest.approx(math.sqrt(0.5), abs=1e-15)
    assert hb.af_residual_hilbert(T, [2.0, 0.0]) == pytest.approx(2 * math.sqrt(0.5), abs=1e-15)


def test_inertia_validation():
    with pytest.raises(ValueError, match="inertia out of range"):
        hb.HilbertRun(hb.rotation_average(), hb.InertiaSchedule.constant(2), [1.0, 0.0])
    T = hb.projection_average(Fraction(1, 2), 2)
    assert T.max_inertia == 3


@pytest.mark.parametrize("T", [hb.rotation_average(), hb.rotation_average(1.0), hb.projection_average(1, 3, 1.0),
                               hb.projection_average(Fraction(1, 3), 3, 2.0), hb.resolvent_identity(2, 3)])
def test_averagedness(T):
    d = 2 if T.provenance == "rotation-average" else 3
    assert hb.averagedness_check(T, d, 1000, np.random.default_rng(0)).ok


def test_phi_bound_examples():
    assert hb.phi_bound_hilbert(HALF, 1, 0) == 2
    assert hb.phi_bound_hilbert(HALF, 1, 9) == 200
    assert hb.phi_bound_hilbert(Fraction(2, 3), 1, 0) == 4


@given(st.fractions(min_value=Fraction(1, 100), max_value=Fraction(99, 100)),
       st.fractions(min_value=Fraction(1, 10), max_value=10), st.integers(0, 200))
def test_phi_bound_oracle_and_monotone(a, b, k):
    assert hb.phi_bound_hilbert(a, b, k) == oracles.phi_bound_hilbert(a, b, k)
    assert hb.phi_bound_hilbert(a, b, k) <= hb.phi_bound_hilbert(a, b, k + 1)


def test_chi_zeta_examples():
    assert hb.chi_zeta_hilbert(HALF, 1, 0, 2, 0) == (95, 111)
    assert hb.chi_zeta_hilbert(HALF, 1, 3, 0, 5) == (0, 0)


@given(st.fractions(min_value=Fraction(1, 20), max_value=Fraction(19, 20)), st.integers(1, 5),
       st.integers(0, 20), st.integers(0, 20))
def test_chi_zeta_oracle(a, M, m, r):
    assert hb.chi_zeta_hilbert(a, M, 0, m, r) == oracles.chi_zeta_hilbert(a, M, m, r)


def test_gamma_box_examples():
    assert hb.gamma_box(1, 1, 0) == 2
    assert hb.gamma_box(2, 1, 0) == 9


@given(st.integers(1, 4), st.fractions(min_value=Fraction(1, 10), max_value=20), st.integers(0, 100))
def test_gamma_box_oracle(d, M, k):
    assert hb.gamma_box(d, M, k) == oracles.gamma_box(d, M, k)


def test_closedness_moduli():
    assert hb.closedness_nonexpansive(0) == (3, 1)
    assert hb.closedness_nonexpansive(10) == (43, 21)


def test_metastability_frozen_values():
    run = rotation_run()
    g0 = CounterFunction.const(0)
    parts = hb.metastability_parts(HALF, 2, 1, 0, g0)
    assert parts.P == 8281 == oracles.hilbert_P(2, 1, 0)
    r0 = hb.metastability_hilbert(run, 0, g0, M=1, keep_trace=True)
    r1 = hb.metastability_hilbert(run, 1, g0, M=1)
    assert r0.exact and r0.value == 329204741
    assert r1.exact and r1.value == 4190749701
    assert r0.trace[0] == 0
    assert r0.value <= r1.value
    for k in range(3):
        want = oracles.hilbert_psi_const_g(HALF, 2, 1, k, 0)
        assert hb.metastability_hilbert(run, k, g0, M=1).value == want
        assert replay.replay_hilbert_rate(HALF, 2, 1, k, g0, g_nondecreasing=True) == want


def test_metastability_nonconstant_g_is_certified_lower_bound():
    run = rotation_run()
    res = hb.metastability_hilbert(run, 0, CounterFunction.linear(1, 0), M=1, budget=1000)
    assert not res.exact and res.value > 10 ** 6


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("g", ["const:0", "linear:1,0", "linear:2,10"])
def test_brute_force_below_bound(k, g):
    run = rotation_run(n=400)
    gg = CounterFunction.parse(g)
    N = brute_force_metastability(run, metric_distance(2), hb.hilbert_family(run.T, run.xhat, 1), k, gg,
                                  limit=400)
    assert N <= hb.metastability_hilbert(run, k, gg, M=1).value


def test_convergence_rate_examples():
    ident = RealModulus(lambda e: e)
    assert hb.convergence_rate_hilbert(ident, HALF, 1, Fraction(2, 5)) == 242
    rot = hb.rotation_average()
    assert hb.convergence_rate_hilbert(rot.rho, HALF, 1, Fraction(1, 10)) == 6728
    assert hb.convergence_rate_hilbert(rot.rho, HALF, 1, Fraction(1, 100)) == 642978
    assert hb.convergence_rate_hilbert(ident, HALF, Fraction(1, 10), 10 ** 6) == 3
    for delta in (Fraction(1, 10), Fraction(1, 100), Fraction(1, 7)):
        assert hb.convergence_rate_hilbert(rot.rho, HALF, 1, delta) == oracles.hilbert_rate(rot.rho, HALF, 1, delta)


def test_rotation_rate_window():
    run = rotation_run(n=10)
    mu = hb.convergence_rate_hilbert(run.T.rho, HALF, 1, Fraction(1, 10))
    end = mu + 1000
    last = run.point(end)
    assert max(np.linalg.norm(run.point(n) - last) for n in range(mu, end + 1)) < 0.1


def test_lemma_checks_rotation():
    run = rotation_run(alpha_k=1, n=501)
    assert hb.check_fejer_exact(run, 249, 1e-12).ok
    assert hb.check_summed_residual(run, 249, 1e-9).ok
    assert hb.check_odd_step(run, 249, 1e-12).ok
    xs = hb.sample_approx_fixed_points(run.T, np.zeros(2), 0.05, 5, np.random.default_rng(0))
    assert hb.check_fejer_approx(run, xs, 249, 1e-10).ok


def test_sampled_points_have_requested_residual():
    T = hb.projection_average(Fraction(1, 2), 3, 1.0)
    pts = hb.sample_approx_fixed_points(T, np.zeros(3), 0.01, 20, np.random.default_rng(1))
    res = [hb.af_residual_hilbert(T, p) for p in pts]
    assert max(res) <= 0.01 and min(res) > 0.009


def test_certify_M():
    run = rotation_run(alpha_k=1, n=50)
    assert run.certify_M() == 1
