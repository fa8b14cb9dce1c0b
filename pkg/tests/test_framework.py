from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fejer import hilbert as hb
from fejer.distances import metric_distance
from fejer.framework import (ApproximationFamily, FejerInstance, affine_shift, check_approx_point_bound,
                             check_closedness, check_f_monotone, check_quasi_fejer, check_uniform_modulus,
                             convert_closedness_and_tb, convert_tb_modulus, derive_partial_from_full,
                             mixed_gh_f_modulus, pigeonhole_witness)
from fejer.moduli import ErrorSchedule, NatModulus, StepFunction


def rotation_run(n=60, alpha_k=0):
    T = hb.rotation_average()
    return hb.HilbertRun(T, hb.InertiaSchedule.constant(alpha_k), [1.0, 0.0]).extend(n)


def line_instance(vals, f=None):
    pts = np.array(vals, dtype=float)[:, None]
    return FejerInstance(seq=pts, dist=metric_distance(2), f=f or StepFunction.identity(),
                         family=ApproximationFamily(member_fn=lambda k, x: True))


def test_quasi_fejer_constant_sequence():
    inst = line_instance([2.0] * 30)
    rep = check_quasi_fejer(inst, [np.array([2.0])], 14)
    assert rep.ok and rep.min_slack == 0


def test_quasi_fejer_rotation_run():
    run = rotation_run()
    inst = FejerInstance(seq=run, dist=metric_distance(2))
    rep = check_quasi_fejer(inst, [np.zeros(2)], 25, tol=1e-12)
    assert rep.ok and rep.checked > 0


def test_quasi_fejer_injected_jump():
    vals = [1.0 / (j // 2 + 1) for j in range(30)]
    vals[10] = 2.0  # x_{2j} with j = 5
    rep = check_quasi_fejer(line_instance(vals), [np.zeros(1)], 10)
    assert (0, 4, 1) in rep.violations


def _lagged_distances(n):
    even = [1.0 / (j + 1) for j in range(n)]
    out = []
    for j in range(n):
        out.append(even[j])
        out.append(even[0] if j == 0 else 0.5 * (even[j] + even[j - 1]))
    return out


def test_f_monotone_needs_the_right_lag():
    vals = _lagged_distances(30)
    lag = check_f_monotone(line_instance(vals, StepFunction.lag(1)), [np.zeros(1)], 25, tol=1e-12)
    assert lag.ok
    ident = check_f_monotone(line_instance(vals, StepFunction.identity()), [np.zeros(1)], 25, tol=1e-12)
    assert not ident.ok


def test_f_monotone_rotation_with_lag():
    run = rotation_run()
    inst = FejerInstance(seq=run, dist=metric_distance(2), f=StepFunction.lag(1))
    assert check_f_monotone(inst, [np.zeros(2)], 25, tol=1e-12).ok
    assert check_f_monotone(line_instance([3.0] * 40), [np.zeros(1)], 15).ok


def test_uniform_modulus_examples():
    run = rotation_run()
    inst = hb.hilbert_instance(run, 1)
    grid = [(n, m, r) for n in range(3) for m in range(3) for r in range(3)]
    rng = np.random.default_rng(0)
    samples = hb.sample_approx_fixed_points(run.T, np.zeros(2), 1e-3, 20, rng)
    for which in ("chi", "zeta"):
        rep = check_uniform_modulus(inst, which, grid, samples, 1e-12)
        assert rep.ok and not rep.vacuous

    huge = FejerInstance(seq=run, dist=metric_distance(2), family=inst.family,
                         chi=NatModulus(lambda n, m, r: 10 ** 30, arity=3))
    rep = check_uniform_modulus(huge, "chi", grid, [np.array([0.5, 0.5])])
    assert rep.ok and rep.vacuous

    zero = FejerInstance(seq=run, dist=metric_distance(2), family=hb.hilbert_family(run.T),
                         chi=NatModulus(lambda n, m, r: 0, arity=3))
    rep = check_uniform_modulus(zero, "chi", [(0, 2, 100)], [np.array([1.0, 0.0])])
    assert not rep.ok


def test_approx_point_bound_report():
    inst = line_instance([1.0 / (n + 1) for n in range(50)])
    inst.family = ApproximationFamily(residual=lambda x: float(abs(x[0])))
    inst.Phi = NatModulus(lambda k: k, monotone=True)
    rep = check_approx_point_bound(inst, range(5), stride=1)
    assert rep.ok and rep.witnesses[3] == 3
    inst.Phi = NatModulus(lambda k: 0)
    assert check_approx_point_bound(inst, [2], stride=1).violations == [2]


def test_derive_partial_from_full_examples():
    chi = NatModulus(lambda n, m, r: n + m + r, arity=3)
    pm = derive_partial_from_full(chi, ErrorSchedule.none())
    assert pm.chi(1, 2, 3) == 9
    assert pm.eta(1, 2, 3) == 10
    assert pm.errors(5) == 0
    const = derive_partial_from_full(NatModulus(lambda n, m, r: 7, arity=3), ErrorSchedule.none())
    assert const.chi(4, 5, 6) == const.eta(1, 1, 1) == 7
    e = ErrorSchedule(lambda n: Fraction(1, 2 ** n), NatModulus(lambda k: k + 1))
    pe = derive_partial_from_full(chi, e)
    assert pe.errors(1) == Fraction(1, 4) + Fraction(1, 8)
    assert pe.errors.xi(4) == 3


def test_mixed_modulus_examples():
    z = mixed_gh_f_modulus(NatModulus(lambda n, m, r: 0, arity=3), NatModulus(lambda n, r: 0, arity=2),
                           StepFunction.identity())
    assert z(3, 4, 5) == 0
    zh = mixed_gh_f_modulus(NatModulus(lambda n, m, r: n + m + r, arity=3), NatModulus(lambda n, r: n * r, arity=2),
                            StepFunction.identity())
    assert zh(1, 2, 3) == 21
    calls = []
    chi = NatModulus(lambda n, m, r: calls.append((n, m, r)) or 0, arity=3)
    mixed_gh_f_modulus(chi, NatModulus(lambda n, r: 0, arity=2), StepFunction(lambda n: 0))(5, 3, 2)
    assert calls == [(0, 0, 5)]


def test_affine_shift_examples():
    a = ["a0", "a1", "a2", "a3", "a4"]
    s1 = affine_shift(1, seq=a, Phi=NatModulus(lambda k: 2 * k))
    assert [s1.hat[i] for i in range(5)] == a
    assert [s1.f(n) for n in range(5)] == list(range(5))
    assert s1.Phi_prime(4) == 8
    s3 = affine_shift(3, seq=a, Phi=NatModulus(lambda k: 2 * k))
    assert [s3.hat[i] for i in range(5)] == ["a0", "a0", "a2", "a3", "a4"]
    assert [s3.Phi_prime(k) for k in range(4)] == [1, 3, 5, 7]
    with pytest.raises(ValueError):
        affine_shift(2)


@given(st.integers(0, 6), st.integers(0, 40))
def test_hat_sequence_cases(sp, n):
    s = 2 * sp + 1
    h = affine_shift(s).hat_of(list(range(100)))
    want = n - 1 if (n < s and n % 2 == 1) else n
    assert h[n] == want


def test_tb_conversion_examples():
    ident = NatModulus(lambda k: k)
    g = convert_tb_modulus(ident, NatModulus(lambda k: 2 * k + 1), "cover->sequence")
    assert [g(k) for k in range(4)] == [2, 4, 6, 8]
    alpha = NatModulus(lambda k: 3 * k + 1)
    back = convert_tb_modulus(convert_tb_modulus(alpha, ident, "cover->sequence"), ident, "sequence->cover")
    assert [back(k) for k in range(10)] == [alpha(k) for k in range(10)]
    one = convert_tb_modulus(NatModulus(lambda k: 1), ident, "sequence->cover")
    assert one(5) == 0


def test_closedness_tb_conversion_examples():
    ident = NatModulus(lambda k: k)
    g, w, d = convert_closedness_and_tb(NatModulus(lambda k: k * k), NatModulus(lambda k: 4 * k + 3),
                                        NatModulus(lambda k: 2 * k + 1), ident, ident)
    assert (g(3), w(3), d(3)) == (9, 15, 7)
    g, w, _ = convert_closedness_and_tb(NatModulus(lambda k: k * k), NatModulus(lambda k: 4 * k + 3),
                                        ident, NatModulus(lambda k: 2 * k + 1), NatModulus(lambda k: 2 * k + 1))
    assert g(3) == 49
    assert [w(k) for k in range(5)] == [8 * k + 7 for k in range(5)]


def test_pigeonhole_on_box():
    rng = np.random.default_rng(11)
    d = metric_distance(2)
    for _ in range(50):
        for k in range(5):
            gam = hb.gamma_box(2, 1, k)
            pts = rng.uniform(-1, 1, (gam + 1, 2))
            assert pigeonhole_witness(pts, d, k, gam + 1) is not None


def test_closedness_rotation_map():
    T = hb.rotation_average()
    fam = hb.hilbert_family(T)
    rng = np.random.default_rng(3)
    pairs = []
    for k in range(6):
        w, dl = hb.closedness_nonexpansive(k)
        for q in hb.sample_approx_fixed_points(T, np.zeros(2), 1.0 / (dl + 1), 30, rng):
            u = rng.normal(size=2)
            pairs.append((q, q + u / np.linalg.norm(u) / (w + 1)))
    rep = check_closedness(fam, metric_distance(2), lambda k: 4 * k + 3, lambda k: 2 * k + 1, pairs, range(6))
    assert rep.ok and rep.checked > 0
    # a too-weak omega is caught
    rep = check_closedness(fam, metric_distance(2), lambda k: 0, lambda k: k, pairs, [3])
    assert not rep.ok
