from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fejer.moduli import (CounterFunction, ErrorSchedule, NatModulus, ScanBudgetExceeded, StepFunction,
                          combine_gh, gh_modulus_check, h_modulus_check, majorize, min_partial_sum_bound,
                          monus, nat, to_fraction)

import oracles


def test_majorize_examples():
    ident = NatModulus(lambda k: k, monotone=True)
    assert majorize(ident) is ident
    table = [5, 1, 7, 2]
    fm = majorize(NatModulus(lambda k: table[k]))
    assert [fm(k) for k in range(4)] == [5, 5, 7, 7]
    z = majorize(NatModulus(lambda k: 0))
    assert [z(k) for k in range(10)] == [0] * 10


@given(st.lists(st.integers(0, 10 ** 6), min_size=1, max_size=60))
def test_majorant_is_running_max(vals):
    fm = majorize(NatModulus(lambda k: vals[k]))
    got = [fm(k) for k in range(len(vals))]
    assert got == oracles.max_scan(vals)
    assert all(a <= b for a, b in zip(got, got[1:]))
    assert all(g >= v for g, v in zip(got, vals))


def test_majorant_scan_limit():
    fm = majorize(NatModulus(lambda k: k % 3), scan_limit=10)
    assert fm(10) == 2
    with pytest.raises(ScanBudgetExceeded):
        fm(11)


def test_majorant_extra_arguments_cached_separately():
    fm = majorize(NatModulus(lambda n, r: (n * r) % 5, arity=2))
    assert fm(4, 1) == 4
    assert fm(4, 2) == 4  # (0,2,4,1,3) -> max 4
    assert fm(1, 3) == 3


def test_combine_gh_examples():
    idm = NatModulus(lambda k: k)
    aG, bH = combine_gh(idm, idm, idm, NatModulus(lambda k: 0))
    assert [aG(k) for k in range(6)] == list(range(6))
    assert [bH(k) for k in range(6)] == list(range(6))
    aG, _ = combine_gh(NatModulus(lambda k: 2 * k), NatModulus(lambda k: k + 3), idm, idm)
    assert [aG(k) for k in range(5)] == [3, 4, 5, 6, 8]


def test_gh_modulus_check_examples():
    samples = [Fraction(1, j) for j in range(1, 50)]
    assert gh_modulus_check(lambda a: a, NatModulus(lambda k: k), samples) == []
    assert gh_modulus_check(lambda a: 2 * a, NatModulus(lambda k: 2 * k + 1), samples) == []
    bad = gh_modulus_check(lambda a: 2 * a, NatModulus(lambda k: k), [Fraction(1, 2)], ks=[1])
    assert bad and bad[0][0] == 1 and bad[0][2] == 1


def test_h_modulus_check():
    assert h_modulus_check(lambda a: a, NatModulus(lambda k: k), [Fraction(1, j) for j in range(1, 30)]) == []
    # H(a) = a/2 needs betaH(k) = 2k+1
    assert h_modulus_check(lambda a: a / 2, NatModulus(lambda k: 2 * k + 1), [Fraction(1, j) for j in range(1, 30)]) == []
    assert h_modulus_check(lambda a: a / 2, NatModulus(lambda k: k), [Fraction(1, 2), Fraction(2, 3)], ks=[1])


def test_min_partial_sum_bound_examples():
    assert min_partial_sum_bound([1, 1, 1, 1], 4, 4) == 1
    assert min_partial_sum_bound([3, 0, 1], 4, 2) == 0
    assert min_partial_sum_bound([2, 2], 4, 1) == 2
    with pytest.raises(ValueError):
        min_partial_sum_bound([3, 3], 4, 1)


@given(st.lists(st.fractions(min_value=0, max_value=10), min_size=1, max_size=20), st.data())
def test_min_partial_sum_bound_property(a, data):
    k = data.draw(st.integers(1, len(a)))
    A = sum(a) + data.draw(st.fractions(min_value=0, max_value=5))
    m = min_partial_sum_bound(a, A, k)
    assert m * k <= A


@given(st.integers(0, 10 ** 30), st.integers(0, 10 ** 30))
def test_monus(a, b):
    assert monus(a, b) == max(a - b, 0)


def test_nat_rejects_bad_values():
    with pytest.raises(ValueError):
        nat(-1)
    with pytest.raises(ValueError):
        nat(1.5)
    assert nat(Fraction(4, 2)) == 2


def test_to_fraction_accepts_strings():
    assert to_fraction("3/4") == Fraction(3, 4)
    assert to_fraction("0.25") == Fraction(1, 4)
    assert to_fraction(2) == 2


def test_counterfunction_parse():
    assert CounterFunction.parse("const:4")(100) == 4
    g = CounterFunction.parse("linear:2,10")
    assert [g(n) for n in range(3)] == [10, 12, 14]
    assert g.shifted(3, 3)(0) == 19
    for bad in ("const:", "quadratic:1", "linear:1", "linear:a,b"):
        with pytest.raises(ValueError):
            CounterFunction.parse(bad)


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 1000))
def test_counterfunction_linear_property(a, b, n):
    assert CounterFunction.parse(f"linear:{a},{b}")(n) == a * n + b


def test_step_function_lag():
    f = StepFunction.lag(2)
    assert [f(n) for n in range(5)] == [0, 0, 0, 1, 2]
    assert f.violations(100) == []
    bad = StepFunction(lambda n: n + 1)
    assert bad.violations(3)


@given(st.integers(0, 5), st.integers(0, 60))
def test_step_function_divergence_rate(s, L):
    f = StepFunction.lag(s)
    assert f(f.kappa(L)) >= L


def test_error_schedule_sums():
    e = ErrorSchedule(lambda n: Fraction(1, 2 ** n))
    assert e.partial_sum(0, 2) == Fraction(7, 4)
    assert e.partial_sum(3, 2) == 0
    assert e.prefix_sums(3) == [0.0, 1.0, 1.5, 1.75]
    assert ErrorSchedule.none().partial_sum(0, 10 ** 6) == 0
