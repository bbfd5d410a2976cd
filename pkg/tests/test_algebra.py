import pytest
from gmpy2 import mpq
from hypothesis import given, strategies as st

from ellgw.algebra import (QQ, NonUnitError, SeriesRing, TruncationError,
                           VariableMismatchError, qring, rational,
                           rational_parts, substitute)
from ellgw.combinatorics import divisor_power_sum
from ellgw.stationary import eisenstein, euler_factor, sigma_series
from ellgw.supercommutative import DegreeLevelTruncation, SuperAlgebra, tvar


def q_series(order, coeffs):
    return qring(order).series({(i,): c for i, c in coeffs.items()})


def test_rational_normalization():
    assert rational(2, 4) == rational(1, 2)
    assert rational_parts(rational(-2, -4)) == (1, 2)
    assert rational_parts(rational(2, -4)) == (-1, 2)


def test_mul_telescoping():
    r = qring(3)
    a = r.series({(0,): 1, (1,): 1})
    b = r.series({(0,): 1, (1,): -1})
    assert a * b == r.series({(0,): 1, (2,): -1})


def test_mul_geometric():
    r = qring(5)
    geo = r.series({(n,): 1 for n in range(6)})
    assert geo * r.series({(0,): 1, (1,): -1}) == r.one()


def test_mul_eisenstein_square_low_order():
    e2 = eisenstein(2, 1)
    sq = e2 * e2
    assert sq.coefficient(0) == mpq(1, 576)
    assert sq.coefficient(1) == mpq(-1, 12)


def test_mul_variable_mismatch():
    a = qring(3).one()
    b = SeriesRing(("x",), 3).one()
    with pytest.raises(VariableMismatchError):
        a * b


def test_invert_geometric():
    r = qring(4)
    inv = r.series({(0,): 1, (1,): -1}).invert()
    assert inv == r.series({(n,): 1 for n in range(5)})


def test_invert_euler_gives_partition_numbers():
    # brute-force partition oracle
    def count(n, top):
        if n == 0:
            return 1
        return sum(count(n - p, p) for p in range(min(n, top), 0, -1))
    inv = euler_factor(5).invert()
    for n in range(6):
        assert inv.coefficient(n) == count(n, n)


def test_invert_one_and_nonunit():
    r = qring(4)
    assert r.one().invert() == r.one()
    with pytest.raises(NonUnitError):
        r.series({(1,): 1}).invert()


def test_exp_log_basic():
    r = qring(3)
    e = r.gen(order=3).exp()
    assert e == r.series({(0,): 1, (1,): 1, (2,): mpq(1, 2), (3,): mpq(1, 6)})
    r4 = qring(4)
    assert r4.gen(order=4).exp().log() == r4.gen(order=4)


def test_exp_sigma_is_partition_series():
    assert sigma_series(4).exp() == q_series(4, {0: 1, 1: 1, 2: 2, 3: 3, 4: 5})


def test_exp_requires_zero_constant():
    with pytest.raises(Exception):
        qring(3).one().exp()


def test_derivative_modes():
    s = sigma_series(6)
    euler = s.derivative(0, logarithmic=True)
    for n in range(1, 7):
        assert euler.coefficient(n) == divisor_power_sum(n, 1)
    one = qring(0).one()
    d = one.derivative(0)
    assert not d and d.order == -1
    cubed = qring(5).gen(power=3, order=5)
    assert cubed.derivative(0, logarithmic=True) == 3 * cubed


def test_coefficient_access_and_truncation_guard():
    s = sigma_series(6)
    assert s.coefficient(2) == mpq(3, 2)
    assert qring(2).one().coefficient(0) == 1
    assert eisenstein(4, 4).coefficient(2) == 9
    with pytest.raises(TruncationError):
        s.coefficient(7)


def test_substitute_linear_target():
    # a = q, g = q*(1 + s) with s an even degree-1 variable
    a = qring(2).gen(order=2)
    algebra = SuperAlgebra(DegreeLevelTruncation(2, 0), qring(2))
    q_el = qring(2).gen(order=2)
    target = (algebra.one() + algebra.var(tvar(4, 0))) * q_el
    result = substitute(a, target, algebra.one(), order=2)
    assert result == algebra.var(tvar(4, 0)) * q_el + q_el


def test_substitute_constant_series_untouched():
    one = qring(4).one()
    algebra = SuperAlgebra(DegreeLevelTruncation(3, 0), qring(4))
    target = algebra.var(tvar(4, 0)) * qring(4).gen(order=4)
    assert substitute(one, target, algebra.one(), order=4) == algebra.one()


def test_substitute_exponential_example():
    a = qring(2).gen(power=2, order=2)
    algebra = SuperAlgebra(DegreeLevelTruncation(2, 0), qring(2))
    q_el = qring(2).gen(order=2)
    target = algebra.var(tvar(4, 0)).exp() * q_el
    result = substitute(a, target, algebra.one(), order=2)
    t40 = algebra.var(tvar(4, 0))
    q2 = qring(2).gen(power=2, order=2)
    expected = (algebra.one() + 2 * t40 + 2 * t40 * t40) * q2
    assert result == expected


def test_substitute_rejects_nontruncating_target():
    a = qring(3).series({(n,): 1 for n in range(4)})
    target = qring(3).series({(0,): 1, (1,): 1})  # scalar constant term
    with pytest.raises(TruncationError):
        substitute(a, target, qring(3).one(), order=3)


# -- property tests ----------------------------------------------------------

small_rationals = st.integers(-4, 4).map(mpq)


@st.composite
def small_series(draw, order=4, unit=False, zero_constant=False):
    ring = qring(order)
    coeffs = {}
    for n in range(order + 1):
        coeffs[(n,)] = draw(small_rationals)
    if unit:
        coeffs[(0,)] = draw(st.sampled_from([mpq(1), mpq(-1), mpq(2), mpq(1, 3)]))
    if zero_constant:
        coeffs[(0,)] = mpq(0)
    return ring.series(coeffs)


@given(small_series(), small_series(), small_series())
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a


@given(small_series(unit=True))
def test_invert_two_sided(a):
    inv = a.invert()
    assert a * inv == qring(4).one()
    assert inv * a == qring(4).one()
    assert inv.invert() == a


@given(small_series(zero_constant=True))
def test_log_exp_roundtrip(a):
    assert a.exp().log() == a


@given(small_series(order=3), small_series(order=3))
def test_substitution_is_ring_homomorphism(a, b):
    ring = SeriesRing(("q", "s"), 3)
    target = ring.series({(1, 0): 1, (1, 1): 1})  # q*(1 + s)
    one = ring.one()
    lhs = substitute(a * b, target, one, order=3)
    rhs = substitute(a, target, one, order=3) * substitute(b, target, one, order=3)
    assert lhs == rhs
