import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import hermite_e

from chaoslab.errors import CapacityError, DegenerateError, DomainError
from chaoslab.hermite import (
    HermiteSeries,
    derivative,
    gauss_hermite,
    generator_apply,
    hermite_eval,
    hermite_expand,
    hermite_rank,
    hermite_table,
    l2_norm_sq,
    ou_apply,
    tchebycheff_eval,
)


def test_low_order_closed_forms():
    x = np.linspace(-3, 3, 13)
    assert np.allclose(hermite_eval(0, x), 1.0)
    assert np.allclose(hermite_eval(1, x), x)
    assert np.allclose(hermite_eval(2, x), x**2 - 1)
    assert np.allclose(hermite_eval(3, x), x**3 - 3 * x)
    assert np.allclose(hermite_eval(4, x), x**4 - 6 * x**2 + 3)


@given(st.integers(0, 25), st.floats(-6, 6))
def test_matches_numpy_hermite_e(q, x):
    c = np.zeros(q + 1)
    c[q] = 1.0
    ref = hermite_e.hermeval(x, c)
    assert hermite_eval(q, x) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_table_rows_are_polynomials():
    x = np.array([[0.3, -1.2], [2.0, 0.0]])
    tab = hermite_table(6, x)
    assert tab.shape == (7, 2, 2)
    for q in range(7):
        assert np.allclose(tab[q], hermite_eval(q, x))


def test_orthogonality_under_gauss_quadrature():
    x, w = gauss_hermite(40)
    assert w.sum() == pytest.approx(1.0, rel=1e-13)
    for p in range(8):
        for q in range(8):
            val = np.sum(w * hermite_eval(p, x) * hermite_eval(q, x))
            assert val == pytest.approx(math.factorial(q) if p == q else 0.0, abs=1e-9)


def test_tchebycheff_second_kind():
    t = np.linspace(-0.99, 0.99, 9)
    th = np.arccos(t / 2)
    for k in range(6):
        # U_k(2 cos th) = sin((k+1) th) / sin th
        assert np.allclose(tchebycheff_eval(k, t), np.sin((k + 1) * th) / np.sin(th))


def test_expand_monomial():
    s = hermite_expand(lambda x: x**4, 6)
    assert np.allclose(s.coeffs, [3, 0, 6, 0, 1, 0, 0], atol=1e-10)


def test_expand_exponential():
    # e^x = e^{1/2} sum H_q / q!
    s = hermite_expand(np.exp, 15)
    ref = [math.exp(0.5) / math.factorial(q) for q in range(16)]
    assert np.allclose(s.coeffs, ref, rtol=1e-10, atol=1e-14)
    assert l2_norm_sq(s) == pytest.approx(math.exp(2), rel=1e-9)  # E[e^{2X}]


def test_expand_rejects_nonfinite():
    with pytest.raises(DomainError):
        hermite_expand(lambda x: np.where(x > 0, np.inf, 1.0), 4)


def test_rank():
    assert hermite_rank(HermiteSeries((0.0, 0.0, 1.0, 0.5))) == 2
    with pytest.raises(DegenerateError):
        hermite_rank(HermiteSeries((0.0, 0.0)))


def test_rank_of_centered_cosine():
    # cos x = e^{-1/2} sum_k (-1)^k H_{2k} / (2k)!
    s = hermite_expand(lambda x: np.cos(x) - math.exp(-0.5), 12)
    assert hermite_rank(s) == 2
    assert s.coeffs[2] == pytest.approx(-math.exp(-0.5) / 2, rel=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=10), st.floats(0, 5))
def test_ou_semigroup(coeffs, t):
    s = HermiteSeries(tuple(coeffs))
    out = ou_apply(s, t)
    assert np.allclose(out.coeffs, [a * math.exp(-q * t) for q, a in enumerate(coeffs)])
    assert ou_apply(ou_apply(s, t), 0.5).coeffs == pytest.approx(ou_apply(s, t + 0.5).coeffs, rel=1e-12, abs=1e-300)


def test_ou_negative_time():
    with pytest.raises(DomainError):
        ou_apply(HermiteSeries((1.0,)), -0.1)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=8), st.floats(-2, 2))
def test_derivative_and_generator(coeffs, x):
    s = HermiteSeries(tuple(coeffs))
    h = 1e-5
    num = (s(x + h) - s(x - h)) / (2 * h)
    assert derivative(s)(x) == pytest.approx(num, rel=1e-6, abs=1e-6)
    # L = d^2/dx^2 - x d/dx
    Ls = generator_apply(s)
    d1 = derivative(s)
    d2 = derivative(d1)
    assert Ls(x) == pytest.approx(d2(x) - x * d1(x), rel=1e-9, abs=1e-9)


def test_order_cap():
    with pytest.raises(CapacityError):
        hermite_eval(10_000, 0.5)
