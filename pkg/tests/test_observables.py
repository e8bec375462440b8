import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iplab.observables import ANY, MACRO, MESO, DomainMismatch, Observable


def fd(h, z, order, eps=1e-5):
    if order == 1:
        return (h(z + eps) - h(z - eps)) / (2 * eps)
    if order == 2:
        return (h(z + eps) - 2 * h(z) + h(z - eps)) / eps**2
    raise ValueError


def test_polynomial_eval():
    h = Observable.polynomial([1.0, -2.0, 3.0])  # 1 - 2z + 3z^2
    assert h(0.0) == 1.0
    assert h(1.0) == 2.0
    assert h(0.5, 1) == -2.0 + 3.0  # h' = -2 + 6z
    assert h(0.5, 2) == 6.0
    assert h(0.5, 3) == 0.0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6),
       st.floats(0.05, 0.95))
@settings(max_examples=50, deadline=None)
def test_derivative_matches_finite_difference(coeffs, z):
    h = Observable.polynomial(coeffs)
    scale = 1.0 + sum(abs(c) for c in coeffs)
    assert abs(h(z, 1) - fd(h, z, 1)) < 1e-6 * scale
    assert abs(h(z, 2) - fd(h, z, 2)) < 1e-4 * scale


@pytest.mark.parametrize("j,a,q", [(1, 4, 4), (2, 4, 5), (0, 2, 6)])
def test_window_c3_at_cutoff(j, a, q):
    h = Observable.window(j, a, q)
    # value and first three derivatives vanish continuously at the cutoff
    for order in range(4):
        inside = h(a - 1e-12, order)
        assert abs(inside) < 1e-8
        assert h(a + 1e-12, order) == 0.0
    assert h(math.inf) == 0.0
    assert h(float(2 * a)) == 0.0


def test_window_interior_value():
    h = Observable.window(1, 4, 4)
    z = 1.0
    assert abs(h(z) - z * (1 - z / 4) ** 4) < 1e-14
    assert h(0.0) == 0.0


def test_window_rejects_low_regularity():
    with pytest.raises(ValueError):
        Observable.window(1, 4, 3)
    with pytest.raises(ValueError):
        Observable.window(1, 0, 4)


def test_biased_operator():
    # B h = h + z h' maps z^m to (m+1) z^m
    h = Observable.polynomial([0.0, 0.0, 1.0])  # z^2
    bh = h.biased()
    for z in (0.0, 0.3, 1.0):
        assert abs(bh(z) - 3 * z**2) < 1e-15
    const = Observable.constant(2.0)
    assert const.biased()(0.7) == 2.0


def test_integral_exact():
    h = Observable.polynomial([0.0, 1.0])  # z
    assert abs(h.integral(0.0, 1.0) - 0.5) < 1e-15
    w = Observable.window(1, 4, 4)
    # integral of z(1-z/4)^4 on [0,4] = 16/15 via Beta(2,5) = a^2 B(2,5)
    assert abs(w.integral(0.0, 4.0) - 16.0 * math.gamma(2) * math.gamma(5)
               / math.gamma(7)) < 1e-12
    assert abs(w.integral(0.0, 10.0) - w.integral(0.0, 4.0)) < 1e-15


def test_algebra_products_and_sums():
    z = Observable.polynomial([0.0, 1.0])
    one_minus_z = 1.0 - z
    prod = z * one_minus_z
    for x in np.linspace(0, 1, 7):
        assert abs(prod(x) - x * (1 - x)) < 1e-14
    assert abs((z + 2.0)(0.25) - 2.25) < 1e-15


def test_product_cutoff_is_min():
    w1 = Observable.window(1, 2, 4)
    w2 = Observable.window(1, 4, 4)
    p = w1 * w2
    assert p(3.0) == 0.0  # beyond the tighter cutoff
    assert abs(p(1.0) - w1(1.0) * w2(1.0)) < 1e-14


def test_domain_rules():
    macro = Observable.polynomial([0.0, 1.0], domain=MACRO)
    meso = Observable.window(1, 4, 4)
    assert meso.domain == MESO
    with pytest.raises(DomainMismatch):
        macro * meso
    c = Observable.constant(3.0)
    assert (c * macro).domain == MACRO
    assert (c * meso).domain == MESO


def test_value_at_infinity():
    w = Observable.window(1, 4, 4)
    assert w(math.inf) == 0.0
    assert w(math.inf, 2) == 0.0
    poly = Observable.polynomial([0.0, 1.0])
    with pytest.raises(DomainMismatch):
        poly(math.inf)


def test_scaled_arg():
    h = Observable.window(1, 4, 4)
    s = 10.0
    g = h.scaled_arg(s)
    for z in (0.0, 0.1, 0.3, 0.5):
        assert abs(g(z) - h(s * z)) < 1e-12
        assert abs(g(z, 1) - s * h(s * z, 1)) < 1e-10


def test_array_evaluation():
    h = Observable.polynomial([1.0, 1.0])
    zs = np.array([0.0, 0.5, 1.0])
    assert np.allclose(h(zs), 1.0 + zs)
