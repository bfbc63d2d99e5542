import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmbv.testbed import TestFunction, class_norm_certificate, make_class_sample
from harmbv.weights import WeightSequence

modes = st.lists(st.tuples(st.floats(0.0, 4.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0)), min_size=1, max_size=4)


def test_second_derivative_of_cos3x():
    f = TestFunction.from_modes([(3.0, 1.0)])
    assert f.derivative(2, np.array([0.0]))[0] == pytest.approx(-9.0)


@given(modes, st.integers(0, 4), st.floats(-3.0, 3.0))
@settings(max_examples=40, deadline=None)
def test_derivative_matches_closed_form(ms, n, x):
    f = TestFunction.from_modes(ms)
    got = f.derivative(n, np.array([x]))[0]
    # d^n [a cos kx + b sin kx] = k^n [a cos(kx + n pi/2) + b sin(kx + n pi/2)]
    want = sum(k ** n * (a * math.cos(k * x + n * math.pi / 2) + b * math.sin(k * x + n * math.pi / 2))
               for k, a, b in ms)
    assert got == pytest.approx(want, abs=1e-9 * (1 + max(k for k, _, _ in ms) ** n))


@given(modes, st.integers(0, 3))
@settings(max_examples=30, deadline=None)
def test_laplacian_power_is_iterated_second_derivative(ms, p):
    f = TestFunction.from_modes(ms)
    x = np.linspace(-2, 2, 7)
    want = (-1) ** p * f.derivative(2 * p, x)
    assert np.allclose(f.laplacian_power(p)(x), want, atol=1e-9 * (1 + 16 ** p))


def test_two_dimensional_mode():
    f = TestFunction.from_modes([((1.0, 2.0), 1.0)], d=2)
    x = np.array([[0.3, -0.2]])
    assert f(x)[0] == pytest.approx(math.cos(0.3 - 0.4))
    assert f.derivative((1, 1), x)[0] == pytest.approx(-2 * math.cos(-0.1))
    assert f.laplacian_power(1)(x)[0] == pytest.approx(5 * math.cos(-0.1))


def test_json_round_trip():
    f = TestFunction.from_modes([(1.0, 1.0), (2.5, 0.0, -0.5)])
    g = TestFunction.from_json(f.to_json())
    x = np.linspace(-1, 1, 5)
    assert np.array_equal(f(x), g(x))


def test_zero_function():
    z = TestFunction.zero()
    assert z.n_modes == 0 and np.all(z(np.ones(3)) == 0)


def test_certificate_oracles():
    cert = class_norm_certificate(TestFunction.from_modes([(1.0, 1.0)]), WeightSequence.gevrey(1), 2.0)
    assert cert.bound == pytest.approx(1.0) and not cert.saturated
    ks = np.arange(1, 41)
    f = TestFunction(1, ks[:, None].astype(float), np.exp(-np.sqrt(ks)), np.zeros(40))
    cert = class_norm_certificate(f, WeightSequence.gevrey(2), 1.0)
    assert cert.argmax_order == 5
    assert cert.bound == pytest.approx(164.0995, rel=1e-6)
    capped = class_norm_certificate(f, WeightSequence.gevrey(2), 1.0, order_cap=60)
    assert capped.bound == pytest.approx(brute_certificate(f, WeightSequence.gevrey(2), 1.0, 60), rel=1e-9)


def brute_certificate(f, M, h, cap):
    # independent oracle: loop over orders with plain floats
    best = 0.0
    for n in range(cap + 1):
        num = sum(math.hypot(a, b) * abs(k) ** n for (k,), a, b in zip(f.k, f.a, f.b))
        best = max(best, num / (h ** n * math.exp(M.log_M[n])))
    return best


@given(modes, st.floats(0.5, 4.0))
@settings(max_examples=30, deadline=None)
def test_certificate_matches_brute_force(ms, h):
    f = TestFunction.from_modes(ms)
    M = WeightSequence.gevrey(2, p_max=60)
    cert = class_norm_certificate(f, M, h)
    assert cert.bound == pytest.approx(brute_certificate(f, M, h, 60), rel=1e-9, abs=1e-300)


@given(modes, st.floats(0.1, 10.0))
@settings(max_examples=30, deadline=None)
def test_certificate_homogeneous(ms, c):
    f = TestFunction.from_modes(ms)
    M = WeightSequence.gevrey(2, p_max=60)
    a = class_norm_certificate(f, M, 1.0).bound
    b = class_norm_certificate(f.scaled(c), M, 1.0).bound
    assert b == pytest.approx(c * a, rel=1e-12, abs=1e-300)


def test_certificate_bounds_derivatives():
    f = TestFunction.from_modes([(1.0, 1.0), (2.0, 0.3, 0.2)])
    M = WeightSequence.gevrey(2, p_max=30)
    cert = class_norm_certificate(f, M, 1.0)
    x = np.linspace(-math.pi, math.pi, 201)
    for n in range(10):
        assert np.max(np.abs(f.derivative(n, x))) <= cert.bound * math.exp(M.log_M[n]) * (1 + 1e-12)


def test_make_class_sample_frozen_values():
    f, cert = make_class_sample(WeightSequence.gevrey(2), 1.0, 60)
    assert cert.meta["c"] == 1.0 and cert.bound == pytest.approx(4422.6, rel=1e-4)
    f, cert = make_class_sample(WeightSequence.gevrey(1), 1.0, 10)
    assert cert.bound == pytest.approx(119.16, rel=1e-4)


def test_bad_modes_rejected():
    with pytest.raises(ValueError):
        TestFunction.from_modes([((1.0, 2.0), 1.0)], d=1)
