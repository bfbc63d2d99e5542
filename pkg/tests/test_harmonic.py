import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmbv import harmonic as Hm
from harmbv.errors import DomainError
from harmbv.harmonic import Functional
from harmbv.testbed import TestFunction
from harmbv.weights import WeightSequence

G = TestFunction.from_modes([(math.pi / 2, 1.0)])


def test_fundamental_solution_values():
    assert Hm.fundamental_solution(1.0, 0.0) == pytest.approx(0.0)
    assert Hm.fundamental_solution(0.0, math.e) == pytest.approx(1 / (2 * math.pi))


def test_poisson_kernel_values():
    assert Hm.poisson_kernel(0.0, 1.0) == pytest.approx(1 / (2 * math.pi))
    assert Hm.poisson_kernel(1.0, 1.0) == pytest.approx(1 / (4 * math.pi))
    assert Hm.poisson_kernel_dx(1, 1.0, 1.0) == pytest.approx(-1 / (4 * math.pi))


def test_poisson_kernel_is_half_jump():
    # P(x, y) = y / (2 pi (x^2 + y^2)): each side carries half of delta
    y = 1e-3
    s = np.linspace(-50, 50, 2_000_001)
    total = np.trapezoid(Hm.poisson_kernel(s, y), s)
    assert total == pytest.approx(0.5, abs=1e-4)


@pytest.mark.parametrize("a,b", [(0, 1), (1, 0), (2, 0), (1, 1), (0, 2), (3, 1)])
def test_kernel_derivatives_vs_differences(a, b):
    x, y, e = 0.7, 0.4, 1e-5
    f = lambda u, v: Hm.poisson_kernel_deriv(a, b, u, v)
    if a + b == 0:
        return
    # lower one order and difference it
    if a > 0:
        want = (Hm.poisson_kernel_deriv(a - 1, b, x + e, y) - Hm.poisson_kernel_deriv(a - 1, b, x - e, y)) / (2 * e)
    else:
        want = (Hm.poisson_kernel_deriv(a, b - 1, x, y + e) - Hm.poisson_kernel_deriv(a, b - 1, x, y - e)) / (2 * e)
    assert f(x, y) == pytest.approx(want, rel=1e-6)


@given(st.integers(0, 4), st.integers(0, 3), st.floats(-3, 3), st.floats(1e-3, 3))
@settings(max_examples=60, deadline=None)
def test_kernel_derivative_parity_exact(a, b, x, y):
    # P is odd in y, so d_y^b P has parity (-1)^(b+1)
    assert Hm.poisson_kernel_deriv(a, b, x, -y) == (-1) ** (b + 1) * Hm.poisson_kernel_deriv(a, b, x, y)


def test_kernel_bound_fit():
    r = Hm.kernel_bound_fit(12)
    assert r["C"] == pytest.approx(1 / (2 * math.pi), rel=1e-6)
    assert r["H"] == pytest.approx(1.0, rel=1e-6)


def test_interior_estimate():
    r = Hm.interior_estimate_check([(0.0, 0.5), (0.5, 1.0)])
    assert r["C"] <= 0.5 + 1e-9 and r["H"] <= 1.0 + 1e-9


# -- functionals -------------------------------------------------------------------


def test_pairing_atoms():
    cos = TestFunction.from_modes([(1.0, 1.0)])
    sin = TestFunction.from_modes([(1.0, 0.0, 1.0)])
    assert Functional.delta(0.0).pair(cos) == 1.0
    # <d delta_0, phi> = -phi'(0)
    assert Functional.delta(0.0, 1).pair(sin) == pytest.approx(-1.0)
    assert Functional.delta(0.0, 2).pair(cos) == pytest.approx(-1.0)


def test_pairing_density_vs_quad():
    f = Functional((), G, (-1.0, 1.0))
    phi = TestFunction.from_modes([(1.0, 1.0), (2.0, 0.0, 0.5)])
    from scipy.integrate import quad
    want = quad(lambda s: math.cos(math.pi * s / 2) * (math.cos(s) + 0.5 * math.sin(2 * s)), -1, 1)[0]
    assert f.pair(phi) == pytest.approx(want, abs=1e-13)


def test_functional_json_round_trip():
    f = Functional.delta(-0.5) + Functional.delta(0.7, 1, 2.0) + Functional((), G, (-1.0, 1.0))
    g = Functional.from_json(f.to_json())
    x, y = np.linspace(-1, 1, 7), np.full(7, 0.1)
    assert np.array_equal(Hm.poisson_transform(f, x, y), Hm.poisson_transform(g, x, y))


def test_hull_and_distance():
    f = Functional.delta(-0.5) + Functional.delta(0.7, 1)
    assert f.hull() == (-0.5, 0.7)
    assert f.distance(np.array([1.0]), np.array([0.4]))[0] == pytest.approx(0.5)
    assert f.distance(np.array([0.0]), np.array([0.3]))[0] == pytest.approx(0.3)


# -- transform -------------------------------------------------------------------------


@pytest.mark.parametrize("x,y", [(0.0, 1e-6), (1.0, 1e-5), (0.999, 1e-6), (-1.0, 0.3), (2.0, 0.01), (0.3, 2.0)])
def test_density_closed_form_vs_quad(x, y):
    a = Hm.density_transform(G, (-1.0, 1.0), np.array([x]), np.array([y]), "closed")
    b = Hm.density_transform(G, (-1.0, 1.0), np.array([x]), np.array([y]), "quad")
    assert a[0] == pytest.approx(b[0], abs=1e-12)


def test_density_small_height_limit():
    # each side carries g(x)/2 as y -> 0; g(0) = 1 and g vanishes at the box edge
    v = Hm.density_transform(G, (-1.0, 1.0), np.array([0.0, 1.0]), np.array([1e-6, 1e-6]))
    assert v[0] == pytest.approx(0.5, abs=1e-5)
    assert abs(v[1]) < 1e-4
    q = Hm.density_transform(G, (-1.0, 1.0), np.array([0.0]), np.array([1e-6]), "quad")
    assert v[0] == pytest.approx(q[0], abs=1e-12)


@given(st.floats(-2, 2), st.floats(1e-4, 2))
@settings(max_examples=60, deadline=None)
def test_transform_exactly_odd(x, y):
    f = Functional.delta(0.1) + Functional.delta(-0.3, 2, 0.4) + Functional((), G, (-1.0, 1.0))
    assert Hm.poisson_transform(f, x, -y) == -Hm.poisson_transform(f, x, y)


@given(st.floats(-1.5, 1.5), st.floats(0.3, 1.5))
@settings(max_examples=25, deadline=None)
def test_transform_harmonic(x, y):
    # the stencil residual of a harmonic field is pure O(step^2) truncation error
    f = Functional.delta(0.0) + Functional.delta(0.3, 1, -0.5) + Functional((), G, (-1.0, 1.0))
    F = Hm.transform_field(f)
    r1 = abs(Hm.harmonic_residual(F, (x, y), 4e-3))
    r2 = abs(Hm.harmonic_residual(F, (x, y), 2e-3))
    assert r2 <= r1 / 3.0 or r1 < 1e-9


def test_transform_on_carrier_raises():
    with pytest.raises(DomainError):
        Hm.poisson_transform(Functional.delta(0.0), 0.0, 0.0)
    assert Hm.poisson_transform(Functional.delta(0.0), 1.0, 0.0) == 0.0


def test_residual_order_two():
    F = Hm.transform_field(Functional.delta(0.0))
    assert Hm.residual_order(F, (2.0, 0.5))["order"] == pytest.approx(2.0, abs=0.05)
    assert Hm.harmonic_residual(lambda x, y: x * x, (0.3, 0.2), 1e-2) == pytest.approx(2.0)


def test_decay_chain():
    r = Hm.poisson_decay_chain(Functional.delta(0.0, 1), WeightSequence.gevrey(2))
    assert r["stable"] and r["c"] is not None and not r["saturated"]
