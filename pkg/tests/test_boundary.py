import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmbv import boundary as B
from harmbv.harmonic import Functional, harmonic_residual, transform_field
from harmbv.testbed import TestFunction

COS = TestFunction.from_modes([(1.0, 1.0)])
SIN = TestFunction.from_modes([(1.0, 0.0, 1.0)])
G = TestFunction.from_modes([(math.pi / 2, 1.0)])


def test_box_cutoff_shape():
    x = np.array([-1.1, -0.9, -0.5, 0.0, 0.5, 0.9, 1.1])
    assert B.box_cutoff((-0.5, 0.5), x).tolist() == [0, pytest.approx(B.box_cutoff((-0.5, 0.5), 0.9)), 1, 1, 1,
                                                     pytest.approx(B.box_cutoff((-0.5, 0.5), 0.9)), 0]


def test_bv_pair_oracles():
    r = B.bv_pair(transform_field(Functional.delta(0.0)), COS, (-0.5, 0.5))
    assert r.extrapolated == pytest.approx(1.0, abs=1e-8) and r.order == 1
    r = B.bv_pair(transform_field(Functional.delta(0.0, 1)), SIN, (-0.5, 0.5))
    assert r.extrapolated == pytest.approx(-1.0, abs=1e-8)
    r = B.bv_pair(transform_field(Functional.delta(0.0, 1)), COS, (-0.5, 0.5))
    assert abs(r.extrapolated) < 1e-9


def test_bv_levels_converge_at_first_order():
    r = B.bv_pair(transform_field(Functional.delta(0.0)), COS, (-0.5, 0.5))
    err = np.abs(r.levels - 1.0)
    assert np.all(np.diff(err) < 0)
    assert err[-2] / err[-1] == pytest.approx(2.0, rel=0.05)


def test_richardson_orders():
    ys = 0.1 * 2.0 ** -np.arange(6)
    v, err, order, osc, _ = B._richardson(3.0 + 0.7 * ys ** 2 + 0.1 * ys ** 4, ys)
    assert order == 2 and v == pytest.approx(3.0, abs=1e-12) and not osc
    v, err, order, osc, _ = B._richardson(3.0 + 0.7 * ys + 0.1 * ys ** 2, ys)
    assert order == 1 and v == pytest.approx(3.0, abs=1e-12)
    _, _, _, osc, _ = B._richardson(3.0 + 0.7 * ys * (-1.0) ** np.arange(6), ys)
    assert osc


def test_bv_many_matches_single():
    F = transform_field(Functional.delta(0.2, 1) + Functional((), G, (-1.0, 1.0)))
    many = B.bv_pair_many(F, [COS, SIN], (-1.5, 1.5))
    assert many[1].extrapolated == B.bv_pair(F, SIN, (-1.5, 1.5)).extrapolated


@given(st.floats(-0.6, 0.6), st.integers(0, 2), st.floats(-2.0, 2.0))
@settings(max_examples=15, deadline=None)
def test_roundtrip_random_atoms(x0, order, c):
    f = Functional.delta(x0, order, c)
    assert B.roundtrip(f)["max_error"] <= 1e-5 * max(1.0, abs(c))


def test_roundtrip_zero_functional():
    assert B.roundtrip(Functional())["max_error"] == 0.0


@given(st.floats(-3.0, 3.0))
@settings(max_examples=10, deadline=None)
def test_bv_linear_in_functional(c):
    f = Functional.delta(0.1) + Functional.delta(-0.2, 1)
    a = B.bv_pair(transform_field(f), COS, (-0.8, 0.8)).extrapolated
    b = B.bv_pair(transform_field(f.scaled(c)), COS, (-0.8, 0.8)).extrapolated
    assert b == pytest.approx(c * a, abs=1e-9)


# -- Green identity ------------------------------------------------------------------


@pytest.mark.parametrize("name", ["1", "x", "y", "xy", "x2-y2", "3x2y-y3", "x3-3xy2"])
def test_polynomials_harmonic_with_correct_gradient(name):
    P = B.HarmonicPolynomial(name)
    assert abs(harmonic_residual(P.value, (0.3, -0.7), 1e-2)) < 1e-9
    e = 1e-6
    gx, gy = P.grad(np.array(0.3), np.array(-0.7))
    assert float(gx) == pytest.approx((P.value(0.3 + e, -0.7) - P.value(0.3 - e, -0.7)) / (2 * e), abs=1e-8)
    assert float(gy) == pytest.approx((P.value(0.3, -0.7 + e) - P.value(0.3, -0.7 - e)) / (2 * e), abs=1e-8)
    # trace of d_y at y = 0
    t = P.trace_dy().derivative(0, np.array([0.4]))[0]
    assert t == pytest.approx(float(P.grad(np.array(0.4), np.array(0.0))[1]), abs=1e-12)


def test_green_identity_derivative_atom():
    r = B.green_identity_check(Functional.delta(0.3, 1), B.HarmonicPolynomial("3x2y-y3"))
    assert r["lhs"] == pytest.approx(-1.8) and r["slack"] < 1e-6


def test_unknown_polynomial():
    with pytest.raises(ValueError):
        B.HarmonicPolynomial("x4").trace_dy()


# -- support ---------------------------------------------------------------------------


def test_support_two_atoms():
    x = np.round(np.arange(-1.5, 1.51, 0.02), 12)
    r = B.support_estimate(Functional.delta(-0.5) + Functional.delta(0.7, 1), x)
    assert len(r["intervals"]) == 2
    assert r["peaks"] == pytest.approx([-0.5, 0.7], abs=0.02)


def test_support_empty_for_zero():
    r = B.support_estimate(Functional(), np.linspace(-1, 1, 11))
    assert r["intervals"] == []


def test_hausdorff_intervals():
    assert B.hausdorff_intervals([(0, 1)], [(0, 1)]) == 0.0
    assert B.hausdorff_intervals([(0, 1)], [(0, 1.5)]) == pytest.approx(0.5)
    assert B.hausdorff_intervals([(0, 0)], [(0, 0), (2, 2)]) == pytest.approx(2.0)
    assert B.hausdorff_intervals([], [(0, 1)]) == math.inf


# -- reflection -------------------------------------------------------------------------


def test_reflection_verdicts():
    assert B.reflection_zero_test(B.HarmonicPolynomial("xy").value, (-1, 1))["verdict"] == "extended"
    f = Functional.delta(0.0, 1)
    assert B.reflection_zero_test(transform_field(f), (-1, 1))["verdict"] == "obstructed"


def test_reflection_away_from_carrier():
    # P[delta_0] continues across the axis outside its carrier
    r = B.reflection_zero_test(transform_field(Functional.delta(0.0)), (1.0, 2.0))
    assert r["verdict"] == "extended"


def test_roundtrip_weighted_derivative_atom():
    f = Functional.delta(-0.5) + Functional.delta(0.7, 1, 2.0)
    assert B.roundtrip(f)["max_error"] <= 1e-5


def test_reflection_distant_atom_extended():
    r = B.reflection_zero_test(transform_field(Functional.delta(2.0)), (-1.0, 1.0))
    assert r["verdict"] == "extended" and r["max_pairing"] <= 1e-6
