"""End-to-end acceptance checks, one test per criterion, at the stated tolerances."""

import math

import numpy as np
import pytest
from scipy.special import zeta

from harmbv import boundary, extension, harmonic, weights
from harmbv.cli import main as cli_main
from harmbv.harmonic import Functional
from harmbv.testbed import TestFunction
from harmbv.weights import FAILS, HOLDS, WeightSequence

crit = pytest.mark.criterion

G2 = WeightSequence.gevrey(2)


@pytest.fixture(scope="module")
def params_h1():
    return extension.ExtensionParams.build(G2, G2, G2, 1.0)


@crit(1, "log-squared weight: phi* = s^2/4 and (phi*)* = phi at 20 points")
def test_c01_log_squared_conjugates():
    om = weights.weight_function("log_squared")
    s = np.linspace(0.25, 5.0, 20)
    ps = np.array([weights.phi_star(om, v) for v in s])
    assert np.max(np.abs(ps - s ** 2 / 4)) <= 1e-6
    r = np.linspace(0.1, 3.0, 20)
    pss = np.array([weights.phi_star_star(om, v) for v in r])
    assert np.max(np.abs(pss - om.phi(r))) <= 1e-6


@crit(2, "Young conjugate scaling identities for h in {1/2, 2}")
def test_c02_scaling_identities():
    om = weights.weight_function("log_squared")
    s = np.geomspace(0.05, 20.0, 20)
    worst = 0.0
    for h in (0.5, 2.0):
        for v in s:
            a = weights.omega_star(om.scaled(h), v)
            b = h * weights.omega_star(om, v / h)
            c = weights.omega_star(om.dilated(h), v)
            d = weights.omega_star(om, v / h)
            worst = max(worst, abs(a - b), abs(c - d))
    assert worst <= 1e-8


@crit(3, "sandwich omega*_M(s) <= omega_M*(1/s) <= omega*_M(s/e) for (p!)^2")
def test_c03_sandwich():
    res = weights.verify_star_ws_sandwich(G2, np.logspace(-2, 2, 41))
    assert res["verdict"] in (HOLDS, weights.INCONCLUSIVE)
    assert res["min_slack"] >= -1e-6


@crit(4, "quasianalytic dichotomy with consistent partial sums")
def test_c04_quasianalytic_dichotomy():
    r1 = weights.check_quasianalytic(WeightSequence.gevrey(1))
    r2 = weights.check_quasianalytic(G2)
    assert r1.verdict == HOLDS and r1.details["closed_form"]
    assert r2.verdict == FAILS and r2.details["closed_form"]
    s1 = list(r1.details["partial_sums"].values())
    inc1, inc2 = s1[1] - s1[0], s1[2] - s1[1]
    # harmonic-series blocks over doubling ranges do not shrink: divergent trend
    assert inc1 > 0.5 and inc2 >= 0.9 * inc1
    s2 = list(r2.details["partial_sums"].values())
    assert max(s2) < zeta(2) + 1e-9


@crit(5, "traces exact at y = 0 and trace error slopes >= 1.9 / 0.9")
def test_c05_traces(params_h1):
    pairs = [
        ([(1, 1.0)], [(1, 0.5)]),
        ([(2, 0.3, 0.2)], [(1, 0.0, 1.0)]),
        ([(1, 1.0), (3, 0.1)], [(2, 0.4)]),
        ([(0.5, 1.0, -0.5)], [(1.5, 0.2, 0.3)]),
        ([(1, 0.7), (2, 0.1, 0.1)], [(1, 0.3), (2, -0.2)]),
    ]
    x = np.linspace(-2.0, 2.0, 9)
    y_seq = 0.01 * 2.0 ** -np.arange(5)
    for m0, m1 in pairs:
        ext = extension.extend(TestFunction.from_modes(m0), TestFunction.from_modes(m1), params_h1)
        assert np.all(ext.value(x, np.zeros_like(x)) == ext.phi0(x))
        assert np.all(ext.dy(x, np.zeros_like(x)) == ext.phi1(x))
        r = extension.trace_rates(ext, x, y_seq)
        assert r["exact_at_zero"]
        assert r["min_quadratic_slope"] >= 1.9
        assert r["min_linear_slope"] >= 0.9


@crit(6, "closed-form defect vs 5-point stencil at 100 points, 1e-4 relative")
def test_c06_defect_vs_stencil():
    prm = extension.ExtensionParams.build(G2, G2, G2, 0.01)
    ext = extension.extend(TestFunction.from_modes([(1, 1), (2, 0.3, 0.2)]),
                           TestFunction.from_modes([(1, 0.5), (3, 0.1)]), prm)
    _, y_hi = extension.defect_y_range(ext)
    X, Y = np.meshgrid(np.linspace(-2.9, 2.9, 10), np.linspace(0.15 * y_hi, 0.95 * y_hi, 10))
    a = ext.laplacian(X.ravel(), Y.ravel()).reshape(X.shape)
    b = ext.stencil_laplacian(X.ravel(), Y.ravel(), 1e-3).reshape(X.shape)
    # relative to the defect scale on each height row
    rel = np.abs(a - b) / np.max(np.abs(a), axis=1, keepdims=True)
    assert rel.size == 100
    assert rel.max() <= 1e-4


@crit(7, "weighted defect norm finite, refinement-stable, and linear in the data")
def test_c07_weighted_defect_norm(params_h1):
    p0 = TestFunction.from_modes([(1, 1), (2, 0.3, 0.2)])
    p1 = TestFunction.from_modes([(1, 0.5), (3, 0.1)])
    ext = extension.extend(p0, p1, params_h1)
    assert not any(c.saturated for c in ext.certificates.values())
    r = extension.weighted_defect_norm(ext)
    assert math.isfinite(r["norm"]) and r["norm"] > 0
    assert r["relative_change"] < 0.05
    r2 = extension.weighted_defect_norm(extension.extend(p0.scaled(2), p1.scaled(2), params_h1))
    assert abs(r2["norm"] / r["norm"] - 2.0) <= 1e-9


@crit(8, "P[f] harmonic (stencil order >= 1.9 at 10 points) and exactly odd")
def test_c08_poisson_harmonic():
    f = Functional.delta(0.0) + Functional.delta(0.4, 1, -0.7) + Functional.delta(-0.6, 2, 0.2)
    F = harmonic.transform_field(f)
    pts = [(x, y) for x, y in zip(np.linspace(-1.5, 1.5, 10), np.linspace(0.3, 0.9, 10))]
    for p in pts:
        assert harmonic.residual_order(F, p)["order"] >= 1.9
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, 500)
    y = rng.uniform(1e-3, 2, 500)
    assert np.all(F(x, -y) == -F(x, y))


@crit(9, "Green identity 3x3 matrix within 1e-5")
def test_c09_green_identity():
    g = TestFunction.from_modes([(math.pi / 2, 1.0)])
    fs = [Functional.delta(0.0), Functional.delta(0.3, 1), Functional((), g, (-1.0, 1.0))]
    for f in fs:
        for name in ("y", "xy", "3x2y-y3"):
            r = boundary.green_identity_check(f, boundary.HarmonicPolynomial(name))
            assert r["slack"] <= 1e-5, (name, r)
    r = boundary.green_identity_check(fs[1], boundary.HarmonicPolynomial("3x2y-y3"))
    assert r["lhs"] == pytest.approx(-1.8, abs=1e-12)


@crit(10, "round trip bv(P[f]) = f within 1e-5 on a 4-function basis")
def test_c10_roundtrip():
    g = TestFunction.from_modes([(math.pi / 2, 1.0)])
    fs = [Functional.delta(0.0) + Functional.delta(0.0, 1),
          Functional.delta(-0.5) + Functional.delta(0.7, 1),
          Functional.delta(0.2, 1, 0.5) + Functional((), g, (-1.0, 1.0))]
    for f in fs:
        r = boundary.roundtrip(f)
        assert len(r["rows"]) == 4
        assert r["max_error"] <= 1e-5


@crit(11, "reflection test: harmonic polynomial extended, P[delta_0] obstructed")
def test_c11_reflection():
    poly = boundary.HarmonicPolynomial("3x2y-y3").value
    r = boundary.reflection_zero_test(poly, (-1.0, 1.0))
    assert r["max_pairing"] <= 1e-6 and r["max_residual"] <= 1e-4
    assert r["verdict"] == "extended"
    r = boundary.reflection_zero_test(harmonic.transform_field(Functional.delta(0.0)), (-1.0, 1.0))
    assert r["verdict"] == "obstructed"


@crit(12, "support estimate: atoms within one cell, density within 0.05 Hausdorff")
def test_c12_support():
    step = 0.02
    x = np.round(np.arange(-1.5, 1.5 + step / 2, step), 12)
    r = boundary.support_estimate(Functional.delta(-0.5) + Functional.delta(0.7, 1), x)
    assert len(r["intervals"]) == 2
    truth = [(-0.5, -0.5), (0.7, 0.7)]
    assert boundary.hausdorff_intervals(r["intervals"], truth) <= step + 1e-9
    assert np.allclose(sorted(r["peaks"]), [-0.5, 0.7], atol=step)
    g = TestFunction.from_modes([(math.pi / 2, 1.0)])
    r = boundary.support_estimate(Functional((), g, (-1.0, 1.0)), x)
    assert boundary.hausdorff_intervals(r["intervals"], [(-1.0, 1.0)]) <= 0.05


@crit(13, "|P[f]| exp(-omega_N*(c/d_K)) bounded and monotone-stable as d_K -> 0")
def test_c13_poisson_decay():
    f = Functional.delta(0.0) + Functional.delta(0.3, 1, 0.5) + Functional.delta(-0.2, 2, 0.25)
    d = 0.5 * 2.0 ** -np.arange(8)
    assert d[-1] == 2.0 ** -8
    r = harmonic.poisson_decay_chain(f, G2, d_list=d)
    assert r["stable"] and r["c"] is not None
    row = next(x for x in r["rows"] if x["c"] == r["c"])
    assert np.all(np.isfinite(row["bounds"]))
    assert not row["saturated"]


@crit(14, "two CLI runs give byte-identical artifacts")
def test_c14_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("HBV_OUT", raising=False)
    fj = tmp_path / "f.json"
    fj.write_text('{"schema": 1, "atoms": [{"x": [-0.5], "alpha": [0], "c": 1.0},'
                  ' {"x": [0.7], "alpha": [1], "c": 1.0}], "density": null}')
    cmds = [["roundtrip", "--functional", str(fj)], ["support", "--functional", str(fj)],
            ["weights", "check", "--family", "gevrey", "--s", "2"], ["poisson", "--functional", str(fj)]]
    for k, cmd in enumerate(cmds):
        outs = []
        for run in ("a", "b"):
            out = tmp_path / f"{run}{k}"
            assert cli_main(cmd + ["--out", str(out)]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
        assert outs[0].keys() == outs[1].keys() and outs[0] == outs[1]
