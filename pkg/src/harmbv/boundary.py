"""Boundary values of odd harmonic fields and the checks built on them.

``bv_pair`` evaluates ``int (F(x,y) - F(x,-y)) chi(x) phi(x) dx`` on a geometric sequence
of heights and extrapolates to ``y -> 0``. The trapezoid rule is used in ``x``: the
integrand is smooth, vanishes with all derivatives at the ends of the cutoff support and
is analytic in a strip of width ``y``. The aliasing error of a step ``dx`` behaves like
``(2 pi / dx)^m exp(-2 pi y / dx)`` for an atom of order ``m``, so ``dx = y/8`` keeps it
below roundoff for the orders used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .extension import cutoff
from .harmonic import Functional, harmonic_residual, poisson_transform, transform_field
from .testbed import TestFunction

# ---------------------------------------------------------------------------
# Boundary-value pairing
# ---------------------------------------------------------------------------


@dataclass
class BvResult:
    value: float
    extrapolated: float
    levels_y: np.ndarray
    levels: np.ndarray
    error_estimate: float
    order: int
    oscillatory: bool = False
    table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"value": self.value, "extrapolated": self.extrapolated, "levels_y": self.levels_y.tolist(),
                "levels": self.levels.tolist(), "error_estimate": self.error_estimate, "order": self.order,
                "oscillatory": self.oscillatory}


def box_cutoff(chi_box, x):
    """Bump equal to 1 on ``chi_box`` and vanishing outside its 2x dilation about the centre."""
    a, b = chi_box
    c, w = 0.5 * (a + b), 0.5 * (b - a)
    return cutoff((np.asarray(x, dtype=float) - c) / w)


def _support(chi_box):
    a, b = chi_box
    c, w = 0.5 * (a + b), 0.5 * (b - a)
    return c - 2 * w, c + 2 * w


def _level_nodes(chi_box, y, max_step=None):
    lo, hi = _support(chi_box)
    step = y / 8.0 if max_step is None else min(y / 8.0, max_step)
    n = int(math.ceil((hi - lo) / step))
    x = np.linspace(lo, hi, n + 1)
    return x, (hi - lo) / n


def _jump_samples(F, chi_box, y_levels):
    """Per level: nodes, trapezoid step, ``(F(x,y) - F(x,-y)) chi(x)``."""
    out = []
    for y in y_levels:
        x, dx = _level_nodes(chi_box, y)
        chi = box_cutoff(chi_box, x)
        live = chi > 0
        jump = np.zeros_like(x)
        xl = x[live]
        jump[live] = (np.asarray(F(xl, np.full_like(xl, y)), dtype=float)
                      - np.asarray(F(xl, np.full_like(xl, -y)), dtype=float)) * chi[live]
        out.append((x, dx, jump))
    return out


def _richardson(levels, ys, order=None):
    """Richardson table for a halving sequence; leading error order auto-detected."""
    levels = np.asarray(levels, dtype=float)
    n = levels.size
    diffs = np.diff(levels)
    if order is None:
        good = np.abs(diffs) > 1e-14 * max(1.0, float(np.max(np.abs(levels))))
        if np.sum(good[-3:]) >= 2:
            d = diffs[-3:][good[-3:]]
            yy = ys[1:][-3:][good[-3:]]
            slope = float(np.polyfit(np.log(yy), np.log(np.abs(d)), 1)[0]) if d.size > 1 else 1.0
            order = 2 if slope > 1.5 else 1
        else:
            order = 1
    table = [levels.copy()]
    cur = levels.copy()
    for m in range(1, n):
        fac = 2.0 ** (order + m - 1)
        cur = cur[1:] + (cur[1:] - cur[:-1]) / (fac - 1.0)
        table.append(cur.copy())
    best = table[-1][-1]
    prev = table[-2][-1] if n > 1 else best
    osc = bool(np.any(np.diff(np.sign(diffs[np.abs(diffs) > 0])) != 0)) if diffs.size > 1 else False
    return float(best), float(abs(best - prev)), order, osc, table


def bv_pair(F, phi, chi_box, y0: float = 0.1, levels: int = 6, samples=None) -> BvResult:
    """``<bv(F), phi> = lim_{y -> 0+} int (F(x,y) - F(x,-y)) chi(x) phi(x) dx``."""
    ys = y0 * 2.0 ** -np.arange(levels)
    if samples is None:
        samples = _jump_samples(F, chi_box, ys)
    vals = np.empty(levels)
    for i, (x, dx, jump) in enumerate(samples):
        g = jump * np.asarray(phi(x), dtype=float)
        vals[i] = dx * (np.sum(g) - 0.5 * (g[0] + g[-1]))
    best, err, order, osc, table = _richardson(vals, ys)
    return BvResult(float(vals[-1]), best, ys, vals, err, order, osc, [t.tolist() for t in table])


def bv_pair_many(F, basis, chi_box, y0: float = 0.1, levels: int = 6) -> list[BvResult]:
    """``bv_pair`` over a basis, sampling ``F`` once per level."""
    ys = y0 * 2.0 ** -np.arange(levels)
    samples = _jump_samples(F, chi_box, ys)
    return [bv_pair(F, phi, chi_box, y0, levels, samples) for phi in basis]


def default_basis() -> list[TestFunction]:
    """``{1, cos x, sin x, cos 2x}``."""
    return [TestFunction.from_modes([(0.0, 1.0)]), TestFunction.from_modes([(1.0, 1.0)]),
            TestFunction.from_modes([(1.0, 0.0, 1.0)]), TestFunction.from_modes([(2.0, 1.0)])]


def default_box(f: Functional, margin: float = 0.5):
    K = f.hull()
    if K is None:
        return (-margin, margin)
    return (K[0] - margin, K[1] + margin)


def roundtrip(f: Functional, basis=None, chi_box=None, y0: float = 0.1, levels: int = 6) -> dict:
    """``max_phi |<bv(P[f]), phi> - <f, phi>|`` over a basis."""
    basis = default_basis() if basis is None else basis
    if f.is_zero:
        return {"max_error": 0.0, "rows": [{"exact": 0.0, "bv": 0.0, "error": 0.0} for _ in basis]}
    chi_box = default_box(f) if chi_box is None else chi_box
    res = bv_pair_many(transform_field(f), basis, chi_box, y0, levels)
    rows = []
    for phi, r in zip(basis, res):
        exact = f.pair(phi)
        rows.append({"exact": exact, "bv": r.extrapolated, "error": abs(r.extrapolated - exact),
                     "error_estimate": r.error_estimate, "order": r.order})
    return {"max_error": max(r["error"] for r in rows), "rows": rows, "chi_box": list(chi_box)}


# ---------------------------------------------------------------------------
# Green identity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HarmonicPolynomial:
    """Harmonic polynomial in ``(x, y)`` with value, gradient and boundary trace of ``d_y``."""

    name: str

    def value(self, x, y):
        return _HP[self.name][0](x, y)

    def grad(self, x, y):
        return _HP[self.name][1](x, y)

    def trace_dy(self):
        return _PolyTrace(self.name)


class _PolyTrace:
    """``x -> d_y Phi(x, 0)`` with derivatives, usable as a pairing argument."""

    def __init__(self, name):
        self.coeffs = _HP[self.name_check(name)][2]

    @staticmethod
    def name_check(name):
        if name not in _HP:
            raise ValueError(f"unknown harmonic polynomial {name!r}")
        return name

    def derivative(self, alpha, x):
        a = int(np.atleast_1d(alpha)[0])
        p = np.polynomial.polynomial.polyder(self.coeffs, a) if a else np.asarray(self.coeffs, dtype=float)
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), p)


_HP = {
    # name: (value, gradient, coefficients of d_y Phi(x, 0) in powers of x)
    "1": (lambda x, y: np.ones_like(x * y), lambda x, y: (0 * x * y, 0 * x * y), [0.0]),
    "x": (lambda x, y: x + 0 * y, lambda x, y: (np.ones_like(x * y), 0 * x * y), [0.0]),
    "y": (lambda x, y: y + 0 * x, lambda x, y: (0 * x * y, np.ones_like(x * y)), [1.0]),
    "xy": (lambda x, y: x * y, lambda x, y: (y + 0 * x, x + 0 * y), [0.0, 1.0]),
    "x2-y2": (lambda x, y: x * x - y * y, lambda x, y: (2 * x + 0 * y, -2 * y + 0 * x), [0.0]),
    "3x2y-y3": (lambda x, y: 3 * x * x * y - y ** 3, lambda x, y: (6 * x * y, 3 * x * x - 3 * y * y), [0.0, 0.0, 3.0]),
    "x3-3xy2": (lambda x, y: x ** 3 - 3 * x * y * y, lambda x, y: (3 * x * x - 3 * y * y, -6 * x * y), [0.0]),
}


def _bump_1d(t, c, w):
    u = (t - c) / w
    return cutoff(u), cutoff(u, 1) / w, cutoff(u, 2) / w ** 2


def green_identity_check(f: Functional, Phi: HarmonicPolynomial, rho_box=None, panels: int = 6) -> dict:
    """Compare ``<f, d_y Phi|_{y=0}>`` with ``-int P[f] Delta(rho Phi) dx dy``.

    ``rho(x, y) = chi((x - c)/w_x) chi(y / w_y)`` equals 1 on ``rho_box`` (an x-interval and
    a y half-height) and ``Delta(rho Phi) = Phi Delta rho + 2 grad rho . grad Phi`` is
    supported in the frame between the box and its 2x dilation, where ``P[f]`` is smooth.
    """
    if rho_box is None:
        a, b = default_box(f)
        rho_box = ((a, b), 0.5)
    (a, b), wy = rho_box
    cx, wx = 0.5 * (a + b), 0.5 * (b - a)
    lhs = f.pair(Phi.trace_dy())
    xe = [cx - 2 * wx, cx - wx, cx + wx, cx + 2 * wx]
    ye = [-2 * wy, -wy, wy, 2 * wy]
    nodes, weights = np.polynomial.legendre.leggauss(16)
    rhs = 0.0
    for i in range(3):
        for j in range(3):
            if i == 1 and j == 1:
                continue  # rho == 1 there, so Delta(rho Phi) = 0
            xs, wxs = _panel_nodes(xe[i], xe[i + 1], panels, nodes, weights)
            ys, wys = _panel_nodes(ye[j], ye[j + 1], panels, nodes, weights)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            W = np.outer(wxs, wys)
            rx, rx1, rx2 = _bump_1d(X, cx, wx)
            ry, ry1, ry2 = _bump_1d(Y, 0.0, wy)
            phi = Phi.value(X, Y)
            gx, gy = Phi.grad(X, Y)
            lap_rho = rx2 * ry + rx * ry2
            lap = phi * lap_rho + 2.0 * (rx1 * ry * gx + rx * ry1 * gy)
            live = lap != 0
            if not np.any(live):
                continue
            P = np.zeros_like(X)
            P[live] = poisson_transform(f, X[live], Y[live])
            rhs -= float(np.sum(W * P * lap))
    return {"lhs": lhs, "rhs": rhs, "slack": abs(lhs - rhs), "polynomial": Phi.name}


def _panel_nodes(lo, hi, panels, nodes, weights):
    e = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(e)
    mid = 0.5 * (e[:-1] + e[1:])
    xs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    ws = (half[:, None] * weights[None, :]).ravel()
    return xs, ws


# ---------------------------------------------------------------------------
# Support estimation
# ---------------------------------------------------------------------------


def support_estimate(f: Functional, x_grid, y_seq=None, threshold: float = 0.5, fit_last: int = 3) -> dict:
    """Mark grid points where ``P[f]`` fails to decay as ``y -> 0``.

    The score ``|F(x,y)| + y |d_x F(x,y)|`` is ``O(y)`` wherever ``P[f]`` continues
    harmonically across the axis; a fitted decay exponent below ``threshold`` marks a
    boundary singularity. The default heights ``{4h, 2h, h, h/2, h/4}`` are tied to the
    grid step ``h`` so the estimate resolves features at grid scale.
    """
    x = np.asarray(x_grid, dtype=float)
    hgrid = float(np.min(np.diff(x))) if x.size > 1 else 0.1
    ys = np.asarray(y_seq if y_seq is not None else hgrid * np.array([4.0, 2.0, 1.0, 0.5, 0.25]), dtype=float)
    if f.is_zero:
        return {"intervals": [], "peaks": [], "marked": [], "exponents": np.full(x.size, np.inf), "y_seq": ys}
    scores = np.empty((ys.size, x.size))
    for i, y in enumerate(ys):
        e = y / 4.0
        F = np.abs(poisson_transform(f, x, np.full_like(x, y)))
        dF = (poisson_transform(f, x + e, np.full_like(x, y)) - poisson_transform(f, x - e, np.full_like(x, y))) / (2 * e)
        scores[i] = F + y * np.abs(dF)
    tail = slice(ys.size - fit_last, ys.size)
    ly = np.log(ys[tail])
    with np.errstate(divide="ignore"):
        ls = np.log(scores[tail])
    expo = np.empty(x.size)
    for j in range(x.size):
        col = ls[:, j]
        expo[j] = np.inf if not np.all(np.isfinite(col)) else float(np.polyfit(ly, col, 1)[0])
    marked = expo < threshold
    intervals = []
    start = None
    for j in range(x.size):
        if marked[j] and start is None:
            start = j
        if start is not None and (j == x.size - 1 or not marked[j + 1]):
            intervals.append((float(x[start]), float(x[j])))
            start = None
    # location of the strongest score at the finest height inside each interval
    peaks = []
    for lo, hi in intervals:
        sel = (x >= lo) & (x <= hi)
        peaks.append(float(x[sel][np.argmax(scores[-1, sel])]))
    warning = None
    if np.all(marked) or (np.any(np.isfinite(expo)) and np.min(np.abs(expo[np.isfinite(expo)] - threshold)) < 0.05):
        warning = "threshold close to fitted exponents or every point marked; inspect raw scores"
    return {"intervals": intervals, "peaks": peaks, "marked": x[marked].tolist(), "exponents": expo,
            "y_seq": ys, "scores": scores, "warning": warning}


def hausdorff_intervals(A, B) -> float:
    """Hausdorff distance between two finite unions of closed intervals."""
    def pts(I):
        return np.array([v for iv in I for v in iv])

    def dist_to(I, p):
        return min(0.0 if a <= p <= b else min(abs(p - a), abs(p - b)) for a, b in I)

    if not A or not B:
        return 0.0 if not A and not B else math.inf
    # the distance is attained at an endpoint of one of the unions
    return max(max(dist_to(B, p) for p in pts(A)), max(dist_to(A, p) for p in pts(B)))


# ---------------------------------------------------------------------------
# Reflection test
# ---------------------------------------------------------------------------


def reflection_zero_test(F, slab, basis=None, y0: float = 0.1, levels: int = 6, step: float = 1e-2,
                         n_points: int = 5, pair_tol: float = 1e-6, res_tol: float = 1e-4) -> dict:
    """Decide whether an odd harmonic field extends harmonically across ``slab x {0}``.

    All pairings with the basis (cutoff supported inside the slab) must vanish; the
    predicted extension is then confirmed by a Laplacian stencil that straddles ``y = 0``.
    """
    lo, hi = slab
    c, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
    chi_box = (c - 0.5 * w, c + 0.5 * w)
    basis = default_basis() if basis is None else basis
    res = bv_pair_many(F, basis, chi_box, y0, levels)
    pairs = [r.extrapolated for r in res]
    xs = np.linspace(c - 0.5 * w, c + 0.5 * w, n_points)
    # centred at height step/2: the stencil reaches y = -step/2 and y = 3 step/2
    resid = [abs(harmonic_residual(F, (float(x), 0.5 * step), step)) for x in xs]
    zero = max(abs(p) for p in pairs) <= pair_tol
    ok = zero and max(resid) <= res_tol
    return {"verdict": "extended" if ok else "obstructed", "pairings": pairs,
            "max_pairing": max(abs(p) for p in pairs), "straddle_residuals": resid,
            "max_residual": max(resid), "chi_box": list(chi_box)}
