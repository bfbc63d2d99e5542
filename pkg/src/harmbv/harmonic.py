"""Fundamental solution, Poisson kernel and Poisson transforms of compactly carried functionals.

In d = 1 the kernel is ``P(x, y) = -(1/2pi) Im(1 / (x + iy))``, so every mixed derivative
has the closed form ``d_x^a d_y^b P = -(1/2pi) Im(i^b (-1)^n n! / (x+iy)^(n+1))`` with
``n = a + b``. The Poisson transform of a trigonometric density on an interval reduces to
exponential integrals of complex argument and is evaluated in closed form.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import exp1

from .errors import DomainError
from .testbed import TestFunction
from .weights import WeightSequence, assoc_omega_grid

SPHERE_AREA = {2: 2.0 * math.pi, 3: 4.0 * math.pi}

# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------


def fundamental_solution(x, y, d: int = 1):
    """``E = (1/2pi) log|(x,y)|`` (d = 1) or ``-1/((d-1) c_{d+1} |(x,y)|^{d-1})``."""
    if d == 1:
        r = np.hypot(x, y)
    else:
        r = np.sqrt(np.sum(np.asarray(x, dtype=float) ** 2, axis=-1) + np.asarray(y, dtype=float) ** 2)
    if np.any(r == 0):
        raise DomainError("fundamental solution is singular at the origin")
    if d == 1:
        return np.log(r) / (2.0 * math.pi)
    return -1.0 / ((d - 1) * SPHERE_AREA[d + 1] * r ** (d - 1))


def poisson_kernel(x, y, d: int = 1):
    """``P(x, y) = y / (c_{d+1} |(x,y)|^{d+1})``."""
    y = np.asarray(y, dtype=float)
    if d == 1:
        r2 = np.asarray(x, dtype=float) ** 2 + y ** 2
    else:
        r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1) + y ** 2
    if np.any(r2 == 0):
        raise DomainError("Poisson kernel is singular at the origin")
    return y / (SPHERE_AREA[d + 1] * r2 ** ((d + 1) / 2.0))


def poisson_kernel_deriv(a: int, b: int, x, y):
    """Exact ``d_x^a d_y^b P(x, y)`` in d = 1."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(x, dtype=float) + 1j * np.abs(y)
    if np.any(z == 0):
        raise DomainError("Poisson kernel is singular at the origin")
    n = a + b
    val = (1j) ** b * (-1.0) ** n * math.factorial(n) / z ** (n + 1)
    # P is odd in y, so d_y^b P has parity (-1)^(b+1); applying it explicitly keeps it exact
    parity = np.where(y < 0, (-1.0) ** (b + 1), 1.0)
    return parity * -np.imag(val) / (2.0 * math.pi)


def poisson_kernel_dx(n: int, x, y):
    """Exact ``d_x^n P(x, y)`` in d = 1."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return poisson_kernel_deriv(n, 0, x, y)


def _poisson_kernel_fd(alpha, x, y, step: float = 1e-4):
    """d = 2: ``d^alpha_x P`` by nested central differences (|alpha| <= 2)."""
    alpha = tuple(int(a) for a in alpha)
    if sum(alpha) > 2:
        raise ValueError("d = 2 kernel derivatives are limited to order 2")
    x = np.asarray(x, dtype=float)
    if sum(alpha) == 0:
        return poisson_kernel(x, y, 2)
    i = 0 if alpha[0] else 1
    e = np.zeros(2)
    e[i] = step
    rest = list(alpha)
    rest[i] -= 1
    return (_poisson_kernel_fd(rest, x + e, y, step) - _poisson_kernel_fd(rest, x - e, y, step)) / (2 * step)


def kernel_bound_fit(n_max: int = 20, radius: float = 1.0, n_angles: int = 721) -> dict:
    """Fit ``|d_x^n P| |(x,y)|^{n+1} / n! <= C H^n`` on the circle of given radius."""
    th = np.linspace(1e-3, math.pi - 1e-3, n_angles)
    x, y = radius * np.cos(th), radius * np.sin(th)
    R = np.array([np.max(np.abs(poisson_kernel_dx(n, x, y))) * radius ** (n + 1) / math.factorial(n)
                  for n in range(n_max + 1)])
    lr = np.log(R)
    logH = max(0.0, max((lr[n] - lr[0]) / n for n in range(1, n_max + 1)))
    logC = float(np.max(lr - np.arange(n_max + 1) * logH))
    return {"C": math.exp(logC), "H": math.exp(logH), "ratios": R, "radius": radius}


def interior_estimate_check(points, orders=range(7), n_circle: int = 2048) -> dict:
    """Fit ``|d^b P(w)| <= C H^|b| |b|! r^-|b| sup_{B(w,r)} |P|`` with ``r = |w|/2``.

    ``b`` ranges over all mixed orders ``(a, n - a)``; the sup over the disk is taken
    on its boundary (maximum principle).
    """
    rows = []
    for (x0, y0) in points:
        r = 0.5 * math.hypot(x0, y0)
        th = 2 * math.pi * np.arange(n_circle) / n_circle
        sup = float(np.max(np.abs(poisson_kernel(x0 + r * np.cos(th), y0 + r * np.sin(th)))))
        for n in orders:
            v = max(abs(float(poisson_kernel_deriv(a, n - a, x0, y0))) for a in range(n + 1))
            rows.append((n, v * r ** n / (math.factorial(n) * sup)))
    ns = np.array([n for n, _ in rows])
    vals = np.array([v for _, v in rows])
    Rn = np.array([np.max(vals[ns == n]) for n in sorted(set(ns))])
    lr = np.log(Rn)
    logH = max([0.0] + [(lr[i] - lr[0]) / i for i in range(1, len(Rn))])
    logC = float(np.max(lr - np.arange(len(Rn)) * logH))
    return {"C": math.exp(logC), "H": math.exp(logH), "ratios": Rn}


# ---------------------------------------------------------------------------
# Functionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    x0: tuple
    alpha: tuple
    c: float


@dataclass(frozen=True, eq=False)
class Functional:
    """``sum c d^alpha delta_{x0}`` plus an optional density ``g 1_[a,b] dx`` (d = 1)."""

    atoms: tuple = ()
    density: TestFunction | None = None
    box: tuple | None = None
    d: int = 1

    def __post_init__(self):
        atoms = []
        for at in self.atoms:
            if not isinstance(at, Atom):
                x0, alpha, c = at
                at = Atom(tuple(np.atleast_1d(np.asarray(x0, dtype=float)).tolist()),
                          tuple(int(a) for a in np.atleast_1d(alpha)), float(c))
            if len(at.x0) != self.d or len(at.alpha) != self.d:
                raise ValueError("atom location/order does not match d")
            atoms.append(at)
        object.__setattr__(self, "atoms", tuple(atoms))
        if self.density is not None:
            if self.d != 1:
                raise ValueError("densities are supported in d = 1 only")
            if self.box is None or not self.box[0] < self.box[1]:
                raise ValueError("density needs a box a < b")
            object.__setattr__(self, "box", (float(self.box[0]), float(self.box[1])))

    # -- construction ------------------------------------------------------
    @classmethod
    def delta(cls, x0: float = 0.0, order: int = 0, c: float = 1.0) -> "Functional":
        return cls(atoms=(((x0,), (order,), c),))

    @classmethod
    def from_json(cls, obj) -> "Functional":
        if isinstance(obj, str):
            obj = json.loads(obj)
        atoms = obj.get("atoms", [])
        d = int(obj.get("d", len(atoms[0]["x"]) if atoms else 1))
        at = tuple((a["x"], a.get("alpha", [0] * d), a.get("c", 1.0)) for a in atoms)
        dens = obj.get("density")
        if dens:
            g = TestFunction.from_modes(dens["modes"], d=1)
            return cls(at, g, tuple(dens["box"]), d)
        return cls(at, None, None, d)

    def to_json(self) -> dict:
        out = {"d": self.d, "atoms": [{"x": list(a.x0), "alpha": list(a.alpha), "c": a.c} for a in self.atoms],
               "density": None}
        if self.density is not None:
            out["density"] = {"modes": self.density.to_json()["modes"], "box": list(self.box)}
        return out

    def __add__(self, other: "Functional") -> "Functional":
        if self.density is not None and other.density is not None:
            if self.box != other.box:
                raise ValueError("cannot add densities on different boxes")
            dens = self.density + other.density
        else:
            dens = self.density if self.density is not None else other.density
        box = self.box if self.box is not None else other.box
        return Functional(self.atoms + other.atoms, dens, box, self.d)

    def scaled(self, s: float) -> "Functional":
        atoms = tuple(Atom(a.x0, a.alpha, s * a.c) for a in self.atoms)
        dens = self.density.scaled(s) if self.density is not None else None
        return Functional(atoms, dens, self.box, self.d)

    @property
    def is_zero(self) -> bool:
        return not self.atoms and self.density is None

    def hull(self):
        """Carrier hull: an interval ``(lo, hi)`` in d = 1, a point array in d = 2."""
        pts = [a.x0 for a in self.atoms]
        if self.d == 1:
            xs = [p[0] for p in pts]
            if self.box is not None:
                xs += list(self.box)
            return (min(xs), max(xs)) if xs else None
        return np.array(pts) if pts else None

    def distance(self, x, y):
        """Distance from ``(x, y)`` to the carrier hull ``K x {0}``."""
        K = self.hull()
        if K is None:
            return np.full(np.shape(y), np.inf)
        if self.d == 1:
            return distance_to_set({"boxes": [K]}, x, y)
        return distance_to_set({"points": K}, x, y)

    # -- pairing -----------------------------------------------------------
    def pair(self, phi) -> float:
        """``<f, phi> = sum c (-1)^|alpha| d^alpha phi(x0) + int_box g phi``.

        ``phi`` needs a ``derivative(alpha, x)`` method (TestFunction or polynomial).
        """
        tot = 0.0
        for a in self.atoms:
            x0 = np.array(a.x0) if self.d > 1 else np.array([a.x0[0]])
            alpha = a.alpha if self.d > 1 else a.alpha[0]
            pt = x0[None, :] if self.d > 1 else x0
            tot += a.c * (-1.0) ** sum(a.alpha) * float(np.asarray(phi.derivative(alpha, pt)).reshape(-1)[0])
        if self.density is not None:
            if isinstance(phi, TestFunction):
                tot += trig_product_integral(self.density, phi, *self.box)
            else:
                tot += integrate.quad(lambda s: float(self.density.eval(np.array([s]))[0]
                                                      * np.asarray(phi.derivative(0, np.array([s]))).reshape(-1)[0]),
                                      *self.box, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
        return float(tot)


def _trig_antideriv(A, B, k, a, b):
    """``int_a^b (A cos kx + B sin kx) dx`` for arrays of coefficients."""
    k = np.asarray(k, dtype=float)
    nz = k != 0
    ks = np.where(nz, k, 1.0)
    val = (A * (np.sin(ks * b) - np.sin(ks * a)) - B * (np.cos(ks * b) - np.cos(ks * a))) / ks
    return np.where(nz, val, A * (b - a))


def trig_product_integral(g: TestFunction, phi: TestFunction, a: float, b: float) -> float:
    """Exact ``int_a^b g phi dx`` for d = 1 trigonometric sums."""
    k1 = g.k[:, 0][:, None]
    k2 = phi.k[:, 0][None, :]
    a1, b1 = g.a[:, None], g.b[:, None]
    a2, b2 = phi.a[None, :], phi.b[None, :]
    # (a1 c1 + b1 s1)(a2 c2 + b2 s2) expanded into cos/sin of (k1 - k2) and (k1 + k2)
    Am = 0.5 * (a1 * a2 + b1 * b2)
    Ap = 0.5 * (a1 * a2 - b1 * b2)
    Bm = 0.5 * (b1 * a2 - a1 * b2)
    Bp = 0.5 * (a1 * b2 + b1 * a2)
    tot = _trig_antideriv(Am, Bm, k1 - k2, a, b) + _trig_antideriv(Ap, Bp, k1 + k2, a, b)
    return float(np.sum(tot))


def distance_to_set(S: dict, x, y):
    """Exact distance from points ``(x, y)`` to a set of boundary points and intervals.

    ``S = {"points": [...], "boxes": [(a, b), ...]}``; in d = 2 ``points`` are pairs and
    ``x`` has a trailing axis of length 2.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    planar = x.ndim == y.ndim + 1 and x.shape[-1] == 2
    best = np.full(np.broadcast_shapes(x.shape[:-1] if planar else x.shape, y.shape), np.inf)
    for p in S.get("points", []):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if p.size == 1:
            dist = np.hypot(x - p[0], y)
        else:
            dist = np.sqrt(np.sum((x - p) ** 2, axis=-1) + y ** 2)
        best = np.minimum(best, dist)
    for a, b in S.get("boxes", []):
        dx = np.maximum(np.maximum(a - x, x - b), 0.0)
        best = np.minimum(best, np.hypot(dx, y))
    return best


# ---------------------------------------------------------------------------
# Poisson transform
# ---------------------------------------------------------------------------


def _cauchy_exp_integral(lam: float, z: np.ndarray, a: float, b: float) -> np.ndarray:
    """``int_a^b e^{i lam s} / (s - z) ds`` for an array of ``z`` with ``Im z > 0``.

    With ``F(s) = -E1(-i lam (s - z))`` as antiderivative, the path ``s: a -> b`` crosses
    the branch cut of ``E1`` at ``s = Re z`` when ``lam > 0``, which adds ``2 pi i``.
    """
    if lam == 0.0:
        return np.log(b - z) - np.log(a - z)

    def F(s, side):
        u = -1j * lam * (s - z)
        # start/end point exactly on the cut: take the side the path lies on
        on_cut = (u.imag == 0.0) & (u.real < 0.0)
        u = np.where(on_cut, u.real + 1j * side * 1e-300, u)
        return -exp1(u)

    x = z.real
    val = F(b, +1.0) - F(a, -1.0)
    val = val + np.where((lam > 0) & (a < x) & (x < b), 2j * math.pi, 0.0)
    return np.exp(1j * lam * z) * val


def density_transform(g: TestFunction, box, x, y, method: str = "closed"):
    """``int_box g(s) P(x - s, y) ds`` in closed form (``method="closed"``) or by adaptive quadrature."""
    a, b = box
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any((y == 0) & (x >= a) & (x <= b)):
        raise DomainError("Poisson transform evaluated on the carrier")
    if method == "quad":
        out = np.zeros(x.shape)
        for idx in np.ndindex(x.shape):
            xi, yi = float(x[idx]), float(y[idx])
            if yi == 0.0:
                continue
            # breakpoints at the kernel's width so the peak near s = x is resolved
            brk = [xi + m * abs(yi) for m in (-30, -3, 0, 3, 30)]
            pts = [p for p in brk if a < p < b] or None
            out[idx] = integrate.quad(lambda s: float(g.eval(np.array([s]))[0] * poisson_kernel(xi - s, yi)),
                                      a, b, points=pts, epsabs=1e-12, epsrel=1e-12, limit=400)[0]
        return out if out.ndim else float(out)
    sgn = np.where(y < 0, -1.0, 1.0)
    live = y != 0
    z = x + 1j * np.where(live, np.abs(y), 1.0)
    tot = np.zeros(x.shape)
    for k, A, B in zip(g.k[:, 0], g.a, g.b):
        c = complex(A, -B)
        if k == 0.0:
            tot += (c.real * _cauchy_exp_integral(0.0, z, a, b)).imag
        else:
            I1 = _cauchy_exp_integral(float(k), z, a, b)
            I2 = _cauchy_exp_integral(-float(k), z, a, b)
            tot += (0.5 * (c * I1 + c.conjugate() * I2)).imag
    out = np.where(live, sgn * tot / (2.0 * math.pi), 0.0)
    return out if out.ndim else float(out)


def poisson_transform(f: Functional, x, y, density_method: str = "closed"):
    """``P[f](x, y) = <f(s), P(x - s, y)>``; odd in ``y``.

    Atoms contribute ``c (d^alpha P)(x - x0, y)`` (the two ``(-1)^|alpha|`` factors cancel).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if f.d == 1:
        x, y = np.broadcast_arrays(x, y)
    on_axis = y == 0
    if np.any(on_axis) and not f.is_zero:
        dK = f.distance(x, y)
        if np.any(dK[on_axis] == 0):
            raise DomainError("Poisson transform evaluated on the carrier")
    out = np.zeros(y.shape)
    for at in f.atoms:
        if f.d == 1:
            dxv = x - at.x0[0]
            with np.errstate(invalid="ignore", divide="ignore"):
                val = poisson_kernel_dx(at.alpha[0], np.where(on_axis, 1.0, dxv), np.where(on_axis, 1.0, y))
            out += at.c * np.where(on_axis, 0.0, val)
        else:
            xv = x - np.asarray(at.x0)
            val = _poisson_kernel_fd(at.alpha, np.where(on_axis[..., None], 1.0, xv), np.where(on_axis, 1.0, y))
            out += at.c * np.where(on_axis, 0.0, val)
    if f.density is not None:
        out = out + density_transform(f.density, f.box, x, y, density_method)
    return out if out.ndim else float(out)


def transform_field(f: Functional, density_method: str = "closed"):
    """``P[f]`` as a field callable ``F(x, y)``."""
    def F(x, y):
        return poisson_transform(f, x, y, density_method)
    F.functional = f
    return F


# ---------------------------------------------------------------------------
# Residuals and weighted norms
# ---------------------------------------------------------------------------


def harmonic_residual(field, point, step: float = 1e-3) -> float:
    """(d+1)-dimensional 5-/7-point Laplacian stencil of ``field`` at ``point``.

    ``point = (x, y)`` calls ``field(x, y)``; ``point = (x1, x2, y)`` calls
    ``field(np.array([x1, x2]), y)``.
    """
    if len(point) == 2:
        x, y = point
        xs = np.array([x, x + step, x - step, x, x])
        ys = np.array([y, y, y, y + step, y - step])
        v = np.asarray(field(xs, ys), dtype=float)
        return float((v[1] + v[2] + v[3] + v[4] - 4 * v[0]) / step ** 2)
    x1, x2, y = point
    offs = [(0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
    vals = [float(np.asarray(field(np.array([x1 + s * a, x2 + s * b]), np.asarray(y + s * c))))
            for (a, b, c), s in zip(offs, [step] * 7)]
    return float((sum(vals[1:]) - 6 * vals[0]) / step ** 2)


def residual_order(field, point, steps=(4e-2, 2e-2, 1e-2, 5e-3)) -> dict:
    """Fitted convergence order of the stencil residual of a harmonic field."""
    res = np.array([abs(harmonic_residual(field, point, s)) for s in steps])
    order = float(np.polyfit(np.log(steps), np.log(res), 1)[0]) if np.all(res > 0) else math.inf
    return {"steps": list(steps), "residuals": res, "order": order}


def weighted_sup_norm(field, M: WeightSequence, h: float, S: dict, x_grid, y_grid) -> dict:
    """Grid sup of ``|F(x,y)| exp(-omega_{M*}(1 / (h d_S(x,y))))`` over a product grid."""
    X, Y = np.meshgrid(np.asarray(x_grid, dtype=float), np.asarray(y_grid, dtype=float), indexing="ij")
    dS = distance_to_set(S, X, Y)
    if np.any(dS == 0):
        raise DomainError("grid touches the reference set")
    F = np.asarray(field(X.ravel(), Y.ravel()), dtype=float).reshape(X.shape)
    w, _, sat = assoc_omega_grid(M.star(), 1.0 / (h * dS.ravel()))
    with np.errstate(divide="ignore"):
        lv = np.log(np.abs(F.ravel())) - w
    i = int(np.argmax(lv))
    val = math.exp(lv[i]) if np.isfinite(lv[i]) else 0.0
    return {"norm": val, "argmax": (float(X.ravel()[i]), float(Y.ravel()[i])), "saturated": bool(np.any(sat))}


def poisson_decay_chain(f: Functional, N: WeightSequence, d_list=None, c_grid=None, n_angles: int = 33) -> dict:
    """Check ``sup_{d_K = d} |P[f]| exp(-omega_{N*}(c/d))`` stays bounded as ``d -> 0``.

    For each ``d`` the sup runs over points of the upper half-plane at distance ``d`` from
    the carrier hull (a half-stadium around ``K``). The reported ``c`` is the smallest grid
    value for which the bound sequence does not grow along the shrinking distances.
    """
    if f.d != 1:
        raise ValueError("decay chain implemented for d = 1")
    d_list = np.asarray(d_list if d_list is not None else 0.5 * 2.0 ** -np.arange(8), dtype=float)
    c_grid = np.asarray(c_grid if c_grid is not None else 2.0 ** -np.arange(0, 11), dtype=float)
    lo, hi = f.hull()
    sups = []
    for dd in d_list:
        th = np.linspace(0.0, math.pi / 2, n_angles)[1:]
        xs = np.concatenate([lo - dd * np.cos(th), hi + dd * np.cos(th), np.linspace(lo, hi, n_angles)])
        ys = np.concatenate([dd * np.sin(th), dd * np.sin(th), np.full(n_angles, dd)])
        sups.append(float(np.max(np.abs(poisson_transform(f, xs, ys)))))
    sups = np.array(sups)
    Ns = N.star()
    rows = []
    chosen = None
    for c in sorted(c_grid):
        w, _, sat = assoc_omega_grid(Ns, c / d_list)
        with np.errstate(divide="ignore"):
            lb = np.log(sups) - w
        bound = np.exp(lb)
        # stable: the tail never exceeds the running maximum of the earlier part
        head = np.max(bound[: len(bound) // 2 + 1])
        stable = bool(np.all(np.isfinite(bound)) and np.all(bound[len(bound) // 2 + 1:] <= head * (1 + 1e-12)))
        rows.append({"c": float(c), "bounds": bound, "stable": stable, "C": float(np.max(bound)),
                     "saturated": bool(np.any(sat))})
        if stable and chosen is None:
            chosen = rows[-1]
    return {"d": d_list, "sup_abs": sups, "rows": rows,
            "c": chosen["c"] if chosen else None, "C": chosen["C"] if chosen else None,
            "stable": chosen is not None, "saturated": bool(chosen["saturated"]) if chosen else None}
