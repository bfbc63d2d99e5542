"""Almost-harmonic extension of a pair of boundary data and its Laplacian defect.

``Phi = Phi_0(phi_0) + Phi_1(phi_1)`` with

    Phi_j(x, y) = sum_p y^n / n! * (-Delta)^p phi_j(x) * chi(mu h q*_n y),   n = 2p + j,

where ``q*`` are the quotients of ``Q* = (Q_p / p!)`` and ``q*_0 := q*_1``. For fixed
``y != 0`` only the terms with ``mu h q*_n |y| < 2`` survive, so the series is finite.

Every evaluator factors the series as ``sum_k v_k(x) W_k(y)``: the mode values ``v_k``
depend only on ``x`` and the weights ``W_k`` only on ``y``, so grids cost
``O(modes * terms * n_y)`` for the ``y``-part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, PreconditionError, TruncationError
from .testbed import TestFunction, class_norm_certificate
from .weights import WeightSequence, assoc_omega_grid, check_M1_star, check_M2_prime

# Terms whose log-magnitude stays below this are treated as exact zeros when the
# sequence table ends before the series is exhausted.
LOG_NEGLIGIBLE = -690.0

# ---------------------------------------------------------------------------
# Cutoff
# ---------------------------------------------------------------------------


def _g(s):
    """``exp(-1/s)`` for s > 0 with first and second derivatives; zero for tiny s."""
    s = np.asarray(s, dtype=float)
    live = s > 1e-3
    ss = np.where(live, s, 1.0)
    g = np.where(live, np.exp(-1.0 / ss), 0.0)
    g1 = g / ss ** 2
    g2 = g * (1.0 / ss ** 4 - 2.0 / ss ** 3)
    return g, g1, g2


def _transition(u):
    """``psi(u) = g(2-u) / (g(2-u) + g(u-1))`` on ``1 < u < 2`` with two derivatives."""
    A, gA1, gA2 = _g(2.0 - u)
    B, gB1, gB2 = _g(u - 1.0)
    A1, A2 = -gA1, gA2
    B1, B2 = gB1, gB2
    S = A + B
    N = A1 * B - A * B1
    N1 = A2 * B - A * B2
    S1 = A1 + B1
    psi = A / S
    d1 = N / S ** 2
    d2 = N1 / S ** 2 - 2.0 * N * S1 / S ** 3
    return psi, d1, d2


def cutoff(t, order: int = 0):
    """The even bump ``chi`` (``order`` 0) or its derivatives (1, 2).

    ``chi = 1`` on ``[-1, 1]`` and ``0`` outside ``[-2, 2]``; derivatives vanish exactly
    outside the open transition bands.
    """
    t = np.asarray(t, dtype=float)
    u = np.abs(t)
    band = (u > 1.0) & (u < 2.0)
    uu = np.where(band, u, 1.5)
    psi, d1, d2 = _transition(uu)
    if order == 0:
        return np.where(u <= 1.0, 1.0, np.where(band, psi, 0.0))
    if order == 1:
        return np.where(band, np.sign(t) * d1, 0.0)
    if order == 2:
        return np.where(band, d2, 0.0)
    raise ValueError("cutoff order must be 0, 1 or 2")


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------


def qstar_table(Q: WeightSequence) -> np.ndarray:
    """``q*_n`` for n = 0..P_max with the convention ``q*_0 := q*_1``."""
    q = np.exp(Q.log_mstar)
    q[0] = q[1]
    return q


@dataclass(frozen=True)
class ExtensionParams:
    M: WeightSequence
    N: WeightSequence
    Q: WeightSequence
    h: float
    d: int
    C0: float
    H0: float
    C1: float
    H1: float

    @property
    def mu(self) -> float:
        return 2.0 * math.sqrt(2.0 * self.d) * self.H0

    @property
    def A(self) -> float:
        return self.mu * self.H1

    @classmethod
    def build(cls, M: WeightSequence, N: WeightSequence, Q: WeightSequence, h: float, d: int = 1) -> "ExtensionParams":
        """Take witnesses for ``M_{p+2} <= C0 H0^p Q_p`` and ``Q_{p+2} <= C1 H1^p N_p``
        from the minimal-at-truncation sweep and re-verify them."""
        if h <= 0:
            raise DomainError("h must be positive")
        if d not in (1, 2):
            raise DomainError("d must be 1 or 2")
        if not check_M1_star(Q).holds:
            raise PreconditionError(f"{Q.label} must satisfy (M.1)*")
        r0 = check_M2_prime(M, Q, shift=2)
        r1 = check_M2_prime(Q, N, shift=2)
        p = cls(M, N, Q, float(h), d, r0.witnesses["C"], r0.witnesses["H"],
                r1.witnesses["C"], r1.witnesses["H"])
        p.verify()
        return p

    def verify(self) -> None:
        for big, small, C, H in ((self.M, self.Q, self.C0, self.H0), (self.Q, self.N, self.C1, self.H1)):
            P = min(big.p_max, small.p_max)
            k = np.arange(P - 1)
            lhs = big.log_M[2:P + 1]
            rhs = math.log(C) + k * math.log(H) + small.log_M[: P - 1]
            if np.any(lhs > rhs + 1e-9 * np.maximum(1.0, np.abs(rhs))):
                raise PreconditionError("doubled (M.2)' witnesses fail re-verification")

    @property
    def n_cap(self) -> int:
        """Largest series index ``n`` whose defect terms are all tabulated."""
        return self.Q.p_max - 2

    def to_dict(self) -> dict:
        return {"M": self.M.label, "N": self.N.label, "Q": self.Q.label, "h": self.h, "d": self.d,
                "C0": self.C0, "H0": self.H0, "C1": self.C1, "H1": self.H1, "mu": self.mu, "A": self.A,
                "q_star_0_convention": "q*_0 := q*_1"}


def gamma_aux(Q: WeightSequence, t: float) -> int:
    """``Gamma(t) = min{p : q*_{p+1} >= 1/t}`` for ``0 < t <= 1/q*_1``."""
    lq = Q.log_mstar[1:]
    if not (t > 0) or math.log(t) > -lq[0] + 1e-12:
        raise DomainError(f"gamma_aux needs 0 < t <= 1/q*_1, got {t!r}")
    target = -math.log(t)
    i = int(np.searchsorted(lq, target - 1e-12 * max(1.0, abs(target)), side="left"))
    if i >= lq.size:
        raise TruncationError("Gamma exceeds P_max")
    return i


# ---------------------------------------------------------------------------
# Extension
# ---------------------------------------------------------------------------


def _log_abs(y):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(y))


@dataclass(frozen=True)
class Envelope:
    """Vertical multiplier ``psi(y) = chi(2y/eps)`` used by :func:`compactify`."""

    eps: float

    def __call__(self, y, order: int = 0):
        s = 2.0 / self.eps
        return s ** order * cutoff(s * np.asarray(y, dtype=float), order)


@dataclass(frozen=True, eq=False)
class AlmostHarmonicExtension:
    params: ExtensionParams
    phi0: TestFunction
    phi1: TestFunction
    envelope: Envelope | None = None
    certificates: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.params.d

    # -- y-weights --------------------------------------------------------
    def _weights(self, f: TestFunction, j: int, y: np.ndarray, kind: str) -> np.ndarray:
        """``W[k, i] = sum_p coef_{p}(y_i) |k|^{2p}`` for one of the series kinds.

        kind: ``value``; ``dy``; ``s1``, ``s2``, ``s3`` (defect parts).
        """
        prm = self.params
        q = qstar_table(prm.Q)
        n = np.arange(j, prm.n_cap + 1, 2)
        p = (n - j) // 2
        c = prm.mu * prm.h * q[n]
        ly = _log_abs(y)
        sy = np.sign(y)
        with np.errstate(divide="ignore"):
            lk = np.log(f.knorm)
        cy = c[:, None] * y[None, :]
        self._check_truncation(f, n[-1], c[-1], y, ly)
        kshift = 0
        parts = []  # (power, chi-factor) pairs
        if kind == "value":
            parts.append((n, cutoff(cy)))
        elif kind == "dy":
            parts.append((n - 1, cutoff(cy)))
            parts.append((n, c[:, None] * cutoff(cy, 1)))
        elif kind == "s1":
            c2 = prm.mu * prm.h * q[n + 2]
            parts.append((n, cutoff(c2[:, None] * y[None, :]) - cutoff(cy)))
            kshift = 2
        elif kind == "s2":
            parts.append((n - 1, 2.0 * c[:, None] * cutoff(cy, 1)))
        elif kind == "s3":
            parts.append((n, (c ** 2)[:, None] * cutoff(cy, 2)))
        else:
            raise ValueError(kind)
        W = np.zeros((f.n_modes, y.size))
        for pw, chi in parts:
            valid = pw >= 0
            pw, chi, pp = pw[valid], chi[valid], p[valid]
            if pw.size == 0:
                continue
            # log |y^pw / pw!| with y^0 = 1 even at y = 0
            with np.errstate(invalid="ignore"):
                lp = np.where(pw[:, None] == 0, 0.0, pw[:, None] * ly[None, :]) - gammaln(pw + 1)[:, None]
            sgn = np.where(pw[:, None] % 2 == 1, sy[None, :], 1.0)
            live = chi != 0.0
            for m in range(f.n_modes):
                kexp = 2 * pp + kshift
                with np.errstate(invalid="ignore"):
                    lkm = np.where(kexp == 0, 0.0, kexp * lk[m])
                L = lp + lkm[:, None]
                term = np.where(live, np.exp(np.where(live, L, -np.inf)), 0.0) * sgn * chi
                W[m] += np.sum(term, axis=0)
        return W

    def _check_truncation(self, f, n_last, c_last, y, ly):
        """Raise if the series is still active at the end of the table with a non-negligible term."""
        if f.n_modes == 0:
            return
        active = (c_last * np.abs(y) < 2.0) & (y != 0)
        if not np.any(active):
            return
        kmax = float(np.max(f.knorm))
        lamp = float(np.max(f.log_amplitudes()))
        lymax = float(np.max(ly[active]))
        p_last = n_last // 2
        # margin for the coefficient factors c_n, c_n^2 and the extra Laplacian power
        lc = 2.0 * math.log(max(c_last, 1.0)) + 2.0 * math.log(max(kmax, 1.0)) + math.log(4.0)
        bound = n_last * lymax - gammaln(n_last + 1) + 2 * p_last * math.log(max(kmax, 1e-300)) + lamp + lc
        if n_last > 0:
            # terms carrying y^(n-1)/(n-1)! instead of y^n/n!
            bound += max(0.0, math.log(n_last) - lymax)
        if bound > LOG_NEGLIGIBLE:
            raise TruncationError(
                f"series still active at n = {n_last} for |y| = {math.exp(lymax):.3g}; raise P_max")

    def _combine(self, f: TestFunction, alpha, x, W, y_index=None) -> np.ndarray:
        """``sum_k v_k(x) W_k``: paired points if ``y_index`` maps points to W columns,
        otherwise a full ``(n_x, n_y)`` grid."""
        if f.n_modes == 0:
            nx = np.asarray(x).shape[0]
            return np.zeros(nx if y_index is not None else (nx, W.shape[1]))
        v = f.mode_values(x, alpha)
        if y_index is not None:
            return np.sum(v * W[:, y_index], axis=0)
        return np.sum(v[:, :, None] * W[:, None, :], axis=0)

    def _part(self, kind: str, x, y, alpha=0, grid: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if self.d == 1:
            x = np.atleast_1d(x)
        else:
            x = np.atleast_2d(x)
        if grid:
            yu, inv = y, None
        else:
            yu, inv = np.unique(y, return_inverse=True)
            inv = inv.reshape(-1)
            if x.shape[0] != y.size:
                raise ValueError("x and y must pair up point by point")
        out = 0.0
        for j, f in ((0, self.phi0), (1, self.phi1)):
            if f.n_modes == 0:
                continue
            W = self._weights(f, j, yu, kind)
            out = out + self._combine(f, alpha, x, W, inv)
        if isinstance(out, float):
            n = x.shape[0]
            out = np.zeros((n, y.size) if grid else n)
        return out

    # -- public evaluators --------------------------------------------------
    def value(self, x, y, grid: bool = False):
        """``Phi(x, y)``; with ``grid=True`` returns shape ``(n_x, n_y)``."""
        out = self._part("value", x, y, 0, grid)
        if self.envelope is not None:
            out = out * self._env(y, 0, grid, out)
        return out

    def dx(self, x, y, n: int = 1, grid: bool = False):
        """``d_x^n Phi`` (d = 1) or ``d^alpha_x Phi`` for a multi-index ``n`` (d = 2)."""
        out = self._part("value", x, y, n, grid)
        if self.envelope is not None:
            out = out * self._env(y, 0, grid, out)
        return out

    def dy(self, x, y, alpha=0, grid: bool = False):
        """``d_y d^alpha_x Phi``."""
        out = self._part("dy", x, y, alpha, grid)
        if self.envelope is not None:
            out = out * self._env(y, 0, grid, out) + self._part("value", x, y, alpha, grid) * self._env(y, 1, grid, out)
        return out

    def _env(self, y, order, grid, like):
        e = self.envelope(np.atleast_1d(np.asarray(y, dtype=float)), order)
        return e[None, :] if grid else e

    def defect_parts(self, x, y, grid: bool = False):
        """``(S1, S2, S3)`` of the un-enveloped series."""
        return tuple(self._part(k, x, y, 0, grid) for k in ("s1", "s2", "s3"))

    def laplacian(self, x, y, grid: bool = False):
        """Closed-form ``Delta Phi``."""
        s1, s2, s3 = self.defect_parts(x, y, grid)
        lap = s1 + s2 + s3
        if self.envelope is None:
            return lap
        psi = self._env(y, 0, grid, lap)
        d1 = self._env(y, 1, grid, lap)
        d2 = self._env(y, 2, grid, lap)
        return psi * lap + 2.0 * d1 * self._part("dy", x, y, 0, grid) + d2 * self._part("value", x, y, 0, grid)

    def gradient(self, x, y):
        """``(d_x Phi, d_y Phi)`` at paired points (d = 1)."""
        return self.dx(x, y, 1), self.dy(x, y)

    def stencil_laplacian(self, x, y, step: float = 1e-3):
        """Independent ``(d+1)``-dimensional 5-/7-point stencil estimate of ``Delta Phi``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        c = self.value(x, y)
        tot = self.value(x, y + step) + self.value(x, y - step) - 2.0 * c
        if self.d == 1:
            tot = tot + self.value(x + step, y) + self.value(x - step, y) - 2.0 * c
        else:
            for e in (np.array([step, 0.0]), np.array([0.0, step])):
                tot = tot + self.value(x + e, y) + self.value(x - e, y) - 2.0 * c
        return tot / step ** 2

    def active_terms(self, y: float) -> int:
        """Number of indices ``n`` with a nonzero cutoff factor at height ``y``."""
        prm = self.params
        c = prm.mu * prm.h * qstar_table(prm.Q)[: prm.n_cap + 1]
        return int(np.sum(c * abs(y) < 2.0))

    def band_edges(self) -> np.ndarray:
        """Heights ``1/c_n, 2/c_n`` where cutoff factors change regime."""
        prm = self.params
        c = prm.mu * prm.h * qstar_table(prm.Q)[: prm.n_cap + 1]
        return np.unique(np.concatenate([1.0 / c, 2.0 / c]))


def extend(phi0: TestFunction, phi1: TestFunction, params: ExtensionParams, certify: bool = True) -> AlmostHarmonicExtension:
    """Build the extension of the boundary pair ``(phi0, phi1)``.

    With ``certify`` the data must carry unsaturated class certificates for ``(M, h)``.
    """
    if phi0.d != params.d or phi1.d != params.d:
        raise ValueError("dimension mismatch between data and params")
    certs = {}
    if certify:
        for name, f in (("phi0", phi0), ("phi1", phi1)):
            cert = class_norm_certificate(f, params.M, params.h)
            if cert.saturated:
                raise PreconditionError(f"{name} has no unsaturated class certificate for ({params.M.label}, h={params.h:g})")
            certs[name] = cert
    return AlmostHarmonicExtension(params, phi0, phi1, None, certs)


def compactify(ext: AlmostHarmonicExtension, eps: float) -> AlmostHarmonicExtension:
    """``psi(y) Phi(x, y)`` with ``psi = chi(2y/eps)``: unchanged for ``|y| <= eps/2``,
    zero for ``|y| >= eps``."""
    if not eps > 0:
        raise DomainError("eps must be positive")
    if ext.envelope is not None:
        raise ValueError("extension is already compactified")
    return AlmostHarmonicExtension(ext.params, ext.phi0, ext.phi1, Envelope(float(eps)), ext.certificates)


# ---------------------------------------------------------------------------
# Verification helpers
# ---------------------------------------------------------------------------


def defect_y_range(ext: AlmostHarmonicExtension) -> tuple[float, float]:
    """Heights where the tabulated series is complete (lower) and fully cut off (upper)."""
    prm = ext.params
    q = qstar_table(prm.Q)
    c_last = prm.mu * prm.h * q[prm.n_cap]
    c_first = prm.mu * prm.h * q[0]
    return 2.0 / c_last, 2.0 / c_first


def _weighted_sup(ext, N, hw, xs, ys):
    lap = ext.laplacian(xs, ys, grid=True)
    w, _, sat = assoc_omega_grid(N.star(), 1.0 / (hw * np.abs(ys)))
    with np.errstate(divide="ignore"):
        lv = np.log(np.abs(lap)) + w[None, :]
    i, j = np.unravel_index(int(np.argmax(lv)), lv.shape)
    return float(lv[i, j]), (float(xs[i]), float(ys[j])), bool(np.any(sat))


def weighted_defect_norm(ext: AlmostHarmonicExtension, N: WeightSequence | None = None,
                         h_weight: float | None = None, x_grid=None, n_y: int = 241) -> dict:
    """Grid sup of ``|Delta Phi| exp(omega_{N*}(1 / (h' |y|)))`` and its 2x refinement.

    The ``y`` grid is log-spaced (both signs) between the completeness height of the
    tabulated series and the height where every term is cut off.
    """
    prm = ext.params
    N = prm.N if N is None else N
    hw = prm.A * prm.h if h_weight is None else float(h_weight)
    if x_grid is None:
        x_grid = np.linspace(-math.pi, math.pi, 33)
    xs = np.asarray(x_grid, dtype=float)
    y_lo, y_hi = defect_y_range(ext)
    if ext.envelope is not None:
        y_hi = min(y_hi, ext.envelope.eps)

    def ygrid(n):
        pos = np.geomspace(y_lo, y_hi, n)
        return np.concatenate([-pos[::-1], pos])

    def xgrid(k):
        if k == 1 or xs.size < 2:
            return xs
        fine = np.empty(2 * xs.size - 1)
        fine[0::2] = xs
        fine[1::2] = 0.5 * (xs[:-1] + xs[1:])
        return fine

    lv, arg, sat = _weighted_sup(ext, N, hw, xgrid(1), ygrid(n_y))
    lv2, arg2, sat2 = _weighted_sup(ext, N, hw, xgrid(2), ygrid(2 * n_y - 1))
    norm = math.exp(lv) if lv > -700 else 0.0
    norm2 = math.exp(lv2) if lv2 > -700 else 0.0
    rel = abs(norm2 - norm) / norm2 if norm2 > 0 else 0.0
    return {"norm": norm, "log_norm": lv, "argmax": arg, "norm_refined": norm2, "argmax_refined": arg2,
            "relative_change": rel, "stable": bool(rel < 0.05 and math.isfinite(norm)),
            "h_weight": hw, "y_range": [y_lo, y_hi], "saturated": bool(sat or sat2)}


def _slope(ys, errs):
    keep = errs > 0
    if np.sum(keep) < 2:
        return math.inf  # exact at every height
    ly, le = np.log(np.abs(ys[keep])), np.log(errs[keep])
    return float(np.polyfit(ly, le, 1)[0])


def trace_rates(ext: AlmostHarmonicExtension, x_grid, y_seq) -> dict:
    """Convergence slopes of the trace errors as ``y -> 0``.

    Quadratic family: ``|d^a_x Phi_0 - d^a phi_0|`` (a <= 2) and ``|d_y Phi_1 - phi_1|``.
    Linear family: ``|d_y d^a_x Phi_0|`` (a <= 1).
    """
    x = np.asarray(x_grid, dtype=float)
    ys = np.asarray(y_seq, dtype=float)
    e0 = AlmostHarmonicExtension(ext.params, ext.phi0, TestFunction.zero(ext.d), ext.envelope)
    e1 = AlmostHarmonicExtension(ext.params, TestFunction.zero(ext.d), ext.phi1, ext.envelope)
    quad, lin = {}, {}
    zeros_exact = True
    for a in range(3):
        if ext.phi0.n_modes == 0:
            break
        ref = ext.phi0.derivative(a, x)
        errs = np.array([np.max(np.abs(e0.dx(x, np.full_like(x, y), a) - ref)) for y in ys])
        zeros_exact &= bool(np.all(e0.dx(x, np.zeros_like(x), a) == ref))
        quad[f"dx{a}_phi0"] = {"errors": errs, "slope": _slope(ys, errs)}
    for a in range(2):
        if ext.phi0.n_modes == 0:
            break
        errs = np.array([np.max(np.abs(e0.dy(x, np.full_like(x, y), a))) for y in ys])
        lin[f"dy_dx{a}_phi0"] = {"errors": errs, "slope": _slope(ys, errs)}
    if ext.phi1.n_modes:
        ref = ext.phi1.eval(x)
        errs = np.array([np.max(np.abs(e1.dy(x, np.full_like(x, y)) - ref)) for y in ys])
        zeros_exact &= bool(np.all(e1.dy(x, np.zeros_like(x)) == ref))
        quad["dy_phi1"] = {"errors": errs, "slope": _slope(ys, errs)}
    qmin = min((v["slope"] for v in quad.values()), default=math.inf)
    lmin = min((v["slope"] for v in lin.values()), default=math.inf)
    return {"quadratic": quad, "linear": lin, "min_quadratic_slope": qmin, "min_linear_slope": lmin,
            "pass": bool(qmin >= 1.9 and lmin >= 0.9), "exact_at_zero": zeros_exact}


# ---------------------------------------------------------------------------
# Converse direction: trace regularity from a defect bound
# ---------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _gl_panels(edges):
    """Tensor Gauss-Legendre nodes/weights over consecutive panels."""
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    weights = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return nodes, weights


def _kernel(v, alpha: int, trace: str):
    """``d^alpha_{v_x}`` of the trace kernel and its gradient in ``v``.

    trace ``dy``: ``G = (1/2pi) v_y / |v|^2``; trace ``value``: ``E = (1/2pi) log |v|``.
    """
    f = lambda k: (-1.0) ** k * math.factorial(k) / v ** (k + 1)  # d^k (1/v)
    if trace == "dy":
        K = -np.imag(f(alpha)) / (2 * math.pi)
        g = f(alpha + 1)
        grad = (-np.imag(g) / (2 * math.pi), -np.real(g) / (2 * math.pi))
        return K, grad
    if alpha == 0:
        K = np.log(np.abs(v)) / (2 * math.pi)
    else:
        K = np.real((-1.0) ** (alpha - 1) * math.factorial(alpha - 1) / v ** alpha) / (2 * math.pi)
    g = f(alpha)  # d^(alpha+1) log v
    grad = (np.real(g) / (2 * math.pi), -np.imag(g) / (2 * math.pi))
    return K, grad


def _harmonic_part(ext, x, alpha, trace, center, r, n_circle):
    th = 2 * math.pi * np.arange(n_circle) / n_circle
    wx = center + r * np.cos(th)
    wy = r * np.sin(th)
    nx, ny = np.cos(th), np.sin(th)
    phi = ext.value(wx, wy)
    gx, gy = ext.dx(wx, wy, 1), ext.dy(wx, wy)
    dn_phi = nx * gx + ny * gy
    v = (x - wx) + 1j * (0.0 - wy)
    K, (Kx, Ky) = _kernel(v, alpha, trace)
    # d/dn_w K(z - w) = -grad K(v) . n
    dn_K = -(Kx * nx + Ky * ny)
    ds = r * 2 * math.pi / n_circle
    return float(np.sum(phi * dn_K - K * dn_phi) * ds)


def _defect_floor(ext, center, r, rel: float = 1e-15) -> float:
    """Smallest height below which ``|Delta Phi|`` on the disk stays under ``rel`` times its max."""
    xs = np.linspace(center - r, center + r, 41)
    ys = np.geomspace(1e-4 * r, r, 161)
    lap = np.max(np.abs(ext.laplacian(xs, ys, grid=True)), axis=0)
    top = np.max(lap)
    if top == 0:
        return r
    live = np.nonzero(lap > rel * top)[0]
    return float(ys[max(live[0] - 1, 0)])


def _potential_part(ext, x, alpha, trace, center, r, eta_min):
    edges = ext.band_edges() if hasattr(ext, "band_edges") else np.array([])
    edges = edges[(edges > eta_min) & (edges < r)]
    geo = np.geomspace(eta_min, r, 24)
    e_pos = np.unique(np.concatenate([[eta_min, r], edges, geo]))
    if e_pos.size < 2:
        return 0.0
    eta_pos, w_pos = _gl_panels(e_pos)
    etas = np.concatenate([-eta_pos[::-1], eta_pos])
    w_eta = np.concatenate([w_pos[::-1], w_pos])
    pts_x, pts_y, wts = [], [], []
    for eta, we in zip(etas, w_eta):
        half = math.sqrt(max(r * r - eta * eta, 0.0))
        lo, hi = center - half, center + half
        s = abs(eta)
        cuts = [lo, hi]
        if lo < x < hi:
            cuts.append(x)
            k = 0
            while s * 2 ** k < hi - lo:
                for c in (x - s * 2 ** k, x + s * 2 ** k):
                    if lo < c < hi:
                        cuts.append(c)
                k += 1
        xi, wxi = _gl_panels(np.unique(cuts))
        pts_x.append(xi)
        pts_y.append(np.full_like(xi, eta))
        wts.append(wxi * we)
    xi = np.concatenate(pts_x)
    et = np.concatenate(pts_y)
    w = np.concatenate(wts)
    lap = ext.laplacian(xi, et)
    v = (x - xi) + 1j * (0.0 - et)
    K, _ = _kernel(v, alpha, trace)
    return float(np.sum(w * K * lap))


def recover_trace_class(ext, M: WeightSequence, h: float, probe: dict) -> dict:
    """Spot-check that the trace of a defect-bounded ``Phi`` (d = 1) lies in a class.

    Splits ``d^alpha_x`` of the trace at ``(x, 0)`` into the Newton-potential part
    ``psi = int_B K_alpha(x - w) Delta Phi(w) dw`` over a disk ``B`` and a harmonic part
    given by the Green boundary integral on ``dB``; their sum must reproduce the trace.
    The potential-part magnitudes are fitted as ``C (H h)^alpha M_alpha``.

    probe keys: ``x`` (points), ``orders`` (list of alpha), ``trace`` (``"dy"`` or
    ``"value"``), ``center``, ``radius``, ``reference`` (callable ``(alpha, x)`` giving the
    exact trace derivative), ``n_circle``, ``eta_min``.
    """
    xs = np.atleast_1d(np.asarray(probe.get("x", [0.0]), dtype=float))
    orders = list(probe.get("orders", range(6)))
    trace = probe.get("trace", "dy")
    center = float(probe.get("center", 0.0))
    r = float(probe.get("radius", 1.0))
    n_circle = int(probe.get("n_circle", 1024))
    eta_min = probe.get("eta_min")
    ref = probe.get("reference")
    if trace not in ("dy", "value"):
        raise ValueError("trace must be 'dy' or 'value'")
    if np.any(np.abs(xs - center) >= r):
        raise DomainError("probe points must lie inside the disk")
    if eta_min is None:
        eta_min = _defect_floor(ext, center, r)
    eta_min = float(eta_min)
    psi = np.zeros((len(orders), xs.size))
    harm = np.zeros_like(psi)
    for i, a in enumerate(orders):
        for j, x in enumerate(xs):
            psi[i, j] = _potential_part(ext, x, a, trace, center, r, eta_min)
            harm[i, j] = _harmonic_part(ext, x, a, trace, center, r, n_circle)
    recon_err = None
    if ref is not None:
        exact = np.array([[ref(a, x) for x in xs] for a in orders])
        recon_err = float(np.max(np.abs(psi + harm - exact)))
    vmax = np.max(np.abs(psi), axis=1)
    # fit |d^a psi| <= C (H h)^a M_a
    ords = np.asarray(orders)
    with np.errstate(divide="ignore"):
        ell = np.log(vmax) - ords * math.log(h) - M.log_M[ords]
    if not np.any(np.isfinite(ell)):
        C, H = 0.0, 1.0
    else:
        base = ell[ords == 0][0] if np.any(ords == 0) else np.min(ell[np.isfinite(ell)])
        slopes = [(ell[i] - base) / a for i, a in enumerate(ords) if a > 0 and np.isfinite(ell[i])]
        logH = max([0.0] + slopes)
        logC = float(np.max(np.where(np.isfinite(ell), ell - ords * logH, -np.inf)))
        C, H = math.exp(logC), math.exp(logH)
    verdict = "inconclusive" if recon_err is not None and recon_err > 1e-4 else "certified"
    return {"orders": orders, "x": xs, "potential": psi, "harmonic": harm, "max_abs_potential": vmax,
            "reconstruction_error": recon_err, "C": C, "H": H, "verdict": verdict,
            "note": "spot check at probe orders; not a class proof"}
