"""Finite trigonometric test functions with exact derivatives and Laplacian powers.

A mode ``(k, a, b)`` stands for ``a cos(k.x) + b sin(k.x)``. Differentiation rotates
``(a, b)`` and multiplies by ``prod k_i^alpha_i``; ``(-Delta)^p`` multiplies by ``|k|^{2p}``.
Frequencies may be any real vectors, which covers e.g. ``cos(pi x / 2)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import TruncationError
from .weights import WeightSequence, assoc_omega


def _rotate(a, b, n: int):
    """Coefficients of the n-th derivative of ``a cos + b sin`` in the same basis."""
    r = n % 4
    if r == 0:
        return a, b
    if r == 1:
        return b, -a
    if r == 2:
        return -a, -b
    return -b, a


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Finite sum of modes ``a cos(k.x) + b sin(k.x)`` in dimension 1 or 2."""

    __test__ = False  # not a pytest class

    d: int
    k: np.ndarray  # (n_modes, d)
    a: np.ndarray  # cosine amplitudes
    b: np.ndarray  # sine amplitudes
    box: tuple = (-math.pi, math.pi)

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        k = np.asarray(self.k, dtype=float).reshape(-1, self.d)
        a = np.asarray(self.a, dtype=float).reshape(-1)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if not (k.shape[0] == a.size == b.size):
            raise ValueError("mode arrays disagree in length")
        for name, arr in (("k", k), ("a", a), ("b", b)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    # -- construction ---------------------------------------------------
    @classmethod
    def from_modes(cls, modes, d: int = 1, box=(-math.pi, math.pi)) -> "TestFunction":
        """``modes`` is a list of ``(k, a)`` or ``(k, a, b)``; ``k`` scalar for d = 1."""
        ks, As, Bs = [], [], []
        for m in modes:
            k = np.atleast_1d(np.asarray(m[0], dtype=float))
            if k.size != d:
                raise ValueError(f"frequency {m[0]!r} does not match d = {d}")
            ks.append(k)
            As.append(float(m[1]))
            Bs.append(float(m[2]) if len(m) > 2 else 0.0)
        k = np.array(ks).reshape(-1, d)
        return cls(d, k, np.array(As), np.array(Bs), tuple(box))

    @classmethod
    def zero(cls, d: int = 1) -> "TestFunction":
        return cls(d, np.zeros((0, d)), np.zeros(0), np.zeros(0))

    @classmethod
    def from_json(cls, obj) -> "TestFunction":
        if isinstance(obj, str):
            obj = json.loads(obj)
        d = int(obj.get("d", 1))
        box = tuple(obj.get("box", (-math.pi, math.pi)))
        return cls.from_modes(obj.get("modes", []), d=d, box=box)

    def to_json(self) -> dict:
        modes = []
        for k, a, b in zip(self.k, self.a, self.b):
            kk = float(k[0]) if self.d == 1 else [float(v) for v in k]
            modes.append([kk, float(a)] if b == 0 else [kk, float(a), float(b)])
        return {"d": self.d, "modes": modes}

    @property
    def n_modes(self) -> int:
        return self.a.size

    @property
    def knorm(self) -> np.ndarray:
        return np.sqrt(np.sum(self.k ** 2, axis=1))

    def scaled(self, c: float) -> "TestFunction":
        return TestFunction(self.d, self.k, c * self.a, c * self.b, self.box)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        if other.d != self.d:
            raise ValueError("dimension mismatch")
        return TestFunction(self.d, np.vstack([self.k, other.k]), np.concatenate([self.a, other.a]),
                            np.concatenate([self.b, other.b]), self.box)

    # -- evaluation -----------------------------------------------------
    def _phase(self, x) -> np.ndarray:
        """``k.x`` with shape ``(n_modes, *points)``."""
        x = np.asarray(x, dtype=float)
        if self.d == 1:
            return self.k[:, 0].reshape((-1,) + (1,) * x.ndim) * x[None, ...]
        if x.shape[-1] != 2:
            raise ValueError("d = 2 points need a trailing axis of length 2")
        return np.tensordot(self.k, np.moveaxis(x, -1, 0), axes=(1, 0))

    def mode_values(self, x, alpha=0) -> np.ndarray:
        """Per-mode values of ``d^alpha`` at ``x``, shape ``(n_modes, *points)``."""
        alpha = np.atleast_1d(np.asarray(alpha, dtype=int))
        if alpha.size == 1 and self.d == 2:
            alpha = np.array([int(alpha[0]), 0])
        if np.any(alpha < 0):
            raise ValueError("negative derivative order")
        n = int(alpha.sum())
        a, b = _rotate(self.a, self.b, n)
        fac = np.prod(self.k ** alpha[None, :], axis=1) if n else np.ones(self.n_modes)
        th = self._phase(x)
        shape = (-1,) + (1,) * (th.ndim - 1)
        return (fac * a).reshape(shape) * np.cos(th) + (fac * b).reshape(shape) * np.sin(th)

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if self.n_modes == 0:
            return np.zeros(x.shape if self.d == 1 else x.shape[:-1])
        return np.sum(self.mode_values(x), axis=0)

    def derivative(self, alpha, x):
        x = np.asarray(x, dtype=float)
        if self.n_modes == 0:
            return np.zeros(x.shape if self.d == 1 else x.shape[:-1])
        return np.sum(self.mode_values(x, alpha), axis=0)

    def laplacian_power(self, p: int) -> "TestFunction":
        """``(-Delta)^p f``: amplitudes scaled by ``|k|^{2p}``."""
        if p < 0:
            raise ValueError("p must be nonnegative")
        s = self.knorm ** (2 * p)
        return TestFunction(self.d, self.k, self.a * s, self.b * s, self.box)

    def log_amplitudes(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.hypot(self.a, self.b))


@dataclass
class ClassCertificate:
    label: str
    h: float
    bound: float
    log_bound: float
    argmax_order: int
    order_cap: int
    saturated: bool
    note: str = "membership certified up to order_cap only"
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"sequence": self.label, "h": self.h, "bound": self.bound, "log_bound": self.log_bound,
                "argmax_order": self.argmax_order, "order_cap": self.order_cap,
                "saturated": self.saturated, "note": self.note, **self.meta}


def _log_numerators(f: TestFunction, order_cap: int) -> np.ndarray:
    """``log max_{|alpha| = n} sum_k |c_k| prod |k_i|^alpha_i`` for n = 0..order_cap."""
    la = f.log_amplitudes()
    keep = np.isfinite(la)
    la = la[keep]
    if la.size == 0:
        return np.full(order_cap + 1, -np.inf)
    with np.errstate(divide="ignore"):
        lk = np.log(np.abs(f.k[keep]))
    # 0 * log 0 stands for 0^0 = 1 and is masked below
    lk = np.where(np.isfinite(lk), lk, -1e300)
    n = np.arange(order_cap + 1)
    if f.d == 1:
        expo = n[:, None] * lk[None, :, 0]
        expo = np.where(n[:, None] == 0, 0.0, expo)
        return logsumexp(la[None, :] + expo, axis=1)
    out = np.empty(order_cap + 1)
    for m in n:
        a1 = np.arange(m + 1)
        a2 = m - a1
        e1 = np.where(a1[:, None] == 0, 0.0, a1[:, None] * lk[None, :, 0])
        e2 = np.where(a2[:, None] == 0, 0.0, a2[:, None] * lk[None, :, 1])
        out[m] = np.max(logsumexp(la[None, :] + e1 + e2, axis=1))
    return out


def class_norm_certificate(f: TestFunction, M: WeightSequence, h: float, order_cap: int | None = None) -> ClassCertificate:
    """Bound ``B = max_{|alpha| <= cap} sum_k |c_k| |k^alpha| / (h^|alpha| M_|alpha|)``.

    ``|c_k| = hypot(a_k, b_k)`` dominates every derivative of the mode in sup norm.
    """
    cap = M.p_max if order_cap is None else int(order_cap)
    if cap > M.p_max:
        raise ValueError("order_cap exceeds P_max")
    num = _log_numerators(f, cap)
    n = np.arange(cap + 1)
    lb = num - n * math.log(h) - M.log_M[: cap + 1]
    if not np.any(np.isfinite(lb)):
        return ClassCertificate(M.label, float(h), 0.0, -math.inf, 0, cap, False)
    i = int(np.argmax(lb))
    val = float(lb[i])
    return ClassCertificate(M.label, float(h), math.exp(min(val, 700.0)), val, i, cap, i == cap)


def make_class_sample(M: WeightSequence, h: float, K_modes: int, decay: float = 0.5,
                      c_grid=tuple(2.0 ** np.arange(0, 21))) -> tuple[TestFunction, ClassCertificate]:
    """``f = sum_{k=1..K} exp(-decay * omega_M(k)) cos(k x)`` with a certificate at scale ``c h``.

    The smallest grid ``c`` giving an unsaturated certificate is reported in the metadata.
    """
    if K_modes < 1:
        raise ValueError("K_modes must be >= 1")
    ks = np.arange(1, K_modes + 1, dtype=float)
    amps = np.array([math.exp(-decay * assoc_omega(M, k).value) for k in ks])
    f = TestFunction(1, ks[:, None], amps, np.zeros_like(amps))
    for c in c_grid:
        cert = class_norm_certificate(f, M, c * h)
        if not cert.saturated:
            cert.meta = {"c": float(c), "rule": f"a_k = exp(-{decay:g} * omega_M(k))", "K": K_modes}
            return f, cert
    raise TruncationError("class certificate saturates for every scale on the grid")
