"""Weight sequences, weight matrices and weight functions.

All sequence arithmetic happens on ``log M_p`` so that families such as
``(p!)^2`` stay representable far past the double-precision overflow point.
Every supremum taken over a finite index range or a finite ``t``-range carries a
saturation flag; verdicts on asymptotic conditions are always reported as
truncation-caveated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, PreconditionError, TruncationError

DEFAULT_PMAX = 400

HOLDS = "holds"
FAILS = "fails"
INCONCLUSIVE = "truncation-inconclusive"

_EXACT_TOL = 1e-12
_OPT_TOL = 1e-8
_PAIR_TOL = 1e-6

_TRUNCATION_NOTE = "finite-scale check; asymptotic condition not certified"


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# Weight sequences
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Positive sequence ``M_0 = 1, M_1, ..., M_{P_max}`` stored as ``log M_p``.

    ``family`` records a recognised closed-form family, e.g. ``("gevrey", 2.0)``,
    ``("weight_function", "log_squared", h)`` or ``("table",)``.
    """

    log_M: np.ndarray
    label: str = "M"
    family: tuple = ("table",)
    log_m: np.ndarray = field(init=False, repr=False)
    log_mstar: np.ndarray = field(init=False, repr=False)
    _log_convex: bool = field(init=False, repr=False)

    def __post_init__(self):
        logM = np.asarray(self.log_M, dtype=float)
        if logM.ndim != 1 or logM.size < 2:
            raise ValueError("a weight sequence needs at least M_0 and M_1")
        if not np.all(np.isfinite(logM)):
            raise ValueError("log M_p must be finite (M_p > 0)")
        if abs(logM[0]) > _EXACT_TOL:
            raise ValueError(f"M_0 must equal 1, got exp({logM[0]!r})")
        logM = logM.copy()
        logM[0] = 0.0
        p = np.arange(logM.size)
        log_m = np.full(logM.size, np.nan)
        log_m[1:] = np.diff(logM)
        log_mstar = np.full(logM.size, np.nan)
        log_mstar[1:] = log_m[1:] - np.log(p[1:])
        object.__setattr__(self, "log_M", _frozen(logM))
        object.__setattr__(self, "log_m", _frozen(log_m))
        object.__setattr__(self, "log_mstar", _frozen(log_mstar))
        object.__setattr__(self, "_log_convex", _first_decrease(self.log_m) is None)

    # -- constructors -----------------------------------------------------
    @classmethod
    def gevrey(cls, s: float, p_max: int = DEFAULT_PMAX) -> "WeightSequence":
        """``M_p = (p!)^s``."""
        if s <= 0:
            raise DomainError("Gevrey exponent must be positive")
        p = np.arange(p_max + 1)
        return cls(s * gammaln(p + 1), label=f"(p!)^{s:g}", family=("gevrey", float(s)))

    @classmethod
    def table(cls, log_M: Sequence[float], label: str = "table") -> "WeightSequence":
        return cls(np.asarray(log_M, dtype=float), label=label, family=("table",))

    @classmethod
    def from_values(cls, M: Sequence[float], label: str = "table") -> "WeightSequence":
        return cls.table(np.log(np.asarray(M, dtype=float)), label=label)

    @classmethod
    def from_quotients(cls, m: Sequence[float], label: str = "table") -> "WeightSequence":
        """Build from ``m_1, ..., m_P`` (``M_p = m_1 ... m_p``)."""
        logm = np.log(np.asarray(m, dtype=float))
        return cls.table(np.concatenate([[0.0], np.cumsum(logm)]), label=label)

    @classmethod
    def from_mstar(cls, mstar: Sequence[float], label: str = "table") -> "WeightSequence":
        """Build from ``m*_1, ..., m*_P`` (``m_p = p m*_p``)."""
        ms = np.asarray(mstar, dtype=float)
        return cls.from_quotients(ms * np.arange(1, ms.size + 1), label=label)

    @classmethod
    def from_weight_function(
        cls, omega: "WeightFunction", h: float, p_max: int = DEFAULT_PMAX, exact: bool = False
    ) -> "WeightSequence":
        """``M^h_p = exp(phi*(h p) / h)``."""
        if h <= 0:
            raise DomainError("h must be positive")
        p = np.arange(p_max + 1)
        if exact and omega.phi_star_exact is not None:
            vals = np.asarray(omega.phi_star_exact(h * p), dtype=float)
        else:
            vals = np.array([phi_star(omega, h * k) for k in p])
        vals[0] = 0.0
        return cls(vals / h, label=f"M^{h:g}_{omega.label}",
                   family=("weight_function", omega.label, float(h)))

    # -- derived quantities ---------------------------------------------
    @property
    def p_max(self) -> int:
        return self.log_M.size - 1

    def star(self) -> "WeightSequence":
        """``M* = (M_p / p!)``."""
        p = np.arange(self.log_M.size)
        return WeightSequence(self.log_M - gammaln(p + 1), label=f"{self.label}*",
                              family=("star",) + tuple(self.family))

    def truncate(self, p_max: int) -> "WeightSequence":
        if p_max < 1 or p_max > self.p_max:
            raise ValueError("truncation index out of range")
        return WeightSequence(self.log_M[: p_max + 1], label=self.label, family=self.family)

    def values(self) -> np.ndarray:
        return np.exp(self.log_M)

    @property
    def is_log_convex(self) -> bool:
        return self._log_convex

    def to_dict(self) -> dict:
        return {"label": self.label, "family": list(self.family), "p_max": self.p_max}


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class ConditionReport:
    condition: str
    verdict: str
    witnesses: dict = field(default_factory=dict)
    first_violation: int | None = None
    caveat: str | None = None
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.verdict == HOLDS

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "witnesses": _jsonable(self.witnesses),
            "first_violation": self.first_violation,
            "caveat": self.caveat,
            "details": _jsonable(self.details),
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------------------
# Associated function
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssocValue:
    value: float
    index: int
    saturated: bool


def assoc_omega(M: WeightSequence, t: float) -> AssocValue:
    """``omega_M(t) = max_{p <= P_max} (p log t - log M_p)`` with attaining index."""
    if not t > 0:
        raise DomainError(f"assoc_omega needs t > 0, got {t!r}")
    vals, idx, sat = assoc_omega_grid(M, np.array([float(t)]))
    return AssocValue(float(vals[0]), int(idx[0]), bool(sat[0]))


def assoc_omega_log(M: WeightSequence, u) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``omega_M(e^u)`` for an array of ``u``; returns (values, indices)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if M.is_log_convex:
        # maximiser = number of quotients strictly below t
        idx = np.searchsorted(M.log_m[1:], u, side="left")
    else:
        p = np.arange(M.log_M.size)
        idx = np.argmax(p[:, None] * u[None, :] - M.log_M[:, None], axis=0)
    vals = idx * u - M.log_M[idx]
    return vals, idx


def assoc_omega_grid(M: WeightSequence, t) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised :func:`assoc_omega`; returns (values, indices, saturated)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~(t > 0)):
        raise DomainError("assoc_omega needs t > 0")
    vals, idx = assoc_omega_log(M, np.log(t))
    return vals, idx, idx == M.p_max


# ---------------------------------------------------------------------------
# Conditions on a single sequence
# ---------------------------------------------------------------------------


def _first_decrease(log_q: np.ndarray, tol: float = _EXACT_TOL) -> int | None:
    """Index p (>= 2) of the first strict decrease in the quotient table, if any."""
    q = log_q[1:]
    d = np.diff(q)
    bad = np.nonzero(d < -tol * np.maximum(1.0, np.abs(q[:-1])))[0]
    return int(bad[0]) + 2 if bad.size else None


def check_M1(M: WeightSequence) -> ConditionReport:
    """(M.1): the quotients ``m_p`` are nondecreasing."""
    if M.p_max < 2:
        raise ValueError("P_max >= 2 required")
    bad = _first_decrease(M.log_m)
    return ConditionReport("M.1", FAILS if bad else HOLDS, first_violation=bad,
                           caveat=None if bad else _TRUNCATION_NOTE)


def check_M1_star(M: WeightSequence) -> ConditionReport:
    """(M.1)*: the quotients ``m*_p = m_p / p`` are nondecreasing."""
    if M.p_max < 2:
        raise ValueError("P_max >= 2 required")
    bad = _first_decrease(M.log_mstar)
    return ConditionReport("M.1*", FAILS if bad else HOLDS, first_violation=bad,
                           caveat=None if bad else _TRUNCATION_NOTE)


def almost_increasing_constant(M: WeightSequence) -> float:
    """Smallest ``C`` with ``m*_q <= C m*_p`` for all ``q <= p`` (prefix-max sweep)."""
    lq = M.log_mstar[1:]
    return float(np.exp(np.max(np.maximum.accumulate(lq) - lq)))


DEFAULT_C_GRID = tuple(2.0 ** (np.arange(0, 81) / 4.0))


def check_M1_star_w(M: WeightSequence, C_search_grid: Iterable[float] = DEFAULT_C_GRID) -> ConditionReport:
    """(M.1)*_w: ``m*`` is almost increasing; smallest grid constant that works."""
    grid = np.sort(np.asarray(list(C_search_grid), dtype=float))
    if grid.size == 0:
        raise ValueError("empty search grid")
    if M.p_max < 2:
        raise ValueError("P_max >= 2 required")
    lq = M.log_mstar[1:]
    prefix = np.maximum.accumulate(lq)
    exact = float(np.exp(np.max(prefix - lq)))
    chosen = None
    for C in grid:
        # m*_q <= C m*_p for all q <= p  <=>  prefix-max(m*)_p <= C m*_p
        if np.all(prefix <= lq + math.log(C) + _EXACT_TOL * np.maximum(1.0, np.abs(lq))):
            chosen = float(C)
            break
    verdict = HOLDS if chosen is not None else FAILS
    return ConditionReport("M.1*_w", verdict, witnesses={"C": chosen},
                           caveat=_TRUNCATION_NOTE, details={"C_exact": exact})


def _linear_majorant(g: np.ndarray) -> tuple[float, float]:
    """(log C, log H) with ``g(p) <= log C + p log H``; log H = largest increment."""
    if g.size < 2:
        return float(g[0]), 0.0
    logH = float(np.max(np.diff(g)))
    p = np.arange(g.size)
    logC = float(np.max(g - p * logH))
    return logC, logH


def check_M2_prime(N: WeightSequence, M: WeightSequence | None = None, shift: int = 1) -> ConditionReport:
    """Witnesses for ``N_{p+shift} <= C H^p M_p`` (shift=1: (M.2)'; shift=2: the doubled form).

    ``H`` is the exponential of the largest increment of ``p -> log N_{p+shift} - log M_p``
    and ``C`` the residual maximum. The witness trend across ``P_max/4, P_max/2, P_max``
    is reported: growth of ``H`` with the truncation index signals failure.
    """
    M = N if M is None else M
    if N.p_max != M.p_max:
        raise ValueError("sequences must share P_max")
    P = N.p_max
    g = N.log_M[shift:] - M.log_M[: P + 1 - shift]
    trend = []
    for cut in (max(2, P // 4), max(2, P // 2), P):
        n = max(2, cut + 1 - shift)
        logC, logH = _linear_majorant(g[:n])
        trend.append({"p_max": cut, "C": math.exp(logC), "H": math.exp(logH)})
    logC, logH = _linear_majorant(g)
    growing = trend[-1]["H"] > trend[-2]["H"] * (1 + 1e-9)
    return ConditionReport(
        "M.2'" if shift == 1 else f"M.2'(shift={shift})",
        HOLDS,
        witnesses={"C": math.exp(logC), "H": math.exp(logH), "logC": logC, "logH": logH},
        caveat=_TRUNCATION_NOTE + ("; H grows with P_max" if growing else ""),
        details={"trend": trend, "H_growing": bool(growing)},
    )


def check_quasianalytic(M: WeightSequence) -> ConditionReport:
    """Divergence of ``sum 1/m_p``; verdict ``holds`` means quasianalytic."""
    P = M.p_max
    if P < 2:
        raise ValueError("P_max >= 2 required")
    inv = np.exp(-M.log_m[1:])
    partial = np.cumsum(inv)
    cuts = [max(1, P // 4), max(1, P // 2), P]
    sums = {c: float(partial[c - 1]) for c in cuts}
    details = {"partial_sums": sums}
    fam = M.family
    closed = None
    if fam[0] == "gevrey":
        closed = fam[1] <= 1.0
    elif fam[0] == "weight_function":
        wf = NAMED_WEIGHT_FUNCTIONS.get(fam[1])
        if wf is not None and wf.get("quasianalytic") is not None:
            closed = wf["quasianalytic"]
    if closed is not None:
        details["closed_form"] = True
        details["quasianalytic"] = bool(closed)
        return ConditionReport("quasianalytic", HOLDS if closed else FAILS, details=details)
    # trend: ratio of the last block increment to the previous one
    inc1 = sums[cuts[1]] - sums[cuts[0]]
    inc2 = sums[cuts[2]] - sums[cuts[1]]
    details["closed_form"] = False
    details["increments"] = [inc1, inc2]
    details["quasianalytic"] = None
    return ConditionReport("quasianalytic", INCONCLUSIVE, caveat=_TRUNCATION_NOTE, details=details)


DEFAULT_H_GRID = tuple(2.0 ** -np.arange(0, 11))


def _ratio_trend(g: np.ndarray, H: float) -> str:
    """Classify ``p -> g(p) - p log H`` as 'decreasing', 'trending' or 'growing'."""
    r = g - np.arange(g.size) * math.log(H)
    d = np.diff(r)
    P = d.size
    tail = d[-max(2, P // 8):]
    if np.all(tail <= _EXACT_TOL * np.maximum(1.0, np.abs(r[-tail.size:]))):
        return "decreasing"
    if d[-1] < d[P // 2] - 1e-9:
        return "trending"
    return "growing"


def _closed_form_prec(N: WeightSequence, M: WeightSequence) -> tuple[str | None, str | None]:
    """Closed-form (subset, prec) answers for pairs of recognised families."""
    fn, fm = N.family, M.family
    if fn[0] == "gevrey" and fm[0] == "gevrey":
        a, b = fn[1], fm[1]
        return a <= b, a < b
    return None, None


def check_NA(M: WeightSequence, H_grid: Iterable[float] = DEFAULT_H_GRID) -> ConditionReport:
    """(NA): ``p! < M``. For each grid H, the minimal ``C_H`` and the tail trend of
    ``p!/(H^p M_p)``; recognised families are decided in closed form."""
    if M.p_max < 2:
        raise ValueError("P_max >= 2 required")
    p = np.arange(M.p_max + 1)
    g = gammaln(p + 1) - M.log_M
    per_H = []
    states = []
    for H in H_grid:
        state = _ratio_trend(g, H)
        logC = float(np.max(g - p * math.log(H)))
        per_H.append({"H": float(H), "C_H": math.exp(min(logC, 700.0)), "logC_H": logC, "trend": state})
        states.append(state)
    if all(s == "decreasing" for s in states):
        grid_verdict = HOLDS
    elif any(s == "growing" for s in states):
        grid_verdict = FAILS
    else:
        grid_verdict = INCONCLUSIVE
    details = {"per_H": per_H, "grid_verdict": grid_verdict,
               "convention": "H-grid tail-trend test (no finite criterion exists)"}
    closed = None
    if M.family[0] == "gevrey":
        closed = M.family[1] > 1.0
    elif M.family[0] == "weight_function":
        wf = NAMED_WEIGHT_FUNCTIONS.get(M.family[1])
        if wf is not None and wf.get("sublinear") is not None:
            closed = wf["sublinear"]
    if closed is not None:
        details["closed_form"] = True
        return ConditionReport("NA", HOLDS if closed else FAILS, caveat=None, details=details)
    details["closed_form"] = False
    return ConditionReport("NA", grid_verdict, caveat=_TRUNCATION_NOTE, details=details)


@dataclass
class RelationReport:
    relation: str
    witnesses: dict
    caveat: str | None
    details: dict

    def to_dict(self) -> dict:
        return {"relation": self.relation, "witnesses": _jsonable(self.witnesses),
                "caveat": self.caveat, "details": _jsonable(self.details)}


def _subset_witness(N: WeightSequence, M: WeightSequence) -> dict:
    """Witnesses for ``N_p <= C H^p M_p`` (H >= 1) and their stability in P_max."""
    g = N.log_M - M.log_M
    P = N.p_max
    out = []
    for cut in (P // 2, P):
        logC, logH = _linear_majorant(g[: cut + 1])
        logH = max(logH, 0.0)
        logC = float(np.max(g[: cut + 1] - np.arange(cut + 1) * logH))
        out.append((logC, logH))
    stable = out[1][1] <= out[0][1] + 1e-9
    return {"C": math.exp(out[1][0]), "H": math.exp(out[1][1]), "stable": bool(stable)}


def relation(N: WeightSequence, M: WeightSequence, H_grid: Iterable[float] = DEFAULT_H_GRID) -> RelationReport:
    """Strongest of ``prec`` (N < M), ``approx`` (N ~ M), ``subset`` (N c M) or ``none``."""
    if N.p_max != M.p_max:
        raise ValueError("sequences must share P_max")
    fwd = _subset_witness(N, M)
    bwd = _subset_witness(M, N)
    p = np.arange(N.p_max + 1)
    g = N.log_M - M.log_M
    trends = {float(H): _ratio_trend(g, H) for H in H_grid}
    per_H = {H: math.exp(min(float(np.max(g - p * math.log(H))), 700.0)) for H in trends}
    if all(s == "decreasing" for s in trends.values()):
        prec = True
    elif any(s == "growing" for s in trends.values()):
        prec = False
    else:
        prec = None
    subset, back = fwd["stable"], bwd["stable"]
    cf_subset, cf_prec = _closed_form_prec(N, M)
    cf_back, _ = _closed_form_prec(M, N)
    closed = cf_subset is not None
    if closed:
        subset, prec, back = cf_subset, cf_prec, cf_back
    if prec:
        rel = "prec"
    elif subset and back:
        rel = "approx"
    elif subset:
        rel = "subset"
    else:
        rel = "none"
    return RelationReport(
        rel,
        witnesses={"subset": {"C": fwd["C"], "H": fwd["H"]}, "superset": {"C": bwd["C"], "H": bwd["H"]},
                   "prec_C_H": per_H},
        caveat=None if closed else _TRUNCATION_NOTE + (" (prec undecided)" if prec is None else ""),
        details={"closed_form": closed, "prec_trends": trends},
    )


# ---------------------------------------------------------------------------
# Weight matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    members: tuple
    label: str = "matrix"
    params: tuple = ()

    def __post_init__(self):
        mem = tuple(self.members)
        if not mem:
            raise ValueError("a weight matrix needs at least one member")
        for a, b in zip(mem, mem[1:]):
            if a.p_max != b.p_max:
                raise ValueError("members must share P_max")
            if np.any(a.log_M > b.log_M + 1e-9 * np.maximum(1.0, np.abs(b.log_M))):
                raise ValueError(f"members not pointwise ordered: {a.label} !<= {b.label}")
        object.__setattr__(self, "members", mem)

    def __len__(self):
        return len(self.members)

    def __getitem__(self, i) -> WeightSequence:
        return self.members[i]


def check_matrix_M1_star_w(W: WeightMatrix, beurling: bool = True) -> ConditionReport:
    """[M.1]*_w on consecutive members: Beurling uses ``n*_q <= C m*_p`` with N before M,
    Roumieu ``m*_q <= C n*_p`` with N after M."""
    out = []
    mem = W.members
    for i, M in enumerate(mem):
        j = i - 1 if beurling else i + 1
        if not 0 <= j < len(mem):
            continue
        N = mem[j]
        a, b = (N.log_mstar[1:], M.log_mstar[1:]) if beurling else (M.log_mstar[1:], N.log_mstar[1:])
        C = float(np.exp(np.max(np.maximum.accumulate(a) - b)))
        out.append({"M": M.label, "N": N.label, "C": C})
    return ConditionReport("[M.1]*_w", HOLDS, witnesses={"pairs": out}, caveat=_TRUNCATION_NOTE)


def check_matrix_M2_prime(W: WeightMatrix, beurling: bool = True) -> ConditionReport:
    """[M.2]': Beurling ``N_{p+1} <= C H^p M_p`` with N before M; Roumieu
    ``M_{p+1} <= C H^p N_p`` with N after M."""
    out = []
    mem = W.members
    for i, M in enumerate(mem):
        j = i - 1 if beurling else i + 1
        if not 0 <= j < len(mem):
            continue
        N = mem[j]
        rep = check_M2_prime(N, M) if beurling else check_M2_prime(M, N)
        out.append({"M": M.label, "N": N.label, **{k: rep.witnesses[k] for k in ("C", "H")},
                    "H_growing": rep.details["H_growing"]})
    return ConditionReport("[M.2]'", HOLDS, witnesses={"pairs": out}, caveat=_TRUNCATION_NOTE)


# ---------------------------------------------------------------------------
# Weight functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """Weight function given through ``phi(u) = omega(e^u)`` on the whole real line.

    Working in the logarithmic variable keeps very large arguments representable and
    lets the scaled variants ``h*omega`` and ``omega(h .)`` be expressed exactly.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    label: str = "omega"
    phi_star_exact: Callable | None = None
    quasianalytic: bool | None = None
    sublinear: bool | None = None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            u = np.log(np.where(t > 0, t, 1.0))
        return np.where(t > 0, self.phi(u), 0.0)

    def scaled(self, h: float) -> "WeightFunction":
        """``_h omega = h * omega``."""
        base = self.phi
        return WeightFunction(lambda u: h * base(u), label=f"{h:g}*{self.label}")

    def dilated(self, h: float) -> "WeightFunction":
        """``omega_h(t) = omega(h t)``."""
        base, lh = self.phi, math.log(h)
        return WeightFunction(lambda u: base(np.asarray(u) + lh), label=f"{self.label}({h:g}t)")

    @classmethod
    def from_sequence(cls, M: WeightSequence) -> "WeightFunction":
        """The associated function ``omega_M`` (at the sequence's truncation)."""
        def phi(u):
            vals = assoc_omega_log(M, u)[0]
            return vals.reshape(np.shape(u)) if np.ndim(u) else float(vals[0])
        return cls(phi, label=f"omega_{M.label}")


def _phi_log_squared(u):
    u = np.maximum(np.asarray(u, dtype=float), 0.0)
    return u * u


def _phi_log_power(q):
    def phi(u):
        return np.maximum(np.asarray(u, dtype=float), 0.0) ** q
    return phi


def _phi_gevrey(s):
    def phi(u):
        u = np.asarray(u, dtype=float)
        return np.expm1(np.maximum(u, 0.0) / s)
    return phi


NAMED_WEIGHT_FUNCTIONS = {
    "log_squared": {"quasianalytic": False, "sublinear": True},
    "log_power": {"quasianalytic": False, "sublinear": True},
    "gevrey": {"quasianalytic": None, "sublinear": None},
    "analytic": {"quasianalytic": True, "sublinear": False},
}


def weight_function(name: str, **params) -> WeightFunction:
    """Named weight functions.

    ``log_squared``: ``log^2 max(t,1)``; ``log_power(q)``: ``log^q max(t,1)``;
    ``gevrey(s)``: ``max(t,1)^{1/s} - 1``; ``analytic``: ``max(t-1, 0)``.
    """
    if name == "log_squared":
        return WeightFunction(_phi_log_squared, label="log_squared",
                              phi_star_exact=lambda s: np.asarray(s, dtype=float) ** 2 / 4.0,
                              quasianalytic=False, sublinear=True)
    if name == "log_power":
        q = float(params.get("q", 2.0))
        if q <= 1:
            raise DomainError("log_power needs q > 1 for (gamma)")

        def exact(s, q=q):
            s = np.asarray(s, dtype=float)
            return (q - 1.0) * (s / q) ** (q / (q - 1.0))
        return WeightFunction(_phi_log_power(q), label="log_power", phi_star_exact=exact,
                              quasianalytic=False, sublinear=True)
    if name == "gevrey":
        s = float(params.get("s", 2.0))
        if s < 1:
            raise DomainError("gevrey weight function needs s >= 1")
        return WeightFunction(_phi_gevrey(s), label="gevrey", quasianalytic=(s == 1.0),
                              sublinear=(s > 1.0))
    if name == "analytic":
        return WeightFunction(_phi_gevrey(1.0), label="analytic", quasianalytic=True, sublinear=False)
    raise ValueError(f"unknown weight function {name!r}")


def check_weight_function(omega: WeightFunction, t_grid=None) -> dict:
    """Grid diagnostics for the defining properties and (alpha), (beta), (gamma),
    (delta), (alpha_0). Values are ratios on the grid tail; all are finite-scale."""
    if t_grid is None:
        t_grid = np.logspace(0, 12, 241)
    t = np.asarray(t_grid, dtype=float)
    w = omega(t)
    reports = {}
    monotone = bool(np.all(np.diff(w) >= -_EXACT_TOL * np.maximum(1.0, np.abs(w[1:]))))
    base_ok = monotone and abs(float(omega(np.array(1.0)))) <= _EXACT_TOL and bool(np.all(w >= -_EXACT_TOL))
    reports["basic"] = ConditionReport("weight_function", HOLDS if base_ok else FAILS,
                                       details={"nondecreasing": monotone})
    u = np.log(t)
    ph = omega.phi(u)
    # three-point convexity on the uniform u-grid
    sec = ph[:-2] - 2 * ph[1:-1] + ph[2:]
    convex = bool(np.all(sec >= -1e-9 * np.maximum(1.0, np.abs(ph[1:-1]))))
    reports["delta"] = ConditionReport("delta", HOLDS if convex else FAILS)
    pos = w > 0
    if np.any(pos):
        r2 = omega(2 * t[pos]) / w[pos]
        reports["alpha"] = ConditionReport("alpha", HOLDS, witnesses={"sup_ratio": float(np.max(r2))},
                                           caveat=_TRUNCATION_NOTE)
        rl = np.log(t[pos]) / w[pos]
        reports["gamma"] = ConditionReport("gamma", HOLDS if rl[-1] < rl[len(rl) // 2] else FAILS,
                                           details={"log_t_over_omega_tail": float(rl[-1])},
                                           caveat=_TRUNCATION_NOTE)
    rb = w / t
    reports["beta"] = ConditionReport("beta", HOLDS, witnesses={"sup_ratio": float(np.max(rb))},
                                      caveat=_TRUNCATION_NOTE)
    sub = rb[-1] < 0.5 * np.max(rb[len(rb) // 2:]) or rb[-1] < 1e-6
    reports["o(t)"] = ConditionReport("o(t)", HOLDS if sub else FAILS,
                                      details={"omega_over_t_tail": float(rb[-1])}, caveat=_TRUNCATION_NOTE)
    lam = np.logspace(0, 4, 17)
    t0 = t[pos][0] if np.any(pos) else 1.0
    tt = t[t >= t0]
    wt = omega(tt)
    ok = wt > 0
    ratios = omega(lam[:, None] * tt[None, ok]) / (lam[:, None] * wt[None, ok])
    reports["alpha0"] = ConditionReport("alpha0", HOLDS, witnesses={"C": float(np.max(ratios)), "t0": float(t0)},
                                        caveat=_TRUNCATION_NOTE)
    return reports


# ---------------------------------------------------------------------------
# Conjugates
# ---------------------------------------------------------------------------

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f: Callable[[float], float], a: float, b: float, tol: float = 1e-13,
               maxiter: int = 300) -> tuple[float, float]:
    """Golden-section search for the maximum of a unimodal ``f`` on ``[a, b]``."""
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def conjugate(fun: Callable[[float], float], t: float, r_cap: float = 1e7) -> tuple[float, float]:
    """``sup_{r >= 0} (t r - fun(r))`` for convex ``fun``; returns (value, argmax).

    The maximand is concave, so the bracket ``[0, R]`` is doubled until the maximand
    drops, then refined by golden section.
    """
    def g(r):
        return t * r - float(fun(r))

    g0 = g(0.0)
    R = 1.0
    gR, g2R = g(R), g(2 * R)
    while g2R >= gR:
        R *= 2.0
        if R > r_cap:
            raise TruncationError(f"conjugate sup not bracketed below r = {r_cap:g}")
        gR, g2R = g2R, g(2 * R)
    r_star, val = golden_max(g, 0.0, 2 * R)
    if g0 >= val:
        return g0, 0.0
    return val, r_star


def phi_star(omega: WeightFunction, t: float) -> float:
    """Young conjugate ``phi*(t) = sup_{r >= 0} (t r - phi(r))``."""
    if t < 0:
        raise DomainError("phi_star needs t >= 0")
    val, _ = conjugate(lambda r: float(omega.phi(r)), float(t))
    return max(val, 0.0)


def phi_star_star(omega: WeightFunction, r: float) -> float:
    """``(phi*)*(r)``, the biconjugate, by nesting the same sup routine."""
    if r < 0:
        raise DomainError("phi_star_star needs r >= 0")
    val, _ = conjugate(lambda s: phi_star(omega, s), float(r))
    return val


def _check_sublinear(omega: WeightFunction) -> None:
    if omega.sublinear is True:
        return
    if omega.sublinear is False:
        raise DomainError(f"{omega.label} is not o(t); omega_star undefined")
    us = np.log(np.array([1e3, 1e6, 1e9, 1e12, 1e15]))
    ratios = np.asarray(omega.phi(us), dtype=float) / np.exp(us)
    if not (ratios[-1] < 0.5 * ratios[0] or ratios[-1] < 1e-6) or np.any(np.diff(ratios) > 1e-12):
        raise DomainError(f"{omega.label} does not look sublinear (omega(t)/t tail {ratios[-1]:.3g})")


def omega_star(omega: WeightFunction, s: float, n_grid: int = 2001) -> float:
    """``omega*(s) = sup_{t >= 0} (omega(t) - t s)`` for sublinear ``omega``.

    The maximand need not be unimodal in ``t`` (e.g. ``log^2`` is convex on ``(1, e)``),
    so a log-spaced scan brackets the global maximum before golden refinement.
    """
    if not s > 0:
        raise DomainError("omega_star needs s > 0")
    _check_sublinear(omega)
    return _omega_star_unchecked(omega, float(s), n_grid)


def _omega_star_unchecked(omega: WeightFunction, s: float, n_grid: int = 2001) -> float:
    def h(u):
        return omega.phi(u) - s * np.exp(u)

    u_lo = -12.0
    U = max(4.0, math.log(1.0 / s) + 4.0)
    for _ in range(200):
        uu = np.linspace(U - 1.0, U, 5)
        hv = np.asarray(h(uu), dtype=float)
        if np.all(np.diff(hv) < 0) and hv[-1] < 0:
            break
        U += max(2.0, 0.5 * U)
        if U > 700:
            raise TruncationError("omega_star sup not bracketed")
    u = np.linspace(u_lo, U, n_grid)
    hv = np.asarray(h(u), dtype=float)
    i = int(np.argmax(hv))
    best = float(hv[i])
    a, b = u[max(i - 1, 0)], u[min(i + 1, n_grid - 1)]
    _, val = golden_max(lambda x: float(h(np.asarray(x))), a, b, tol=1e-15)
    return max(best, float(val), 0.0)


# ---------------------------------------------------------------------------
# Weight matrix of a weight function and verification chains
# ---------------------------------------------------------------------------


def matrix_from_weight_function(omega: WeightFunction, h_list: Sequence[float],
                                p_max: int = DEFAULT_PMAX, exact: bool = False) -> WeightMatrix:
    """Truncated ``M_omega = (M^h_omega)_h`` for the listed ``h`` (ascending)."""
    hs = [float(h) for h in h_list]
    if any(h <= 0 for h in hs) or hs != sorted(hs):
        raise ValueError("h_list must be positive and ascending")
    members = [WeightSequence.from_weight_function(omega, h, p_max, exact=exact) for h in hs]
    return WeightMatrix(tuple(members), label=f"M_{omega.label}", params=tuple(hs))


def verify_star_ws_sandwich(M: WeightSequence, s_grid: Sequence[float]) -> dict:
    """Check ``omega*_M(s) <= omega_{M*}(1/s) <= omega*_M(s/e)`` on a grid."""
    na = check_NA(M)
    if na.verdict == FAILS:
        raise PreconditionError(f"{M.label} fails (NA); sandwich not applicable")
    wM = WeightFunction.from_sequence(M)
    Ms = M.star()
    rows = []
    min_slack = math.inf
    inconclusive = False
    for s in s_grid:
        lo = _omega_star_unchecked(wM, float(s))
        mid = assoc_omega(Ms, 1.0 / float(s))
        hi = _omega_star_unchecked(wM, float(s) / math.e)
        tol = _PAIR_TOL * max(1.0, abs(mid.value))
        slack = min(mid.value - lo, hi - mid.value)
        ok = mid.value >= lo - tol and hi >= mid.value - tol
        inconclusive |= mid.saturated
        min_slack = min(min_slack, slack)
        rows.append({"s": float(s), "omega_star_M(s)": lo, "omega_M*(1/s)": mid.value,
                     "omega_star_M(s/e)": hi, "slack": slack, "ok": bool(ok), "saturated": mid.saturated})
    ok_all = all(r["ok"] for r in rows)
    verdict = INCONCLUSIVE if inconclusive and ok_all else (HOLDS if ok_all else FAILS)
    return {"verdict": verdict, "min_slack": min_slack, "rows": rows, "NA": na.verdict}


def _s_grid_default():
    return np.logspace(-2, 2, 21)


def verify_reduction_inequalities(omega: WeightFunction, cases: Sequence[dict],
                                  p_max: int = DEFAULT_PMAX, s_grid=None) -> list[dict]:
    """Verify the reduction inequalities between ``omega_{M*}(1/(h s))`` and
    ``omega*(k s)/k`` for sequences of the weight matrix of ``omega``.

    Each case is ``{"part": "i"|"ii"|"iii"|"iv", ...}``:

    * ``ii``: ``k`` given; ``M = M^k``, ``h = e``, ``C = 1``; checks
      ``omega_{M*}(1/(e s)) <= omega*(k s)/k``.
    * ``iv``: ``k`` given; ``h = 1``, ``M = M^{2^-n}`` with ``n`` the first index for which
      ``omega/k - omega_M`` stays bounded on the unsaturated t-range; ``log C`` is that bound.
    * ``i``/``iii``: ``M = M^{hM}`` and ``h`` given; ``(C, k)`` searched on a ``2^j`` grid.
    """
    _check_sublinear(omega)
    s_grid = _s_grid_default() if s_grid is None else np.asarray(s_grid, dtype=float)
    out = []
    for case in cases:
        part = case["part"]
        if part == "ii":
            out.append(_reduction_ii(omega, float(case["k"]), p_max, s_grid))
        elif part == "iv":
            out.append(_reduction_iv(omega, float(case["k"]), p_max, s_grid))
        elif part in ("i", "iii"):
            out.append(_reduction_search(omega, part, float(case.get("hM", 1.0)),
                                         float(case.get("h", 1.0)), p_max, s_grid))
        else:
            raise ValueError(f"unknown part {part!r}")
    return out


def _star_rhs(omega, k, s_grid):
    return np.array([_omega_star_unchecked(omega, k * s) / k for s in s_grid])


def _lhs(M, h, s_grid):
    vals, _, sat = assoc_omega_grid(M.star(), 1.0 / (h * s_grid))
    return vals, sat


def _reduction_ii(omega, k, p_max, s_grid):
    M = WeightSequence.from_weight_function(omega, k, p_max)
    t = np.logspace(0, 8, 161)
    wM, _, satM = assoc_omega_grid(M, t)
    inner_slack = float(np.min((omega(t) / k - wM)[~satM])) if np.any(~satM) else math.nan
    lhs, sat = _lhs(M, math.e, s_grid)
    rhs = _star_rhs(omega, k, s_grid)
    slack = rhs - lhs
    use = ~sat
    tol = _PAIR_TOL * np.maximum(1.0, np.abs(rhs))
    ok = bool(np.all(slack[use] >= -tol[use]))
    return {"part": "ii", "k": k, "h": math.e, "C": 1.0, "M": M.label,
            "verdict": HOLDS if ok else FAILS,
            "min_slack": float(np.min(slack[use])) if np.any(use) else math.nan,
            "omega_M_le_omega_over_k_slack": inner_slack,
            "saturated_points": int(np.sum(sat)), "s": s_grid, "lhs": lhs, "rhs": rhs}


def _reduction_iv(omega, k, p_max, s_grid):
    t = np.logspace(0, 8, 161)
    chosen = None
    for n in range(0, 16):
        hM = 2.0 ** -n
        M = WeightSequence.from_weight_function(omega, hM, p_max)
        wM, _, sat = assoc_omega_grid(M, t)
        use = ~sat
        if np.sum(use) < 10:
            break
        excess = omega(t[use]) / k - wM[use]
        # bounded: the excess must not keep growing along the t-tail
        tail = excess[-max(3, excess.size // 4):]
        if tail[-1] <= np.max(excess[: excess.size // 2 + 1]) + 1e-9:
            chosen = (n, M, float(max(np.max(excess), 0.0)))
            break
    if chosen is None:
        return {"part": "iv", "k": k, "verdict": INCONCLUSIVE}
    n, M, logC = chosen
    lhs_star = _star_rhs(omega, k, s_grid)
    rhs, sat = _lhs(M, 1.0, s_grid)
    slack = rhs + logC - lhs_star
    use = ~sat
    tol = _PAIR_TOL * np.maximum(1.0, np.abs(lhs_star))
    ok = bool(np.all(slack[use] >= -tol[use]))
    return {"part": "iv", "k": k, "h": 1.0, "n": n, "M": M.label, "C": math.exp(logC), "logC": logC,
            "verdict": HOLDS if ok else FAILS,
            "min_slack": float(np.min(slack[use])) if np.any(use) else math.nan,
            "saturated_points": int(np.sum(sat)), "s": s_grid}


def _reduction_search(omega, part, hM, h, p_max, s_grid):
    M = WeightSequence.from_weight_function(omega, hM, p_max)
    lhs_seq, sat = _lhs(M, h, s_grid)
    use = ~sat
    best = None
    trials = []
    for j in range(-8, 9):
        k = 2.0 ** j
        star = _star_rhs(omega, k, s_grid)
        # (i): seq <= star/k + log C ; (iii): star/k <= seq + log C
        excess = (lhs_seq - star) if part == "i" else (star - lhs_seq)
        ex = excess[use]
        if ex.size == 0:
            continue
        order = np.argsort(s_grid[use])
        ex_sorted = ex[order]
        # trend at s -> 0: excess at the smallest s must not be the running maximum
        stable = ex_sorted[0] <= np.max(ex_sorted[1:]) + 1e-9 if ex.size > 1 else True
        logC = float(max(np.max(ex), 0.0))
        trials.append({"k": k, "logC": logC, "stable": bool(stable)})
        if stable and (best is None or logC < best["logC"]):
            best = {"k": k, "logC": logC}
    if best is None:
        return {"part": part, "verdict": INCONCLUSIVE, "trials": trials, "M": M.label, "h": h}
    return {"part": part, "M": M.label, "h": h, "k": best["k"], "C": math.exp(best["logC"]),
            "logC": best["logC"], "verdict": HOLDS, "caveat": _TRUNCATION_NOTE, "trials": trials}


def sequence_from_config(cfg: dict) -> WeightSequence:
    """Build a sequence from ``{"kind": "gevrey" | "table" | "from_weight_function", ...}``."""
    kind = cfg.get("kind")
    p_max = int(cfg.get("p_max", DEFAULT_PMAX))
    if kind == "gevrey":
        return WeightSequence.gevrey(float(cfg["s"]), p_max)
    if kind == "table":
        return WeightSequence.table(cfg["logM"], label=cfg.get("label", "table"))
    if kind == "from_weight_function":
        params = {k: v for k, v in cfg.items() if k not in ("kind", "omega", "h", "p_max", "exact")}
        om = weight_function(cfg["omega"], **params)
        return WeightSequence.from_weight_function(om, float(cfg.get("h", 1.0)), p_max,
                                                   exact=bool(cfg.get("exact", False)))
    raise ValueError(f"unknown weight kind {kind!r}")
