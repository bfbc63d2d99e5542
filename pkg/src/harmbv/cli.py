"""Command-line front end.

Every subcommand writes ``report.json`` plus CSV tables into the output directory and
exits 0 on pass, 2 when a checked property fails, 1 on usage or input errors. Output is
byte-reproducible: no timestamps, sorted JSON keys, 17-significant-digit CSV.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import boundary, extension, harmonic, weights
from .errors import DomainError, PreconditionError, TruncationError
from .testbed import TestFunction
from .weights import FAILS, INCONCLUSIVE, WeightSequence, _jsonable

SCHEMA = 1
OUT_ENV = "HBV_OUT"
DEFAULT_OUT = "harmbv_out"

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class InputError(Exception):
    """Unreadable or malformed input; maps to exit status 1."""


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------


def load_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if isinstance(obj, dict) and "schema" in obj and obj["schema"] != SCHEMA:
        raise InputError(f"{path}: schema {obj['schema']!r} not supported (expected {SCHEMA})")
    return obj


class Writer:
    """Serialized artifact writer for one run."""

    def __init__(self, out: Path):
        self.out = out
        out.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def csv(self, name: str, header: list[str], rows) -> None:
        arr = np.asarray(rows, dtype=float).reshape(-1, len(header))
        np.savetxt(self.out / name, arr, fmt="%.17g", delimiter=",", header=",".join(header), comments="")
        self.files.append(name)

    def report(self, command: str, body: dict, status: int) -> None:
        doc = {"schema": SCHEMA, "command": command, "status": status, **body}
        text = json.dumps(_jsonable(doc), sort_keys=True, indent=2)
        (self.out / "report.json").write_text(text + "\n")


def _out_dir(args) -> Path:
    env = os.environ.get(OUT_ENV)
    return Path(env) if env else Path(args.out)


def _grid(spec) -> np.ndarray:
    lo, hi, step = (float(v) for v in spec)
    if not step > 0 or hi < lo:
        raise InputError(f"bad grid spec {spec!r}")
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def _sequence(args) -> WeightSequence:
    if getattr(args, "config", None):
        cfg = load_json(args.config)
        cfg.setdefault("p_max", args.pmax)
        return weights.sequence_from_config(cfg)
    if args.family == "gevrey":
        return WeightSequence.gevrey(args.s, args.pmax)
    if args.family == "weight_function":
        om = weights.weight_function(args.omega, **({"q": args.q} if args.omega == "log_power" else {}))
        return WeightSequence.from_weight_function(om, args.h, args.pmax)
    raise InputError(f"unknown family {args.family!r}")


def _omega(args):
    params = {}
    if args.omega == "log_power":
        params["q"] = args.q
    elif args.omega == "gevrey":
        params["s"] = args.s
    return weights.weight_function(args.omega, **params)


def _functional(path: str) -> harmonic.Functional:
    try:
        return harmonic.Functional.from_json(load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid functional ({exc})") from exc


def _test_function(path: str) -> TestFunction:
    try:
        return TestFunction.from_json(load_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid test function ({exc})") from exc


def _basis(spec: str | None):
    if spec in (None, "default"):
        return boundary.default_basis()
    obj = load_json(spec)
    items = obj["basis"] if isinstance(obj, dict) else obj
    return [TestFunction.from_json(b) for b in items]


def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


def cmd_weights_check(args, w: Writer) -> int:
    M = _sequence(args)
    reps = {
        "M1": weights.check_M1(M), "M1_star": weights.check_M1_star(M),
        "M1_star_w": weights.check_M1_star_w(M), "M2_prime": weights.check_M2_prime(M),
        "quasianalytic": weights.check_quasianalytic(M), "NA": weights.check_NA(M),
    }
    body = {"sequence": M.to_dict(), "conditions": {k: r.to_dict() for k, r in reps.items()}}
    body["quasianalytic"] = reps["quasianalytic"].verdict != FAILS
    warn = [k for k, r in reps.items() if r.verdict == INCONCLUSIVE]
    if warn:
        body["warning"] = f"truncation-inconclusive: {', '.join(warn)}"
    failed = [c for c in (args.require or []) if reps[c].verdict == FAILS]
    body["required_failed"] = failed
    n = np.arange(M.p_max + 1)
    w.csv("sequence.csv", ["p", "log_M", "log_m", "log_mstar"],
          np.column_stack([n, M.log_M, M.log_m, M.log_mstar]))
    status = EXIT_FAIL if failed else EXIT_OK
    w.report("weights check", body, status)
    return status


def cmd_weights_assoc(args, w: Writer) -> int:
    M = _sequence(args)
    t = np.asarray(args.t, dtype=float)
    vals, idx, sat = weights.assoc_omega_grid(M, t)
    w.csv("assoc.csv", ["t", "omega", "argmax_p", "saturated"], np.column_stack([t, vals, idx, sat]))
    body = {"sequence": M.label, "t": t, "omega": vals, "argmax_p": idx, "saturated": sat}
    if np.any(sat):
        body["warning"] = "truncation-inconclusive: maximizer at P_max"
    w.report("weights assoc", body, EXIT_OK)
    return EXIT_OK


def cmd_weights_conjugate(args, w: Writer) -> int:
    om = _omega(args)
    s = np.asarray(args.s_values, dtype=float)
    rows, status = [], EXIT_OK
    tol = 1e-6 * args.tol_scale
    for v in s:
        ps = weights.phi_star(om, float(v))
        pss = weights.phi_star_star(om, float(v))
        direct = float(om.phi(np.array(float(v))))
        exact = om.phi_star_exact(float(v)) if om.phi_star_exact is not None else math.nan
        ostar = weights.omega_star(om, float(v)) if om.sublinear else math.nan
        err = max(abs(pss - direct), abs(ps - exact) if math.isfinite(exact) else 0.0)
        if err > tol:
            status = EXIT_FAIL
        rows.append([v, ps, exact, pss, direct, ostar])
    w.csv("conjugate.csv", ["s", "phi_star", "phi_star_exact", "phi_star_star", "phi", "omega_star"], rows)
    w.report("weights conjugate", {"omega": om.label, "tolerance": tol, "rows": rows}, status)
    return status


def cmd_weights_sandwich(args, w: Writer) -> int:
    M = _sequence(args)
    s = np.logspace(math.log10(args.s_min), math.log10(args.s_max), args.n)
    try:
        res = weights.verify_star_ws_sandwich(M, s)
    except PreconditionError as exc:
        w.report("weights sandwich", {"sequence": M.label, "error": str(exc)}, EXIT_FAIL)
        return EXIT_FAIL
    w.csv("sandwich.csv", ["s", "lower", "middle", "upper", "slack"],
          [[r["s"], r["omega_star_M(s)"], r["omega_M*(1/s)"], r["omega_star_M(s/e)"], r["slack"]] for r in res["rows"]])
    if res["verdict"] == INCONCLUSIVE:
        res["warning"] = "truncation-inconclusive: associated function saturated"
    status = EXIT_FAIL if res["verdict"] == FAILS else EXIT_OK
    w.report("weights sandwich", {"sequence": M.label, **res}, status)
    return status


def cmd_weights_reduction(args, w: Writer) -> int:
    om = _omega(args)
    cases = [{"part": "ii", "k": args.k}, {"part": "iv", "k": args.k},
             {"part": "i", "hM": args.h, "h": 1.0}, {"part": "iii", "hM": args.h, "h": 1.0}]
    res = weights.verify_reduction_inequalities(om, cases, args.pmax)
    rows = [[i, r.get("min_slack", math.nan), r.get("C", math.nan), r.get("k", math.nan)] for i, r in enumerate(res)]
    w.csv("reduction.csv", ["case", "min_slack", "C", "k"], rows)
    verdicts = [r["verdict"] for r in res]
    body = {"omega": om.label, "cases": res}
    if INCONCLUSIVE in verdicts:
        body["warning"] = "truncation-inconclusive case present"
    status = EXIT_FAIL if FAILS in verdicts else EXIT_OK
    w.report("weights reduction", body, status)
    return status


# ---------------------------------------------------------------------------
# extension and Poisson transform
# ---------------------------------------------------------------------------


def cmd_extend(args, w: Writer) -> int:
    phi0, phi1 = _test_function(args.phi0), _test_function(args.phi1)
    cfg = load_json(args.params)
    seqs = {}
    for key, default in (("M", {"kind": "gevrey", "s": 2}), ("N", {"kind": "gevrey", "s": 2}),
                         ("Q", {"kind": "gevrey", "s": 2})):
        c = dict(cfg.get(key, default))
        c.setdefault("p_max", args.pmax)
        seqs[key] = weights.sequence_from_config(c)
    prm = extension.ExtensionParams.build(seqs["M"], seqs["N"], seqs["Q"], float(cfg.get("h", 1.0)),
                                          int(cfg.get("d", 1)))
    ext = extension.extend(phi0, phi1, prm)
    if cfg.get("eps"):
        ext = extension.compactify(ext, float(cfg["eps"]))
    x = np.linspace(*cfg.get("x", [-math.pi, math.pi, 33]))
    y_lo, y_hi = extension.defect_y_range(ext)
    ys = np.geomspace(y_lo, y_hi, int(cfg.get("n_y", 41)))
    X, Y = np.meshgrid(x, ys, indexing="ij")
    phi = ext.value(x, ys, grid=True)
    lap = ext.laplacian(x, ys, grid=True)
    hw = prm.A * prm.h
    wy, _, _ = weights.assoc_omega_grid(prm.N.star(), 1.0 / (hw * ys))
    with np.errstate(over="ignore"):
        weight = np.exp(np.broadcast_to(wy[None, :], X.shape))
        wd = np.abs(lap) * weight
    w.csv("extension.csv", ["x", "y", "Phi", "Delta_Phi", "weight", "weighted_defect"],
          np.column_stack([X.ravel(), Y.ravel(), phi.ravel(), lap.ravel(), weight.ravel(), wd.ravel()]))
    norm = extension.weighted_defect_norm(ext, x_grid=x)
    y_seq = np.asarray(cfg.get("trace_y", (0.01 / prm.h) * 2.0 ** -np.arange(5)), dtype=float)
    rates = extension.trace_rates(ext, x, y_seq)
    body = {"params": prm.to_dict(), "certificates": {k: c.to_dict() for k, c in ext.certificates.items()},
            "weighted_defect": norm, "traces": rates}
    if norm["saturated"]:
        body["warning"] = "truncation-inconclusive: weight saturated on the y-grid"
    status = EXIT_OK if norm["stable"] and rates["pass"] else EXIT_FAIL
    w.report("extend", body, status)
    return status


def cmd_poisson(args, w: Writer) -> int:
    f = _functional(args.functional)
    x = _grid(args.x)
    ys = np.asarray(args.y, dtype=float)
    N = WeightSequence.gevrey(args.decay_s, args.pmax)
    X, Y = np.meshgrid(x, ys, indexing="ij")
    try:
        val = harmonic.poisson_transform(f, X, Y)
    except DomainError as exc:
        raise InputError(str(exc)) from exc
    step = float(args.stencil)
    pts = list(zip(X.ravel(), Y.ravel()))
    F = harmonic.transform_field(f)
    res = np.array(_pmap(lambda p: harmonic.harmonic_residual(F, p, step), pts, args.threads))
    dK = f.distance(X, Y).ravel()
    wv, _, _ = weights.assoc_omega_grid(N.star(), 1.0 / dK)
    w.csv("poisson.csv", ["x", "y", "value", "residual", "weight"],
          np.column_stack([X.ravel(), Y.ravel(), val.ravel(), res, np.exp(-wv)]))
    chain = harmonic.poisson_decay_chain(f, N) if f.d == 1 and not f.is_zero else None
    body = {"functional": f.to_json(), "max_abs_residual": float(np.max(np.abs(res))), "decay_chain": chain,
            "weight": f"exp(-omega_N*(1/d_K)), N = {N.label}"}
    status = EXIT_FAIL if chain is not None and not chain["stable"] else EXIT_OK
    w.report("poisson", body, status)
    return status


# ---------------------------------------------------------------------------
# boundary values
# ---------------------------------------------------------------------------


def _levels_table(w: Writer, name: str, r: boundary.BvResult) -> None:
    n = np.arange(r.levels.size)
    w.csv(name, ["n", "y_n", "pairing_n"], np.column_stack([n, r.levels_y, r.levels]))


def cmd_bv(args, w: Writer) -> int:
    f = _functional(args.functional)
    basis = _basis(args.basis)
    box = tuple(args.box) if args.box else boundary.default_box(f)
    res = boundary.bv_pair_many(harmonic.transform_field(f), basis, box, args.y0, args.levels)
    for i, r in enumerate(res):
        _levels_table(w, f"levels_{i}.csv", r)
    body = {"chi_box": list(box), "results": [r.to_dict() for r in res]}
    if any(r.oscillatory for r in res):
        body["warning"] = "oscillating level sequence; extrapolation may be unreliable"
    w.report("bv", body, EXIT_OK)
    return EXIT_OK


def cmd_roundtrip(args, w: Writer) -> int:
    f = _functional(args.functional)
    basis = _basis(args.basis)
    box = tuple(args.box) if args.box else boundary.default_box(f)
    res = boundary.bv_pair_many(harmonic.transform_field(f), basis, box, args.y0, args.levels)
    rows = []
    for i, (phi, r) in enumerate(zip(basis, res)):
        _levels_table(w, f"levels_{i}.csv", r)
        exact = f.pair(phi)
        rows.append([i, exact, r.extrapolated, abs(r.extrapolated - exact)])
    w.csv("roundtrip.csv", ["basis_index", "exact", "bv", "error"], rows)
    max_err = max(r[3] for r in rows)
    tol = 1e-5 * args.tol_scale
    status = EXIT_OK if max_err <= tol else EXIT_FAIL
    w.report("roundtrip", {"max_error": max_err, "tolerance": tol, "chi_box": list(box)}, status)
    return status


def cmd_support(args, w: Writer) -> int:
    f = _functional(args.functional)
    x = _grid(args.x)
    res = boundary.support_estimate(f, x, threshold=args.threshold)
    ys = res["y_seq"]
    w.csv("scores.csv", ["x", "exponent"] + [f"score_{i}" for i in range(ys.size)],
          np.column_stack([x, res["exponents"], res["scores"].T]) if not f.is_zero else np.zeros((0, 2 + ys.size)))
    body = {"intervals": res["intervals"], "peaks": res["peaks"], "y_seq": ys, "threshold": args.threshold,
            "grid_step": float(x[1] - x[0]) if x.size > 1 else None}
    if res.get("warning"):
        body["warning"] = res["warning"]
    w.report("support", body, EXIT_OK)
    return EXIT_OK


_POLYS = ("1", "x", "y", "xy", "x2-y2", "3x2y-y3", "x3-3xy2")


def cmd_reflect(args, w: Writer) -> int:
    if args.functional:
        F = harmonic.transform_field(_functional(args.functional))
        label = args.functional
    elif args.polynomial:
        F = boundary.HarmonicPolynomial(args.polynomial).value
        label = args.polynomial
    else:
        raise InputError("reflect needs --functional or --polynomial")
    ts = args.tol_scale
    res = boundary.reflection_zero_test(F, tuple(args.slab), y0=args.y0, levels=args.levels,
                                        pair_tol=1e-6 * ts, res_tol=1e-4 * ts)
    w.csv("pairings.csv", ["basis_index", "pairing"], list(enumerate(res["pairings"])))
    w.report("reflect", {"field": label, **res}, EXIT_OK)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--out", default=DEFAULT_OUT, help=f"output directory (env {OUT_ENV} overrides)")
    p.add_argument("--pmax", type=int, default=weights.DEFAULT_PMAX)
    p.add_argument("--levels", type=int, default=6)
    p.add_argument("--y0", type=float, default=0.1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--tol-scale", type=float, default=1.0)
    return p


def _seq_args(p):
    p.add_argument("--family", choices=["gevrey", "weight_function"], default="gevrey")
    p.add_argument("--s", type=float, default=2.0, help="Gevrey exponent")
    p.add_argument("--omega", default="log_squared", help="weight function name")
    p.add_argument("--q", type=float, default=2.0, help="log_power exponent")
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--config", help="sequence JSON config")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="harmbv", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    wp = sub.add_parser("weights", help="weight sequence and weight function checks")
    wsub = wp.add_subparsers(dest="action", required=True)
    p = wsub.add_parser("check", parents=[common])
    _seq_args(p)
    p.add_argument("--require", action="append",
                   choices=["M1", "M1_star", "M1_star_w", "M2_prime", "quasianalytic", "NA"])
    p.set_defaults(func=cmd_weights_check)
    p = wsub.add_parser("assoc", parents=[common])
    _seq_args(p)
    p.add_argument("--t", type=float, nargs="+", default=[1.0, math.e, 10.0, 100.0])
    p.set_defaults(func=cmd_weights_assoc)
    p = wsub.add_parser("conjugate", parents=[common])
    _seq_args(p)
    p.add_argument("--s-values", type=float, nargs="+", default=[0.5, 1.0, 2.0, 3.0])
    p.set_defaults(func=cmd_weights_conjugate)
    p = wsub.add_parser("sandwich", parents=[common])
    _seq_args(p)
    p.add_argument("--s-min", type=float, default=0.01)
    p.add_argument("--s-max", type=float, default=100.0)
    p.add_argument("--n", type=int, default=21)
    p.set_defaults(func=cmd_weights_sandwich)
    p = wsub.add_parser("reduction", parents=[common])
    _seq_args(p)
    p.add_argument("--k", type=float, default=1.0)
    p.set_defaults(func=cmd_weights_reduction)

    p = sub.add_parser("extend", parents=[common])
    p.add_argument("--phi0", required=True)
    p.add_argument("--phi1", required=True)
    p.add_argument("--params", required=True)
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("poisson", parents=[common])
    p.add_argument("--functional", required=True)
    p.add_argument("--x", type=float, nargs=3, default=[-1.5, 1.5, 0.1], metavar=("LO", "HI", "STEP"))
    p.add_argument("--y", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.4])
    p.add_argument("--stencil", type=float, default=1e-3)
    p.add_argument("--decay-s", type=float, default=2.0, help="Gevrey exponent of the decay weight")
    p.set_defaults(func=cmd_poisson)

    for name, fn in (("bv", cmd_bv), ("roundtrip", cmd_roundtrip)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--functional", required=True)
        p.add_argument("--basis", default="default", help="'default' or a JSON list of test functions")
        p.add_argument("--box", type=float, nargs=2, metavar=("LO", "HI"))
        p.set_defaults(func=fn)

    p = sub.add_parser("support", parents=[common])
    p.add_argument("--functional", required=True)
    p.add_argument("--x", type=float, nargs=3, default=[-1.5, 1.5, 0.02], metavar=("LO", "HI", "STEP"))
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_support)

    p = sub.add_parser("reflect", parents=[common])
    p.add_argument("--functional")
    p.add_argument("--polynomial", choices=_POLYS)
    p.add_argument("--slab", type=float, nargs=2, default=[-1.0, 1.0], metavar=("LO", "HI"))
    p.set_defaults(func=cmd_reflect)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        writer = Writer(_out_dir(args))
        return args.func(args, writer)
    except (InputError, OSError) as exc:
        print(f"harmbv: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, PreconditionError, TruncationError, ValueError) as exc:
        print(f"harmbv: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
