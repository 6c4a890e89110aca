"""Command-line front end.

Exit codes: 0 ok, 2 input error, 3 validation failure, 4 numerical failure.
Tables go to standard output as CSV; structured results are JSON files.
"""
from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import formats
from .accelerant import A3_MARGIN, accelerant_from_data, check_a3
from .core import Potential, symmetric_grid, unit_grid
from .direct import CharacteristicEvaluator, spectral_data
from .errors import DiracInvError, StageError
from .pipeline import ReconstructionConfig, convergence_study, reconstruct, roundtrip, rel_l2_error
from .spectra import A1Bounds, check_a1, check_a2, window_stats

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

ROUNDTRIP_THRESHOLD = 0.05


def _writer(stream=None):
    return csv.writer(stream or sys.stdout, lineterminator="\n")


def _r(x):
    """Shortest round-trip decimal form; empty for missing values."""
    return "" if x is None else repr(float(x))


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _bounds(text):
    try:
        return A1Bounds.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _config(args, **over):
    grid = args.grid
    accel = args.accel_grid if args.accel_grid is not None else 2 * grid
    kw = dict(
        n_max=args.n_max,
        accel_grid=accel,
        solve_grid=grid,
        solver=args.solver,
        a1_bounds=args.a1_bounds,
        a3_margin=args.a3_margin,
        ode_steps=args.ode_steps,
    )
    kw.update(over)
    try:
        return ReconstructionConfig(**kw)
    except ValueError as exc:
        raise formats.FormatError("flags", str(exc)) from exc


def _strip_timings(report):
    if isinstance(report, dict):
        return {k: _strip_timings(v) for k, v in report.items()
                if k not in ("timings", "potential") and not k.endswith("_seconds")}
    return report


def _potential_csv(q, out=None):
    w = _writer(out)
    r = q.r
    head = ["x"]
    for a in range(r):
        for b in range(r):
            head += [f"q{a}{b}_re", f"q{a}{b}_im"]
    w.writerow(head)
    for x, m in zip(q.grid.nodes, q.samples):
        row = [_r(x)]
        for z in m.ravel():
            row += [_r(z.real), _r(z.imag)]
        w.writerow(row)


def cmd_direct(args):
    q = formats.read_potential(args.potential)
    data = spectral_data(CharacteristicEvaluator(q, args.ode_steps), args.n_max)
    if args.out:
        formats.write_json(args.out, formats.spectral_data_to_json(data))
    w = _writer()
    w.writerow(["j", "window", "lambda", "multiplicity", "alpha_trace", "residual"])
    for j, rec in zip(data.labels(), data.records):
        w.writerow([int(j), rec.window, _r(rec.lam), rec.multiplicity, _r(np.trace(rec.alpha).real), _r(rec.residual)])
    sys.stdout.write("\n")
    w.writerow(["window", "count", "beta_norm2", "dev2"])
    for s in window_stats(data):
        w.writerow([s.n, s.count, _r(np.linalg.norm(s.beta) ** 2), _r(s.dev2)])
    return EXIT_OK


def _sidecar(path):
    return path + ".report.json"


def cmd_reconstruct(args):
    data = formats.read_spectral_data(args.data)
    cfg = _config(args, n_max=min(args.n_max, data.n_max), factorization=args.factorization)
    try:
        q, rep = reconstruct(data, cfg)
    except StageError as exc:
        if args.out and exc.report is not None:
            formats.write_json(_sidecar(args.out), _strip_timings(exc.report.to_dict()))
        raise
    report = _strip_timings(rep.to_dict())
    if args.reference:
        ref = formats.read_potential(args.reference)
        err = rel_l2_error(ref, q)
        report["reference"] = {"rel_l2_error": err, "threshold": args.threshold, "below_threshold": err <= args.threshold}
        print(f"rel_l2_error,{_r(err)}", file=sys.stderr)
        print(f"below_threshold,{err <= args.threshold}", file=sys.stderr)
    if args.out:
        formats.write_json(args.out, formats.potential_to_json(q))
        formats.write_json(_sidecar(args.out), report)
    _potential_csv(q)
    return EXIT_OK


def cmd_roundtrip(args):
    q = formats.read_potential(args.potential)
    cfg = _config(args, factorization=args.factorization)
    out = roundtrip(q, cfg, compare_spectra=not args.no_spectra)
    rep = _strip_timings(out)
    if args.out:
        formats.write_json(args.out, rep)
    w = _writer()
    w.writerow(["quantity", "value"])
    w.writerow(["rel_l2_error", _r(out["rel_l2_error"])])
    w.writerow(["abs_l2_error", _r(out["abs_l2_error"])])
    w.writerow(["below_threshold", out["rel_l2_error"] <= args.threshold])
    if "spectra" in out:
        sp = out["spectra"]
        w.writerow(["max_eigenvalue_deviation", _r(sp["max_eigenvalue_deviation"])])
        w.writerow(["max_norming_deviation", _r(sp["max_norming_deviation"])])
    fact = out["reconstruction"]["stages"].get("factorization")
    if fact:
        w.writerow(["factorization_residual", _r(fact["residual"])])
    return EXIT_OK


def cmd_validate(args):
    data = formats.read_spectral_data(args.data)
    a1 = check_a1(data, args.a1_bounds)
    a2 = check_a2(data)
    rows = [
        ["A1", a1.passed, f"sup_count={a1.sup_count};sum_dev2={_r(a1.sum_dev2)};sum_beta2={_r(a1.sum_beta2)}"],
        ["A2", a2.passed, f"N0={a2.n0};count={a2.per_n_counts[-1] if a2.per_n_counts else 0}"],
    ]
    passed = a1.passed and a2.passed
    if not args.skip_a3:
        acc = accelerant_from_data(data, symmetric_grid(args.accel_grid or 2 * args.grid))
        a3 = check_a3(acc, unit_grid(args.grid), args.a3_margin)
        rows.append(["A3", a3.passed, f"min_eigenvalue={_r(a3.min_eigenvalue)};margin={_r(a3.margin)}"])
        passed = passed and a3.passed
    w = _writer()
    w.writerow(["check", "pass", "detail"])
    for row in rows:
        w.writerow(row)
    return EXIT_OK if passed else EXIT_VALIDATION


def synthesize(kind, r=1, n=512, value=0.7, amplitude=0.5, seed=0, modes=4):
    """Test potentials: zero, constant, sine (amplitude sin(pi x) I) or random-smooth."""
    if kind == "zero":
        return Potential.zero(r, n)
    if kind == "constant":
        return Potential.from_function(lambda x: value * np.eye(r), r, n)
    if kind == "sine":
        return Potential.from_function(lambda x: amplitude * np.sin(np.pi * x) * np.eye(r), r, n)
    if kind == "random":
        rng = np.random.default_rng(seed)
        shape = (modes + 1, r, r)
        ca = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        cb = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        decay = 1.0 / (1.0 + np.arange(modes + 1)) ** 2
        x = unit_grid(n).nodes
        k = np.arange(modes + 1)
        cos = np.cos(np.pi * np.outer(x, k)) * decay
        sin = np.sin(np.pi * np.outer(x, k)) * decay
        vals = np.einsum("xk,kab->xab", cos, ca) + np.einsum("xk,kab->xab", sin, cb)
        vals *= amplitude / max(np.abs(vals).max(), 1e-300)
        return Potential(r, unit_grid(n), vals)
    raise ValueError(f"unknown potential kind {kind!r}")


def cmd_synthesize(args):
    q = synthesize(args.kind, args.r, args.grid, args.value, args.amplitude, args.seed)
    if args.out:
        formats.write_json(args.out, formats.potential_to_json(q))
    else:
        sys.stdout.write(formats.dumps(formats.potential_to_json(q)))
    return EXIT_OK


def cmd_convergence(args):
    q = formats.read_potential(args.potential)
    cfg = _config(args)
    tab = convergence_study(q, args.n_max_list, args.grid_list, cfg)
    w = _writer()
    w.writerow(["n_max", "grid", "rel_l2_error", "self_error", "abs_l2_error"])
    for nm, g, e, s, a in tab.rows():
        w.writerow([nm, g, _r(e), _r(s), _r(a)])
    trend = tab.trend()
    if args.out:
        formats.write_json(args.out, {
            "n_max_list": tab.n_max_list, "grid_list": tab.grid_list,
            "errors": tab.errors.tolist(), "self_errors": tab.self_errors.tolist(),
            "abs_errors": tab.abs_errors.tolist(), "trend": trend})
    sys.stdout.write("\n")
    w.writerow(["statistic", "value"])
    for k, v in trend.items():
        w.writerow([k, v if isinstance(v, bool) else _r(v)])
    return EXIT_OK


def _common(p, n_max=60, grid=512):
    p.add_argument("--n-max", type=int, default=n_max, help="largest window index |n| retained")
    p.add_argument("--grid", type=int, default=grid, help="intervals of the [0, 1] solve grid")
    p.add_argument("--accel-grid", type=int, default=None, help="intervals of the [-1, 1] accelerant grid (default 2*grid)")
    p.add_argument("--solver", choices=("dense", "fast"), default="fast")
    p.add_argument("--a1-bounds", type=_bounds, default=A1Bounds(),
                   help="sup_count,sum_dev2,sum_beta2 ('auto' keeps a default)")
    p.add_argument("--a3-margin", type=float, default=A3_MARGIN)
    p.add_argument("--ode-steps", type=int, default=2048)
    p.add_argument("--out", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="diracinv", description="Direct and inverse spectral problems for Dirac operators.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("direct", help="spectral data of a potential")
    p.add_argument("potential")
    _common(p)
    p.set_defaults(func=cmd_direct)

    p = sub.add_parser("reconstruct", help="potential from spectral data")
    p.add_argument("data")
    _common(p)
    p.add_argument("--reference", default=None, help="potential file to measure the reconstruction against")
    p.add_argument("--threshold", type=float, default=ROUNDTRIP_THRESHOLD)
    p.add_argument("--factorization", action="store_true", help="also report the factorization residual")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("roundtrip", help="potential -> spectral data -> potential")
    p.add_argument("potential")
    _common(p)
    p.add_argument("--threshold", type=float, default=ROUNDTRIP_THRESHOLD)
    p.add_argument("--no-spectra", action="store_true", help="skip the spectral re-comparison")
    p.add_argument("--factorization", action="store_true")
    p.set_defaults(func=cmd_roundtrip)

    p = sub.add_parser("validate", help="check (A1), (A2) and (A3) on spectral data")
    p.add_argument("data")
    _common(p, grid=256)
    p.add_argument("--skip-a3", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synthesize", help="write a test potential")
    p.add_argument("kind", choices=("zero", "constant", "sine", "random"))
    _common(p)
    p.add_argument("--r", type=int, default=1)
    p.add_argument("--value", type=complex, default=0.7, help="constant value (python complex syntax)")
    p.add_argument("--amplitude", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("convergence", help="round-trip error table over n_max and grid")
    p.add_argument("potential")
    _common(p)
    p.add_argument("--n-max-list", type=_int_list, default=[10, 20, 40])
    p.add_argument("--grid-list", type=_int_list, default=[64, 128, 256])
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except formats.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION if exc.kind == "validation" else EXIT_NUMERICAL
    except DiracInvError as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
