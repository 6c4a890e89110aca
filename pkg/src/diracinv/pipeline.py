"""End-to-end reconstruction: spectral data -> accelerant -> Krein kernel -> potential,
plus round-trip and convergence experiments built on the direct solver.
"""
from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import krein
from .accelerant import (
    A3_MARGIN,
    INV_TOL,
    accelerant_from_data,
    accelerant_test,
    assemble_f,
    check_a3,
)
from .core import symmetric_grid, unit_grid
from .direct import CharacteristicEvaluator, spectral_data
from .errors import DiracInvError, FallbackToDense, StageError
from .spectra import A1Bounds, check_a1, check_a2, measure_nodes

REL_EPS = 1e-12
ACCEL_TEST_POINTS = (0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class ReconstructionConfig:
    """Knobs of the reconstruction.

    ``a1_mode`` / ``a2_mode`` are "abort" or "warn". ``factorization`` also
    assembles L from Krein solutions and reports the factorization residual
    on a grid of ``solve_grid // 2`` intervals (costly; off by default).
    """

    n_max: int = 60
    accel_grid: int = 1024
    solve_grid: int = 512
    solver: str = "fast"
    a1_bounds: A1Bounds = field(default_factory=A1Bounds)
    a1_mode: str = "abort"
    a2_mode: str = "abort"
    a3_margin: float = A3_MARGIN
    a3_grid: int | None = None
    inv_tol: float = INV_TOL
    solve_tol: float = krein.SOLVE_TOL
    ode_steps: int = 2048
    factorization: bool = False

    def __post_init__(self):
        if self.solver not in ("fast", "dense"):
            raise ValueError(f"solver must be 'fast' or 'dense', got {self.solver!r}")
        for name in ("a1_mode", "a2_mode"):
            if getattr(self, name) not in ("abort", "warn"):
                raise ValueError(f"{name} must be 'abort' or 'warn'")
        if self.accel_grid % 2 or self.accel_grid < 2 * self.solve_grid:
            raise ValueError("accel_grid must be even and at least twice solve_grid")

    def to_dict(self):
        return {
            "n_max": self.n_max,
            "accel_grid": self.accel_grid,
            "solve_grid": self.solve_grid,
            "solver": self.solver,
            "a1_bounds": [self.a1_bounds.sup_count, self.a1_bounds.sum_dev2, self.a1_bounds.sum_beta2],
            "a1_mode": self.a1_mode,
            "a2_mode": self.a2_mode,
            "a3_margin": self.a3_margin,
            "a3_grid": self.a3_grid,
            "inv_tol": self.inv_tol,
            "solve_tol": self.solve_tol,
            "ode_steps": self.ode_steps,
            "factorization": self.factorization,
        }


@dataclass
class ReconstructionReport:
    """Diagnostics gathered stage by stage; filled in even when a stage fails."""

    config: dict
    input: dict | None = None
    stages: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    failed_stage: str | None = None
    error: str | None = None
    timings: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.failed_stage is None

    def to_dict(self):
        return {
            "status": "ok" if self.ok else "failed",
            "failed_stage": self.failed_stage,
            "error": self.error,
            "config": self.config,
            "input": self.input,
            "stages": self.stages,
            "warnings": list(self.warnings),
            "timings": self.timings,
        }


class _Stage:
    """Context manager timing a stage and tagging any library error with its name."""

    def __init__(self, report, name, kind="numerical"):
        self.report = report
        self.name = name
        self.kind = kind

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.report.timings[self.name] = time.perf_counter() - self.t0
        if exc is None:
            return False
        if isinstance(exc, StageError):
            err = exc
        elif isinstance(exc, DiracInvError):
            err = StageError(self.name, str(exc), self.report, self.kind)
        else:
            return False
        self.report.failed_stage = err.stage
        self.report.error = str(err)
        err.report = self.report
        if err is exc:
            return False
        raise err from exc


def _fail(report, stage, message, kind):
    raise StageError(stage, message, report, kind)


def _validate(data, cfg, report):
    """Run (A1) and (A2) together so the report carries both.

    A counting failure makes the per-window (A1) statistics meaningless, so
    when both abort the stage is tagged with (A2).
    """
    a1 = check_a1(data, cfg.a1_bounds)
    a2 = check_a2(data)
    report.stages["check_a1"] = a1.to_dict()
    report.stages["check_a2"] = a2.to_dict()
    failures = []
    if not a2.passed:
        msg = f"(A2) counting condition fails at N = {data.n_max}: count {a2.per_n_counts[-1]}"
        failures.append(("validate/check_a2", cfg.a2_mode, msg))
    if not a1.passed:
        msg = (f"(A1) bounds exceeded: sup count {a1.sup_count}, sum dev^2 {a1.sum_dev2:.6g}, "
               f"sum |beta|^2 {a1.sum_beta2:.6g} against {list(a1.bounds)}")
        failures.append(("validate/check_a1", cfg.a1_mode, msg))
    aborting = [f for f in failures if f[1] == "abort"]
    for _, mode, msg in failures:
        if mode == "warn":
            report.warnings.append(msg)
    if aborting:
        _fail(report, aborting[0][0], "; ".join(f[2] for f in aborting), "validation")


def reconstruct(data, cfg=None):
    """Potential recovered from spectral data, with a stage-by-stage report.

    Raises ``StageError`` (carrying the partial report) on the first failing
    stage. Validation failures have ``kind == "validation"``.
    """
    cfg = cfg or ReconstructionConfig()
    report = ReconstructionReport(cfg.to_dict(), data.summary())
    if data.n_max > cfg.n_max:
        data = data.truncated(cfg.n_max)
    with _Stage(report, "validate", "validation"):
        _validate(data, cfg, report)

    with _Stage(report, "measure_nodes"):
        nodes = measure_nodes(data)
        report.stages["measure_nodes"] = {"atoms": len(nodes)}

    with _Stage(report, "accelerant/build"):
        acc = accelerant_from_data(data, symmetric_grid(cfg.accel_grid))
        lam_max = float(np.max(np.abs(data.lambdas)))
        # samples per period of exp(2 i lam_max x) on the accelerant grid
        per_osc = None if lam_max == 0 else math.pi / (lam_max * acc.grid.h)
        sym = acc.symmetry_residual()
        report.stages["accelerant"] = {
            "tail": acc.tail,
            "symmetry_residual": sym,
            "samples_per_oscillation": per_osc,
        }
        if per_osc is not None and per_osc < 8:
            report.warnings.append(f"accelerant grid has {per_osc:.3g} samples per oscillation (< 8)")
        if sym > 1e-8 + acc.tail:
            _fail(report, "accelerant/build", f"symmetry residual {sym:.3e} exceeds tolerance", "numerical")

    solve = unit_grid(cfg.solve_grid)
    with _Stage(report, "accelerant/check_a3", "validation"):
        a3 = check_a3(acc, unit_grid(cfg.a3_grid or cfg.solve_grid), cfg.a3_margin)
        report.stages["check_a3"] = a3.to_dict()
        if not a3.passed:
            _fail(report, "accelerant/check_a3",
                  f"(A3) smallest eigenvalue {a3.min_eigenvalue:.6g} below margin {a3.margin:.3g}", "validation")

    with _Stage(report, "accelerant/accelerant_test", "validation"):
        at = accelerant_test(acc, ACCEL_TEST_POINTS, cfg.inv_tol)
        report.stages["accelerant_test"] = at.to_dict()
        if not at.passed:
            _fail(report, "accelerant/accelerant_test",
                  f"I + H nearly singular on some [0, a] (min singular value {min(at.min_singular_values):.3e})",
                  "validation")

    with _Stage(report, "krein/solve"):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", FallbackToDense)
            sol = krein.krein_solve(acc, solve, cfg.solver)
        for w in caught:
            report.warnings.append(str(w.message))
        res = sol.max_residual
        report.stages["krein"] = {"method": sol.method, "fell_back": sol.fell_back, "max_residual": res}
        if not res <= cfg.solve_tol:
            _fail(report, "krein/solve", f"row residual {res:.3e} above solve tolerance {cfg.solve_tol:.1e}",
                  "numerical")

    with _Stage(report, "theta"):
        q = krein.theta(sol)
        report.stages["theta"] = {"grid": [q.grid.a, q.grid.b, q.grid.n], "l2_norm": q.l2_norm()}

    if cfg.factorization:
        with _Stage(report, "factorization"):
            fact = factorization_residual(acc, sol, cfg.solver)
            report.stages["factorization"] = fact.to_dict()
    return q, report


def factorization_residual(acc, sol=None, solver="fast"):
    """Factorization residual with L assembled from Krein solutions.

    ``sol`` (R_H on an even grid) is reused when given; R_{H#} is solved on
    the same grid, and F is sampled on the grid of half as many intervals.
    """
    from .accelerant import sharp

    if sol is None:
        sol = krein.krein_solve(acc, unit_grid(acc.grid.n // 2), solver)
    sol_sharp = krein.krein_solve(sharp(acc), sol.grid, solver)
    lsol = krein.l_from_krein(sol, sol_sharp)
    f = assemble_f(acc, lsol.grid)
    return krein.factorization_check(lsol, f)


def _l2_pair(q, q_hat):
    grid = q_hat.grid
    w = grid.trapezoid_weights()
    ref = q.at(grid.nodes)
    num = math.sqrt(float(np.sum(w * np.sum(np.abs(ref - q_hat.samples) ** 2, axis=(1, 2)))))
    den = math.sqrt(float(np.sum(w * np.sum(np.abs(ref) ** 2, axis=(1, 2)))))
    return num, den


def abs_l2_error(q, q_hat):
    """||q - q_hat|| in L2(0, 1), on q_hat's grid."""
    return _l2_pair(q, q_hat)[0]


def rel_l2_error(q, q_hat):
    """||q - q_hat|| / max(||q||, eps) in L2(0, 1), on q_hat's grid."""
    num, den = _l2_pair(q, q_hat)
    return num / max(den, REL_EPS)


def _spectral_deviation(a, b):
    if len(a) != len(b):
        return {"matched": False, "count_in": len(a), "count_out": len(b),
                "max_eigenvalue_deviation": None, "max_norming_deviation": None}
    return {
        "matched": True,
        "count_in": len(a),
        "count_out": len(b),
        "max_eigenvalue_deviation": float(np.max(np.abs(a.lambdas - b.lambdas))),
        "max_norming_deviation": float(np.max(np.linalg.norm(a.alphas - b.alphas, axis=(1, 2)))),
    }


def roundtrip(q, cfg=None, compare_spectra=True, data=None):
    """q -> spectral data -> q_hat, the relative L2 error and spectral re-comparison.

    ``data`` may be passed to skip the forward solve. Returns a dict report.
    """
    cfg = cfg or ReconstructionConfig()
    out = {"config": cfg.to_dict()}
    t0 = time.perf_counter()
    if data is None:
        try:
            data = spectral_data(CharacteristicEvaluator(q, cfg.ode_steps), cfg.n_max)
        except DiracInvError as exc:
            raise StageError("direct/spectral_data", str(exc), out) from exc
    out["direct_seconds"] = time.perf_counter() - t0
    try:
        q_hat, rep = reconstruct(data, cfg)
    except StageError as exc:
        out["reconstruction"] = exc.report.to_dict() if exc.report is not None else None
        exc.report = out
        raise
    out["reconstruction"] = rep.to_dict()
    out["rel_l2_error"] = rel_l2_error(q, q_hat)
    out["abs_l2_error"] = abs_l2_error(q, q_hat)
    if compare_spectra:
        t1 = time.perf_counter()
        try:
            data_hat = spectral_data(CharacteristicEvaluator(q_hat, cfg.ode_steps), cfg.n_max)
        except DiracInvError as exc:
            raise StageError("roundtrip/respectrum", str(exc), out) from exc
        out["spectra"] = _spectral_deviation(data.truncated(min(data.n_max, cfg.n_max)), data_hat)
        out["respectrum_seconds"] = time.perf_counter() - t1
    out["potential"] = q_hat
    return out


def _slope(xs, ys):
    """Least-squares slope of log y against log x (ignoring non-positive y)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    ok = ys > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(xs[ok]), np.log(ys[ok]), 1)[0])


@dataclass
class ConvergenceTable:
    n_max_list: list
    grid_list: list
    errors: np.ndarray
    self_errors: np.ndarray
    abs_errors: np.ndarray

    def trend(self):
        """Monotonicity in n_max at the finest grid and log-log rates in the grid.

        ``grid_rate`` is minus the slope of the round-trip error against grid
        size at the largest n_max; ``self_grid_rate`` uses the distance to the
        finest-grid reconstruction instead, which isolates the discretisation
        error from the truncation error.
        """
        col = self.errors[:, -1]
        row = self.errors[-1, :]
        srow = self.self_errors[-1, :-1]
        return {
            "monotone_in_n_max": bool(np.all(np.diff(col) <= 0)),
            "monotone_in_grid": bool(np.all(np.diff(row) <= 0)),
            "grid_rate": -_slope(self.grid_list, row),
            "self_grid_rate": -_slope(self.grid_list[:-1], srow) if len(self.grid_list) > 2 else math.nan,
        }

    def rows(self):
        for i, nm in enumerate(self.n_max_list):
            for j, g in enumerate(self.grid_list):
                yield nm, g, float(self.errors[i, j]), float(self.self_errors[i, j]), float(self.abs_errors[i, j])


def convergence_study(q, n_max_list, grid_list, cfg=None, data=None):
    """Round-trip error for every (n_max, grid) pair.

    The forward problem is solved once at the largest n_max and truncated.
    The accelerant grid is twice the solve grid. ``self_errors`` holds the
    relative distance to the reconstruction on the finest grid at the same
    n_max.
    """
    n_max_list = list(n_max_list)
    grid_list = list(grid_list)
    if not n_max_list or not grid_list:
        raise ValueError("n_max_list and grid_list must be nonempty")
    if any(b <= a for a, b in zip(n_max_list, n_max_list[1:])) or any(
            b <= a for a, b in zip(grid_list, grid_list[1:])):
        raise ValueError("n_max_list and grid_list must be increasing")
    cfg = cfg or ReconstructionConfig()
    if data is None:
        data = spectral_data(CharacteristicEvaluator(q, cfg.ode_steps), n_max_list[-1])
    errors = np.empty((len(n_max_list), len(grid_list)))
    self_errors = np.empty_like(errors)
    abs_errors = np.empty_like(errors)
    for i, nm in enumerate(n_max_list):
        sub = data.truncated(nm)
        recs = []
        for j, g in enumerate(grid_list):
            c = ReconstructionConfig(n_max=nm, accel_grid=2 * g, solve_grid=g, solver=cfg.solver,
                                     a1_bounds=cfg.a1_bounds, a1_mode="warn", a2_mode="warn",
                                     a3_margin=cfg.a3_margin, a3_grid=min(g, 128), inv_tol=cfg.inv_tol,
                                     solve_tol=cfg.solve_tol, ode_steps=cfg.ode_steps)
            q_hat, _ = reconstruct(sub, c)
            recs.append(q_hat)
            errors[i, j] = rel_l2_error(q, q_hat)
            abs_errors[i, j] = abs_l2_error(q, q_hat)
        finest = recs[-1]
        for j, q_hat in enumerate(recs):
            self_errors[i, j] = rel_l2_error(finest, q_hat)
    return ConvergenceTable(n_max_list, grid_list, errors, self_errors, abs_errors)
