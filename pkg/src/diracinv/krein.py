"""Krein and Gelfand-Levitan-Marchenko equations on the triangle 0 <= t <= x <= 1.

Both are solved row by row with the trapezoid Nystrom rule: for fixed x_i the
unknowns are the kernel values at t_0..t_i and the integral over [0, x_i]
uses trapezoid weights on those same nodes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .accelerant import sharp
from .core import Potential, TriangularKernel, UniformGrid, unit_grid
from .errors import FallbackToDense, GridMismatch, SingularRow

SOLVE_TOL = 1e-8
FAST_TOL = 1e-10
GROWTH_LIMIT = 1e6


def _row_weights(i, h):
    w = np.full(i + 1, h)
    w[0] = w[-1] = 0.5 * h
    if i == 0:
        w[0] = 0.0
    return w


def _blocks_to_matrix(blocks):
    """(p, q, m, m) blocks -> (p m, q m) matrix."""
    p, q, m, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(p * m, q * m)


def _row_to_blocks(row, m):
    """(m, q m) block row -> (q, m, m)."""
    return row.reshape(m, -1, m).transpose(1, 0, 2)


def _blocks_to_row(blocks):
    q, m, _ = blocks.shape
    return blocks.transpose(1, 0, 2).reshape(m, q * m)


def _solve_rows(kernel_at, n, h, m, x_nodes):
    """Dense per-row Nystrom solves of X(x,t) + F(x,t) + int_0^x X(x,s) F(s,t) ds = 0.

    ``kernel_at(i)`` returns F(t_s, t_k) blocks for s, k = 0..i.
    """
    out = np.zeros((n + 1, n + 1, m, m), dtype=complex)
    eye = np.eye(m)
    for i in range(n + 1):
        f = kernel_at(i)
        w = _row_weights(i, h)
        a = _blocks_to_matrix(np.eye(i + 1)[:, :, None, None] * eye + w[:, None, None, None] * f)
        eta = _blocks_to_row(f[i])
        try:
            rho = np.linalg.solve(a.T, -eta.T).T
        except np.linalg.LinAlgError as exc:
            raise SingularRow(i, x_nodes[i]) from exc
        if not np.all(np.isfinite(rho)) or np.linalg.norm(rho) > 1e12 * max(1.0, np.linalg.norm(eta)):
            raise SingularRow(i, x_nodes[i])
        out[i, : i + 1] = _row_to_blocks(rho, m)
    return out


def _row_residuals(samples, kernel_at, n, h):
    m = samples.shape[2]
    eye = np.eye(m)
    res = np.empty(n + 1)
    for i in range(n + 1):
        f = kernel_at(i)
        w = _row_weights(i, h)
        rho = _blocks_to_row(samples[i, : i + 1])
        a = _blocks_to_matrix(np.eye(i + 1)[:, :, None, None] * eye + w[:, None, None, None] * f)
        eta = _blocks_to_row(f[i])
        res[i] = np.linalg.norm(rho @ a + eta) / max(1.0, np.linalg.norm(eta))
    return res


def _toeplitz_getter(lag, n):
    """F(t_s, t_k) = H((s - k) h) blocks for the leading (i+1) x (i+1) section."""

    def kernel_at(i):
        s = np.arange(i + 1)
        return lag[n + s[:, None] - s[None, :]]

    return kernel_at


@dataclass(frozen=True, eq=False)
class KreinSolution:
    """R_H on the triangle, with lazily computed per-row residuals."""

    R: TriangularKernel
    lag: np.ndarray = field(repr=False)
    method: str = "dense"
    fell_back: bool = False

    @property
    def grid(self):
        return self.R.grid

    @cached_property
    def residuals(self):
        n = self.grid.n
        return _row_residuals(self.R.samples, _toeplitz_getter(self.lag, n), n, self.grid.h)

    @property
    def max_residual(self):
        return float(np.max(self.residuals))


def _lags_for(acc, grid01):
    if grid01.a != 0.0 or grid01.b != 1.0:
        raise GridMismatch(f"solve grid must cover [0, 1], got [{grid01.a}, {grid01.b}]")
    return acc.lags(grid01.h, grid01.n)


def krein_solve_dense(acc, grid01=None):
    """Row-wise dense solve of R(x,t) + H(x-t) + int_0^x R(x,s) H(s-t) ds = 0."""
    grid01 = grid01 or unit_grid(acc.grid.n // 2)
    lag = _lags_for(acc, grid01)
    n = grid01.n
    samples = _solve_rows(_toeplitz_getter(lag, n), n, grid01.h, acc.r, grid01.nodes)
    return KreinSolution(TriangularKernel(grid01, samples), lag, "dense")


def krein_solve_fast(acc, grid01=None, growth_limit=GROWTH_LIMIT):
    """Same discrete system as ``krein_solve_dense``, solved by block Levinson recursion.

    O(n^2) block operations instead of O(n^4). If the recursion's growth
    monitor trips, a ``FallbackToDense`` warning is issued and the dense
    result returned.
    """
    grid01 = grid01 or unit_grid(acc.grid.n // 2)
    lag = _lags_for(acc, grid01)
    n, h = grid01.n, grid01.h
    tau = h * lag
    tau[n] += np.eye(acc.r)
    samples, ok = _kernels.levinson_krein(tau, h, growth_limit)
    if ok:
        samples[0, 0] = -lag[n]
        return KreinSolution(TriangularKernel(grid01, samples), lag, "fast")
    warnings.warn("Levinson recursion lost stability; using the dense Krein solver", FallbackToDense, stacklevel=2)
    sol = krein_solve_dense(acc, grid01)
    return KreinSolution(sol.R, lag, "dense", fell_back=True)


def krein_solve(acc, grid01=None, solver="fast"):
    if solver == "fast":
        return krein_solve_fast(acc, grid01)
    if solver == "dense":
        return krein_solve_dense(acc, grid01)
    raise ValueError(f"unknown solver {solver!r}")


def theta(sol):
    """q(x_i) = i R(x_i, 0)."""
    return Potential(sol.R.block, sol.grid, 1j * sol.R.first_column())


@dataclass(frozen=True, eq=False)
class GlmSolution:
    """L on the triangle (2r x 2r blocks) with the kernel it solves against, if known."""

    L: TriangularKernel
    residuals: np.ndarray | None = None

    @property
    def grid(self):
        return self.L.grid

    @property
    def max_residual(self):
        return None if self.residuals is None else float(np.max(self.residuals))


def _f_getter(f):
    def kernel_at(i):
        return f.samples[: i + 1, : i + 1]

    return kernel_at


def glm_solve(f, grid01=None):
    """Row-wise dense solve of L(x,t) + F(x,t) + int_0^x L(x,s) F(s,t) ds = 0."""
    if grid01 is not None and grid01 != f.grid:
        raise GridMismatch(f"F is sampled on {f.grid}, not {grid01}")
    g = f.grid
    samples = _solve_rows(_f_getter(f), g.n, g.h, f.block, g.nodes)
    res = _row_residuals(samples, _f_getter(f), g.n, g.h)
    return GlmSolution(TriangularKernel(g, samples), res)


def glm_residuals(sol, f):
    if sol.grid != f.grid:
        raise GridMismatch("L and F must share a grid")
    return _row_residuals(sol.L.samples, _f_getter(f), f.grid.n, f.grid.h)


def l_from_krein(sol, sol_sharp):
    """L_H assembled from R_H and R_{H#} solved on a grid twice as fine.

    L(x,t) = 1/2 [[R(x,(x+t)/2), R(x,(x-t)/2)], [R#(x,(x-t)/2), R#(x,(x+t)/2)]];
    with Krein step h the arguments (x +- t)/2 of the 2h-grid land on nodes.
    """
    if sol.grid != sol_sharp.grid or sol.grid.n % 2:
        raise GridMismatch("Krein solutions must share a grid with an even number of intervals")
    n = sol.grid.n // 2
    r = sol.R.block
    rr = sol.R.samples
    rs = sol_sharp.R.samples
    i = np.arange(n + 1)[:, None]
    k = np.arange(n + 1)[None, :]
    lower = k <= i
    ip = np.where(lower, i + k, 0)
    im = np.where(lower, i - k, 0)
    rows = 2 * np.broadcast_to(i, ip.shape)
    out = np.zeros((n + 1, n + 1, 2 * r, 2 * r), dtype=complex)
    out[:, :, :r, :r] = rr[rows, ip]
    out[:, :, :r, r:] = rr[rows, im]
    out[:, :, r:, :r] = rs[rows, im]
    out[:, :, r:, r:] = rs[rows, ip]
    out[~lower] = 0.0
    return GlmSolution(TriangularKernel(UniformGrid(0.0, 1.0, n), 0.5 * out))


def krein_pair(acc, grid01, solver="fast"):
    """R_H and R_{H#} on the same grid."""
    return krein_solve(acc, grid01, solver), krein_solve(sharp(acc), grid01, solver)


@dataclass(frozen=True)
class FactorizationReport:
    residual: float

    def to_dict(self):
        return {"residual": self.residual}


def factorization_check(lsol, f):
    """|| (I + L)(I + F)(I + L*) - I || in the weighted L2 operator norm.

    L acts as a Volterra operator (trapezoid weights on [0, x_i]); F with full
    trapezoid weights; L* is the adjoint for the weighted inner product.
    """
    if lsol.grid != f.grid:
        raise GridMismatch("L and F must share a grid")
    g = f.grid
    m = f.block
    w = np.repeat(g.trapezoid_weights(), m)
    sw = np.sqrt(w)
    lt = lsol.L.weighted_matrix()
    gmat = np.eye(w.size) + sw[:, None] * lt / sw[None, :]
    bmat = np.eye(w.size) + sw[:, None] * _blocks_to_matrix(f.samples) * sw[None, :]
    prod = gmat @ bmat @ gmat.conj().T
    return FactorizationReport(float(np.linalg.norm(prod - np.eye(w.size), 2)))
