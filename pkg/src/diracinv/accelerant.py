"""Krein accelerant built from spectral data, the block kernel F_H and the
positivity tests standing in for (A3) and the accelerant definition.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import UniformGrid, interpolate_samples, symmetric_grid
from .errors import EmptyData, GridMismatch
from .spectra import window_index

A3_MARGIN = 1e-3
INV_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Accelerant:
    """Matrix function on [-1, 1] sampled on a symmetric grid.

    ``tail`` is the truncation diagnostic of the series it came from (0 for
    accelerants given in closed form).
    """

    r: int
    grid: UniformGrid
    samples: np.ndarray
    n_max: int | None = None
    tail: float = 0.0

    def __post_init__(self):
        if not self.grid.is_symmetric():
            raise GridMismatch(f"accelerant grid must be symmetric about 0, got [{self.grid.a}, {self.grid.b}]")
        s = np.array(self.samples, dtype=complex)
        if s.shape != (self.grid.n + 1, self.r, self.r):
            raise ValueError(f"accelerant samples must have shape {(self.grid.n + 1, self.r, self.r)}, got {s.shape}")
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, func, r, n):
        grid = symmetric_grid(n)
        vals = np.array([np.broadcast_to(np.asarray(func(x), dtype=complex), (r, r)) for x in grid.nodes])
        return cls(r, grid, vals)

    def at(self, x):
        return interpolate_samples(self.grid, self.samples, x)

    def lags(self, h, count):
        """H(d h) for d = -count..count, stacked along the first axis."""
        return self.at(h * np.arange(-count, count + 1))

    def symmetry_residual(self):
        """max_k ||H(x_k)* - H(-x_k)||_F over paired nodes."""
        flipped = np.conj(np.swapaxes(self.samples, -1, -2))[::-1]
        return float(np.max(np.linalg.norm(self.samples - flipped, axis=(1, 2))))


def _series_terms(data, x, windows):
    """Sum over the given windows of the per-window series term at nodes x."""
    r = data.r
    lams = data.lambdas
    alphas = data.alphas
    win = np.array([window_index(l) for l in lams], dtype=int)
    sel = np.isin(win, windows)
    out = np.einsum("xj,jab->xab", np.exp(2j * np.outer(x, lams[sel])), alphas[sel])
    free = np.exp(2j * np.pi * np.outer(x, np.asarray(windows, dtype=float))).sum(axis=1)
    return out - free[:, None, None] * np.eye(r)


def accelerant_from_data(data, grid=None):
    """H(x) = sum_{|n| <= n_max} [sum_{lam_j in Delta_n} e^{2i lam_j x} alpha_j - e^{2 i pi n x} I].

    Records outside the covered windows are ignored. The tail diagnostic is
    the largest node norm of the partial sum over n_max/2 < |n| <= n_max.
    """
    if len(data) == 0:
        raise EmptyData("spectral data is empty")
    grid = grid or symmetric_grid(1024)
    x = grid.nodes
    n_max = data.n_max
    windows = np.arange(-n_max, n_max + 1)
    h = _series_terms(data, x, windows)
    half = n_max // 2
    tail_windows = windows[np.abs(windows) > half]
    tail = 0.0
    if tail_windows.size:
        tail = float(np.max(np.linalg.norm(_series_terms(data, x, tail_windows), axis=(1, 2))))
    return Accelerant(data.r, grid, h, n_max, tail)


def flip_adjoint(acc):
    """Samples H(-x)* (equal to H for a symmetric accelerant)."""
    flipped = np.conj(np.swapaxes(acc.samples, -1, -2))[::-1]
    return Accelerant(acc.r, acc.grid, flipped, acc.n_max, acc.tail)


def sharp(acc):
    """H#(x) = H(-x)."""
    return Accelerant(acc.r, acc.grid, acc.samples[::-1], acc.n_max, acc.tail)


@dataclass(frozen=True, eq=False)
class BlockKernelF:
    """2r x 2r kernel F_H(x_i, t_k) on the full square grid01 x grid01."""

    grid: UniformGrid
    samples: np.ndarray

    @property
    def block(self):
        return self.samples.shape[2]

    def weighted_matrix(self):
        """Nystrom matrix (full trapezoid weights) of the integral operator on [0, 1]."""
        n1, m = self.grid.n + 1, self.block
        w = self.grid.trapezoid_weights()
        k = self.samples * w[None, :, None, None]
        return k.transpose(0, 2, 1, 3).reshape(n1 * m, n1 * m)


def assemble_f(acc, grid01=None):
    """F_H(x,t) = 1/2 [[H((x-t)/2), H((x+t)/2)], [H#((x+t)/2), H#((x-t)/2)]]."""
    grid01 = grid01 or UniformGrid(0.0, 1.0, acc.grid.n // 2)
    n = grid01.n
    r = acc.r
    g = acc.at(0.5 * grid01.h * np.arange(-2 * n, 2 * n + 1))  # H at half lags
    i = np.arange(n + 1)[:, None]
    k = np.arange(n + 1)[None, :]
    dif, sm = i - k, i + k
    f = np.empty((n + 1, n + 1, 2 * r, 2 * r), dtype=complex)
    f[:, :, :r, :r] = g[2 * n + dif]
    f[:, :, :r, r:] = g[2 * n + sm]
    f[:, :, r:, :r] = g[2 * n - sm]
    f[:, :, r:, r:] = g[2 * n - dif]
    return BlockKernelF(grid01, 0.5 * f)


def _sym_nystrom(kernel_blocks, weights):
    """I + W^{1/2} K W^{1/2} from node blocks (n1, n1, m, m)."""
    n1, _, m, _ = kernel_blocks.shape
    sw = np.sqrt(weights)
    k = kernel_blocks * sw[:, None, None, None] * sw[None, :, None, None]
    mat = k.transpose(0, 2, 1, 3).reshape(n1 * m, n1 * m)
    return np.eye(n1 * m) + mat


@dataclass(frozen=True)
class A3Report:
    passed: bool
    min_eigenvalue: float
    margin: float

    def to_dict(self):
        return {"pass": self.passed, "min_eigenvalue": self.min_eigenvalue, "margin": self.margin}


def check_a3(acc, grid01=None, margin=A3_MARGIN):
    """Smallest eigenvalue of the discretised I + F_H; passes iff >= margin."""
    f = assemble_f(acc, grid01)
    mat = _sym_nystrom(f.samples, f.grid.trapezoid_weights())
    lam_min = float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])
    return A3Report(bool(lam_min >= margin), lam_min, margin)


def convolution_min_eigenvalue(acc, grid01=None):
    """Smallest eigenvalue of the discretised I + H on [0, 1], (Hf)(x) = int_0^1 H(x-t) f(t) dt."""
    grid01 = grid01 or UniformGrid(0.0, 1.0, acc.grid.n // 2)
    n = grid01.n
    lag = acc.lags(grid01.h, n)
    i = np.arange(n + 1)
    blocks = lag[n + i[:, None] - i[None, :]]
    mat = _sym_nystrom(blocks, grid01.trapezoid_weights())
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.conj().T))[0])


@dataclass(frozen=True)
class AccelerantTestReport:
    passed: bool
    a_values: tuple
    min_singular_values: tuple
    tol: float

    def to_dict(self):
        return {"pass": self.passed, "a": list(self.a_values),
                "min_singular_value": list(self.min_singular_values), "tol": self.tol}


def accelerant_test(acc, a_samples, inv_tol=INV_TOL):
    """Smallest singular value of f -> f + int_0^a H(x-t) f(t) dt for each a.

    The interval [0, a] is discretised on the accelerant step, so a is
    rounded to the nearest multiple of it.
    """
    h = acc.grid.h
    svals = []
    used = []
    for a in a_samples:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"a must lie in [0, 1], got {a}")
        m = int(round(a / h))
        used.append(m * h)
        if m == 0:
            svals.append(1.0)
            continue
        lag = acc.lags(h, m)
        i = np.arange(m + 1)
        w = np.full(m + 1, h)
        w[0] = w[-1] = 0.5 * h
        mat = _sym_nystrom(lag[m + i[:, None] - i[None, :]], w)
        svals.append(float(np.linalg.svd(mat, compute_uv=False)[-1]))
    return AccelerantTestReport(bool(min(svals) > inv_tol), tuple(used), tuple(svals), inv_tol)
