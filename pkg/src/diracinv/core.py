"""Grids, matrix predicates, potentials and triangular kernels.

Matrices are plain complex ``numpy`` arrays. Matrix-valued grid functions are
stored as arrays of shape ``(n + 1, r, r)``; triangular kernels as
``(n + 1, n + 1, m, m)`` with the ``t > x`` half held at exactly zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridMismatch

# boundary-condition row a = (I, -I)/sqrt(2); kept named so that general
# separated conditions would only have to swap this out
A_SCALE = 1.0 / np.sqrt(2.0)


def bc_row(r):
    """The r x 2r boundary matrix a = (I, -I)/sqrt(2)."""
    eye = np.eye(r, dtype=complex)
    return A_SCALE * np.hstack([eye, -eye])


def theta_matrix(r):
    """The 2r x 2r symplectic-like matrix (1/i) diag(I, -I)."""
    return -1j * np.diag(np.concatenate([np.ones(r), -np.ones(r)])).astype(complex)


def _require_square(m):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def hermitian_part_check(m, tol=1e-12):
    """True iff ||m - m*||_F <= tol."""
    m = _require_square(m)
    return bool(np.linalg.norm(m - m.conj().T) <= tol)


def psd_check(m, tol=1e-12):
    """True iff m is Hermitian within ``tol`` and its smallest eigenvalue is >= -tol."""
    m = _require_square(m)
    if not hermitian_part_check(m, tol):
        return False
    w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    return bool(w[0] >= -tol)


def numerical_rank(m, rel_tol=1e-6):
    """Number of singular values above ``rel_tol * sigma_max``."""
    s = np.linalg.svd(np.asarray(m), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def psd_project(m):
    """Hermitian part of ``m`` with negative eigenvalues clipped to zero.

    Returns the projected matrix and the magnitude of the most negative
    eigenvalue that was removed.
    """
    m = _require_square(m)
    herm = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(herm)
    clipped = float(max(0.0, -w[0]))
    w = np.clip(w, 0.0, None)
    return (v * w) @ v.conj().T, clipped


@dataclass(frozen=True)
class UniformGrid:
    """Nodes a + k h, k = 0..n, with h = (b - a)/n."""

    a: float
    b: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs n >= 2 intervals, got {self.n}")
        if not self.b > self.a:
            raise ValueError(f"grid endpoints must satisfy a < b, got [{self.a}, {self.b}]")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def h(self):
        return (self.b - self.a) / self.n

    @cached_property
    def nodes(self):
        x = self.a + self.h * np.arange(self.n + 1)
        x[-1] = self.b
        if self.a == -self.b:
            # paired nodes of a symmetric grid must be exact negatives
            x = 0.5 * (x - x[::-1])
        return x

    def trapezoid_weights(self):
        w = np.full(self.n + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def is_symmetric(self):
        return self.a == -self.b

    def locate(self, x):
        """Fractional node positions of ``x``; integers (within 1e-9) are snapped."""
        pos = (np.asarray(x, dtype=float) - self.a) / self.h
        near = np.rint(pos)
        return np.where(np.abs(pos - near) < 1e-9, near, pos)


def unit_grid(n):
    return UniformGrid(0.0, 1.0, n)


def symmetric_grid(n):
    return UniformGrid(-1.0, 1.0, n)


def interpolate_samples(grid, samples, x):
    """Piecewise-linear interpolation of node samples (leading axis) at ``x``.

    Points outside the grid are clamped to the end values.
    """
    x = np.asarray(x, dtype=float)
    pos = np.clip(grid.locate(x), 0.0, grid.n)
    k = np.minimum(np.floor(pos).astype(np.int64), grid.n - 1)
    frac = pos - k
    frac = frac.reshape(frac.shape + (1,) * (samples.ndim - 1))
    return (1.0 - frac) * samples[k] + frac * samples[k + 1]


def trapezoid_row_weights(n, h):
    """Matrix whose row i holds composite trapezoid weights on [0, x_i]."""
    w = np.tril(np.full((n + 1, n + 1), h))
    idx = np.arange(n + 1)
    w[:, 0] = 0.5 * h
    w[idx, idx] = 0.5 * h
    w[0, 0] = 0.0
    return w


@dataclass(frozen=True, eq=False)
class Potential:
    """r x r matrix potential sampled on a grid over [0, 1]."""

    r: int
    grid: UniformGrid
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.shape != (self.grid.n + 1, self.r, self.r):
            raise ValueError(
                f"potential samples must have shape {(self.grid.n + 1, self.r, self.r)}, got {s.shape}"
            )
        if not np.all(np.isfinite(s)):
            raise ValueError("potential samples must be finite")
        s = s.copy()
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, func, r, n):
        grid = unit_grid(n)
        vals = np.array([np.broadcast_to(np.asarray(func(x), dtype=complex), (r, r)) for x in grid.nodes])
        return cls(r, grid, vals)

    @classmethod
    def zero(cls, r, n):
        return cls(r, unit_grid(n), np.zeros((n + 1, r, r), dtype=complex))

    @property
    def is_trivial(self):
        return not np.any(self.samples)

    def at(self, x):
        return interpolate_samples(self.grid, self.samples, x)

    def block(self, x):
        """The 2r x 2r Hermitian block potential [[0, q], [q*, 0]] at ``x``."""
        q = self.at(x)
        z = np.zeros_like(q)
        top = np.concatenate([z, q], axis=-1)
        bottom = np.concatenate([np.conj(np.swapaxes(q, -1, -2)), z], axis=-1)
        return np.concatenate([top, bottom], axis=-2)

    def l2_norm(self):
        f2 = np.sum(np.abs(self.samples) ** 2, axis=(1, 2))
        return float(np.sqrt(self.grid.trapezoid_weights() @ f2))


@dataclass(frozen=True, eq=False)
class TriangularKernel:
    """Kernel on {0 <= t <= x <= 1} sampled at grid node pairs, zero for t > x."""

    grid: UniformGrid
    samples: np.ndarray
    block: int = field(init=False)

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        n1 = self.grid.n + 1
        if s.ndim != 4 or s.shape[:2] != (n1, n1) or s.shape[2] != s.shape[3]:
            raise ValueError(f"kernel samples must have shape ({n1}, {n1}, m, m), got {s.shape}")
        upper = np.triu(np.ones((n1, n1), dtype=bool), k=1)
        s[upper] = 0.0
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "block", s.shape[2])

    def __call__(self, i, k):
        return self.samples[i, k]

    def first_column(self):
        """Samples K(x_i, 0)."""
        return self.samples[:, 0]

    def weighted_matrix(self):
        """Nystrom matrix of the Volterra operator, trapezoid weights on [0, x_i]."""
        n1, m = self.grid.n + 1, self.block
        w = trapezoid_row_weights(self.grid.n, self.grid.h)
        k = self.samples * w[:, :, None, None]
        return k.transpose(0, 2, 1, 3).reshape(n1 * m, n1 * m)


def kernel_apply(kernel, f, grid=None):
    """(K f)(x_i) = trapezoid quadrature over [0, x_i] of K(x_i, s) f(s).

    ``f`` has shape ``(n + 1, m)`` or ``(n + 1, m, p)``.
    """
    if grid is not None and grid != kernel.grid:
        raise GridMismatch(f"kernel grid {kernel.grid} does not match {grid}")
    f = np.asarray(f)
    if f.shape[0] != kernel.grid.n + 1 or f.shape[1] != kernel.block:
        raise GridMismatch(f"grid function of shape {f.shape} does not fit kernel grid {kernel.grid}")
    w = trapezoid_row_weights(kernel.grid.n, kernel.grid.h)
    if f.ndim == 2:
        return np.einsum("ik,ikab,kb->ia", w, kernel.samples, f)
    return np.einsum("ik,ikab,kbc->iac", w, kernel.samples, f)
