"""Spectral data, the windows Delta_n and the (A1)/(A2) validators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import numerical_rank, psd_check

RANK_TOL = 1e-6
SUM_DEV2_DEFAULT = 10.0


def window_upper(n):
    """Right end pi*n + pi/2 of Delta_n (the interval is right-closed)."""
    return np.pi * n + np.pi / 2


def window_index(lam):
    """The n with lam in Delta_n = (pi n - pi/2, pi n + pi/2]."""
    n = math.ceil(lam / np.pi - 0.5)
    # settle float ties at the boundary against the same expression
    while lam > window_upper(n):
        n += 1
    while lam <= window_upper(n - 1):
        n -= 1
    return n


@dataclass(frozen=True, eq=False)
class EigenRecord:
    """An eigenvalue with its norming matrix.

    ``multiplicity`` is the numerical rank of ``alpha``; ``residual`` is the
    smallest singular value of s(lam) at the located root (0 for data not
    produced by the direct solver).
    """

    lam: float
    alpha: np.ndarray
    multiplicity: int = -1
    residual: float = 0.0

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=complex)
        if alpha.ndim != 2 or alpha.shape[0] != alpha.shape[1]:
            raise ValueError(f"norming matrix must be square, got shape {alpha.shape}")
        if not (np.isfinite(self.lam) and np.all(np.isfinite(alpha))):
            raise ValueError("eigen record must be finite")
        scale = max(1.0, float(np.linalg.norm(alpha)))
        if not psd_check(alpha, 1e-8 * scale):
            raise ValueError(f"norming matrix at lambda={self.lam!r} is not Hermitian positive semidefinite")
        rank = numerical_rank(alpha, RANK_TOL)
        if rank == 0:
            raise ValueError(f"norming matrix at lambda={self.lam!r} is zero")
        alpha.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "lam", float(self.lam))
        if self.multiplicity < 0:
            object.__setattr__(self, "multiplicity", rank)

    @property
    def window(self):
        return window_index(self.lam)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Finite truncation of ((lambda_j, alpha_j)) covering |n| <= n_max.

    Records are kept sorted by eigenvalue; repeated eigenvalues are rejected.
    """

    r: int
    records: tuple
    n_max: int

    def __post_init__(self):
        recs = tuple(sorted(self.records, key=lambda rec: rec.lam))
        for rec in recs:
            if rec.alpha.shape != (self.r, self.r):
                raise ValueError(f"record at lambda={rec.lam!r} has alpha of shape {rec.alpha.shape}, expected r={self.r}")
        lams = [rec.lam for rec in recs]
        if any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("eigenvalues must be pairwise distinct")
        if self.n_max < 0:
            raise ValueError("n_max must be non-negative")
        object.__setattr__(self, "records", recs)

    @classmethod
    def from_arrays(cls, lams, alphas, n_max):
        alphas = np.asarray(alphas, dtype=complex)
        recs = tuple(EigenRecord(float(l), a) for l, a in zip(lams, alphas))
        return cls(alphas.shape[1], recs, n_max)

    @classmethod
    def free(cls, r, n_max):
        """Spectral data of the zero potential: (pi n, I) for |n| <= n_max."""
        n = np.arange(-n_max, n_max + 1)
        return cls.from_arrays(np.pi * n, np.broadcast_to(np.eye(r), (n.size, r, r)), n_max)

    def __len__(self):
        return len(self.records)

    @property
    def lambdas(self):
        return np.array([rec.lam for rec in self.records])

    @property
    def alphas(self):
        return np.array([rec.alpha for rec in self.records]).reshape(len(self.records), self.r, self.r)

    @property
    def zero_index(self):
        """Position of lambda_0 (largest non-positive eigenvalue), or None."""
        idx = np.nonzero(self.lambdas <= 0.0)[0]
        return int(idx[-1]) if idx.size else None

    def labels(self):
        """Integer labels j with lambda_0 <= 0 < lambda_1."""
        z = self.zero_index
        base = -1 if z is None else z
        return np.arange(len(self.records)) - base

    def truncated(self, n_max):
        """Records in the windows |n| <= n_max."""
        if n_max > self.n_max:
            raise ValueError(f"cannot extend data truncated at {self.n_max} to {n_max}")
        return SpectralData(self.r, tuple(rec for rec in self.records if abs(rec.window) <= n_max), n_max)

    def summary(self):
        lams = self.lambdas
        return {
            "r": self.r,
            "n_max": self.n_max,
            "records": len(self.records),
            "lambda_min": float(lams.min()) if lams.size else None,
            "lambda_max": float(lams.max()) if lams.size else None,
        }

    def replace(self, records=None, n_max=None):
        return SpectralData(self.r, tuple(self.records if records is None else records),
                            self.n_max if n_max is None else n_max)


@dataclass(frozen=True)
class WindowStats:
    n: int
    count: int
    beta: np.ndarray = field(repr=False)
    dev2: float
    rank: int


def window_stats(data):
    """Per-window count, beta_n = I - sum alpha_k and sum of |lambda_j - pi n|^2."""
    eye = np.eye(data.r, dtype=complex)
    by_window = {}
    for rec in data.records:
        by_window.setdefault(rec.window, []).append(rec)
    out = []
    for n in range(-data.n_max, data.n_max + 1):
        recs = by_window.get(n, [])
        beta = eye - sum((rec.alpha for rec in recs), np.zeros_like(eye))
        dev2 = float(sum((rec.lam - np.pi * n) ** 2 for rec in recs))
        out.append(WindowStats(n, len(recs), beta, dev2, sum(rec.multiplicity for rec in recs)))
    return out


@dataclass(frozen=True)
class A1Bounds:
    """Finite stand-ins for the three (A1) finiteness conditions.

    ``None`` selects the defaults r + 1, 10 and r / 2. The last is tight
    enough that doubling a single norming matrix of otherwise unperturbed
    data (which adds about r to the sum) is flagged.
    """

    sup_count: float | None = None
    sum_dev2: float | None = None
    sum_beta2: float | None = None

    def resolved(self, r):
        return (
            r + 1 if self.sup_count is None else self.sup_count,
            SUM_DEV2_DEFAULT if self.sum_dev2 is None else self.sum_dev2,
            0.5 * r if self.sum_beta2 is None else self.sum_beta2,
        )

    @classmethod
    def parse(cls, text):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma-separated bounds, got {text!r}")
        vals = [None if p in ("", "auto") else float(p) for p in parts]
        return cls(*vals)


@dataclass(frozen=True)
class A1Report:
    passed: bool
    sup_count: int
    sum_dev2: float
    sum_beta2: float
    bounds: tuple

    def to_dict(self):
        return {"pass": self.passed, "sup_count": self.sup_count, "sum_dev2": self.sum_dev2,
                "sum_beta2": self.sum_beta2, "bounds": list(self.bounds)}


def check_a1(data, bounds=None):
    bounds = (bounds or A1Bounds()).resolved(data.r)
    stats = window_stats(data)
    sup_count = max((s.count for s in stats), default=0)
    sum_dev2 = float(sum(s.dev2 for s in stats))
    sum_beta2 = float(sum(np.linalg.norm(s.beta) ** 2 for s in stats))
    passed = sup_count <= bounds[0] and sum_dev2 <= bounds[1] and sum_beta2 <= bounds[2]
    return A1Report(bool(passed), sup_count, sum_dev2, sum_beta2, bounds)


@dataclass(frozen=True)
class A2Report:
    passed: bool
    per_n_counts: tuple
    n0: int | None

    def to_dict(self):
        return {"pass": self.passed, "per_N_counts": list(self.per_n_counts), "N0": self.n0}


def check_a2(data):
    """Multiplicity-weighted counts over |n| <= N for N = 0..n_max.

    Passes iff the count equals (2N + 1) r for every N from some N0 up to
    n_max; the smallest such N0 is reported.
    """
    ranks = {}
    for rec in data.records:
        ranks[rec.window] = ranks.get(rec.window, 0) + rec.multiplicity
    counts = []
    for big_n in range(data.n_max + 1):
        counts.append(sum(ranks.get(n, 0) for n in range(-big_n, big_n + 1)))
    n0 = None
    for big_n in range(data.n_max, -1, -1):
        if counts[big_n] != (2 * big_n + 1) * data.r:
            break
        n0 = big_n
    return A2Report(n0 is not None, tuple(counts), n0)


def measure_nodes(data):
    """Atoms and weights of the measure sum alpha_j delta_{lambda_j}."""
    return [(rec.lam, rec.alpha) for rec in data.records]
