"""Direct spectral problem: fundamental solutions, s, c, m, eigenvalues and
norming matrices of the Dirac operator with boundary conditions
y1(0) = y2(0), y1(1) = y2(1).
"""
from __future__ import annotations

import math
import threading

import numpy as np

from . import _kernels
from .core import Potential, bc_row, theta_matrix, psd_project, numerical_rank
from .errors import ContourTooLarge, MissedRoot, NearPole, NotConverged
from .spectra import EigenRecord, SpectralData, window_index, RANK_TOL

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def detection_threshold(lam):
    return 1e-6 * (1.0 + abs(lam))


class _Steps:
    """Lambda-independent data for exponential-midpoint steps over [0, x_end]."""

    def __init__(self, potential, x_end, n_steps):
        self.h = x_end / n_steps
        mids = (np.arange(n_steps) + 0.5) * self.h
        self.qs = np.ascontiguousarray(potential.at(mids))
        u, sig, vh = np.linalg.svd(self.qs)
        self.us = np.ascontiguousarray(u)
        self.sigs = np.ascontiguousarray(sig.astype(complex))
        self.vs = np.ascontiguousarray(np.conj(np.swapaxes(vh, -1, -2)))

    def rows(self, lams, a):
        return _kernels.propagate_rows(lams, a, self.us, self.sigs, self.vs, self.qs, self.h)

    def full(self, lams):
        return _kernels.propagate_full(lams, self.us, self.sigs, self.vs, self.qs, self.h)


class CharacteristicEvaluator:
    """Evaluates s(lam), c(lam) and m(lam) for a fixed potential.

    The Cauchy problem is stepped with ``ode_steps`` exponential-midpoint
    steps on [0, 1]; the potential is linearly interpolated to step midpoints.
    Results are memoised per lambda.
    """

    def __init__(self, potential: Potential, ode_steps: int = 2048):
        if ode_steps < 1:
            raise ValueError("ode_steps must be positive")
        self.potential = potential
        self.r = potential.r
        self.ode_steps = int(ode_steps)
        self._steps = _Steps(potential, 1.0, self.ode_steps)
        self._a = bc_row(self.r)
        self._theta_a = theta_matrix(self.r) @ self._a.conj().T
        self._cache = {}
        self._lock = threading.Lock()

    def propagate(self, lam, x=1.0):
        """u(x, lam), the 2r x 2r solution with u(0, lam) = I."""
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"x must lie in [0, 1], got {x}")
        if x == 0.0:
            return np.eye(2 * self.r, dtype=complex)
        steps = self._steps if x == 1.0 else _Steps(self.potential, x, max(1, math.ceil(x * self.ode_steps)))
        return steps.full(np.array([lam], dtype=complex))[0]

    def evaluate(self, lams):
        """s and c at every lambda, each of shape (len(lams), r, r)."""
        lams = np.atleast_1d(np.asarray(lams, dtype=complex))
        keys = [complex(l) for l in lams]
        with self._lock:
            missing = sorted({k for k in keys if k not in self._cache}, key=lambda z: (z.real, z.imag))
        if missing:
            w = self._steps.rows(np.array(missing), self._a)
            s = w @ self._theta_a
            c = w @ self._a.conj().T
            with self._lock:
                for k, sk, ck in zip(missing, s, c):
                    self._cache.setdefault(k, (sk, ck))
        with self._lock:
            vals = [self._cache[k] for k in keys]
        s = np.array([v[0] for v in vals])
        c = np.array([v[1] for v in vals])
        return s, c

    def clear_cache(self):
        with self._lock:
            self._cache.clear()

    def sigma_min(self, lams):
        s, _ = self.evaluate(lams)
        return np.linalg.svd(s, compute_uv=False)[:, -1]


def propagate(q: Potential, lam, x=1.0, ode_steps=2048):
    return CharacteristicEvaluator(q, ode_steps).propagate(lam, x)


def char_functions(ev, lam):
    """(s(lam), c(lam)) for a scalar lambda."""
    s, c = ev.evaluate([lam])
    return s[0], c[0]


def weyl_m(ev, lam, pole_tol=1e-10):
    """m(lam) = -s(lam)^{-1} c(lam); raises NearPole when s is numerically singular."""
    scalar = np.ndim(lam) == 0
    lams = np.atleast_1d(np.asarray(lam, dtype=complex))
    s, c = ev.evaluate(lams)
    smin = np.linalg.svd(s, compute_uv=False)[:, -1]
    bad = np.nonzero(smin < pole_tol)[0]
    if bad.size:
        raise NearPole(complex(lams[bad[0]]), float(smin[bad[0]]))
    m = -np.linalg.solve(s, c)
    return m[0] if scalar else m


def _golden_minimize(f, lo, hi, iters):
    """Vectorised golden-section minimisation of f over brackets [lo, hi]."""
    lo = lo.copy()
    hi = hi.copy()
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1 = f(x1)
    f2 = f(x2)
    for _ in range(iters):
        left = f1 <= f2
        # keep [lo, x2] where f1 <= f2, otherwise [x1, hi]
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        new_x = np.where(left, hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo))
        new_f = f(new_x)
        x2, f2, x1, f1 = (
            np.where(left, x1, new_x),
            np.where(left, f1, new_f),
            np.where(left, new_x, x2),
            np.where(left, new_f, f2),
        )
    best = np.where(f1 <= f2, x1, x2)
    return best, np.minimum(f1, f2)


def _scan_roots(ev, lo, hi, per_unit):
    """Local minima of sigma_min(s) on [lo, hi], refined and thresholded."""
    n_pts = int(math.ceil((hi - lo) * per_unit)) + 1
    grid = np.linspace(lo, hi, n_pts)
    step = grid[1] - grid[0]
    sm = ev.sigma_min(grid)
    interior = np.arange(1, n_pts - 1)
    is_min = (sm[interior] <= sm[interior - 1]) & (sm[interior] < sm[interior + 1])
    idx = interior[is_min]
    if idx.size == 0:
        return np.empty(0), np.empty(0)
    iters = int(math.ceil(math.log(2 * step / 1e-14) / -math.log(GOLDEN)))
    roots, vals = _golden_minimize(lambda x: ev.sigma_min(x), grid[idx - 1], grid[idx + 1], iters)
    keep = vals < np.array([detection_threshold(l) for l in roots])
    roots, vals = roots[keep], vals[keep]
    order = np.argsort(roots)
    roots, vals = _merge_close(roots[order], vals[order])
    return _resolve_clusters(ev, roots, vals, step)


def _contour_eigenvalues(ev, centre, radius, points=48, depth=2):
    """Zeros of det s inside a circle, from block-Hankel contour moments of s^{-1}.

    Moments A_p = (1/2 pi i) contour integral of z^p s(centre + radius z)^{-1} dz
    (trapezoid rule on the unit circle). Up to ``depth * r`` zeros are
    resolved, which separates clusters that a real-axis scan merges.
    """
    r = ev.r
    z = np.exp(2j * np.pi * np.arange(points) / points)
    s, _ = ev.evaluate(centre + radius * z)
    sinv = np.linalg.inv(s)
    mom = [np.einsum("k,kab->ab", z ** (p + 1), sinv) / points for p in range(2 * depth)]
    h0 = np.block([[mom[i + j] for j in range(depth)] for i in range(depth)])
    h1 = np.block([[mom[i + j + 1] for j in range(depth)] for i in range(depth)])
    u, sv, wh = np.linalg.svd(h0)
    if sv[0] == 0.0:
        return np.empty(0)
    k = int(np.sum(sv > 1e-9 * sv[0]))
    if k == depth * r:
        return None  # possibly more zeros than the moments can resolve
    b = u[:, :k].conj().T @ h1 @ wh[:k].conj().T / sv[:k]
    zs = np.linalg.eigvals(b)
    zs = zs[np.abs(zs) < 1.0]
    return np.sort(centre + radius * zs.real)


def _merge_close(roots, vals, rel=1e-9):
    merged_r, merged_v = [], []
    for x, v in zip(roots, vals):
        if merged_r and abs(x - merged_r[-1]) < rel * (1.0 + abs(x)):
            if v < merged_v[-1]:
                merged_r[-1], merged_v[-1] = x, v
            continue
        merged_r.append(x)
        merged_v.append(v)
    return np.array(merged_r), np.array(merged_v)


def _resolve_clusters(ev, roots, vals, step):
    """Split scan minima that hide several nearby eigenvalues.

    A circle of radius min(0.3, gap/3) around each root is searched with
    contour moments; extra zeros found there are polished by golden section.
    Circles narrower than two scan steps are skipped (a finer scan handles them).
    """
    if roots.size == 0:
        return roots, vals
    gaps = np.full(roots.size, np.inf)
    if roots.size > 1:
        d = np.diff(roots)
        gaps[:-1] = np.minimum(gaps[:-1], d)
        gaps[1:] = np.minimum(gaps[1:], d)
    radius = np.minimum(0.3, gaps / 3)
    out_r, out_v = [roots], [vals]
    for x, rad in zip(roots, radius):
        if rad < 2 * step:
            continue
        zs = _contour_eigenvalues(ev, x, rad)
        if zs is None or zs.size < 2:
            continue
        zs, _ = _merge_close(zs, np.zeros(zs.size), 1e-7)
        if zs.size < 2:
            continue
        sep = np.min(np.diff(zs))
        zs = zs[np.abs(zs - x) > sep / 2]  # the scanned root already covers its own zero
        if zs.size == 0:
            continue
        half = np.full(zs.size, min(sep / 3, 1e-4))
        iters = int(math.ceil(math.log(2 * half[0] / 1e-14) / -math.log(GOLDEN)))
        pol, pv = _golden_minimize(lambda t: ev.sigma_min(t), zs - half, zs + half, max(iters, 1))
        out_r.append(pol)
        out_v.append(pv)
    roots = np.concatenate(out_r)
    vals = np.concatenate(out_v)
    order = np.argsort(roots)
    return _merge_close(roots[order], vals[order])


def _rank_deficiency(ev, lams):
    s, _ = ev.evaluate(lams)
    sv = np.linalg.svd(s, compute_uv=False)
    thr = np.array([detection_threshold(l) for l in lams])
    return np.sum(sv < thr[:, None], axis=1)


def locate_eigenvalues(ev, n_max, samples_per_window=64, max_samples_per_window=1024, strict=True):
    """Eigenvalues in the union of Delta_n, |n| <= n_max, with s-rank deficiencies.

    The scan density doubles until the multiplicity-weighted count equals
    (2 n_max + 1) r; ``MissedRoot`` is raised if the cap is reached first
    (only when ``strict``).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    expected = (2 * n_max + 1) * ev.r
    lo = -np.pi * n_max - np.pi / 2
    hi = np.pi * n_max + np.pi / 2
    k = samples_per_window
    while True:
        pad = 2 * np.pi / k
        roots, vals = _scan_roots(ev, lo - pad, hi + pad, k / np.pi)
        inside = np.array([abs(window_index(x)) <= n_max for x in roots], dtype=bool)
        roots, vals = roots[inside], vals[inside]
        defic = _rank_deficiency(ev, roots) if roots.size else np.zeros(0, dtype=int)
        defic = np.maximum(defic, 1)
        found = int(defic.sum())
        if found == expected or not strict:
            return roots, defic, vals
        if 2 * k > max_samples_per_window:
            raise MissedRoot(found, expected, n_max)
        k *= 2


def find_eigenvalues(ev, n_max, **kwargs):
    """Sorted eigenvalues in |n| <= n_max windows (see ``locate_eigenvalues``)."""
    return locate_eigenvalues(ev, n_max, **kwargs)[0]


def _contour_nodes(centres, radius, points):
    theta = 2 * np.pi * np.arange(points) / points
    ring = np.exp(1j * theta)
    return centres[:, None] + radius[:, None] * ring[None, :], ring


def _residues(ev, centres, radius, points):
    """-(1/2 pi i) trapezoid contour integral of m around each centre."""
    nodes, ring = _contour_nodes(centres, radius, points)
    m = weyl_m(ev, nodes.ravel(), pole_tol=0.0).reshape(nodes.shape + (ev.r, ev.r))
    # d lam = i radius e^{i theta} d theta
    return -(radius[:, None, None] / points) * np.einsum("jk,jkab->jab", np.broadcast_to(ring, nodes.shape), m)


def _default_radii(lams):
    lams = np.asarray(lams, dtype=float)
    gaps = np.full(lams.size, np.inf)
    if lams.size > 1:
        d = np.diff(lams)
        gaps[:-1] = np.minimum(gaps[:-1], d)
        gaps[1:] = np.minimum(gaps[1:], d)
    return np.minimum(0.1, gaps / 4)


def norming_matrices(ev, lams, contour_radius=None, contour_points=32, agree_tol=1e-6, others=None):
    """Norming matrices at located eigenvalues, checked by halving the radius.

    Returns (alphas, raw_disagreement, clipped_negative_mass).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    known = np.sort(np.concatenate([lams, np.asarray(others if others is not None else [], dtype=float)]))
    if contour_radius is None:
        radius = _default_radii(known)[np.searchsorted(known, lams)]
    else:
        radius = np.full(lams.size, float(contour_radius))
    for lam, rad in zip(lams, radius):
        near = np.abs(known - lam)
        near = near[near > 0]
        if near.size and near.min() < 2 * rad:
            raise ContourTooLarge(f"eigenvalue within {near.min():.3g} of {lam!r} for contour radius {rad:.3g}")
    both = _residues(ev, np.concatenate([lams, lams]), np.concatenate([radius, radius / 2]), contour_points)
    full, half = both[: lams.size], both[lams.size:]
    diff = np.linalg.norm(full - half, axis=(1, 2))
    scale = np.maximum(1.0, np.linalg.norm(full, axis=(1, 2)))
    worst = int(np.argmax(diff / scale))
    if diff[worst] > agree_tol * scale[worst]:
        raise NotConverged(
            f"contour radii {radius[worst]:.3g} and {radius[worst] / 2:.3g} disagree by {diff[worst]:.3e} "
            f"at lambda={lams[worst]!r}"
        )
    alphas = []
    clipped = []
    for a in full:
        p, neg = psd_project(a)
        alphas.append(p)
        clipped.append(neg)
    return np.array(alphas).reshape(lams.size, ev.r, ev.r), diff, np.array(clipped)


def norming_matrix(ev, lambda_j, contour_radius=0.1, contour_points=32, others=None):
    """alpha_j = -res m at lambda_j, Hermitian and PSD-projected."""
    alphas, _, _ = norming_matrices(ev, [lambda_j], contour_radius, contour_points, others=others)
    return alphas[0]


def spectral_data(ev, n_max, contour_points=32, **scan_kwargs):
    """Eigenvalues and norming matrices over the windows |n| <= n_max."""
    lams, _, resid = locate_eigenvalues(ev, n_max, **scan_kwargs)
    alphas, _, _ = norming_matrices(ev, lams, contour_points=contour_points)
    records = tuple(
        EigenRecord(float(l), a, numerical_rank(a, RANK_TOL), float(v)) for l, a, v in zip(lams, alphas, resid)
    )
    return SpectralData(ev.r, records, n_max)
