"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names at the bottom dispatch on ``_accel.USE_NUMBA``. Both flavours
stay importable so tests and the benchmark can compare them directly.

Propagation uses the closed form of exp(i h M) for M = [[lam, -q], [q*, -lam]]:
M^2 = diag(lam^2 - q q*, lam^2 - q* q), so with q = U diag(sig) V* and
z = lam^2 - sig^2,

    exp(i h M) = diag(C1, C2) + i diag(S1, S2) M,
    C1 = U cos(h sqrt z) U*,  S1 = U [sin(h sqrt z)/sqrt z] U*  (V for C2, S2).
"""
import numpy as np

from . import _accel
from ._accel import njit

_SERIES_CUT = 1e-4


def _cos_sinc_numpy(z, h):
    """cos(h sqrt z) and sin(h sqrt z)/sqrt z, entire in z."""
    w = h * h * z
    small = np.abs(w) < _SERIES_CUT
    root = np.sqrt(np.where(small, 1.0, z))
    c = np.where(small, 1.0 - w / 2 + w * w / 24 - w ** 3 / 720, np.cos(h * root))
    s = np.where(small, h * (1.0 - w / 6 + w * w / 120 - w ** 3 / 5040), np.sin(h * root) / root)
    return c, s


def _step_blocks_numpy(lams, u, sig, vv, q, h):
    """Per-step exponential E for every lambda: shape (nl, 2r, 2r)."""
    r = q.shape[0]
    z = lams[:, None] ** 2 - sig[None, :] ** 2
    c, s = _cos_sinc_numpy(z, h)
    uh = u.conj().T
    vh = vv.conj().T
    c1 = np.einsum("ij,lj,jk->lik", u, c, uh)
    s1 = np.einsum("ij,lj,jk->lik", u, s, uh)
    c2 = np.einsum("ij,lj,jk->lik", vv, c, vh)
    s2 = np.einsum("ij,lj,jk->lik", vv, s, vh)
    lam = lams[:, None, None]
    e = np.empty((lams.size, 2 * r, 2 * r), dtype=complex)
    e[:, :r, :r] = c1 + 1j * lam * s1
    e[:, :r, r:] = -1j * s1 @ q
    e[:, r:, :r] = 1j * s2 @ q.conj().T
    e[:, r:, r:] = c2 - 1j * lam * s2
    return e


def propagate_rows_numpy(lams, a, us, sigs, vs, qs, h):
    """Row propagation w = a E_N ... E_1 for every lambda.

    Returns an array of shape (nl, r, 2r).
    """
    lams = np.asarray(lams, dtype=complex)
    w = np.broadcast_to(a, (lams.size,) + a.shape).astype(complex)
    for k in range(qs.shape[0] - 1, -1, -1):
        e = _step_blocks_numpy(lams, us[k], sigs[k], vs[k], qs[k], h)
        w = w @ e
    return w


def propagate_full_numpy(lams, us, sigs, vs, qs, h):
    """Fundamental matrices u = E_N ... E_1, shape (nl, 2r, 2r)."""
    lams = np.asarray(lams, dtype=complex)
    r = qs.shape[1]
    u = np.broadcast_to(np.eye(2 * r, dtype=complex), (lams.size, 2 * r, 2 * r)).copy()
    for k in range(qs.shape[0]):
        e = _step_blocks_numpy(lams, us[k], sigs[k], vs[k], qs[k], h)
        u = e @ u
    return u


@njit(fastmath=False)
def _cos_sinc_scalar(z, h):
    w = h * h * z
    if abs(w) < _SERIES_CUT:
        c = 1.0 - w / 2 + w * w / 24 - w * w * w / 720
        s = h * (1.0 - w / 6 + w * w / 120 - w * w * w / 5040)
        return c, s
    root = np.sqrt(z)
    return np.cos(h * root), np.sin(h * root) / root


@njit
def _fill_step(lam, u, sig, vv, q, h, e, c, s):
    r = q.shape[0]
    for j in range(r):
        c[j], s[j] = _cos_sinc_scalar(lam * lam - sig[j] * sig[j], h)
    for i in range(r):
        for k in range(r):
            c1 = 0j
            s1 = 0j
            c2 = 0j
            s2 = 0j
            for j in range(r):
                pu = u[i, j] * np.conj(u[k, j])
                pv = vv[i, j] * np.conj(vv[k, j])
                c1 += pu * c[j]
                s1 += pu * s[j]
                c2 += pv * c[j]
                s2 += pv * s[j]
            e[i, k] = c1 + 1j * lam * s1
            e[r + i, r + k] = c2 - 1j * lam * s2
            # stash S1 and S2 in the off-diagonal blocks, finished below
            e[i, r + k] = s1
            e[r + i, k] = s2
    s1m = e[:r, r:].copy()
    s2m = e[r:, :r].copy()
    for i in range(r):
        for k in range(r):
            t1 = 0j
            t2 = 0j
            for j in range(r):
                t1 += s1m[i, j] * q[j, k]
                t2 += s2m[i, j] * np.conj(q[k, j])
            e[i, r + k] = -1j * t1
            e[r + i, k] = 1j * t2


@njit
def propagate_rows_numba(lams, a, us, sigs, vs, qs, h):
    nl = lams.shape[0]
    r = qs.shape[1]
    n_steps = qs.shape[0]
    out = np.empty((nl, r, 2 * r), dtype=np.complex128)
    e = np.empty((2 * r, 2 * r), dtype=np.complex128)
    c = np.empty(r, dtype=np.complex128)
    s = np.empty(r, dtype=np.complex128)
    w = np.empty((r, 2 * r), dtype=np.complex128)
    tmp = np.empty((r, 2 * r), dtype=np.complex128)
    for li in range(nl):
        lam = lams[li]
        w[:, :] = a
        for k in range(n_steps - 1, -1, -1):
            _fill_step(lam, us[k], sigs[k], vs[k], qs[k], h, e, c, s)
            for i in range(r):
                for j in range(2 * r):
                    acc = 0j
                    for m in range(2 * r):
                        acc += w[i, m] * e[m, j]
                    tmp[i, j] = acc
            w[:, :] = tmp
        out[li] = w
    return out


@njit
def propagate_full_numba(lams, us, sigs, vs, qs, h):
    nl = lams.shape[0]
    r = qs.shape[1]
    d = 2 * r
    n_steps = qs.shape[0]
    out = np.empty((nl, d, d), dtype=np.complex128)
    e = np.empty((d, d), dtype=np.complex128)
    c = np.empty(r, dtype=np.complex128)
    s = np.empty(r, dtype=np.complex128)
    uu = np.empty((d, d), dtype=np.complex128)
    tmp = np.empty((d, d), dtype=np.complex128)
    for li in range(nl):
        lam = lams[li]
        uu[:, :] = 0.0
        for i in range(d):
            uu[i, i] = 1.0
        for k in range(n_steps):
            _fill_step(lam, us[k], sigs[k], vs[k], qs[k], h, e, c, s)
            for i in range(d):
                for j in range(d):
                    acc = 0j
                    for m in range(d):
                        acc += e[i, m] * uu[m, j]
                    tmp[i, j] = acc
            uu[:, :] = tmp
        out[li] = uu
    return out


# ---------------------------------------------------------------------------
# Block Levinson recursion for the Krein rows.
#
# Row i solves rho (I + W_i T_i) = -eta_i with T_i[s, k] = H((s - k) h) and
# eta_i[k] = H((i - k) h). With sigma_s = w_s rho_s this becomes
# sigma (M_i + U U^T) = -h eta_i, M_i[s, k] = tau(s - k) = delta I + h H((s-k)h),
# U picking block columns 0 and i. -h eta_i is e_i - (row i of M_i), so
# -h eta_i M_i^{-1} = b_i - e_i where b_i is the last block row of M_i^{-1};
# the rank-2r endpoint correction is a Woodbury update with the first (a_i)
# and last (b_i) block rows of M_i^{-1}.


def levinson_krein_numpy(tau, h, growth_limit=1e6):
    """Returns (R, ok). ``tau`` holds tau(d) at index n + d, d = -n..n."""
    n = (tau.shape[0] - 1) // 2
    r = tau.shape[1]
    eye = np.eye(r, dtype=complex)
    out = np.zeros((n + 1, n + 1, r, r), dtype=complex)
    out[0, 0] = -(tau[n] - eye) / h
    a = np.linalg.inv(tau[n])[None]
    b = a.copy()
    for i in range(1, n + 1):
        # eps_a = sum_s a_s tau(s - i), eps_b = sum_s b_s tau(s + 1)
        eps_a = np.einsum("sij,sjk->ik", a, tau[n - i:n])
        eps_b = np.einsum("sij,sjk->ik", b, tau[n + 1:n + i + 1])
        try:
            al1 = np.linalg.inv(eye - eps_a @ eps_b)
            be2 = np.linalg.inv(eye - eps_b @ eps_a)
        except np.linalg.LinAlgError:
            return out, False
        if not (np.isfinite(al1).all() and np.isfinite(be2).all()):
            return out, False
        if max(np.linalg.norm(al1), np.linalg.norm(be2)) > growth_limit:
            return out, False
        al2 = -al1 @ eps_a
        be1 = -be2 @ eps_b
        a_ext = np.concatenate([a, np.zeros((1, r, r), dtype=complex)])
        b_ext = np.concatenate([np.zeros((1, r, r), dtype=complex), b])
        a = al1 @ a_ext + al2 @ b_ext
        b = be1 @ a_ext + be2 @ b_ext
        y = b.copy()
        y[i] -= eye
        cmat = np.eye(2 * r, dtype=complex)
        cmat[:r, :r] += a[0]
        cmat[:r, r:] += a[i]
        cmat[r:, :r] += b[0]
        cmat[r:, r:] += b[i]
        yu = np.concatenate([y[0], y[i]], axis=1)
        try:
            z = np.linalg.solve(cmat.T, yu.T).T
        except np.linalg.LinAlgError:
            return out, False
        sigma = y - z[:, :r] @ a - z[:, r:] @ b
        w = np.full(i + 1, h)
        w[0] = w[i] = 0.5 * h
        out[i, :i + 1] = sigma / w[:, None, None]
    return out, True


@njit
def _inv_small(m):
    return np.linalg.inv(m)


@njit
def _mac(out, x, y, coef):
    """out += coef * x @ y for small blocks, without temporaries."""
    r = out.shape[0]
    for p in range(r):
        for k in range(x.shape[1]):
            xv = coef * x[p, k]
            for q in range(y.shape[1]):
                out[p, q] += xv * y[k, q]


@njit
def levinson_krein_numba(tau, h, growth_limit=1e6):
    # explicit loops: numba's matmul on r x r blocks is dominated by call overhead
    n = (tau.shape[0] - 1) // 2
    r = tau.shape[1]
    eye = np.eye(r).astype(np.complex128)
    out = np.zeros((n + 1, n + 1, r, r), dtype=np.complex128)
    out[0, 0] = -(tau[n] - eye) / h
    a = np.zeros((n + 1, r, r), dtype=np.complex128)
    b = np.zeros((n + 1, r, r), dtype=np.complex128)
    na = np.zeros((n + 1, r, r), dtype=np.complex128)
    nb = np.zeros((n + 1, r, r), dtype=np.complex128)
    eps_a = np.empty((r, r), dtype=np.complex128)
    eps_b = np.empty((r, r), dtype=np.complex128)
    d1 = np.empty((r, r), dtype=np.complex128)
    d2 = np.empty((r, r), dtype=np.complex128)
    al2 = np.empty((r, r), dtype=np.complex128)
    be1 = np.empty((r, r), dtype=np.complex128)
    cmat = np.empty((2 * r, 2 * r), dtype=np.complex128)
    yu = np.empty((r, 2 * r), dtype=np.complex128)
    z = np.empty((r, 2 * r), dtype=np.complex128)
    sig = np.empty((r, r), dtype=np.complex128)
    a[0] = _inv_small(tau[n])
    b[0] = a[0]
    for i in range(1, n + 1):
        eps_a[:] = 0.0
        eps_b[:] = 0.0
        for s in range(i):
            _mac(eps_a, a[s], tau[n + s - i], 1.0)
            _mac(eps_b, b[s], tau[n + s + 1], 1.0)
        d1[:] = eye
        d2[:] = eye
        _mac(d1, eps_a, eps_b, -1.0)
        _mac(d2, eps_b, eps_a, -1.0)
        if abs(np.linalg.det(d1)) == 0.0 or abs(np.linalg.det(d2)) == 0.0:
            return out, False
        al1 = _inv_small(d1)
        be2 = _inv_small(d2)
        g = max(np.sqrt(np.sum(np.abs(al1) ** 2)), np.sqrt(np.sum(np.abs(be2) ** 2)))
        if not np.isfinite(g) or g > growth_limit:
            return out, False
        al2[:] = 0.0
        be1[:] = 0.0
        _mac(al2, al1, eps_a, -1.0)
        _mac(be1, be2, eps_b, -1.0)
        for s in range(i + 1):
            na[s] = 0.0
            nb[s] = 0.0
            if s < i:
                _mac(na[s], al1, a[s], 1.0)
                _mac(nb[s], be1, a[s], 1.0)
            if s > 0:
                _mac(na[s], al2, b[s - 1], 1.0)
                _mac(nb[s], be2, b[s - 1], 1.0)
        for s in range(i + 1):
            a[s] = na[s]
            b[s] = nb[s]
        cmat[:] = 0.0
        for p in range(2 * r):
            cmat[p, p] = 1.0
        cmat[:r, :r] += a[0]
        cmat[:r, r:] += a[i]
        cmat[r:, :r] += b[0]
        cmat[r:, r:] += b[i]
        yu[:, :r] = b[0]
        yu[:, r:] = b[i] - eye
        if abs(np.linalg.det(cmat)) == 0.0:
            return out, False
        cinv = np.linalg.inv(cmat)
        z[:] = 0.0
        _mac(z, yu, cinv, 1.0)
        za = z[:, :r].copy()
        zb = z[:, r:].copy()
        for s in range(i + 1):
            sig[:] = b[s]
            if s == i:
                sig -= eye
            _mac(sig, za, a[s], -1.0)
            _mac(sig, zb, b[s], -1.0)
            ws = h
            if s == 0 or s == i:
                ws = 0.5 * h
            out[i, s] = sig / ws
    return out, True


def propagate_rows(lams, a, us, sigs, vs, qs, h):
    lams = np.ascontiguousarray(lams, dtype=np.complex128)
    if _accel.USE_NUMBA:
        return propagate_rows_numba(lams, np.ascontiguousarray(a, dtype=np.complex128), us, sigs, vs, qs, h)
    return propagate_rows_numpy(lams, a, us, sigs, vs, qs, h)


def propagate_full(lams, us, sigs, vs, qs, h):
    lams = np.ascontiguousarray(lams, dtype=np.complex128)
    if _accel.USE_NUMBA:
        return propagate_full_numba(lams, us, sigs, vs, qs, h)
    return propagate_full_numpy(lams, us, sigs, vs, qs, h)


def levinson_krein(tau, h, growth_limit=1e6):
    tau = np.ascontiguousarray(tau, dtype=np.complex128)
    if _accel.USE_NUMBA:
        return levinson_krein_numba(tau, float(h), float(growth_limit))
    return levinson_krein_numpy(tau, float(h), growth_limit)
