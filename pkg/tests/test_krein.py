import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracinv import krein
from diracinv.accelerant import Accelerant, accelerant_from_data, assemble_f, sharp, BlockKernelF
from diracinv.core import UniformGrid, symmetric_grid, unit_grid
from diracinv.errors import FallbackToDense, GridMismatch, SingularRow
from diracinv.spectra import EigenRecord, SpectralData
from conftest import random_hermitian_lags
from oracles import dense_krein


def _lags_on(r, n, seed, scale):
    return random_hermitian_lags(r, n, 1.0 / n, seed, scale)


def _constant(g, n=512):
    return Accelerant.from_function(lambda x: g * np.eye(1), 1, n)


@pytest.mark.parametrize("solver", ["dense", "fast"])
def test_zero_accelerant(solver):
    acc = Accelerant.from_function(lambda x: np.zeros((2, 2)), 2, 64)
    sol = krein.krein_solve(acc, unit_grid(32), solver)
    assert not np.any(sol.R.samples)
    assert krein.theta(sol).is_trivial


@pytest.mark.parametrize("gamma", [-0.5, 0.3, 0.9])
@pytest.mark.parametrize("solver", ["dense", "fast"])
def test_constant_kernel_closed_form(gamma, solver):
    sol = krein.krein_solve(_constant(gamma), unit_grid(256), solver)
    x = sol.grid.nodes
    lower = np.tril(np.ones((257, 257), dtype=bool))
    expect = np.broadcast_to((-gamma / (1 + gamma * x))[:, None], (257, 257))
    assert np.abs(sol.R.samples[:, :, 0, 0][lower] - expect[lower]).max() <= 1e-6
    assert np.all(sol.R.samples[:, :, 0, 0][~lower] == 0)
    q = krein.theta(sol).samples[:, 0, 0]
    assert np.abs(q - (-1j * gamma / (1 + gamma * x))).max() <= 1e-6


def test_row_residuals_for_shifted_free_data():
    d = SpectralData.free(2, 8)
    recs = [rec for rec in d.records if rec.window != 2]
    recs.append(EigenRecord(2 * np.pi + 0.2, np.eye(2)))
    acc = accelerant_from_data(SpectralData(2, tuple(recs), 8), symmetric_grid(256))
    for solver in ("dense", "fast"):
        sol = krein.krein_solve(acc, unit_grid(128), solver)
        assert sol.max_residual <= 1e-8


def test_against_independent_dense_oracle():
    n = 24
    acc = Accelerant(2, symmetric_grid(2 * n), _lags_on(2, n, 3, 0.4))
    lag = acc.lags(1.0 / n, n)
    ref = dense_krein(lag, 1.0 / n)
    ref[0, 0] = -lag[n]
    for solver in ("dense", "fast"):
        assert np.abs(krein.krein_solve(acc, unit_grid(n), solver).R.samples - ref).max() < 1e-12


@settings(max_examples=6, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10 ** 6), st.sampled_from([32, 64, 128]))
def test_dense_fast_equivalence(r, seed, n):
    acc = Accelerant(r, symmetric_grid(2 * n), _lags_on(r, n, seed, 0.5))
    a = krein.krein_solve_dense(acc, unit_grid(n))
    b = krein.krein_solve_fast(acc, unit_grid(n))
    assert b.method == "fast"
    assert np.abs(a.R.samples - b.R.samples).max() <= 1e-10


def test_sharp_solution_is_adjoint_at_t0():
    n = 64
    acc = Accelerant(2, symmetric_grid(2 * n), _lags_on(2, n, 9, 0.5))
    sol, sol_sharp = krein.krein_pair(acc, unit_grid(n))
    r0 = sol.R.first_column()
    rs0 = sol_sharp.R.first_column()
    assert np.abs(rs0 - np.conj(np.swapaxes(r0, -1, -2))).max() < 1e-12


def test_singular_row_and_fallback():
    acc = _constant(-2.0, 256)
    with pytest.raises(SingularRow) as info:
        krein.krein_solve_dense(acc, unit_grid(128))
    assert abs(info.value.x - 0.5) < 1e-12
    with pytest.warns(FallbackToDense):
        with pytest.raises(SingularRow):
            krein.krein_solve_fast(acc, unit_grid(128))


def test_forced_fallback_returns_dense_result():
    acc = _constant(0.3, 128)
    with pytest.warns(FallbackToDense):
        sol = krein.krein_solve_fast(acc, unit_grid(64), growth_limit=0.5)
    assert sol.fell_back and sol.method == "dense"
    ref = krein.krein_solve_dense(acc, unit_grid(64))
    assert np.array_equal(sol.R.samples, ref.R.samples)


def test_grid_checks():
    acc = _constant(0.3, 64)
    with pytest.raises(GridMismatch):
        krein.krein_solve_dense(acc, UniformGrid(0.0, 2.0, 8))
    with pytest.raises(ValueError):
        krein.krein_solve(acc, unit_grid(8), "magic")
    s = krein.krein_solve(acc, unit_grid(9))
    with pytest.raises(GridMismatch):
        krein.l_from_krein(s, s)


def test_small_perturbation_bounded_response():
    n = 64
    base = _lags_on(1, n, 4, 0.5)
    rng = np.random.default_rng(0)
    ratios = []
    for eps in (1e-3, 1e-4, 1e-5):
        bump = eps * np.exp(1j * rng.uniform(0, 2 * np.pi)) * np.ones_like(base)
        bump = 0.5 * (bump + np.conj(np.swapaxes(bump, -1, -2))[::-1])
        q0 = krein.theta(krein.krein_solve(Accelerant(1, symmetric_grid(2 * n), base), unit_grid(n)))
        q1 = krein.theta(krein.krein_solve(Accelerant(1, symmetric_grid(2 * n), base + bump), unit_grid(n)))
        ratios.append(np.abs(q1.samples - q0.samples).max() / np.abs(bump).max())
    assert max(ratios) < 100


@pytest.fixture(scope="module")
def smooth_acc(sine_data):
    return accelerant_from_data(sine_data.truncated(16), symmetric_grid(256))


def test_glm_zero_and_l_from_krein_consistency(smooth_acc):
    f0 = BlockKernelF(unit_grid(8), np.zeros((9, 9, 2, 2)))
    assert not np.any(krein.glm_solve(f0).L.samples)
    n = 64
    sol, sol_sharp = krein.krein_pair(smooth_acc, unit_grid(2 * n))
    lk = krein.l_from_krein(sol, sol_sharp)
    f = assemble_f(smooth_acc, unit_grid(n))
    assert krein.glm_residuals(lk, f).max() <= 1e-8
    g = krein.glm_solve(f, unit_grid(n))
    assert g.max_residual <= 1e-8
    assert np.abs(g.L.samples - lk.L.samples).max() <= 1e-7
    # block layout of the assembled kernel
    i, k = 40, 10
    r = sol.R.samples
    assert np.allclose(lk.L.samples[i, k, 0, 0], 0.5 * r[2 * i, i + k, 0, 0])
    assert np.allclose(lk.L.samples[i, k, 0, 1], 0.5 * r[2 * i, i - k, 0, 0])


def test_glm_uniqueness_perturbation_breaks_residual(smooth_acc):
    f = assemble_f(smooth_acc, unit_grid(32))
    g = krein.glm_solve(f)
    bumped = g.L.samples.copy()
    bumped[20, 5] += 1e-4
    from diracinv.core import TriangularKernel
    res = krein.glm_residuals(krein.GlmSolution(TriangularKernel(f.grid, bumped)), f)
    assert res.max() > 1e-6
    with pytest.raises(GridMismatch):
        krein.glm_solve(f, unit_grid(16))


def test_factorization_identity(sine_data, smooth_acc):
    f0 = BlockKernelF(unit_grid(8), np.zeros((9, 9, 2, 2)))
    assert krein.factorization_check(krein.glm_solve(f0), f0).residual == 0.0
    res = []
    for n in (32, 64, 128):
        acc = accelerant_from_data(sine_data.truncated(16), symmetric_grid(4 * n))
        sol, sol_sharp = krein.krein_pair(acc, unit_grid(2 * n))
        lk = krein.l_from_krein(sol, sol_sharp)
        res.append(krein.factorization_check(lk, assemble_f(acc, lk.grid)).residual)
    assert res[0] > res[1] > res[2]
    with pytest.raises(GridMismatch):
        krein.factorization_check(lk, assemble_f(smooth_acc, unit_grid(16)))


def test_fast_is_faster_at_moderate_size():
    n = 256
    acc = Accelerant(1, symmetric_grid(2 * n), _lags_on(1, n, 1, 0.5))
    krein.krein_solve_fast(acc, unit_grid(32))  # compile
    t0 = time.perf_counter()
    krein.krein_solve_fast(acc, unit_grid(n))
    t1 = time.perf_counter()
    krein.krein_solve_dense(acc, unit_grid(n))
    t2 = time.perf_counter()
    assert t2 - t1 > t1 - t0
