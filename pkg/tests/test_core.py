import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from diracinv.core import (
    Potential,
    TriangularKernel,
    UniformGrid,
    bc_row,
    hermitian_part_check,
    interpolate_samples,
    kernel_apply,
    numerical_rank,
    psd_check,
    psd_project,
    symmetric_grid,
    theta_matrix,
    trapezoid_row_weights,
    unit_grid,
)
from diracinv.errors import GridMismatch

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def complex_matrices(n):
    return st.tuples(arrays(float, (n, n), elements=finite), arrays(float, (n, n), elements=finite)).map(
        lambda p: p[0] + 1j * p[1])


def test_boundary_row_and_theta():
    a = bc_row(2)
    assert np.allclose(a @ a.conj().T, np.eye(2))
    th = theta_matrix(2)
    assert np.allclose(th @ th, -np.eye(4))
    assert np.allclose(a @ th @ a.conj().T, 0)


@given(complex_matrices(3))
def test_psd_project_is_psd_and_idempotent(m):
    p, _ = psd_project(m)
    assert psd_check(p, 1e-9 * max(1.0, np.linalg.norm(p)))
    p2, clipped = psd_project(p)
    assert np.allclose(p, p2, atol=1e-9 * max(1.0, np.linalg.norm(p)))


@given(complex_matrices(3))
def test_gram_matrices_pass_psd_check(v):
    g = v @ v.conj().T
    assert psd_check(g, 1e-10 * max(1.0, np.linalg.norm(g)))
    assert hermitian_part_check(g, 1e-10 * max(1.0, np.linalg.norm(g)))


def test_psd_check_rejects():
    assert not psd_check(np.diag([1.0, -0.1]))
    assert not psd_check(np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        psd_check(np.ones((2, 3)))
    with pytest.raises(ValueError):
        hermitian_part_check(np.ones(3))


def test_numerical_rank():
    assert numerical_rank(np.zeros((2, 2))) == 0
    assert numerical_rank(np.diag([1.0, 1e-9])) == 1
    assert numerical_rank(np.eye(3)) == 3


def test_grid_basics():
    g = unit_grid(4)
    assert g.h == 0.25
    assert np.allclose(g.nodes, [0, 0.25, 0.5, 0.75, 1.0])
    assert np.isclose(g.trapezoid_weights().sum(), 1.0)
    s = symmetric_grid(6)
    assert s.is_symmetric() and not g.is_symmetric()
    assert np.array_equal(s.nodes, -s.nodes[::-1])
    with pytest.raises(ValueError):
        UniformGrid(0, 1, 1)
    with pytest.raises(ValueError):
        UniformGrid(1, 0, 4)


@given(st.integers(2, 400))
def test_symmetric_grid_nodes_pair_exactly(n):
    x = symmetric_grid(n).nodes
    assert np.array_equal(x, -x[::-1])


@given(st.integers(2, 64), st.floats(0, 1))
def test_interpolation_is_exact_for_linear_functions(n, x):
    g = unit_grid(n)
    samples = (2.0 - 3.0j * g.nodes)[:, None, None] * np.eye(2)
    val = interpolate_samples(g, samples, x)
    assert np.allclose(val, (2.0 - 3.0j * x) * np.eye(2))


def test_interpolation_hits_nodes_and_clamps():
    g = unit_grid(8)
    s = np.exp(g.nodes)[:, None, None]
    assert np.array_equal(interpolate_samples(g, s, g.nodes), s)
    assert np.allclose(interpolate_samples(g, s, [-1.0, 2.0])[:, 0, 0], [1.0, np.e])


def test_trapezoid_row_weights():
    w = trapezoid_row_weights(4, 0.25)
    assert np.all(w[0] == 0)
    assert np.allclose(w.sum(axis=1), unit_grid(4).nodes)
    assert np.all(np.triu(w, 1) == 0)


def test_potential_validation_and_norm():
    q = Potential.from_function(lambda x: np.array([[1.0, 0], [0, 1j]]), 2, 16)
    assert np.isclose(q.l2_norm(), np.sqrt(2))
    assert not q.is_trivial
    assert Potential.zero(2, 4).is_trivial
    with pytest.raises(ValueError):
        Potential(1, unit_grid(4), np.zeros((4, 1, 1)))
    with pytest.raises(ValueError):
        Potential(1, unit_grid(4), np.full((5, 1, 1), np.nan))
    with pytest.raises(ValueError):
        q.samples[0, 0, 0] = 1.0


def test_potential_block_is_hermitian():
    q = Potential.from_function(lambda x: np.array([[x, 1j], [2.0, -x * 1j]]), 2, 8)
    b = q.block(0.3)
    assert b.shape == (4, 4)
    assert np.allclose(b, b.conj().T)
    assert np.allclose(b[:2, :2], 0) and np.allclose(b[:2, 2:], q.at(0.3))


def test_triangular_kernel_zero_above_diagonal_and_apply():
    g = unit_grid(8)
    k = TriangularKernel(g, np.ones((9, 9, 1, 1)))
    assert np.all(np.triu(k.samples[:, :, 0, 0], 1) == 0)
    # int_0^x 1 * 1 ds = x (trapezoid exact)
    out = kernel_apply(k, np.ones((9, 1)))
    assert np.allclose(out[:, 0], g.nodes)
    with pytest.raises(GridMismatch):
        kernel_apply(k, np.ones((5, 1)))
    with pytest.raises(GridMismatch):
        kernel_apply(k, np.ones((9, 1)), grid=unit_grid(4))
    with pytest.raises(ValueError):
        TriangularKernel(g, np.ones((9, 8, 1, 1)))


def test_weighted_matrix_matches_apply():
    g = unit_grid(6)
    rng = np.random.default_rng(1)
    k = TriangularKernel(g, rng.standard_normal((7, 7, 2, 2)))
    f = rng.standard_normal((7, 2))
    assert np.allclose(k.weighted_matrix() @ f.ravel(), kernel_apply(k, f).ravel())
