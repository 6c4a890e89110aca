import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from diracinv.core import Potential  # noqa: E402
from diracinv.direct import CharacteristicEvaluator, spectral_data  # noqa: E402



def random_potential(r, seed, n=128, amplitude=1.0):
    rng = np.random.default_rng(seed)
    coef = rng.standard_normal((3, 2, r, r)) + 1j * rng.standard_normal((3, 2, r, r))

    def f(x):
        k = np.arange(3)[:, None, None]
        return amplitude * np.sum(coef[:, 0] * np.cos(np.pi * k * x) + coef[:, 1] * np.sin(np.pi * k * x), axis=0) / 3

    return Potential.from_function(f, r, n)


def random_hermitian_lags(r, n, h, seed, scale=0.4):
    """Samples of H(x) = sum_k e^{i w_k x} P_k with P_k Hermitian PSD: a positive definite kernel."""
    rng = np.random.default_rng(seed)
    lags = np.arange(-n, n + 1) * h
    out = np.zeros((2 * n + 1, r, r), dtype=complex)
    for _ in range(4):
        v = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
        p = v @ v.conj().T / r
        w = rng.uniform(-8, 8)
        out += scale / 4 * np.exp(1j * w * lags)[:, None, None] * p
    return out


@pytest.fixture(scope="session")
def sine_potential():
    return Potential.from_function(lambda x: 0.5 * np.sin(np.pi * x) * np.eye(1), 1, 512)


@pytest.fixture(scope="session")
def sine_data(sine_potential):
    return spectral_data(CharacteristicEvaluator(sine_potential, 2048), 60)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
