import numpy as np
import pytest
from hypothesis import given, strategies as st

from diracinv.spectra import (
    A1Bounds,
    EigenRecord,
    SpectralData,
    check_a1,
    check_a2,
    measure_nodes,
    window_index,
    window_stats,
    window_upper,
)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_window_contains_point(lam):
    n = window_index(lam)
    assert window_upper(n - 1) < lam <= window_upper(n)


@given(st.integers(-500, 500))
def test_windows_are_right_closed(n):
    assert window_index(window_upper(n)) == n
    assert window_index(np.nextafter(window_upper(n), np.inf)) == n + 1
    assert window_index(np.pi * n) == n


def test_eigen_record_validation():
    rec = EigenRecord(1.0, np.diag([1.0, 0.0]))
    assert rec.multiplicity == 1 and rec.window == 0
    assert EigenRecord(0.0, np.eye(3)).multiplicity == 3
    with pytest.raises(ValueError):
        EigenRecord(0.0, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        EigenRecord(0.0, np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        EigenRecord(0.0, np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        EigenRecord(np.nan, np.eye(1))
    with pytest.raises(ValueError):
        EigenRecord(0.0, np.ones((1, 2)))


def test_spectral_data_sorted_and_distinct():
    d = SpectralData.from_arrays([3.0, -1.0, 0.5], np.ones((3, 1, 1)), 1)
    assert np.array_equal(d.lambdas, [-1.0, 0.5, 3.0])
    assert d.zero_index == 0
    assert list(d.labels()) == [0, 1, 2]
    with pytest.raises(ValueError):
        SpectralData.from_arrays([1.0, 1.0], np.ones((2, 1, 1)), 1)
    with pytest.raises(ValueError):
        SpectralData(2, (EigenRecord(0.0, np.eye(1)),), 1)
    with pytest.raises(ValueError):
        SpectralData(1, (), -1)


def test_free_data_and_truncation():
    d = SpectralData.free(2, 5)
    assert len(d) == 11
    assert np.allclose(d.lambdas, np.pi * np.arange(-5, 6))
    t = d.truncated(2)
    assert len(t) == 5 and t.n_max == 2
    with pytest.raises(ValueError):
        d.truncated(6)
    s = d.summary()
    assert s["records"] == 11 and s["r"] == 2
    assert len(measure_nodes(d)) == 11


@given(st.integers(1, 3), st.integers(0, 12))
def test_free_data_pass_a1_a2(r, n_max):
    d = SpectralData.free(r, n_max)
    a1 = check_a1(d)
    assert a1.passed and a1.sup_count == 1 and a1.sum_beta2 == 0 and a1.sum_dev2 == 0
    a2 = check_a2(d)
    assert a2.passed and a2.n0 == 0
    assert list(a2.per_n_counts) == [(2 * k + 1) * r for k in range(n_max + 1)]


def test_window_stats_beta_and_dev():
    recs = [EigenRecord(np.pi + 0.1, 0.4 * np.eye(1)), EigenRecord(np.pi - 0.2, 0.5 * np.eye(1)),
            EigenRecord(0.0, np.eye(1))]
    stats = {s.n: s for s in window_stats(SpectralData(1, tuple(recs), 1))}
    assert stats[1].count == 2 and np.isclose(stats[1].beta[0, 0], 0.1)
    assert np.isclose(stats[1].dev2, 0.05)
    assert stats[-1].count == 0 and np.isclose(stats[-1].beta[0, 0], 1.0)


def test_a1_defaults_and_parse():
    assert A1Bounds().resolved(2) == (3, 10.0, 1.0)
    b = A1Bounds.parse("4, auto, 2.5")
    assert b.resolved(1) == (4.0, 10.0, 2.5)
    assert A1Bounds.parse(",,").resolved(1) == (2, 10.0, 0.5)
    with pytest.raises(ValueError):
        A1Bounds.parse("1,2")


def test_scaled_alpha_trips_a1_and_dropped_record_trips_a2():
    d = SpectralData.free(1, 20)
    recs = list(d.records)
    recs[25] = EigenRecord(recs[25].lam, 2 * recs[25].alpha)
    bad = d.replace(recs)
    rep = check_a1(bad)
    assert not rep.passed and np.isclose(rep.sum_beta2, 1.0)
    assert check_a2(bad).passed
    dropped = d.replace(recs[:10] + recs[11:])
    a2 = check_a2(dropped)
    assert not a2.passed and a2.per_n_counts[-1] == 40
    assert a2.to_dict()["pass"] is False


def test_a2_reports_first_stable_n():
    # an extra record in window 0 only breaks counts; a missing one in window 2 is compensated in window 3
    d = SpectralData.free(1, 5)
    recs = [r for r in d.records if r.window != 2]
    recs.append(EigenRecord(3 * np.pi + 0.3, np.eye(1)))
    a2 = check_a2(SpectralData(1, tuple(recs), 5))
    assert a2.passed and a2.n0 == 3
