import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wishart_cpc import (
    SampleMatrix,
    centered_scatter,
    make_rng,
    prefix_scatter,
    sample_gaussian,
    sandwich_expectation,
    scatter,
    wishart_quadratic_mean,
    wishart_trace_weighted_mean,
)
from wishart_cpc.exceptions import InsufficientDataError, InvalidParameterError


def test_sample_covariance_near_identity():
    s = sample_gaussian(10**5, np.eye(2), seed=4)
    x = s.rows
    prods = x[:, :, None] * x[:, None, :]
    mean = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / np.sqrt(s.n)
    assert np.all(np.abs(mean - np.eye(2)) <= 4 * se)


def test_sample_variance_diag():
    x = sample_gaussian(10**5, np.diag([4.0, 1.0]), seed=8).rows
    sq = x[:, 0] ** 2
    assert abs(sq.mean() - 4.0) <= 4 * sq.std(ddof=1) / np.sqrt(len(sq))


def test_single_row_reproducible():
    a = sample_gaussian(1, np.diag([2.0, 3.0]), seed=12, stream=3)
    b = sample_gaussian(1, np.diag([2.0, 3.0]), seed=12, stream=3)
    assert a.n == 1
    np.testing.assert_array_equal(a.rows, b.rows)


def test_streams_differ():
    a = make_rng(7, 0).standard_normal(4)
    b = make_rng(7, 1).standard_normal(4)
    assert not np.array_equal(a, b)


def test_rows_are_read_only():
    s = sample_gaussian(3, np.eye(2), seed=0)
    with pytest.raises(ValueError):
        s.rows[0, 0] = 1.0


def test_sample_rejects_bad_n():
    with pytest.raises((InvalidParameterError, InsufficientDataError, ValueError)):
        sample_gaussian(0, np.eye(2), seed=0)


# --------------------------------------------------------------- scatters

def test_scatter_single_basis_row():
    e = np.zeros((1, 4))
    e[0, 0] = 1.0
    t = scatter(e)
    expected = np.zeros((4, 4))
    expected[0, 0] = 1.0
    np.testing.assert_array_equal(np.asarray(t), expected)


def test_scatter_of_basis_is_identity():
    t = scatter(np.eye(5))
    np.testing.assert_array_equal(np.asarray(t), np.eye(5))
    assert t.df == 5 and not t.centered


def test_centered_scatter_examples():
    t = centered_scatter(np.array([[1.0, 2.0], [1.0, 2.0]]))
    np.testing.assert_array_equal(np.asarray(t), np.zeros((2, 2)))
    assert t.df == 1 and t.centered
    t = centered_scatter(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    np.testing.assert_array_equal(np.asarray(t), [[2.0, 0.0], [0.0, 0.0]])


def test_centered_scatter_needs_two_rows():
    with pytest.raises(InsufficientDataError):
        centered_scatter(np.ones((1, 3)))


def _mc_scatter_mean(fn, n, sigma, reps, seed):
    rng = np.random.default_rng(seed)
    L = np.linalg.cholesky(sigma)
    draws = np.array([np.asarray(fn(rng.standard_normal((n, len(sigma))) @ L.T)) for _ in range(reps)])
    return draws.mean(axis=0), draws.std(axis=0, ddof=1) / np.sqrt(reps)


def test_scatter_mean_is_n_sigma():
    sigma = np.diag([2.0, 1.0])
    mean, se = _mc_scatter_mean(scatter, 5, sigma, 10**4, 1)
    assert np.all(np.abs(mean - 5 * sigma) <= 4 * se + 1e-12)


def test_centered_scatter_mean_is_df_sigma():
    mean, se = _mc_scatter_mean(centered_scatter, 6, np.eye(2), 10**4, 2)
    assert np.all(np.abs(mean - 5 * np.eye(2)) <= 4 * se + 1e-12)


def test_prefix_scatter_ends():
    x = sample_gaussian(6, np.eye(3), seed=5)
    np.testing.assert_array_equal(np.asarray(prefix_scatter(x, 6)), np.asarray(scatter(x)))
    r = x.rows[0]
    np.testing.assert_allclose(np.asarray(prefix_scatter(x, 1)), np.outer(r, r))
    with pytest.raises(IndexError):
        prefix_scatter(x, 7)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(1, 5), st.integers(0, 2**31))
def test_prefix_scatter_telescopes(n, p, seed):
    x = np.random.default_rng(seed).standard_normal((n, p))
    for h in range(1, n + 1):
        prev = np.asarray(prefix_scatter(x, h - 1)) if h > 1 else np.zeros((p, p))
        diff = np.asarray(prefix_scatter(x, h)) - prev
        np.testing.assert_allclose(diff, np.outer(x[h - 1], x[h - 1]), atol=1e-12)


# ------------------------------------------------------ Wishart identities

def test_wishart_means_substitution():
    eye = np.eye(3)
    np.testing.assert_allclose(wishart_quadratic_mean(2, eye, eye), 12 * eye)
    np.testing.assert_allclose(wishart_trace_weighted_mean(2, eye, eye), 16 * eye)


def test_wishart_means_one_draw_equal_sandwich():
    rng = np.random.default_rng(3)
    g = rng.standard_normal((3, 3))
    sigma = g @ g.T + np.eye(3)
    a = rng.standard_normal((3, 3))
    np.testing.assert_allclose(wishart_quadratic_mean(1, sigma, a), sandwich_expectation(sigma, a))
    np.testing.assert_allclose(wishart_trace_weighted_mean(1, sigma, a), sandwich_expectation(sigma, a))


def test_samplematrix_take_and_shape():
    s = SampleMatrix(np.arange(12.0).reshape(4, 3), "x")
    sub = s.take([2, 0])
    assert (sub.n, sub.p) == (2, 3)
    np.testing.assert_array_equal(sub.rows, [[6, 7, 8], [0, 1, 2]])
    assert SampleMatrix(np.array([1.0, 2.0])).n == 1
