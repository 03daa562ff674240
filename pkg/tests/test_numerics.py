import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from ampc.errors import InvalidArgument, SamplingFailure, SingularMatrix
from ampc.numerics import (
    client_rng,
    normal_mass,
    roots_of_unity,
    sample_truncated_gaussian,
    std_normal_cdf,
    truncated_gaussian_array,
    truncated_gaussian_cdf,
    vandermonde_info,
)


def quad_cdf(x):
    """Oracle: integrate the standard normal density."""
    pdf = lambda u: math.exp(-u * u / 2) / math.sqrt(2 * math.pi)
    if x >= 0:
        return 0.5 + integrate.quad(pdf, 0, x, epsabs=1e-14)[0]
    return 0.5 - integrate.quad(pdf, x, 0, epsabs=1e-14)[0]


@pytest.mark.parametrize(
    "n, expected",
    [(1, [1]), (2, [-1, 1]), (4, [1j, -1, -1j, 1])],
)
def test_roots_of_unity_small(n, expected):
    got = [p.value for p in roots_of_unity(n)]
    assert np.allclose(got, expected, atol=1e-15)
    assert [p.index for p in roots_of_unity(n)] == list(range(1, n + 1))


def test_roots_of_unity_rejects_zero():
    with pytest.raises(InvalidArgument):
        roots_of_unity(0)


@pytest.mark.parametrize("n", range(1, 65))
def test_roots_on_unit_circle_and_last_is_one(n):
    pts = roots_of_unity(n)
    assert all(abs(abs(p.value) - 1) <= 1e-12 for p in pts)
    assert abs(pts[-1].value - 1) <= 1e-15
    assert np.allclose([p.value for p in pts], np.exp(2j * np.pi * np.arange(1, n + 1) / n), atol=1e-14)


@pytest.mark.parametrize("n", range(2, 33))
def test_power_sums_vanish(n):
    w = np.array([p.value for p in roots_of_unity(n)])
    for k in range(1, n):
        assert abs(np.mean(w**k)) <= 1e-12


@pytest.mark.parametrize("x, want, tol", [(0.0, 0.5, 0), (10.0, 1.0, 1e-12), (1.0, 0.841345, 1e-6)])
def test_cdf_known_values(x, want, tol):
    assert abs(std_normal_cdf(x) - want) <= tol


@pytest.mark.parametrize("x", [-8.0, -3.3, -1.0, -0.2, 0.4, 1.0, 2.5, 6.0])
def test_cdf_against_quadrature(x):
    assert abs(std_normal_cdf(x) - quad_cdf(x)) <= 1e-12


@given(st.floats(-40, 40))
def test_cdf_symmetry(x):
    assert abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1) <= 1e-12


def test_cdf_monotone_on_grid():
    grid = np.linspace(-12, 12, 20001)
    assert np.all(np.diff(std_normal_cdf(grid)) >= 0)


def test_normal_mass_deep_tail_keeps_precision():
    # mass of (9, 10): naive Phi(10) - Phi(9) rounds to 0
    want = stats.norm.sf(9) - stats.norm.sf(10)
    assert normal_mass(9.0, 10.0) == pytest.approx(want, rel=1e-10)
    assert normal_mass(-10.0, -9.0) == pytest.approx(want, rel=1e-10)


@given(st.floats(0.01, 100), st.floats(0.01, 100))
@settings(max_examples=50)
def test_truncated_sample_in_range(sigma, t):
    rng = np.random.default_rng(0)
    if 2 * stats.norm.cdf(t / sigma) - 1 < 1e-3:
        return  # rejection would be hopeless; covered by the failure test
    y = sample_truncated_gaussian(sigma, t, rng)
    assert -t <= y <= t


def test_truncated_variance_wide():
    y = truncated_gaussian_array(1.0, 10.0, 10**6, np.random.default_rng(1))
    assert abs(y.var() - 1.0) <= 0.01


def test_truncated_mean_narrow():
    y = truncated_gaussian_array(1.0, 0.5, 10**6, np.random.default_rng(2))
    assert np.all(np.abs(y) <= 0.5)
    assert abs(y.mean()) <= 0.002


@pytest.mark.parametrize("sigma, t", [(1.0, 0.5), (2.0, 3.0), (1.0, 10.0)])
def test_truncated_empirical_cdf(sigma, t):
    y = np.sort(truncated_gaussian_array(sigma, t, 10**6, np.random.default_rng(3)))
    ecdf = np.arange(1, y.size + 1) / y.size
    assert np.max(np.abs(ecdf - truncated_gaussian_cdf(y, sigma, t))) <= 0.005


def test_truncated_cdf_matches_scipy():
    x = np.linspace(-3, 3, 41)
    ref = stats.truncnorm.cdf(x, -1.5, 1.5, scale=2.0)
    assert np.allclose(truncated_gaussian_cdf(x, 2.0, 3.0), ref, atol=1e-12)


def test_sampler_gives_up_loudly():
    with pytest.raises(SamplingFailure) as err:
        sample_truncated_gaussian(1.0, 1e-9, np.random.default_rng(0))
    assert err.value.rejection_rate == 1.0
    with pytest.raises(SamplingFailure):
        truncated_gaussian_array(1.0, 1e-9, 5, np.random.default_rng(0))


@pytest.mark.parametrize("bad", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
def test_sampler_rejects_nonpositive(bad):
    with pytest.raises(InvalidArgument):
        sample_truncated_gaussian(*bad, np.random.default_rng(0))


def svd_oracle(values, T):
    G = np.array([[v**c for c in range(T + 1)] for v in values])
    s = np.linalg.svd(G, compute_uv=False)
    return s.min(), s.max() / s.min()


def test_vandermonde_two_points():
    info = vandermonde_info(roots_of_unity(2), 1)
    assert np.allclose(info.matrix, [[1, -1], [1, 1]])
    assert info.min_singular == pytest.approx(math.sqrt(2))
    assert info.condition_number == pytest.approx(1.0)


def test_vandermonde_three_points():
    info = vandermonde_info(roots_of_unity(3), 2)
    lam, kappa = svd_oracle([p.value for p in roots_of_unity(3)], 2)
    assert info.min_singular == pytest.approx(math.sqrt(3), abs=1e-12)
    assert info.min_singular == pytest.approx(lam, abs=1e-12)
    assert info.condition_number == pytest.approx(kappa, abs=1e-12)


def test_vandermonde_partial_set():
    pts = roots_of_unity(3)[:2]
    info = vandermonde_info(pts, 1)
    _, kappa = svd_oracle([p.value for p in pts], 1)
    assert info.condition_number >= 1
    assert info.condition_number == pytest.approx(kappa)


@pytest.mark.parametrize("N", range(2, 17))
def test_full_root_set_perfectly_conditioned(N):
    info = vandermonde_info(roots_of_unity(N), N - 1)
    assert abs(info.condition_number - 1) <= 1e-9
    assert info.min_singular == pytest.approx(math.sqrt(N))


def test_vandermonde_duplicates():
    p = roots_of_unity(4)
    with pytest.raises(SingularMatrix):
        vandermonde_info([p[0], p[0]], 1)


def test_client_streams_reproducible_and_distinct():
    a = client_rng(7, 1, 2).normal(size=5)
    assert np.array_equal(a, client_rng(7, 1, 2).normal(size=5))
    assert not np.array_equal(a, client_rng(7, 1, 3).normal(size=5))
    assert not np.array_equal(a, client_rng(8, 1, 2).normal(size=5))
