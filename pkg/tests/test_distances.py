import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from chaoslab.distances import (
    EmpiricalSample,
    freedman_diaconis_bins,
    kolmogorov,
    kolmogorov_two_sample,
    tv_discrete,
    tv_hist,
    wasserstein1,
)
from chaoslab.errors import DomainError, ShapeError


def test_kolmogorov_single_point():
    assert kolmogorov([0.5], stats.uniform()) == pytest.approx(0.5)
    assert kolmogorov([0.2], stats.uniform().cdf) == pytest.approx(0.8)


@given(st.integers(0, 10_000), st.integers(1, 300))
def test_kolmogorov_matches_scipy(seed, size):
    x = np.random.default_rng(seed).standard_normal(size)
    ref = stats.kstest(x, "norm").statistic
    assert kolmogorov(x, stats.norm()) == pytest.approx(ref, abs=1e-12)


def test_two_sample():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal(500), rng.standard_normal(700) + 0.3
    assert kolmogorov_two_sample(a, b) == pytest.approx(kolmogorov_two_sample(b, a))
    assert kolmogorov_two_sample(a, a) == 0.0


@given(st.integers(0, 10_000), st.integers(1, 200))
def test_wasserstein_sample_mode_matches_scipy(seed, size):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(size), rng.exponential(size=size)
    assert wasserstein1(a, b) == pytest.approx(stats.wasserstein_distance(a, b), rel=1e-10, abs=1e-12)


def test_wasserstein_reference_mode():
    u = (np.arange(10_000) + 0.5) / 10_000
    q = stats.norm.ppf(u)
    assert wasserstein1(q, stats.norm()) == pytest.approx(0.0, abs=1e-12)
    assert wasserstein1(q + 0.25, stats.norm()) == pytest.approx(0.25, abs=1e-12)


def test_wasserstein_size_mismatch():
    with pytest.raises(ShapeError):
        wasserstein1([1.0, 2.0], [1.0])


def test_tv_hist_detects_shift():
    rng = np.random.default_rng(2)
    same = tv_hist(rng.standard_normal(200_000), stats.norm())
    shifted = tv_hist(rng.standard_normal(200_000) + 1.0, stats.norm())
    true_tv = 2 * stats.norm.cdf(0.5) - 1
    assert same < 0.02
    assert shifted == pytest.approx(true_tv, abs=0.03)


def test_tv_hist_density_only_reference():
    x = np.random.default_rng(3).standard_normal(100_000)
    assert tv_hist(x, stats.norm.pdf) == pytest.approx(tv_hist(x, stats.norm()), abs=1e-6)


def test_tv_discrete_exact():
    x = np.array([0, 0, 1, 3])
    pmf = lambda k: np.where(k == 0, 0.5, np.where(k == 1, 0.5, 0.0))
    # empirical (0.5, 0.25, 0, 0.25) vs (0.5, 0.5)
    assert tv_discrete(x, pmf) == pytest.approx(0.25)
    with pytest.raises(DomainError):
        tv_discrete([0.5], pmf)


def test_bins_are_clamped():
    assert freedman_diaconis_bins(np.zeros(10)) == 16
    assert freedman_diaconis_bins(np.random.default_rng(0).standard_normal(10**6)) <= 512


def test_empirical_sample_sorted_and_frozen():
    s = EmpiricalSample([3.0, 1.0, 2.0])
    assert list(s.values) == [1.0, 2.0, 3.0]
    with pytest.raises(ValueError):
        s.values[0] = 0.0
    with pytest.raises(DomainError):
        EmpiricalSample([])
