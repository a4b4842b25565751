import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import toeplitz

from chaoslab.errors import DivergenceError, DomainError, EmbeddingError, PrecisionError
from chaoslab.experiments import exact_rate_prediction, toeplitz_cumulants
from chaoslab.gaussproc import (
    CirculantEmbedding,
    CovSeq,
    fbm_rho,
    finite_n_variance,
    rho_conv_inner,
    rho_convolve,
    rho_power_sum,
    sample_stationary,
    sigma_n_sq_exact,
)
from chaoslab.rng import make_rng

# 30-digit evaluations of the closed form at H = 0.3
RHO_1000 = -7.57149025378005362896389343877e-06
RHO_12345 = -2.24436617537344549805988630410e-07
# sum over Z of rho^2 at H = 0.3 (direct sum to 3000 plus Hurwitz-zeta tail)
NORM2_H03 = 1.12519550536131301321876740897


def test_rho_basic_values():
    assert fbm_rho(0.3, 0) == 1.0
    assert fbm_rho(0.5, np.arange(1, 50)) == pytest.approx(np.zeros(49), abs=1e-15)
    assert fbm_rho(0.3, 1) == pytest.approx(0.5 * (2**0.6 - 2))


def test_rho_large_lags_against_high_precision():
    assert fbm_rho(0.3, 1000) == pytest.approx(RHO_1000, rel=1e-12)
    assert fbm_rho(0.3, 12345) == pytest.approx(RHO_12345, rel=1e-12)


@given(st.floats(0.05, 0.95), st.integers(10, 10**6))
def test_rho_series_continuity_and_asymptotics(H, r):
    direct_near = fbm_rho(H, 9)
    assert abs(direct_near) <= 1
    v = fbm_rho(H, r)
    c = H * (2 * H - 1) * r ** (2 * H - 2)
    if H != 0.5:
        assert v == pytest.approx(c, rel=2.0 / r**2 + 1e-12)


def test_rho_switch_point_is_smooth():
    for H in (0.2, 0.3, 0.7, 0.9):
        a, b, c = fbm_rho(H, [9.0, 10.0, 11.0])
        # consecutive ratios close to (r/(r+1))^{2-2H}
        assert b / a == pytest.approx((9 / 10) ** (2 - 2 * H), rel=0.05)
        assert c / b == pytest.approx((10 / 11) ** (2 - 2 * H), rel=0.05)


def test_hurst_domain():
    with pytest.raises(DomainError):
        CovSeq.fbm(1.0)
    with pytest.raises(DomainError):
        fbm_rho(0.0, 1)


def test_power_sum_against_oracle():
    v, tail = rho_power_sum(CovSeq.fbm(0.3), 2)
    assert v == pytest.approx(NORM2_H03, abs=tail * 1.5 + 1e-13)
    assert abs(v - NORM2_H03) > 0.2 * tail  # the tail estimate has the right size
    v2, _ = rho_power_sum(CovSeq.fbm(0.3), 2, K=200_000)
    assert v2 == pytest.approx(v, abs=1e-6)


def test_power_sum_divergence():
    with pytest.raises(DivergenceError):
        rho_power_sum(CovSeq.fbm(0.8), 2)
    with pytest.raises(DivergenceError):
        rho_power_sum(CovSeq.fbm(0.75), 2)
    v, tail = rho_power_sum(CovSeq.fbm(0.8), 2, K=1000, override=True)
    assert math.isinf(tail)
    rho_power_sum(CovSeq.fbm(0.8), 3)  # 3(2H-2) < -1


def test_white_and_table_sums():
    assert rho_power_sum(CovSeq.white(), 4) == (1.0, 0.0)
    t = CovSeq.from_table([1.0, 0.5, 0.25])
    assert rho_power_sum(t, 2)[0] == pytest.approx(1 + 2 * (0.25 + 0.0625))


@given(st.integers(2, 60), st.floats(0.05, 0.95))
def test_sigma_n_sq_matches_frobenius(n, H):
    rho = CovSeq.fbm(H)
    T = toeplitz(rho(np.arange(n)))
    assert sigma_n_sq_exact(rho, n) == pytest.approx(2 * np.sum(T * T), rel=1e-11)


def test_sigma_n_sq_white():
    assert sigma_n_sq_exact(CovSeq.fbm(0.5), 100) == pytest.approx(200.0)


def test_finite_n_variance_matches_direct():
    rho = CovSeq.fbm(0.3)
    n = 40
    T = toeplitz(rho(np.arange(n)))
    coeffs = (0.0, 0.7, 0.4, 0.2)
    ref = sum(math.factorial(q) * a * a * np.sum(T**q) for q, a in enumerate(coeffs) if q) / n
    assert finite_n_variance(coeffs, rho, n) == pytest.approx(ref, rel=1e-12)


def test_embedding_reproduces_covariance_exactly():
    rho = CovSeq.fbm(0.3)
    emb = CirculantEmbedding.build(rho, 64)
    eig = (emb.sqrt_eig**2) * 128
    row = np.fft.ifft(eig).real
    assert np.allclose(row[:64], rho(np.arange(64)), atol=1e-13)
    assert not emb.clipped


def test_embedding_sample_covariance():
    rho = CovSeq.fbm(0.7)
    emb = CirculantEmbedding.build(rho, 16)
    x = emb.draw(make_rng(3), 40_000)
    emp = np.array([np.mean(x[:, 0] * x[:, k]) for k in range(5)])
    assert emp == pytest.approx(rho(np.arange(5)), abs=0.03)


def test_embedding_error():
    with pytest.raises(EmbeddingError):
        CirculantEmbedding.build(CovSeq.from_table([1.0, 0.5, -0.8]), 2)


def test_sample_stationary_is_reproducible():
    a, meta = sample_stationary(CovSeq.fbm(0.4), 100, 11)
    b, _ = sample_stationary(CovSeq.fbm(0.4), 100, 11)
    assert np.array_equal(a, b)
    assert meta["seed"] == 11 and meta["generator_id"] == "philox4x64"


def test_convolution_of_table_matches_numpy():
    tab = [1.0, 0.4, -0.2, 0.05]
    rho = CovSeq.from_table(tab)
    full = np.array(tab[:0:-1] + tab)
    ref = np.convolve(full, full)
    conv = rho_convolve(rho, 2, W=32)
    c = len(ref) // 2
    for j in range(-6, 7):
        assert conv(j) == pytest.approx(ref[c + j], abs=1e-13)
    assert rho_conv_inner(rho, 2, W=32) == pytest.approx(np.dot(ref[c - 3 : c + 4], full), rel=1e-12)


def test_convolution_white_noise():
    assert rho_conv_inner(CovSeq.fbm(0.5), 3, W=64) == pytest.approx(1.0)


def test_convolution_precision_error():
    with pytest.raises(PrecisionError):
        rho_convolve(CovSeq.fbm(0.45), 2, W=64)
    with pytest.raises(DivergenceError):
        rho_convolve(CovSeq.fbm(0.7), 2)


def test_convolution_sums_match_finite_n_cumulants():
    # sqrt(n) kappa_3(F_n) and n kappa_4(F_n) approach their convolution-sum limits at rate 1/n
    pred = exact_rate_prediction(0.3)
    assert pred["norm_sq"] == pytest.approx(NORM2_H03, rel=1e-9)
    n = 2048
    k = toeplitz_cumulants(CovSeq.fbm(0.3), n)
    assert math.sqrt(n) * k[3] == pytest.approx(pred["sqrt_n_kappa3_limit"], rel=1e-4)
    assert n * k[4] == pytest.approx(pred["n_kappa4_limit"], rel=1e-4)
