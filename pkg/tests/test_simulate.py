"""Samplers: exactness of the embeddings, sigma models, the convolution scheme."""

import math

import numpy as np
import pytest

from bsslab.errors import ConfigurationError, DataError, DomainError, NumericError
from bsslab.gaussian import rho_k
from bsslab.kernel import KernelSpec, kernel_autocovariance, tau_k, variogram
from bsslab.simulate import (
    SeriesGrid,
    SigmaModel,
    _CirculantSampler,
    bss_filter_variance,
    simulate_bss,
    simulate_fbm,
    simulate_gaussian_core,
    simulate_sigma,
)
SPEC16 = KernelSpec(alpha=-1 / 6, lam=1.0)


def test_series_grid_validation():
    with pytest.raises(DataError):
        SeriesGrid(np.array([1.0, np.nan]), 1.0)
    with pytest.raises(DataError):
        SeriesGrid(np.array([1.0]), 0.0)
    with pytest.raises(DataError):
        SeriesGrid(np.empty(0), 1.0)


def test_fbm_white_noise_case():
    s = simulate_fbm(0.5, 4096, 1.0, seed=1)
    inc = np.diff(s.values)
    r1 = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(r1) < 3 / math.sqrt(4096)


def test_fbm_increment_correlation_matches_rho():
    s = simulate_fbm(0.3, 2**16, 1.0, seed=2)
    inc = np.diff(s.values)
    r1 = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(r1 - rho_k(0.3, 1, 1)) < 0.02


def test_fbm_variance_self_similarity():
    H, d = 0.3, 0.01
    vals = [float(np.mean(np.diff(simulate_fbm(H, 64, d, seed=i).values) ** 2))
            for i in range(500)]
    assert np.mean(vals) == pytest.approx(d ** (2 * H), rel=0.05)


def test_seed_determinism():
    for make in (
        lambda sd: simulate_fbm(0.7, 64, 0.1, sd),
        lambda sd: simulate_gaussian_core(SPEC16, 64, 0.1, sd),
        lambda sd: simulate_sigma(SigmaModel(kind="exp-ou"), 64, 0.1, sd),
        lambda sd: simulate_bss(SPEC16, SigmaModel(), 64, 0.1, seed=sd),
    ):
        assert np.array_equal(make(9).values, make(9).values)
        assert not np.array_equal(make(9).values, make(10).values)


def test_core_second_order_statistics(samplers):
    n, delta = 2**14, 1 / 4096.0
    samp = samplers["core"](SPEC16.alpha, SPEC16.lam, n, delta)
    sq, dsq = [], []
    for seed in range(300):
        v = samp.sample(seed).values
        sq.append(float(np.mean(v**2)))
        dsq.append(float(np.mean(np.diff(v) ** 2)))
    c0 = kernel_autocovariance(SPEC16, 0.0)
    assert np.mean(sq) == pytest.approx(c0, rel=0.03)
    assert np.mean(dsq) == pytest.approx(variogram(SPEC16, delta), rel=0.03)


def test_core_increment_autocorrelation_matches_rho(samplers):
    # r_{k,n}(j) of the simulated core approaches rho_k(j) of fBm at H=a+1/2
    n, delta = 2**16, 1 / 4096.0
    samp = samplers["core"](SPEC16.alpha, SPEC16.lam, n, delta)
    H = SPEC16.alpha + 0.5
    v = samp.sample(123).values
    d2 = v[2:] - 2 * v[1:-1] + v[:-2]
    for j in (1, 2, 3):
        emp = float(np.corrcoef(d2[:-j], d2[j:])[0, 1])
        assert abs(emp - rho_k(H, 2, j)) < 0.03
    # fBm comparison path
    f = simulate_fbm(H, n, delta, seed=12)
    d2f = np.diff(f.values, 2)
    for j in (1, 2):
        emp = float(np.corrcoef(d2f[:-j], d2f[j:])[0, 1])
        assert abs(emp - rho_k(H, 2, j)) < 0.03


def test_circulant_rejects_non_embeddable():
    def bogus_cov(m):
        j = np.arange(m, dtype=float)
        return (-1.0) ** j * (1.0 + j)

    with pytest.raises(NumericError):
        _CirculantSampler(bogus_cov, 32, max_doublings=2)


def test_sigma_constant():
    s = simulate_sigma(SigmaModel(kind="constant", level=1.0), 100, 0.1, 3)
    assert np.all(s.values == 1.0)
    with pytest.raises(DomainError):
        SigmaModel(kind="constant", level=0.0)
    with pytest.raises(ConfigurationError):
        SigmaModel(kind="bogus")


def test_sigma_exp_ou_stationary_mean():
    theta, vol, level = 1.0, 0.5, 2.0
    model = SigmaModel(kind="exp-ou", level=level, volvol=vol, mean_reversion=theta)
    n, delta = 2**16, 1 / 256.0
    s = simulate_sigma(model, n, delta, seed=3)
    assert np.all(s.values > 0)
    mean_log = float(np.mean(np.log(s.values)))
    horizon = n * delta
    se = vol / (theta * math.sqrt(horizon))  # path-mean std of the OU
    assert abs(mean_log - math.log(level)) < 3 * se
    assert model.holder_gamma == 0.5 and model.clt_marginal


def test_sigma_smooth_variant_is_c1_like():
    model = SigmaModel(kind="smooth-exp-ou", level=1.0, volvol=0.5, mean_reversion=1.0)
    delta = 1 / 512.0
    s = simulate_sigma(model, 2**14, delta, seed=4)
    rough = simulate_sigma(SigmaModel(kind="exp-ou", level=1.0, volvol=0.5,
                                      mean_reversion=1.0), 2**14, delta, seed=4)
    slope = np.max(np.abs(np.diff(s.values))) / delta
    slope_rough = np.max(np.abs(np.diff(rough.values))) / delta
    assert slope < 0.2 * slope_rough  # smoothing tames the derivative
    assert model.holder_gamma == 1.0 and not model.clt_marginal


def test_bss_increment_variance(samplers):
    n, delta = 2**12, 1 / 4096.0
    target = variogram(SPEC16, delta)
    vals = []
    for seed in range(200):
        s = simulate_bss(SPEC16, SigmaModel(), n, delta, oversample=16, seed=seed)
        vals.append(float(np.mean(np.diff(s.values) ** 2)))
    assert np.mean(vals) == pytest.approx(target, rel=0.05)


def test_bss_filter_variance_bias_shrinks_with_oversample():
    for k in (1, 2):
        target = tau_k(SPEC16, k, 1 / 4096.0) ** 2
        biases = [
            abs(bss_filter_variance(SPEC16, 1 / 4096.0, o, k=k) / target - 1.0)
            for o in (2, 4, 8, 16, 32)
        ]
        assert all(b2 <= b1 for b1, b2 in zip(biases, biases[1:]))
        assert biases[-1] < 0.01


def test_bss_linearity_in_constant_sigma():
    x1 = simulate_bss(SPEC16, SigmaModel(level=1.0), 128, 0.01, seed=5).values
    x2 = simulate_bss(SPEC16, SigmaModel(level=2.0), 128, 0.01, seed=5).values
    assert np.allclose(x2, 2 * x1, rtol=0, atol=1e-12)


def test_bss_burn_in_validation():
    with pytest.raises(ConfigurationError):
        simulate_bss(SPEC16, SigmaModel(), 64, 0.01, burn_in=1.0, seed=1)
    # a sufficient burn-in passes
    simulate_bss(SPEC16, SigmaModel(), 64, 0.01, burn_in=8.0, seed=1)


def test_bss_lln_smoke():
    # V-bar(X, 2, 2, 1)_1 ~ m_2 * 1 for sigma == 1
    from bsslab.variation import normalized_pv

    n, delta = 4097, 1 / 4096.0
    tau = tau_k(SPEC16, 2, delta)
    vals = []
    for seed in range(100):
        s = simulate_bss(SPEC16, SigmaModel(), n, delta, oversample=16, seed=seed)
        vals.append(normalized_pv(s, 2.0, 2, 1, tau=tau).normalized)
    assert np.mean(vals) == pytest.approx(1.0, rel=0.05)


def test_bss_with_sigma_returns_matching_grids():
    model = SigmaModel(kind="exp-ou", level=1.0, volvol=0.3, mean_reversion=2.0)
    series, sigma = simulate_bss(SPEC16, model, 256, 0.01, seed=6, with_sigma=True)
    assert len(series) == len(sigma) == 256
    assert sigma.delta == series.delta
    assert np.all(sigma.values > 0)
