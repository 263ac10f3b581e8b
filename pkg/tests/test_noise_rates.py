import warnings

import numpy as np
import pytest
import scipy.constants as sc
from scipy.special import ndtr

from josephson_decoherence import noise_rates as nr

UM2 = 1e-12


def gaussian(x, m, s):
    return np.exp(-(x - m) ** 2 / (2 * s ** 2)) / np.sqrt(2 * np.pi * s ** 2)


def exp_kernel_gaussian_overlap(m, s, lam):
    """E[exp(-|Y|/lam)] for Y ~ N(m, s^2) (difference of two Gaussian positions)."""
    a = np.exp(s ** 2 / (2 * lam ** 2))
    return a * (np.exp(-m / lam) * ndtr((m - s ** 2 / lam) / s)
                + np.exp(m / lam) * ndtr((-m - s ** 2 / lam) / s))


def test_noise_model_validation():
    with pytest.raises(ValueError):
        nr.NoiseModel("white")
    with pytest.raises(ValueError):
        nr.NoiseModel("flat_spectrum", B_pp=-1.0)
    with pytest.raises(ValueError):
        nr.NoiseModel("johnson_exp_corr", lambda_c=0.0)


def test_technical_slope_closed_form():
    m = nr.NoiseModel("technical_slope", eta=3e-50)
    d = 5e-6
    assert nr.dephasing_rate(m, d=d) == pytest.approx(0.5 * (d / sc.hbar) ** 2 * 3e-50, rel=1e-14)
    with pytest.raises(ValueError):
        nr.dephasing_rate(m)


def test_flat_spectrum_does_not_dephase():
    assert nr.dephasing_rate(nr.NoiseModel("flat_spectrum", B_pp=1e-20)) == 0.0


def test_overlaps_match_gaussian_oracle():
    d, s, lam = 5e-6, 0.4e-6, 1.5e-6
    x = np.linspace(-12e-6, 12e-6, 3001)
    rL, rR = gaussian(x, -d / 2, s), gaussian(x, d / 2, s)
    aLL, aRR, aLR = nr.exp_kernel_overlaps(x, rL, rR, lam)
    sd = np.sqrt(2) * s
    assert aLL == pytest.approx(exp_kernel_gaussian_overlap(0.0, sd, lam), rel=1e-4)
    assert aRR == pytest.approx(aLL, rel=1e-10)
    assert aLR == pytest.approx(exp_kernel_gaussian_overlap(d, sd, lam), rel=1e-4)


def test_short_correlation_suppresses_cross_overlap():
    d = 5e-6
    lam = d / 10
    s = lam / 1000
    x = np.linspace(-2.6e-6, 2.6e-6, 26001)     # dx = 0.4 sigma, kernel built on the supports only
    rL, rR = gaussian(x, -d / 2, s), gaussian(x, d / 2, s)
    aLL, _, aLR = nr.exp_kernel_overlaps(x, rL, rR, lam)
    oracle = exp_kernel_gaussian_overlap(d, np.sqrt(2) * s, lam) / \
        exp_kernel_gaussian_overlap(0.0, np.sqrt(2) * s, lam)
    assert aLR / aLL == pytest.approx(oracle, rel=1e-3)
    assert aLR / aLL <= np.exp(-10) * 1.01


def test_long_correlation_gives_no_dephasing():
    d = 5e-6
    x = np.linspace(-10e-6, 10e-6, 2001)
    rL, rR = gaussian(x, -d / 2, 0.5e-6), gaussian(x, d / 2, 0.5e-6)
    m = nr.NoiseModel("johnson_exp_corr", B_pp=1e-22, lambda_c=1.0)
    with pytest.warns(UserWarning):
        g = nr.dephasing_rate(m, x, rL, rR, d=d)
    assert g < 1e-5 * m.gamma_N
    m_short = nr.NoiseModel("johnson_exp_corr", B_pp=1e-22, lambda_c=0.2e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert nr.dephasing_rate(m_short, x, rL, rR, d=d) > 0.01 * m_short.gamma_N


def test_dephasing_requires_normalised_densities():
    x = np.linspace(-1e-5, 1e-5, 101)
    m = nr.NoiseModel("johnson_exp_corr", B_pp=1e-22)
    with pytest.raises(ValueError):
        nr.dephasing_rate(m, x, np.ones_like(x), np.ones_like(x))


def test_loss_rate_scaling():
    assert nr.loss_rate(nr.NoiseModel("flat_spectrum")) == 0.0
    a = nr.loss_rate(nr.NoiseModel("flat_spectrum", B_mp=1e-22))
    assert nr.loss_rate(nr.NoiseModel("flat_spectrum", B_mp=3e-22)) == pytest.approx(3 * a)
    assert nr.loss_rate(nr.NoiseModel("flat_spectrum", B_mp=1e-22, F=1)) == pytest.approx(a / 2)
    assert a == pytest.approx(nr.MU_F_RB87 ** 2 * 2 / sc.hbar ** 2 * 1e-22)


def test_loss_rate_pipeline_reaches_target_rate():
    J_hz = 1.07
    target = 0.08
    B = target * 2 * np.pi * J_hz * sc.hbar ** 2 / (nr.MU_F_RB87 ** 2 * 2)
    g = nr.loss_rate(nr.NoiseModel("flat_spectrum", B_mp=B))
    assert nr.rate_in_units_of_J(g, J_hz) == pytest.approx(target, rel=1e-12)


def test_trap_mode_densities_are_normalised_and_mirrored():
    from josephson_decoherence.trap import TrapSpec

    spec = TrapSpec(d=5e-6, V0=470.0, omega_x=2 * np.pi * 200, omega_perp=2 * np.pi * 500, N=200)
    x, rL, rR = nr.trap_mode_densities(spec)
    dx = x[1] - x[0]
    assert np.sum(rL) * dx == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(rL, rR[::-1])
    assert np.sum(rL[x < 0]) * dx > 0.99


def test_johnson_c1_paper_constants():
    layer = nr.SurfaceLayer()
    assert layer.n_th == pytest.approx(1.67e7, rel=0.01)
    c1 = nr.johnson_c1(layer) / UM2
    assert 8.5 / 2 <= c1 <= 8.5 * 2
    assert c1 == pytest.approx(7.54, abs=0.01)
    assert nr.johnson_c1(layer, cascade=True) == pytest.approx(nr.johnson_c1(layer) / 2)


def test_johnson_c1_independent_of_frequency_and_temperature():
    layer = nr.SurfaceLayer()
    c1 = nr.johnson_c1(layer)
    for T, w in ((800.0, layer.omega), (400.0, 10 * layer.omega), (800.0, 10 * layer.omega),
                 (200.0, 0.1 * layer.omega)):
        assert nr.johnson_c1(layer.at(T=T, omega=w)) == pytest.approx(c1, rel=0.01)


def test_current_noise_round_trip():
    c2 = 56 * UM2
    I = nr.current_from_c2(c2)
    assert nr.technical_c2(I) == pytest.approx(c2, rel=1e-12)
    assert 0.45 <= I * 1e9 <= 1.8


def test_combined_lifetime_at_5um():
    tau = nr.combined_lifetime(5e-6, 8.5 * UM2, 56 * UM2)
    assert tau == pytest.approx(0.39, abs=0.005)
    tJ = (5e-6) ** 2 / (8.5 * UM2)
    tT = (5e-6) ** 2 / (56 * UM2)
    assert tJ == pytest.approx(3.0, rel=0.03) and tT == pytest.approx(0.45, rel=0.03)
    assert tau == pytest.approx(1 / (1 / tJ + 1 / tT))


def test_thin_layer_correction_only_matters_close_to_surface():
    layer = nr.SurfaceLayer()
    z = np.array([1.0, 1.5, 2.0, 5.0, 20.0]) * 1e-6
    ratio = nr.johnson_lifetime(z, layer, thin_layer=True) / nr.johnson_lifetime(z, layer)
    assert np.allclose(ratio, 1 + layer.h / z)
    # combined law with c_total = 65: relative deviation of the simple z0^2 law
    c1, ct = nr.johnson_c1(layer), 65 * UM2
    data = nr.synthetic_lifetimes(z, ct, c1=c1, layer=layer)
    dev = np.abs(data.tau * ct / z ** 2 - 1)
    assert np.all(dev[z >= 2e-6] < 0.03)
    assert dev[0] > 0.03


def test_fit_recovers_c_total():
    z = np.array([3, 5, 8, 12, 20, 30, 50]) * 1e-6
    fit = nr.fit_lifetimes(nr.synthetic_lifetimes(z, 65 * UM2))
    assert fit.c_total / UM2 == pytest.approx(65, rel=1e-10)
    assert fit.slope_free_fit == pytest.approx(2.0, abs=1e-10)
    noisy = nr.fit_lifetimes(nr.synthetic_lifetimes(z, 65 * UM2, rel_noise=0.05, seed=3))
    assert abs(noisy.c_total / UM2 - 65) < 3 * noisy.c_total_err / UM2 + 1e-9
    rep = fit.report()
    assert set(rep) >= {"c_total", "c1", "c2", "I_nA_sqrtHz", "slope_free_fit"}
    assert rep["c2"] == pytest.approx(65 - rep["c1"])


def test_johnson_dominated_regime_reports_upper_bound():
    z = np.array([3, 5, 8, 12]) * 1e-6
    fit = nr.fit_lifetimes(nr.synthetic_lifetimes(z, 4 * UM2, rel_noise=0.01, seed=0))
    assert fit.johnson_dominated
    assert fit.c2 == 0.0
    assert fit.I_current >= 0


def test_dataset_validation():
    with pytest.raises(ValueError):
        nr.LifetimeDataset(z0=[1e-6, 2e-6], tau=[1.0], sigma=[0.1, 0.1])
    with pytest.raises(ValueError):
        nr.LifetimeDataset(z0=[1e-6], tau=[-1.0], sigma=[0.1])
    with pytest.raises(ValueError):
        nr.fit_lifetimes(nr.LifetimeDataset(z0=[1e-6, 2e-6], tau=[1, 2], sigma=[.1, .1]))
    with pytest.warns(UserWarning):
        nr.fit_lifetimes(nr.synthetic_lifetimes(np.array([0.5, 3, 5]) * 1e-6, 65 * UM2))
