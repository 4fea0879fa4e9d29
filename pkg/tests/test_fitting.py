import warnings
from dataclasses import replace

import numpy as np
import pytest

from eoentangle.fitting import (FitResult, ParameterAtBoundWarning, Spectrum, TheoryModel, joint_theory_fit,
                                lorentzian, lorentzian_fit)
from eoentangle.model import TWO_PI, build_transfer_matrices, default_config
from eoentangle.spectra import SpectralGrid, quadrature_spectrum

MHZ = TWO_PI * 1e6
T = 200e-9
FREQS = SpectralGrid.bins(T, 6).frequencies
# per-bin noise of 10^6-pulse averages: V_meas / sqrt(N)
S11 = np.full(len(FREQS), 14.02e-3)
S33 = np.full(len(FREQS), 6.38e-3)


@pytest.fixture(scope="module")
def model():
    return TheoryModel(default_config(), T)


def _synthetic(model, C, n, seed=None, scale=1.0):
    v11, v33 = model.predict(C, n, FREQS)
    if seed is not None:
        rng = np.random.default_rng(seed)
        v11 = v11 + scale * S11 * rng.standard_normal(len(FREQS))
        v33 = v33 + scale * S33 * rng.standard_normal(len(FREQS))
    return Spectrum(FREQS, v11, scale * S11), Spectrum(FREQS, v33, scale * S33)


def test_lorentzian_exact_recovery():
    w = np.linspace(-40, 40, 81) * MHZ
    y = lorentzian(w, 1.5 * MHZ, 9 * MHZ, 0.4, 0.5)
    fit = lorentzian_fit(w, y)
    assert fit.params["center"] == pytest.approx(1.5 * MHZ, rel=1e-6)
    assert fit.params["width"] == pytest.approx(9 * MHZ, rel=1e-6)
    assert fit.params["height"] == pytest.approx(0.4, rel=1e-6)
    assert fit.params["offset"] == pytest.approx(0.5, rel=1e-6)
    assert fit.identifiable


def test_lorentzian_dip_and_noise():
    rng = np.random.default_rng(1)
    w = np.linspace(-30, 30, 121) * MHZ
    y = lorentzian(w, 0.0, 6 * MHZ, -0.2, 1.0) + 0.005 * rng.standard_normal(len(w))
    fit = lorentzian_fit(w, y, sigma=np.full(len(w), 0.005))
    assert abs(fit.params["width"] - 6 * MHZ) < 3 * fit.sigma["width"]
    assert fit.reduced_chi2 == pytest.approx(1.0, abs=0.3)
    assert np.all(np.linalg.eigvalsh(np.array(fit.covariance)) >= 0)


def test_flat_data_is_not_identifiable():
    w = np.linspace(-10, 10, 21)
    fit = lorentzian_fit(w, np.full(21, 0.5))
    assert not fit.identifiable
    assert fit.params["height"] == 0.0 and np.isnan(fit.params["width"])
    with pytest.raises(ValueError):
        lorentzian_fit(w[:4], np.ones(4))


def test_lorentzian_fit_scale_invariance():
    rng = np.random.default_rng(2)
    w = np.linspace(-30, 30, 61) * MHZ
    y = lorentzian(w, 2 * MHZ, 8 * MHZ, 0.3, 0.6) + 0.01 * rng.standard_normal(len(w))
    s = np.full(len(w), 0.01)
    a, b = lorentzian_fit(w, y, s), lorentzian_fit(w, 7 * y, 7 * s)
    assert b.params["width"] == pytest.approx(a.params["width"], rel=1e-6)
    assert b.params["height"] == pytest.approx(7 * a.params["height"], rel=1e-6)
    assert b.sigma["width"] == pytest.approx(a.sigma["width"], rel=1e-4)


def test_backaction_width_in_adiabatic_limit():
    # with a fast optical mode the microwave line narrows to (1 - C) kappa_e
    cfg = default_config()
    cfg = replace(cfg, mode_o=replace(cfg.mode_o, kappa=100 * cfg.mode_e.kappa)).with_cooperativity(0.18)
    w = np.linspace(-5, 5, 201) * cfg.mode_e.kappa
    v11 = quadrature_spectrum(build_transfer_matrices(cfg), w)[:, 0, 0]
    fit = lorentzian_fit(w, v11)
    assert fit.params["width"] == pytest.approx(0.82 * cfg.mode_e.kappa, rel=0.02)


def test_joint_fit_noiseless(model):
    mw, opt = _synthetic(model, 0.18, 0.07)
    fit = joint_theory_fit(mw, opt, default_config(), T)
    assert fit.params["C"] == pytest.approx(0.18, rel=1e-6)
    assert fit.params["n_e_int"] == pytest.approx(0.07, rel=1e-6)
    assert fit.chi2 < 1e-10


def test_joint_fit_recovers_within_two_sigma(model):
    mw, opt = _synthetic(model, 0.18, 0.07, seed=3)
    fit = joint_theory_fit(mw, opt, default_config(), T)
    assert abs(fit.params["C"] - 0.18) < 2 * fit.sigma["C"]
    assert abs(fit.params["n_e_int"] - 0.07) < 2 * fit.sigma["n_e_int"]
    assert np.all(np.linalg.eigvalsh(np.array(fit.covariance)) >= -1e-18)
    doc = FitResult(**{**fit.__dict__}).to_json()
    assert '"C"' in doc


def test_noise_scaling_of_sigmas(model):
    a = joint_theory_fit(*_synthetic(model, 0.18, 0.07, seed=4), default_config(), T)
    b = joint_theory_fit(*_synthetic(model, 0.18, 0.07, seed=5, scale=2.0), default_config(), T)
    for k in ("C", "n_e_int"):
        assert 1.5 <= b.sigma[k] / a.sigma[k] <= 2.5


def test_decoupled_limit(model):
    mw, opt = _synthetic(model, 1e-9, 0.3)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = joint_theory_fit(mw, opt, default_config(), T)
    assert fit.params["C"] < fit.sigma["C"]
    assert fit.params["n_e_int"] == pytest.approx(0.3, rel=1e-4)
    assert any(issubclass(w.category, ParameterAtBoundWarning) for w in caught)


def test_joint_fit_scale_invariance(model):
    mw, opt = _synthetic(model, 0.18, 0.07, seed=6)
    a = joint_theory_fit(mw, opt, default_config(), T)
    b = joint_theory_fit(Spectrum(mw.frequencies, mw.values, 3 * mw.sigma),
                         Spectrum(opt.frequencies, opt.values, 3 * opt.sigma), default_config(), T)
    assert b.params["C"] == pytest.approx(a.params["C"], rel=1e-6)
    assert b.sigma["C"] == pytest.approx(3 * a.sigma["C"], rel=1e-4)


@pytest.mark.slow
def test_reduced_chi2_consistent(model):
    chi = [joint_theory_fit(*_synthetic(model, 0.18, 0.07, seed=s), default_config(), T).reduced_chi2
           for s in range(100, 112)]
    assert 0.8 <= np.mean(chi) <= 1.2


def test_bad_inputs():
    with pytest.raises(ValueError):
        Spectrum(FREQS, np.ones(3))
    with pytest.raises(ValueError):
        Spectrum(FREQS, np.ones(len(FREQS)), np.zeros(len(FREQS)))
    with pytest.raises(ValueError):
        joint_theory_fit(Spectrum(FREQS, np.ones(len(FREQS))), Spectrum(FREQS, np.ones(len(FREQS))),
                         default_config(), T, x0=(1.2, 0.1))
