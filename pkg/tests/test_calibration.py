import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eoentangle.calibration import (HBAR, K_B, DegenerateSweepError, FourPortMeasurement, ThermometrySweep,
                                    fit_thermometry, load_noise_model, read_sweep_csv, refer_through_loss,
                                    thermometry_report, transduction_efficiency, waveguide_noise_fit, write_sweep_csv)

W_E = 2 * np.pi * 8.9e9
G = 10 ** 6.667
N_ADD = 11.74
TEMPS = np.geomspace(0.04, 1.0, 8)


def _sweep(noise=0.0, seed=0, temps=TEMPS):
    P = load_noise_model(temps, G, N_ADD, W_E)
    P = P * (1 + noise * np.random.default_rng(seed).standard_normal(len(temps)))
    return ThermometrySweep(temps, P, W_E)


def test_cold_limit_is_vacuum_plus_added_noise():
    P = load_noise_model(1e-4, G, N_ADD, W_E, 11e6)
    assert P == pytest.approx(HBAR * W_E * G * 11e6 * (0.5 + N_ADD), rel=1e-12)


def test_hot_limit_slope():
    T = np.array([300.0, 301.0])
    P = load_noise_model(T, G, N_ADD, W_E, 11e6)
    assert np.diff(P)[0] == pytest.approx(K_B * G * 11e6, rel=1e-6)


def test_coth_argument_at_crossover():
    w = 2 * np.pi * 8.799e9
    T = HBAR * w / (2 * K_B)
    assert T == pytest.approx(0.211, abs=1e-3)
    P = load_noise_model(T, 1.0, 2.0, w, 1.0)
    assert P / (HBAR * w) == pytest.approx(0.5 / np.tanh(1.0) + 2.0)


def test_monotone_in_temperature_and_added_noise():
    P = load_noise_model(TEMPS, G, N_ADD, W_E)
    assert np.all(np.diff(P) > 0)
    assert load_noise_model(0.1, G, 12.0, W_E) > load_noise_model(0.1, G, 11.0, W_E)
    with pytest.raises(ValueError):
        load_noise_model(0.0, G, N_ADD, W_E)


def test_noiseless_fit_is_exact():
    fit = fit_thermometry(_sweep())
    assert fit.gain == pytest.approx(G, rel=1e-9)
    assert fit.n_add == pytest.approx(N_ADD, rel=1e-9)
    assert fit.gain_db == pytest.approx(66.67, abs=1e-9)


def test_noisy_fit_within_two_sigma():
    fit = fit_thermometry(_sweep(0.01, seed=4), rel_sigma=0.01)
    assert abs(fit.n_add - N_ADD) < 2 * fit.n_add_sigma
    assert abs(fit.gain - G) < 2 * fit.gain_sigma
    assert fit.dof == 6


def test_coverage_over_seeds():
    hits = 0
    for seed in range(200):
        fit = fit_thermometry(_sweep(0.01, seed), rel_sigma=0.01)
        hits += abs(fit.n_add - N_ADD) < 2 * fit.n_add_sigma and abs(fit.gain - G) < 2 * fit.gain_sigma
    assert hits >= 180


def test_degenerate_sweeps():
    with pytest.raises(DegenerateSweepError):
        fit_thermometry(_sweep(temps=np.array([0.005, 0.006, 0.007])))
    with pytest.raises(ValueError):
        ThermometrySweep(np.array([0.1, 0.2]), np.array([1.0, 2.0]), W_E)
    with pytest.raises(ValueError):
        ThermometrySweep(np.array([0.1, -0.2, 0.3]), np.ones(3), W_E)


def test_cable_loss_referral():
    n, s, g = refer_through_loss(11.74, -0.47, gain_db=66.67, n_add_sigma=0.08)
    lam = 10 ** -0.047
    assert n == pytest.approx((12.24) / lam - 0.5)
    # the tabulated 13.09 sits 0.05 below the lossless-cable value
    assert n == pytest.approx(13.14, abs=0.01)
    assert g == pytest.approx(66.20)
    assert s == pytest.approx(0.08 / lam)
    assert refer_through_loss(3.0, 0.0)[0] == 3.0
    with pytest.raises(ValueError):
        refer_through_loss(3.0, 1.0)


def test_transduction_efficiency_examples():
    assert transduction_efficiency(FourPortMeasurement(1, 1, 0, 0)) == 0
    assert transduction_efficiency(FourPortMeasurement(0.3, 0.3, 0.3, 0.3)) == pytest.approx(1)
    assert transduction_efficiency(FourPortMeasurement(1, 1, 0.01, 0.01)) == pytest.approx(0.01)
    with pytest.raises(ValueError):
        transduction_efficiency(FourPortMeasurement(0, 1, 0.1, 0.1))
    with pytest.raises(ValueError):
        FourPortMeasurement(1, 1, -0.1, 0.1)


@given(st.floats(1e-3, 1e3), st.lists(st.floats(1e-3, 10), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_efficiency_ignores_common_gain(scale, s):
    m = FourPortMeasurement(*s)
    m2 = FourPortMeasurement(*(scale * x for x in s))
    assert transduction_efficiency(m2) == pytest.approx(transduction_efficiency(m), rel=1e-12)


def test_power_law_fit():
    P = np.geomspace(0.01, 1.0, 9)
    fit = waveguide_noise_fit(P, 0.05 * P)
    assert fit.p == pytest.approx(1.0, abs=1e-9)
    assert fit.a == pytest.approx(0.05)
    scaled = waveguide_noise_fit(10 * P, 0.05 * P)
    assert scaled.p == pytest.approx(1.0, abs=1e-9)
    assert scaled.a == pytest.approx(0.005)
    # points clamped at the floor are ignored
    n = 0.05 * P
    n[:3] = 0.0
    assert waveguide_noise_fit(P, n).n_used == 6
    with pytest.raises(ValueError):
        waveguide_noise_fit(P, np.zeros_like(P))


def test_sweep_csv_round_trip(tmp_path):
    sw = _sweep(0.01, 1)
    write_sweep_csv(tmp_path / "s.csv", sw)
    back = read_sweep_csv(tmp_path / "s.csv", W_E)
    assert np.array_equal(back.temperatures, sw.temperatures)
    assert np.array_equal(back.powers, sw.powers)
    (tmp_path / "e.csv").write_text("temperature_k,watts\n0.1,1\n")
    with pytest.raises(ValueError):
        read_sweep_csv(tmp_path / "e.csv", W_E)


def test_report_includes_referral():
    doc = json.loads(thermometry_report(fit_thermometry(_sweep()), cable_loss_db=-0.47))
    assert doc["referred"]["n_add"] == pytest.approx(13.14, abs=0.01)
    assert doc["fit"]["n_add"] == pytest.approx(N_ADD)
