import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eoentangle.gaussian import reference_cm, vacuum
from eoentangle.measurement import (DetectionChain, GainCurve, NegativeVarianceWarning, calibrate_out,
                                    detected_covariance, heterodyne_noise_spectrum)
from eoentangle.model import TWO_PI, build_transfer_matrices, default_config
from eoentangle.spectra import quadrature_spectrum
from strategies import physical_cms


def test_vacuum_with_heterodyne_penalty_reads_one():
    chain = DetectionChain(0.5, 0.5)
    S_e, S_o = heterodyne_noise_spectrum(lambda w: np.broadcast_to(vacuum(), np.shape(w) + (4, 4)), chain,
                                         np.array([0.0, 1e7]))
    assert np.allclose(S_e, 1.0) and np.allclose(S_o, 1.0)


def test_microwave_floor_with_table_values():
    chain = DetectionChain(13.09, 5.54, gain_e=GainCurve.from_db([0.0], [66.20]))
    S_e, _ = heterodyne_noise_spectrum(lambda w: np.broadcast_to(vacuum(), np.shape(w) + (4, 4)), chain,
                                       np.array([0.0]))
    assert S_e[0] == pytest.approx(10 ** 6.620 * 13.59, rel=1e-12)


def test_flat_floor_without_pump():
    cfg = default_config(C=0.0, n_e_int=0.0)
    tm = build_transfer_matrices(cfg, g=0.0)
    chain = DetectionChain(13.09, 5.54)
    S_e, S_o = heterodyne_noise_spectrum(functools.partial(quadrature_spectrum, tm), chain,
                                         TWO_PI * 1e6 * np.linspace(-30, 30, 13))
    assert np.ptp(S_e) < 1e-12 and np.ptp(S_o) < 1e-12


def test_channels_read_opposite_offsets():
    # a fake spectrum whose microwave block tracks the argument and optical block does not
    def fake(w):
        w = np.asarray(w, float)
        C = np.zeros(w.shape + (4, 4))
        C[..., 0, 0] = C[..., 1, 1] = 1.0 + w
        C[..., 2, 2] = C[..., 3, 3] = 2.0
        return C

    chain = DetectionChain(0.5, 0.5)
    S_e, S_o = heterodyne_noise_spectrum(fake, chain, np.array([0.25]))
    assert S_e[0] == pytest.approx(1.0 - 0.25 + 0.5)
    assert S_o[0] == pytest.approx(2.5)


def test_detected_covariance_examples():
    chain = DetectionChain(13.09, 5.54)
    D = detected_covariance(vacuum(), chain)
    assert np.allclose(D, np.diag([13.59, 13.59, 6.04, 6.04]))
    D = detected_covariance(reference_cm(), chain)
    assert D[0, 0] == pytest.approx(14.02)
    assert D[2, 2] == pytest.approx(6.38)
    assert D[0, 2] == pytest.approx(0.46)
    G = DetectionChain(13.09, 5.54, GainCurve.constant(4.0), GainCurve.constant(9.0))
    assert detected_covariance(reference_cm(), G)[0, 2] == pytest.approx(6 * 0.46)


def test_calibration_examples():
    chain = DetectionChain(13.09, 5.54)
    D = np.diag([14.02, 14.02, 6.38, 6.38])
    V_meas, V = calibrate_out(D, chain)
    assert V[0, 0] == pytest.approx(0.93)
    assert V_meas[0, 0] == pytest.approx(14.02)


def test_negative_variance_is_flagged_not_clipped():
    chain = DetectionChain(13.09, 5.54)
    with pytest.warns(NegativeVarianceWarning):
        _, V = calibrate_out(np.diag([12.0, 12.0, 6.0, 6.0]), chain)
    assert V[0, 0] == pytest.approx(-1.09)


def test_zero_gain_rejected():
    with pytest.raises(ValueError):
        GainCurve.constant(0.0)
    with pytest.raises(ValueError):
        GainCurve(np.array([1.0, 1.0]), np.array([2.0, 3.0]))


def test_chain_validation():
    with pytest.raises(ValueError):
        DetectionChain(0.3, 1.0)
    with pytest.raises(ValueError):
        DetectionChain(1.0, 1.0, lo_sign_e=0)
    assert DetectionChain(0.0, 0.0, enforce_bound=False).n_add_e == 0.0


def test_gain_interpolates_in_power_against_detected_frequency():
    curve = GainCurve.from_db([30e6, 50e6], [60.0, 70.0])
    chain = DetectionChain(1.0, 1.0, gain_e=curve)
    G_e, G_o = chain.gains(TWO_PI * 0.0)     # 40 MHz detected, halfway
    assert G_e == pytest.approx(0.5 * (1e6 + 1e7))
    assert G_o == 1.0
    assert curve(TWO_PI * 1e9) == pytest.approx(1e7)


gain_values = st.floats(1e-3, 1e7)


@given(physical_cms(), gain_values, gain_values, st.floats(0.5, 30), st.floats(0.5, 30))
@settings(max_examples=60, deadline=None)
def test_round_trip_is_exact(V, ge, go, ne, no):
    chain = DetectionChain(ne, no, GainCurve.constant(ge), GainCurve.constant(go))
    D = detected_covariance(V, chain)
    _, V2 = calibrate_out(D, chain)
    assert np.allclose(V2, V, rtol=1e-10, atol=1e-12)
    # added noise only moves the diagonal
    off = ~np.eye(4, dtype=bool)
    assert np.allclose(D[off] / np.sqrt(np.outer([ge, ge, go, go], [ge, ge, go, go]))[off], V[off])
