import numpy as np
import pytest
from hypothesis import given, settings

from eoentangle.model import (BathOccupancy, ModeParams, PumpParams, SystemConfig, TWO_PI, build_transfer_matrices,
                              cooperativity, coupling_for_cooperativity, default_config, diffusion_matrix,
                              drive_for_photons, multiphoton_coupling, pump_steady_state)
from strategies import configs

MHZ = TWO_PI * 1e6


def test_zero_drive_gives_empty_pump():
    assert pump_steady_state(PumpParams(kappa_p=MHZ)) == 0


def test_pump_photon_number_round_trip():
    pump = PumpParams(kappa_p=10 * MHZ)
    pump = PumpParams(kappa_p=10 * MHZ, drive_amplitude=drive_for_photons(pump, 1.6e10))
    a = pump_steady_state(pump)
    assert abs(a) ** 2 == pytest.approx(1.6e10, rel=1e-12)
    assert a.imag == 0 and a.real > 0


def test_pump_detuned_by_half_linewidth_halves_photons():
    on = PumpParams(kappa_p=10 * MHZ, drive_amplitude=1e6)
    off = PumpParams(kappa_p=10 * MHZ, drive_amplitude=1e6, delta_p=5 * MHZ)
    assert abs(pump_steady_state(off)) ** 2 == pytest.approx(0.5 * abs(pump_steady_state(on)) ** 2, rel=1e-12)


def test_multiphoton_coupling():
    assert multiphoton_coupling(0j, TWO_PI * 37) == 0
    assert multiphoton_coupling(1e5 * np.exp(1j), 0.0) == 0
    g = multiphoton_coupling(np.sqrt(1.6e10) * np.exp(0.3j), TWO_PI * 37.0)
    # sqrt(1.6e10) * 37 Hz = 4.68 MHz
    assert g / TWO_PI == pytest.approx(4.680e6, rel=1e-3)


def test_cooperativity_examples():
    assert cooperativity(0.0, 11 * MHZ, 28 * MHZ) == 0
    g = coupling_for_cooperativity(0.18, 11 * MHZ, 28 * MHZ)
    assert g / TWO_PI == pytest.approx(3.7229e6, rel=1e-4)
    assert cooperativity(2 * g, 11 * MHZ, 28 * MHZ) == pytest.approx(4 * 0.18)
    with pytest.raises(ValueError):
        cooperativity(g, 0.0, 28 * MHZ)


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        ModeParams(kappa=0.0)
    with pytest.raises(ValueError):
        ModeParams(kappa=1.0, eta=1.2)
    with pytest.raises(ValueError):
        BathOccupancy(-0.1, 0)
    with pytest.raises(ValueError):
        PumpParams(kappa_p=-1.0)


def test_default_config_hits_target_cooperativity():
    cfg = default_config(C=0.18)
    assert cfg.cooperativity() == pytest.approx(0.18, rel=1e-12)
    assert cfg.mode_e.kappa == pytest.approx(11 * MHZ)


def _uncoupled(J=0.0, deltas=(0.0, 0.0, 0.0)):
    return SystemConfig(ModeParams(11 * MHZ, 0.5), ModeParams(28 * MHZ, 0.5, deltas[0]),
                        ModeParams(28 * MHZ, 1.0, deltas[1]), ModeParams(28 * MHZ, 1.0, deltas[2]),
                        PumpParams(kappa_p=28 * MHZ, g0=TWO_PI * 37, J=J))


def test_no_coupling_gives_diagonal_drift():
    tm = build_transfer_matrices(_uncoupled(), g=0.0)
    assert np.count_nonzero(tm.M - np.diag(np.diag(tm.M))) == 0


def test_real_drift_except_couplings():
    tm = build_transfer_matrices(_uncoupled(J=5 * MHZ), g=2 * MHZ)
    assert np.all(np.diag(tm.M).imag == 0)
    off = tm.M - np.diag(np.diag(tm.M))
    assert np.all(off.real == 0)


@pytest.mark.parametrize("C", [0.5, 0.9, 0.99])
def test_stable_below_threshold(C):
    cfg = _uncoupled()
    g = coupling_for_cooperativity(C, cfg.mode_e.kappa, cfg.mode_o.kappa)
    tm = build_transfer_matrices(cfg, g=g)
    assert np.linalg.eigvals(tm.M).real.max() < 0


def test_threshold_at_unit_cooperativity():
    # anti-Stokes scattering pushed far away by a strong hybridization
    cfg = _uncoupled(J=1e4 * 28 * MHZ)

    def max_rate(C):
        g = coupling_for_cooperativity(C, cfg.mode_e.kappa, cfg.mode_o.kappa)
        return np.linalg.eigvals(build_transfer_matrices(cfg, g=g).M).real.max() / cfg.mode_e.kappa

    assert max_rate(0.95) < 0
    assert abs(max_rate(1.0)) < 1e-6
    assert max_rate(1.05) > 0


def test_balanced_anti_stokes_never_reaches_threshold():
    cfg = _uncoupled(J=0.0)
    for C in (1.0, 2.0, 5.0):
        g = coupling_for_cooperativity(C, cfg.mode_e.kappa, cfg.mode_o.kappa)
        assert np.linalg.eigvals(build_transfer_matrices(cfg, g=g).M).real.max() < 0


def test_diffusion_diagonal():
    D = diffusion_matrix(BathOccupancy(0.07, 0.2))
    assert np.allclose(np.diag(D), [1.07, 0.07, 1.2, 0.2, 1, 0, 1, 0, 1, 0, 1, 0])
    assert np.count_nonzero(D - np.diag(np.diag(D))) == 0


# allowed non-zero pattern of the 4x4 mode-pair blocks of M
_ALLOWED = {(0, 0), (1, 1), (2, 2), (3, 3), (0, 1), (1, 0), (0, 2), (2, 0), (2, 3), (3, 2)}


@given(configs)
@settings(max_examples=40, deadline=None)
def test_drift_structure(cfg):
    tm = build_transfer_matrices(cfg)
    M = tm.M
    for i in range(4):
        for j in range(4):
            blk = M[2 * i:2 * i + 2, 2 * j:2 * j + 2]
            if (i, j) not in _ALLOWED:
                assert np.all(blk == 0)
            # rows of the conjugate operators mirror those of the annihilators
            assert blk[1, 1] == np.conj(blk[0, 0])
            assert blk[1, 0] == np.conj(blk[0, 1])
    assert np.allclose(tm.Lambda @ tm.Lambda, np.eye(12))
    assert np.all(np.diag(tm.D) >= 0)
    assert tm.K.shape == (8, 12) and tm.L.shape == (4, 12) and tm.N.shape == (4, 8)
    assert np.all(tm.N[:, 4:] == 0)


def test_matrices_are_read_only():
    tm = build_transfer_matrices(default_config())
    with pytest.raises(ValueError):
        tm.M[0, 0] = 1.0
