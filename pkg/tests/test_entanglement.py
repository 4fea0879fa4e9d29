import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eoentangle.entanglement import (EntanglementDomainError, delta_epr, duan_sweep, entanglement_report,
                                     log_negativity, mixing_angle, partial_transpose_eigenvalues, purity,
                                     report_to_json, rotate_optical, to_standard_form, wigner_density,
                                     wigner_marginal)
from eoentangle.gaussian import (UnphysicalCovarianceError, reference_cm, standard_form, symplectic_eigenvalues,
                                 two_mode_squeezed_vacuum, vacuum)
from strategies import physical_cms

# high-precision oracle for the reference state (partial transpose, eigenvalues of i Omega V)
ZETA_MINUS = 0.422804154064535
LOG_NEG = 0.167699019345390
PURITY = 0.438904494382022


def _zeta_oracle(V):
    P = np.diag([1.0, 1.0, 1.0, -1.0])
    Om = np.kron(np.eye(2), [[0.0, 1.0], [-1.0, 0.0]])
    ev = np.abs(np.linalg.eigvals(1j * Om @ P @ V @ P).real)
    return np.sort(ev)[0]


def test_mixing_angle_examples():
    assert mixing_angle(standard_form(1, 1, 0.3)).theta == 0
    assert mixing_angle(standard_form(1, 1, 0.0, 0.3)).theta == pytest.approx(np.pi / 2)
    ang = mixing_angle(standard_form(1, 1, 0.3, 0.3))
    assert ang.theta == pytest.approx(np.pi / 4)
    assert ang.magnitude == pytest.approx(0.3 * np.sqrt(2))
    und = mixing_angle(vacuum())
    assert und.undefined and und.theta == 0.0


def test_reference_state_values():
    V = reference_cm()
    assert log_negativity(V) == pytest.approx(LOG_NEG, abs=1e-12)
    assert purity(V) == pytest.approx(PURITY, abs=1e-12)
    z, _ = partial_transpose_eigenvalues(V)
    assert z == pytest.approx(ZETA_MINUS, abs=1e-12)
    assert z ** 2 == pytest.approx(0.1788, abs=1e-4)
    assert delta_epr(V) == pytest.approx((0.85, 2.69))


def test_duan_sweep_examples():
    assert np.allclose(duan_sweep(vacuum(), np.linspace(0, 6, 7)), 1.0)
    V = rotate_optical(reference_cm(), 0.7)
    theta = mixing_angle(V).theta
    assert duan_sweep(V, theta - np.pi) == pytest.approx(0.85)
    assert duan_sweep(V, theta) == pytest.approx(2.69)


def test_simple_states():
    assert delta_epr(vacuum()) == (1.0, 1.0)
    assert delta_epr(0.6 * np.eye(4)) == pytest.approx((1.2, 1.2))
    assert log_negativity(vacuum()) == 0.0
    assert purity(vacuum()) == pytest.approx(1.0)
    assert purity(np.eye(4)) == pytest.approx(0.25)


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
def test_squeezed_vacuum_log_negativity(r):
    V = two_mode_squeezed_vacuum(r)
    assert log_negativity(V) == pytest.approx(2 * r, abs=1e-9)
    assert purity(V) == pytest.approx(1.0, abs=1e-9)


def test_unphysical_inputs():
    with pytest.raises(EntanglementDomainError):
        purity(np.diag([-1.0, 1.0, 1.0, 1.0]))
    with pytest.raises(UnphysicalCovarianceError):
        entanglement_report(0.2 * np.eye(4))
    bad = standard_form(0.5, 0.5, 0.0)
    bad[0, 1] = bad[1, 0] = 0.0
    bad[0, 0] = 3.0
    bad[1, 1] = 0.01
    with pytest.raises(UnphysicalCovarianceError):
        entanglement_report(bad)
    with pytest.raises(ValueError):
        entanglement_report(np.triu(np.ones((4, 4))))


def test_wigner_marginals():
    w = wigner_marginal(vacuum(), (0, 2))
    assert w.semi_axes == pytest.approx((1.0, 1.0))
    w = wigner_marginal(reference_cm(), (0, 2))
    # positive X_e X_o correlation stretches the diagonal, squeezes the anti-diagonal
    assert w.angle == pytest.approx(0.737, abs=1e-3)
    assert 0 < w.angle < np.pi / 2
    assert w.semi_axes[0] > 1 > w.semi_axes[1]
    xy = w.contour(9)
    inv = np.linalg.inv(w.covariance)
    assert np.allclose(np.einsum("ni,ij,nj->n", xy, inv, xy), 2.0)
    w = wigner_marginal(reference_cm(), (0, 3))
    assert w.angle in (0.0, pytest.approx(np.pi / 2))
    assert w.density(0.0, 0.0) == pytest.approx(1 / (2 * np.pi * np.sqrt(0.93 * 0.84)))


def test_wigner_density_normalized():
    # peak from the determinant form, unit mass by importance sampling
    V = reference_cm()
    peak = wigner_density(V, np.zeros(4))
    assert peak == pytest.approx(1 / (4 * np.pi ** 2 * np.sqrt(np.linalg.det(V))))
    rng = np.random.default_rng(0)
    x = rng.multivariate_normal(np.zeros(4), 4 * np.eye(4), size=200_000)
    g = np.exp(-0.5 * np.sum(x ** 2, axis=1) / 4) / (4 * np.pi ** 2 * 16)
    assert np.mean(wigner_density(V, x) / g) == pytest.approx(1.0, abs=0.02)


def test_report_json_echoes_input():
    V = reference_cm()
    rep = entanglement_report(V)
    doc = json.loads(report_to_json(rep, V))
    assert doc["covariance"] == V.tolist()
    assert doc["inseparable"] is True
    assert doc["log_negativity"] == pytest.approx(LOG_NEG)
    vac = entanglement_report(vacuum())
    assert vac.log_negativity == 0 and vac.theta_undefined and not vac.inseparable


@given(physical_cms())
@settings(max_examples=100, deadline=None)
def test_closed_form_matches_oracle(V):
    z, _ = partial_transpose_eigenvalues(V)
    assert z == pytest.approx(_zeta_oracle(V), rel=1e-7, abs=1e-9)
    assert (z >= 0.5 - 1e-9) == (log_negativity(V) == 0.0) or abs(z - 0.5) < 1e-7


@st.composite
def block_cms(draw):
    v11 = draw(st.floats(0.5, 3.0))
    v33 = draw(st.floats(0.5, 3.0))
    # largest correlation allowed by physicality
    cmax = np.sqrt((v11 - 0.5) * (v33 - 0.5))
    c = draw(st.floats(0.0, 1.0)) * cmax * 0.999
    phi = draw(st.floats(0, 2 * np.pi))
    return rotate_optical(standard_form(v11, v33, c), phi)


@given(block_cms(), st.floats(0, 2 * np.pi))
@settings(max_examples=100, deadline=None)
def test_duan_minimum_and_invariance(V, phi):
    dm, dp = delta_epr(V)
    assert dm <= dp
    grid = np.linspace(0, 2 * np.pi, 2001)
    assert dm == pytest.approx(duan_sweep(V, grid).min(), abs=1e-5)
    theta = mixing_angle(V).theta
    assert duan_sweep(V, theta - np.pi) == pytest.approx(dm, abs=1e-10)
    W = rotate_optical(V, phi)
    assert delta_epr(W)[0] == pytest.approx(dm, abs=1e-10)
    # degenerate symplectic spectra (vacuum) carry sqrt(eps) conditioning in the closed form
    assert log_negativity(W) == pytest.approx(log_negativity(V), abs=1e-7)
    S = to_standard_form(V)
    assert abs((S[0, 3] + S[1, 2]) / 2) < 1e-10
    assert 0 < purity(V) <= 1 + 1e-12


@given(st.floats(-1.5, 1.5), st.floats(0, 2 * np.pi))
@settings(max_examples=50, deadline=None)
def test_pure_states_have_unit_purity(r, phi):
    V = rotate_optical(two_mode_squeezed_vacuum(r), phi)
    assert np.allclose(symplectic_eigenvalues(V), 0.5)
    assert purity(V) == pytest.approx(1.0, abs=1e-9)
