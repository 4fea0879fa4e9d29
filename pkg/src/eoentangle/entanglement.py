"""Entanglement measures for two-mode Gaussian covariance matrices.

Vacuum quadrature variance is 1/2, so the joint-variance vacuum level is 1.
The optical pair is rotated as ``X' = X cos(phi) + P sin(phi)``,
``P' = -X sin(phi) + P cos(phi)``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .gaussian import CovarianceMatrix, check_physical, symplectic_eigenvalues

DOMAIN_TOL = 1e-10


class EntanglementDomainError(ValueError):
    pass


def _v(V) -> np.ndarray:
    return np.asarray(V.v if isinstance(V, CovarianceMatrix) else V, dtype=float)


@dataclass(frozen=True)
class MixingAngle:
    theta: float
    magnitude: float
    undefined: bool


def mixing_angle(V, atol: float = 1e-15) -> MixingAngle:
    V = _v(V)
    a = (V[0, 2] - V[1, 3]) / 2
    b = (V[0, 3] + V[1, 2]) / 2
    mag = float(np.hypot(a, b))
    if mag <= atol:
        return MixingAngle(0.0, mag, True)
    return MixingAngle(float(np.arctan2(b, a)), mag, False)


def optical_rotation(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    S = np.eye(4)
    S[2:, 2:] = [[c, s], [-s, c]]
    return S


def rotate_optical(V, phi: float) -> np.ndarray:
    S = optical_rotation(phi)
    return S @ _v(V) @ S.T


def to_standard_form(V) -> np.ndarray:
    """Rotate the optical mode so that all correlation sits in V13 = -V24."""
    return rotate_optical(V, mixing_angle(V).theta)


def averaged_elements(V):
    V = _v(V)
    return (V[0, 0] + V[1, 1]) / 2, (V[2, 2] + V[3, 3]) / 2, mixing_angle(V).magnitude


def duan_sweep(V, phi):
    """Joint variance <X+^2> + <P-^2> after rotating the optics by ``phi``."""
    v11, v33, v13 = averaged_elements(V)
    theta = mixing_angle(V).theta
    return v11 + v33 + 2 * v13 * np.cos(theta - np.asarray(phi, float))


def delta_epr(V):
    """(Delta-, Delta+): smallest and largest joint variance over the local phase."""
    v11, v33, v13 = averaged_elements(V)
    return float(v11 + v33 - 2 * v13), float(v11 + v33 + 2 * v13)


def partial_transpose_eigenvalues(V):
    """Symplectic eigenvalues (zeta-, zeta+) of the partially time-reversed matrix."""
    V = _v(V)
    det_e = np.linalg.det(V[:2, :2])
    det_o = np.linalg.det(V[2:, 2:])
    det_eo = np.linalg.det(V[:2, 2:])
    det_v = np.linalg.det(V)
    s = det_e + det_o - 2 * det_eo
    disc = s * s - 4 * det_v
    if disc < -DOMAIN_TOL * max(1.0, s * s) or det_v < 0:
        raise EntanglementDomainError("matrix has no real symplectic spectrum; it is not a valid covariance")
    root = np.sqrt(max(disc, 0.0))
    lo = max((s - root) / 2, 0.0)
    return float(np.sqrt(lo)), float(np.sqrt((s + root) / 2))


def log_negativity(V) -> float:
    zeta_minus, _ = partial_transpose_eigenvalues(V)
    if zeta_minus == 0.0:
        raise EntanglementDomainError("vanishing symplectic eigenvalue")
    return float(max(0.0, -np.log(2 * zeta_minus)))


def purity(V) -> float:
    det = np.linalg.det(_v(V))
    if not det > 0:
        raise EntanglementDomainError(f"purity needs det V > 0, got {det:.3g}")
    return float(1.0 / (4.0 * np.sqrt(det)))


@dataclass(frozen=True)
class WignerMarginal:
    covariance: np.ndarray   # 2x2 marginal covariance
    semi_axes: tuple         # 1/e contour semi-axes, major first
    angle: float             # orientation of the major axis (rad, from the first axis)

    def density(self, x, y):
        S = self.covariance
        inv = np.linalg.inv(S)
        q = inv[0, 0] * x * x + 2 * inv[0, 1] * x * y + inv[1, 1] * y * y
        return np.exp(-0.5 * q) / (2 * np.pi * np.sqrt(np.linalg.det(S)))

    def contour(self, n: int = 181) -> np.ndarray:
        t = np.linspace(0, 2 * np.pi, n)
        a, b = self.semi_axes
        c, s = np.cos(self.angle), np.sin(self.angle)
        x, y = a * np.cos(t), b * np.sin(t)
        return np.column_stack([c * x - s * y, s * x + c * y])


def wigner_marginal(V, axes=(0, 2)) -> WignerMarginal:
    """Two-quadrature marginal; its 1/e contour is q^T S^-1 q = 2."""
    V = _v(V)
    i, j = axes
    S = V[np.ix_([i, j], [i, j])]
    w, vec = np.linalg.eigh(S)
    major = vec[:, 1]
    angle = float(np.arctan2(major[1], major[0]) % np.pi)
    return WignerMarginal(S, (float(np.sqrt(2 * w[1])), float(np.sqrt(2 * w[0]))), angle)


def wigner_density(V, x) -> np.ndarray:
    """Full four-dimensional Wigner function at points ``x`` (..., 4)."""
    V = _v(V)
    x = np.asarray(x, float)
    q = np.einsum("...i,ij,...j->...", x, np.linalg.inv(V), x)
    return np.exp(-0.5 * q) / (4 * np.pi**2 * np.sqrt(np.linalg.det(V)))


@dataclass(frozen=True)
class EntanglementReport:
    theta: float
    theta_undefined: bool
    delta_epr_minus: float
    delta_epr_plus: float
    log_negativity: float
    purity: float
    symplectic_eigs: tuple
    inseparable: bool


def entanglement_report(V, atol: float = 1e-9) -> EntanglementReport:
    V = _v(V)
    check_physical(V, atol=atol)
    ang = mixing_angle(V)
    dm, dp = delta_epr(V)
    return EntanglementReport(
        theta=ang.theta,
        theta_undefined=ang.undefined,
        delta_epr_minus=dm,
        delta_epr_plus=dp,
        log_negativity=log_negativity(V),
        purity=purity(V),
        symplectic_eigs=partial_transpose_eigenvalues(V),
        inseparable=dm < 1.0,
    )


def report_to_json(report: EntanglementReport, V) -> str:
    doc = asdict(report)
    doc["symplectic_eigs"] = list(report.symplectic_eigs)
    doc["local_symplectic_eigs"] = symplectic_eigenvalues(_v(V)).tolist()
    doc["covariance"] = _v(V).tolist()
    return json.dumps(doc, indent=2)
