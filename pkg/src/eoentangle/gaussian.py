"""Two-mode Gaussian covariance matrices over (X_e, P_e, X_o, P_o); vacuum variance 1/2."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))

SYMMETRY_RTOL = 1e-12
PHYSICAL_ATOL = 1e-9


class UnphysicalCovarianceError(ValueError):
    pass


def symplectic_eigenvalues(V: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues (ascending) of a 4x4 covariance matrix."""
    V = np.asarray(V, dtype=float)
    ev = np.linalg.eigvals(1j * OMEGA @ V)
    return np.sort(np.abs(ev.real))[::2]


def check_symmetric(V: np.ndarray) -> None:
    V = np.asarray(V, dtype=float)
    if V.shape != (4, 4):
        raise ValueError(f"covariance matrix must be 4x4, got shape {V.shape}")
    scale = max(np.abs(V).max(), 1e-300)
    if np.abs(V - V.T).max() > SYMMETRY_RTOL * scale:
        raise ValueError("covariance matrix is not symmetric")


def check_physical(V: np.ndarray, atol: float = PHYSICAL_ATOL) -> None:
    check_symmetric(V)
    nu = symplectic_eigenvalues(V)
    if nu[0] < 0.5 - atol:
        raise UnphysicalCovarianceError(
            f"smallest symplectic eigenvalue {nu[0]:.6g} violates the uncertainty bound 1/2")


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    v: np.ndarray
    frequency: float = 0.0

    def __post_init__(self):
        v = np.array(self.v, dtype=float)
        check_symmetric(v)
        v = 0.5 * (v + v.T)
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    def is_physical(self, atol: float = PHYSICAL_ATOL) -> bool:
        return bool(symplectic_eigenvalues(self.v)[0] >= 0.5 - atol)


def vacuum() -> np.ndarray:
    return 0.5 * np.eye(4)


def standard_form(V11: float, V33: float, V13: float, V14: float = 0.0) -> np.ndarray:
    """Covariance matrix in the two-mode-squeezing block form."""
    return np.array([
        [V11, 0.0, V13, V14],
        [0.0, V11, V14, -V13],
        [V13, V14, V33, 0.0],
        [V14, -V13, 0.0, V33],
    ])


def two_mode_squeezed_vacuum(r: float) -> np.ndarray:
    c, s = np.cosh(2 * r) / 2, np.sinh(2 * r) / 2
    return standard_form(c, c, s)


def reference_cm() -> np.ndarray:
    """Measured on-resonance microwave-optics covariance used as a benchmark state."""
    return standard_form(0.93, 0.84, 0.46)
