"""Output-field spectra and finite-window covariance matrices.

The transfer function maps the 12 input noise operators onto the 4 output
field operators, ``T(w) = L - N (i w O - M)^-1 K``.  Output correlations are
``T D T^H`` and the quadrature correlations follow from the rotation
``U = u (+) u``.  A finite analysis window of length ``T`` turns the continuous
spectrum into discrete modes whose covariance is the spectrum convolved with
the sinc^2 filter ``F``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gaussian import CovarianceMatrix
from .model import TransferMatrices

IMAG_TOL = 1e-10
ACCURACY_RTOL = 1e-4
MIN_POINTS = 4001
MAX_CONDITION = 1e12

_u = np.array([[1.0, 1.0], [-1j, 1j]]) / np.sqrt(2.0)
U = np.kron(np.eye(2), _u)

CSV_COLUMNS = ("offset_hz", "V11", "V22", "V33", "V44", "V13", "V24", "V14", "V23")
_CSV_INDEX = {"V11": (0, 0), "V22": (1, 1), "V33": (2, 2), "V44": (3, 3),
              "V13": (0, 2), "V24": (1, 3), "V14": (0, 3), "V23": (1, 2)}


class ThresholdError(np.linalg.LinAlgError):
    """Resolvent is singular: the system sits at or above the parametric threshold."""


class QuadratureAccuracyError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralGrid:
    frequencies: np.ndarray
    window_T: float

    def __post_init__(self):
        if not self.window_T > 0:
            raise ValueError("window_T must be positive")
        object.__setattr__(self, "frequencies", np.atleast_1d(np.asarray(self.frequencies, float)))

    @classmethod
    def bins(cls, window_T: float, n_max: int) -> "SpectralGrid":
        """Symmetric grid of window-resolved bins w_n = 2 pi n / T, |n| <= n_max."""
        n = np.arange(-n_max, n_max + 1)
        return cls(2 * np.pi * n / window_T, window_T)


def _resolvent_solve(tm: TransferMatrices, omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    A = 1j * omega[..., None, None] * tm.O - tm.M
    K = np.broadcast_to(tm.K.astype(complex), A.shape[:-2] + tm.K.shape)
    if np.max(np.linalg.cond(A), initial=0.0) > MAX_CONDITION:
        raise ThresholdError("resolvent i w O - M is numerically singular (at or above threshold)")
    try:
        X = np.linalg.solve(A, K)
    except np.linalg.LinAlgError as exc:
        raise ThresholdError("resolvent i w O - M is singular") from exc
    if not np.all(np.isfinite(X)):
        raise ThresholdError("resolvent i w O - M is singular")
    return X


def output_transfer(tm: TransferMatrices, omega) -> np.ndarray:
    """4x12 transfer matrix T(w) (stacked over any leading shape of ``omega``)."""
    return tm.L - tm.N @ _resolvent_solve(tm, omega)


def output_mode_correlations(tm: TransferMatrices, omega) -> np.ndarray:
    T = output_transfer(tm, omega)
    return (T * np.diag(tm.D)) @ np.conj(np.swapaxes(T, -1, -2))


def quadrature_correlations(Ct: np.ndarray) -> np.ndarray:
    """Symmetrized quadrature correlations from mode correlations."""
    R = U @ Ct @ U.conj().T
    C = 0.5 * (R + np.swapaxes(R, -1, -2))
    if np.abs(C.imag).max(initial=0.0) > IMAG_TOL * max(1.0, np.abs(C.real).max(initial=0.0)):
        raise AssertionError("quadrature correlations are not real; check conjugate ordering")
    return C.real


def quadrature_spectrum(tm: TransferMatrices, omega) -> np.ndarray:
    """Unfiltered quadrature correlation matrices C(w)."""
    return quadrature_correlations(output_mode_correlations(tm, omega))


def quadrature_basis(tm: TransferMatrices, omega) -> np.ndarray:
    """Per-input-channel contributions, shape (..., 12, 4, 4).

    ``quadrature_spectrum`` equals ``sum_k D_kk * basis[..., k, :, :]``, which
    lets callers vary bath occupancies without re-solving the resolvent.
    """
    P = U @ output_transfer(tm, omega)
    P = np.swapaxes(P, -1, -2)  # (..., 12, 4)
    return np.real(P[..., :, None] * np.conj(P[..., None, :]))


def asymptotic_correlations(tm: TransferMatrices) -> np.ndarray:
    """C(w) for |w| -> infinity, where the output carries only the reflected input."""
    return quadrature_correlations((tm.L * np.diag(tm.D)) @ tm.L.T)


def filter_kernel(omega, T: float):
    """Squared window filter F(w) = G(w)^2, G(w) = sqrt(2/(pi T)) sin(w T/2)/w."""
    if not T > 0:
        raise ValueError("window length must be positive")
    omega = np.asarray(omega, dtype=float)
    x = omega * T / 2
    small = np.abs(omega * T) < 1e-6
    xs = np.where(small, 1.0, x)
    sinc = np.where(small, 1.0 - x**2 / 6, np.sin(xs) / xs)
    out = T / (2 * np.pi) * sinc**2
    return out if out.ndim else float(out)


def _slowest_rate(tm: TransferMatrices) -> float:
    return float(np.min(np.abs(np.linalg.eigvals(tm.M).real)))


def quadrature_plan(tm: TransferMatrices, T: float, points_per_lobe: int = 8):
    """Half-width W, step h and half-count J of the convolution grid.

    ``h`` divides the bin spacing 2 pi / T exactly, so bins on the window grid
    share sample points.
    """
    kappa_o = -2 * tm.M[2, 2].real
    W = max(40 * np.pi / T, 10 * kappa_o)
    scale = min(2 * np.pi / T, 2 * _slowest_rate(tm))
    h_max = scale / points_per_lobe
    per_bin = int(np.ceil((2 * np.pi / T) / h_max))
    per_bin += per_bin % 2  # even, so the 2h sub-grid also lands on the filter zeros
    h = (2 * np.pi / T) / per_bin
    J = int(np.ceil(W / h))
    J = max(J, (MIN_POINTS - 1) // 2)
    J += J % 2  # even, so the 2h sub-grid is Simpson-compatible too
    return J * h, h, J


def _simpson_weights(n: int, h: float) -> np.ndarray:
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


def _grid_offsets(frequencies: np.ndarray, h: float):
    """Integer offsets of each frequency on the step-h lattice, or None if any falls off it."""
    k = np.rint(frequencies / h)
    if np.all(np.abs(k * h - frequencies) <= 1e-9 * max(h, np.abs(frequencies).max(initial=0.0))):
        return k.astype(int)
    return None


def _convolved(tm: TransferMatrices, grid: SpectralGrid, integrand, C_inf):
    """Simpson estimates (step h and 2h) of the filtered smooth part for every grid frequency."""
    T = grid.window_T
    W, h, J = quadrature_plan(tm, T)
    x = h * np.arange(-J, J + 1)
    F = filter_kernel(x, T)
    w_h = _simpson_weights(2 * J + 1, h) * F
    w_2h = np.zeros(2 * J + 1)
    w_2h[::2] = _simpson_weights(J + 1, 2 * h)
    w_2h *= F
    freqs = grid.frequencies
    offs = _grid_offsets(freqs, h)
    results = []
    if offs is not None:
        # one shared lattice: sample the spectrum once, slide the weights
        k_lo, k_hi = offs.min() - J, offs.max() + J
        lattice = h * np.arange(k_lo, k_hi + 1)
        dC = integrand(lattice) - C_inf
        for k in offs:
            # C(w_n - x) for x = h*(-J..J) sits at lattice index (k - j) - k_lo
            seg = dC[k - k_lo - J:k - k_lo + J + 1][::-1]
            results.append((np.tensordot(w_h, seg, axes=1), np.tensordot(w_2h, seg, axes=1),
                            seg[0], seg[-1]))
    else:
        for wn in freqs:
            seg = integrand(wn - x) - C_inf
            results.append((np.tensordot(w_h, seg, axes=1), np.tensordot(w_2h, seg, axes=1),
                            seg[0], seg[-1]))
    return W, results


def covariance_spectrum(tm: TransferMatrices, grid: SpectralGrid, check_accuracy: bool = True,
                        return_error: bool = False):
    """Filtered covariance matrices V(w_n) for every frequency of ``grid``.

    The smooth part ``C(w) - C(inf)`` is convolved numerically (Simpson rule on
    a uniform grid centred on each w_n); ``C(inf)`` passes through unchanged
    because the filter integrates to one.
    """
    T = grid.window_T
    C_inf = asymptotic_correlations(tm)
    W, results = _convolved(tm, grid, lambda w: quadrature_spectrum(tm, w), C_inf)
    tail_mass = 4.0 / (np.pi * T * W)
    out = np.empty((len(grid.frequencies), 4, 4))
    errs = np.empty(len(grid.frequencies))
    for i, (Vh, V2h, first, last) in enumerate(results):
        tail = tail_mass * max(np.abs(first).max(), np.abs(last).max())
        err = np.abs(Vh - V2h).max() / 15.0 + tail
        V = C_inf + Vh
        out[i] = 0.5 * (V + V.T)
        errs[i] = err
        if check_accuracy and err > ACCURACY_RTOL * np.diag(out[i]).min():
            raise QuadratureAccuracyError(
                f"convolution error estimate {err:.3g} exceeds tolerance at w = {grid.frequencies[i]:.4g} rad/s")
    if return_error:
        return out, errs
    return out


def covariance_basis(tm: TransferMatrices, grid: SpectralGrid) -> np.ndarray:
    """Filtered per-input-channel contributions, shape (n_freq, 12, 4, 4).

    ``covariance_spectrum`` equals ``sum_k D_kk * basis[:, k]`` for any diagonal
    diffusion matrix, so bath occupancies can vary without new convolutions.
    """
    L = tm.L.astype(complex)
    P_inf = np.swapaxes(U @ L, -1, -2)
    B_inf = np.real(P_inf[:, :, None] * np.conj(P_inf[:, None, :]))
    _, results = _convolved(tm, grid, lambda w: quadrature_basis(tm, w), B_inf)
    out = np.stack([B_inf + r[0] for r in results])
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def covariance_at(tm: TransferMatrices, omega_n: float, grid_or_T) -> CovarianceMatrix:
    T = grid_or_T.window_T if isinstance(grid_or_T, SpectralGrid) else float(grid_or_T)
    V = covariance_spectrum(tm, SpectralGrid(np.array([omega_n]), T))[0]
    return CovarianceMatrix(V, frequency=float(omega_n))


def mean_elements(V: np.ndarray):
    """Phase-averaged (V11bar, V33bar, V13bar) over the last two axes."""
    V = np.asarray(V)
    v11 = (V[..., 0, 0] + V[..., 1, 1]) / 2
    v33 = (V[..., 2, 2] + V[..., 3, 3]) / 2
    a = (V[..., 0, 2] - V[..., 1, 3]) / 2
    b = (V[..., 0, 3] + V[..., 1, 2]) / 2
    return v11, v33, np.hypot(a, b)


def write_spectra_csv(path, frequencies, V, extra: dict | None = None) -> None:
    """Write one row per frequency; ``frequencies`` in rad/s, stored as Hz."""
    extra = extra or {}
    cols = list(CSV_COLUMNS) + list(extra)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for k, (f, v) in enumerate(zip(frequencies, V)):
            row = [repr(float(f / (2 * np.pi)))]
            row += [repr(float(v[_CSV_INDEX[c]])) for c in CSV_COLUMNS[1:]]
            row += [repr(float(extra[c][k])) for c in extra]
            w.writerow(row)


def read_spectra_csv(path):
    """Return (frequencies rad/s, V stack, dict of extra columns)."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    missing = [c for c in CSV_COLUMNS if c not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    freqs = np.array([float(r["offset_hz"]) for r in rows]) * 2 * np.pi
    V = np.zeros((len(rows), 4, 4))
    for k, r in enumerate(rows):
        for c, (i, j) in _CSV_INDEX.items():
            V[k, i, j] = V[k, j, i] = float(r[c])
    V[:, 0, 1] = V[:, 1, 0] = 0.0
    V[:, 2, 3] = V[:, 3, 2] = 0.0
    extra = {c: np.array([float(r[c]) for r in rows]) for c in rows[0] if c not in CSV_COLUMNS}
    return freqs, V, extra
