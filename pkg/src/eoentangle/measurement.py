"""Heterodyne detection chain: gain, added noise and LO bookkeeping.

Both channels are read at the same detected frequency ``w_n + Omega_IF``.
With the LO placed below the microwave resonance and above the optical one,
the detected bin ``w_n`` holds the microwave field at device offset ``-w_n``
and the optical field at ``+w_n``.  In the matrix ordering of ``spectra``
(where the optical block at argument ``w`` already describes ``a_o(-w)``) this
means both blocks are read at argument ``-w_n``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .gaussian import CovarianceMatrix

HETERODYNE_BOUND = 0.5


class NegativeVarianceWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class GainCurve:
    """Power gain tabulated against detected frequency (Hz), linear interpolation in power."""
    freqs_hz: np.ndarray
    gain: np.ndarray

    def __post_init__(self):
        f = np.atleast_1d(np.asarray(self.freqs_hz, float))
        g = np.atleast_1d(np.asarray(self.gain, float))
        if f.shape != g.shape or f.ndim != 1 or len(f) == 0:
            raise ValueError("gain table needs matching 1-D frequency and gain arrays")
        if np.any(g <= 0) or not np.all(np.isfinite(g)):
            raise ValueError("gain values must be finite and strictly positive")
        order = np.argsort(f)
        if np.any(np.diff(f[order]) == 0):
            raise ValueError("duplicate frequencies in gain table")
        f, g = f[order], g[order]
        f.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "gain", g)

    @classmethod
    def constant(cls, gain: float) -> "GainCurve":
        return cls(np.array([0.0]), np.array([float(gain)]))

    @classmethod
    def from_db(cls, freqs_hz, gain_db) -> "GainCurve":
        return cls(freqs_hz, 10.0 ** (np.asarray(gain_db, float) / 10.0))

    def __call__(self, omega):
        """Gain at angular frequency ``omega`` (held constant outside the table)."""
        return np.interp(np.asarray(omega, float) / (2 * np.pi), self.freqs_hz, self.gain)


@dataclass(frozen=True)
class DetectionChain:
    n_add_e: float
    n_add_o: float
    gain_e: GainCurve = field(default_factory=lambda: GainCurve.constant(1.0))
    gain_o: GainCurve = field(default_factory=lambda: GainCurve.constant(1.0))
    omega_if: float = 2 * np.pi * 40e6
    lo_sign_e: int = -1
    lo_sign_o: int = +1
    n_add_e_sigma: float = 0.0
    n_add_o_sigma: float = 0.0
    # set False only for idealized synthetic studies without the heterodyne penalty
    enforce_bound: bool = True

    def __post_init__(self):
        if self.lo_sign_e not in (-1, 1) or self.lo_sign_o not in (-1, 1):
            raise ValueError("LO signs must be +1 or -1")
        lo = HETERODYNE_BOUND if self.enforce_bound else 0.0
        for name in ("n_add_e", "n_add_o"):
            if getattr(self, name) < lo:
                raise ValueError(f"{name} = {getattr(self, name)} is below the heterodyne bound {lo}")
        if self.n_add_e_sigma < 0 or self.n_add_o_sigma < 0:
            raise ValueError("added-noise uncertainties must be non-negative")
        if not self.omega_if > 0:
            raise ValueError("omega_if must be positive")

    @property
    def n_add(self) -> np.ndarray:
        return np.array([self.n_add_e, self.n_add_e, self.n_add_o, self.n_add_o])

    def gains(self, omega_n):
        """(G_e, G_o) at the detected frequency ``omega_n + omega_if``."""
        w = np.asarray(omega_n, float) + self.omega_if
        return self.gain_e(w), self.gain_o(w)

    def with_n_add(self, n_add_e: float, n_add_o: float) -> "DetectionChain":
        from dataclasses import replace
        return replace(self, n_add_e=n_add_e, n_add_o=n_add_o)


def _as_array(V) -> np.ndarray:
    return np.asarray(V.v if isinstance(V, CovarianceMatrix) else V, dtype=float)


def heterodyne_noise_spectrum(spectrum, chain: DetectionChain, omega):
    """Detected power densities (S_e, S_o) at ``omega + omega_if``.

    ``spectrum`` maps an array of matrix arguments to (..., 4, 4) quadrature
    spectra, e.g. ``functools.partial(spectra.quadrature_spectrum, tm)``.
    """
    omega = np.asarray(omega, float)
    C = np.asarray(spectrum(-omega))
    G_e, G_o = chain.gains(omega)
    S_e = G_e * ((C[..., 0, 0] + C[..., 1, 1]) / 2 + chain.n_add_e)
    S_o = G_o * ((C[..., 2, 2] + C[..., 3, 3]) / 2 + chain.n_add_o)
    return S_e, S_o


def _scale_matrix(chain: DetectionChain, omega_n) -> np.ndarray:
    G_e, G_o = chain.gains(omega_n)
    if G_e <= 0 or G_o <= 0:
        raise ValueError("detection gain must be positive")
    s = np.sqrt(np.array([G_e, G_e, G_o, G_o], dtype=float))
    return np.outer(s, s)


def detected_covariance(V, chain: DetectionChain, omega_n: float = 0.0) -> np.ndarray:
    """Covariance of the detected currents, sqrt(G_A G_B) (V + N_add)."""
    V = _as_array(V)
    return _scale_matrix(chain, omega_n) * (V + np.diag(chain.n_add))


def calibrate_out(D, chain: DetectionChain, omega_n: float = 0.0):
    """Invert ``detected_covariance``; returns (V_meas, V)."""
    D = np.asarray(D, float)
    G_e, G_o = chain.gains(omega_n)
    if not (np.all(G_e > 0) and np.all(G_o > 0)):
        raise ValueError("cannot calibrate out a zero or negative gain")
    V_meas = D / _scale_matrix(chain, omega_n)
    V = V_meas - np.diag(chain.n_add)
    bad = np.diag(V) < 0
    if np.any(bad):
        warnings.warn(f"negative variance after added-noise subtraction on diagonal {np.flatnonzero(bad)}; "
                      "check the noise calibration", NegativeVarianceWarning, stacklevel=2)
    return V_meas, V
