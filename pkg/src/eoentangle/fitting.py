"""Lorentzian line fits and the joint (cooperativity, bath occupancy) theory fit."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.special import expit, logit

from .calibration import FitConvergenceError
from .model import SystemConfig, build_transfer_matrices, diffusion_matrix
from .spectra import SpectralGrid, covariance_basis, mean_elements

REL_STEP = 1e-6


class ParameterAtBoundWarning(RuntimeWarning):
    pass


def central_jacobian(fun, x, rel_step: float = REL_STEP):
    x = np.asarray(x, float)
    f0 = np.asarray(fun(x))
    J = np.empty((f0.size, x.size))
    for k in range(x.size):
        h = rel_step * max(1.0, abs(x[k]))
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        J[:, k] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * h)
    return J


@dataclass(frozen=True)
class FitResult:
    params: dict
    sigma: dict
    residual_norm: float
    covariance: list
    chi2: float = float("nan")
    dof: int = 0
    identifiable: bool = True

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else float("nan")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def lorentzian(w, center, width, height, offset):
    hw2 = (width / 2) ** 2
    return offset + height * hw2 / ((np.asarray(w, float) - center) ** 2 + hw2)


def _initial_lorentzian(w, y):
    offset = 0.5 * (np.median(y[: max(1, len(y) // 8)]) + np.median(y[-max(1, len(y) // 8):]))
    k = int(np.argmax(np.abs(y - offset)))
    height = y[k] - offset
    above = np.abs(y - offset) >= np.abs(height) / 2
    span = w[above].max() - w[above].min() if above.sum() > 1 else (w[-1] - w[0]) / 4
    return np.array([w[k], max(span, np.min(np.diff(w))), height, offset])


def lorentzian_fit(w, y, sigma=None) -> FitResult:
    """Least-squares fit of ``offset + height (width/2)^2 / ((w - center)^2 + (width/2)^2)``."""
    w = np.asarray(w, float)
    y = np.asarray(y, float)
    if len(w) < 5:
        raise ValueError("a Lorentzian fit needs at least five points")
    order = np.argsort(w)
    w, y = w[order], y[order]
    s = np.ones_like(y) if sigma is None else np.asarray(sigma, float)[order]
    scale = max(np.ptp(y), np.abs(y).max(), 1e-300)
    if np.ptp(y) <= 1e-12 * scale:
        off = float(np.mean(y))
        return FitResult({"center": float("nan"), "width": float("nan"), "height": 0.0, "offset": off},
                         {"center": float("nan"), "width": float("nan"), "height": float("nan"),
                          "offset": float(np.std(y) / np.sqrt(len(y)))},
                         0.0, [], 0.0, len(y) - 1, identifiable=False)
    p0 = _initial_lorentzian(w, y)
    wscale = np.ptp(w)

    # internal parameters: centre and width in units of the span, height/offset in units of the data
    def unpack(u):
        return np.array([u[0] * wscale, abs(u[1]) * wscale, u[2] * scale, u[3] * scale])

    def resid(u):
        return (lorentzian(w, *unpack(u)) - y) / s

    u0 = np.array([p0[0] / wscale, p0[1] / wscale, p0[2] / scale, p0[3] / scale])
    res = least_squares(resid, u0, jac=lambda u: central_jacobian(resid, u), method="lm",
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000)
    if not res.success:
        raise FitConvergenceError(f"Lorentzian fit failed: {res.message}")
    p = unpack(res.x)
    J = central_jacobian(lambda q: (lorentzian(w, *q) - y) / s, p)
    dof = len(y) - 4
    chi2 = float(np.sum(res.fun**2))
    try:
        cov = np.linalg.inv(J.T @ J)
        if sigma is None:
            cov *= chi2 / dof if dof > 0 else 1.0
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.nan)
    names = ("center", "width", "height", "offset")
    err = np.sqrt(np.abs(np.diag(cov)))
    ident = bool(np.isfinite(err[2]) and abs(p[2]) > 2 * err[2])
    return FitResult(dict(zip(names, map(float, p))), dict(zip(names, map(float, err))),
                     float(np.sqrt(chi2)), cov.tolist(), chi2, dof, ident)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Device-referenced averaged variance at offsets ``frequencies`` (rad/s)."""
    frequencies: np.ndarray
    values: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        f = np.asarray(self.frequencies, float)
        v = np.asarray(self.values, float)
        if f.shape != v.shape:
            raise ValueError("frequencies and values differ in length")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "values", v)
        if self.sigma is not None:
            s = np.asarray(self.sigma, float)
            if s.shape != f.shape or np.any(s <= 0):
                raise ValueError("sigma must be positive and match the frequencies")
            object.__setattr__(self, "sigma", s)


class TheoryModel:
    """Filtered V11bar and V33bar as functions of (C, n_e_int) for a fixed configuration.

    The bath occupancy enters the diffusion matrix linearly, so each
    cooperativity needs one set of filtered per-channel contributions.
    """

    def __init__(self, cfg: SystemConfig, window_T: float):
        self.cfg = cfg
        self.window_T = window_T
        self._cache = {}

    def _basis(self, C: float, freqs: np.ndarray):
        key = (float(C), freqs.tobytes())
        if key not in self._cache:
            tm = build_transfer_matrices(self.cfg.with_cooperativity(C))
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = covariance_basis(tm, SpectralGrid(freqs, self.window_T))
        return self._cache[key]

    def predict(self, C: float, n_e_int: float, freqs):
        freqs = np.asarray(freqs, float)
        B = self._basis(C, freqs)
        D = np.diag(diffusion_matrix(replace(self.cfg.bath, n_e_int=n_e_int)))
        V = np.einsum("k,fkij->fij", D, B)
        v11, v33, _ = mean_elements(V)
        return v11, v33


def joint_theory_fit(mw: Spectrum, opt: Spectrum, cfg: SystemConfig, window_T: float,
                     x0=(0.1, 0.05)) -> FitResult:
    """Fit cooperativity and microwave bath occupancy to both spectra at once.

    Parameters are optimized as logit(C) and log(n_e_int); uncertainties come
    from the Jacobian in the natural parameters.  With per-bin sigmas the
    covariance is absolute, otherwise it is scaled by the reduced chi-square.
    """
    model = TheoryModel(cfg, window_T)
    s_mw = mw.sigma if mw.sigma is not None else np.ones_like(mw.values)
    s_opt = opt.sigma if opt.sigma is not None else np.ones_like(opt.values)
    weighted = mw.sigma is not None and opt.sigma is not None

    def resid_nat(theta):
        C, n = theta
        v11, _ = model.predict(C, n, mw.frequencies)
        _, v33 = model.predict(C, n, opt.frequencies)
        return np.concatenate([(v11 - mw.values) / s_mw, (v33 - opt.values) / s_opt])

    def to_nat(u):
        return np.array([expit(u[0]), np.exp(u[1])])

    def resid(u):
        return resid_nat(to_nat(u))

    C0, n0 = x0
    if not (0 < C0 < 1 and n0 > 0):
        raise ValueError("initial C must lie in (0, 1) and n_e_int must be positive")
    u0 = np.array([logit(C0), np.log(n0)])
    res = least_squares(resid, u0, jac=lambda u: central_jacobian(resid, u), method="lm",
                        xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=200)
    if not res.success:
        raise FitConvergenceError(f"joint theory fit failed: {res.message}")
    theta = to_nat(res.x)
    if theta[0] < 1e-3 or theta[0] > 0.999 or theta[1] < 1e-4:
        warnings.warn(f"fit parameter at its bound (C = {theta[0]:.4g}, n_e_int = {theta[1]:.4g})",
                      ParameterAtBoundWarning, stacklevel=2)
    # chain rule from the transformed coordinates keeps the steps inside the domain
    J = central_jacobian(resid, res.x) / np.array([theta[0] * (1 - theta[0]), theta[1]])
    chi2 = float(np.sum(res.fun**2))
    dof = len(res.fun) - 2
    cov = np.linalg.pinv(J.T @ J)
    if not weighted:
        cov *= chi2 / dof if dof > 0 else 1.0
    err = np.sqrt(np.abs(np.diag(cov)))
    return FitResult({"C": float(theta[0]), "n_e_int": float(theta[1])},
                     {"C": float(err[0]), "n_e_int": float(err[1])},
                     float(np.sqrt(chi2)), cov.tolist(), chi2, dof)
