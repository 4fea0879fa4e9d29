"""Detection-chain calibration: noise thermometry, loss referral, 4-port efficiency, waveguide heating."""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import constants
from scipy.optimize import least_squares

HBAR = constants.hbar
K_B = constants.k
DEFAULT_BANDWIDTH = 11e6


class FitConvergenceError(RuntimeError):
    pass


class DegenerateSweepError(ValueError):
    pass


def _half_coth(omega_e, T):
    x = HBAR * omega_e / (2 * K_B * np.asarray(T, float))
    return 0.5 / np.tanh(x)


def load_noise_model(T, G, n_add, omega_e, bandwidth=DEFAULT_BANDWIDTH):
    """Output noise power (W) of a matched load at temperature ``T`` behind gain ``G``."""
    T = np.asarray(T, float)
    if np.any(T <= 0):
        raise ValueError("temperatures must be positive")
    return HBAR * omega_e * G * bandwidth * (_half_coth(omega_e, T) + n_add)


@dataclass(frozen=True, eq=False)
class ThermometrySweep:
    temperatures: np.ndarray
    powers: np.ndarray
    omega_e: float
    bandwidth: float = DEFAULT_BANDWIDTH

    def __post_init__(self):
        T = np.asarray(self.temperatures, float)
        P = np.asarray(self.powers, float)
        if T.shape != P.shape or T.ndim != 1:
            raise ValueError("temperatures and powers must be 1-D arrays of equal length")
        if len(T) < 3:
            raise ValueError("a thermometry sweep needs at least three points")
        if np.any(T <= 0):
            raise ValueError("temperatures must be positive")
        object.__setattr__(self, "temperatures", T)
        object.__setattr__(self, "powers", P)


@dataclass(frozen=True)
class ThermometryFit:
    gain: float
    n_add: float
    gain_sigma: float
    n_add_sigma: float
    covariance: list
    gain_db: float
    gain_db_sigma: float
    chi2: float
    dof: int


def fit_thermometry(sweep: ThermometrySweep, rel_sigma: float | None = None) -> ThermometryFit:
    """Damped least-squares fit of gain and added noise.

    With ``rel_sigma`` the points carry that fractional error and the covariance
    is absolute; otherwise it is scaled by the reduced chi-square.
    """
    T, P = sweep.temperatures, sweep.powers
    f = _half_coth(sweep.omega_e, T)
    if np.ptp(f) < 1e-3 * np.mean(f):
        raise DegenerateSweepError("all temperatures sit in the vacuum plateau; gain and added noise are degenerate")
    unit = HBAR * sweep.omega_e * sweep.bandwidth

    # start from the slope between the two hottest points
    hot = np.argsort(T)[-2:]
    slope = (P[hot[1]] - P[hot[0]]) / (f[hot[1]] - f[hot[0]])
    G0 = slope / unit
    N0 = P[hot[1]] / (G0 * unit) - f[hot[1]]
    if not (np.isfinite(G0) and G0 > 0):
        raise DegenerateSweepError("power does not rise with temperature")

    sigma = (rel_sigma * P) if rel_sigma else np.abs(P)
    # work with G in units of the initial guess to keep the problem well scaled

    def resid(p):
        return (unit * G0 * p[0] * (f + p[1]) - P) / sigma

    def jac(p):
        return np.column_stack([unit * G0 * (f + p[1]), unit * G0 * p[0] * np.ones_like(f)]) / sigma[:, None]

    res = least_squares(resid, x0=[1.0, N0], jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if not res.success:
        raise FitConvergenceError(f"thermometry fit failed: {res.message}")
    J = res.jac
    cov = np.linalg.inv(J.T @ J)
    dof = len(T) - 2
    chi2 = float(2 * res.cost)
    if not rel_sigma:
        cov = cov * (chi2 / dof if dof > 0 else 1.0)
    scale = np.array([G0, 1.0])
    cov = cov * np.outer(scale, scale)
    G, N = res.x[0] * G0, res.x[1]
    sG, sN = np.sqrt(np.diag(cov))
    return ThermometryFit(float(G), float(N), float(sG), float(sN), cov.tolist(), float(10 * np.log10(G)),
                          float(10 / np.log(10) * sG / G), chi2, dof)


def refer_through_loss(n_add: float, loss_db: float, n_cable: float = 0.0, gain_db: float | None = None,
                       n_add_sigma: float = 0.0):
    """Move the added-noise reference point across a lossy element.

    ``loss_db`` is the gain of the element in dB (negative for loss), so the
    transmission is ``lam = 10**(loss_db/10)`` and
    ``N' = (N + 1/2)/lam - 1/2 + (1 - lam)/lam * n_cable``.
    Returns (N', sigma', gain_db') with the gain shifted by ``loss_db``.
    """
    lam = 10 ** (loss_db / 10)
    if not 0 < lam <= 1:
        raise ValueError("loss_db must be <= 0")
    n_new = (n_add + 0.5) / lam - 0.5 + (1 - lam) / lam * n_cable
    g_new = None if gain_db is None else gain_db + loss_db
    return n_new, n_add_sigma / lam, g_new


@dataclass(frozen=True)
class FourPortMeasurement:
    s11: float
    s22: float
    s12: float
    s21: float

    def __post_init__(self):
        if min(self.s12, self.s21) < 0:
            raise ValueError("S-parameter magnitudes must be non-negative")


def transduction_efficiency(m: FourPortMeasurement) -> float:
    """Efficiency from the four scattering magnitudes; detection gains cancel."""
    if not m.s11 * m.s22 > 0:
        raise ValueError("reflection magnitudes must be positive")
    radicand = m.s12 * m.s21 / (m.s11 * m.s22)
    if radicand < 0:
        raise ValueError("negative radicand")
    return float(np.sqrt(radicand))


@dataclass(frozen=True)
class PowerLawFit:
    a: float
    p: float
    a_sigma: float
    p_sigma: float
    n_used: int

    def __call__(self, power):
        return self.a * np.asarray(power, float) ** self.p


def waveguide_noise_fit(powers, occupancies, floor: float = 0.0) -> PowerLawFit:
    """Fit n_wg = a P^p by linear regression in log-log space.

    Points at or below ``floor`` carry no usable logarithm and are dropped.
    """
    P = np.asarray(powers, float)
    n = np.asarray(occupancies, float)
    if P.shape != n.shape:
        raise ValueError("powers and occupancies differ in length")
    if np.all(n <= 0):
        raise ValueError("all occupancies are zero; the power law is undefined")
    use = (n > floor) & (P > 0)
    if use.sum() < 3:
        raise ValueError("need at least three points above the noise floor")
    x, y = np.log(P[use]), np.log(n[use])
    if use.sum() > 3:
        coef, cov = np.polyfit(x, y, 1, cov=True)
        sp, sl = np.sqrt(np.diag(cov))
    else:
        coef = np.polyfit(x, y, 1)
        sp = sl = float("nan")
    p, log_a = coef
    a = float(np.exp(log_a))
    return PowerLawFit(a, float(p), a * float(sl), float(sp), int(use.sum()))


def read_sweep_csv(path, omega_e: float, bandwidth: float = DEFAULT_BANDWIDTH) -> ThermometrySweep:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: empty sweep")
    try:
        T = [float(r["temperature_k"]) for r in rows]
        P = [float(r["power_w"]) for r in rows]
    except KeyError as exc:
        raise ValueError(f"{path}: missing column {exc}") from exc
    return ThermometrySweep(np.array(T), np.array(P), omega_e, bandwidth)


def write_sweep_csv(path, sweep: ThermometrySweep) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["temperature_k", "power_w"])
        for T, P in zip(sweep.temperatures, sweep.powers):
            w.writerow([repr(float(T)), repr(float(P))])


def thermometry_report(fit: ThermometryFit, cable_loss_db: float | None = None) -> str:
    doc = {"fit": asdict(fit)}
    if cable_loss_db is not None:
        n, s, g = refer_through_loss(fit.n_add, cable_loss_db, gain_db=fit.gain_db, n_add_sigma=fit.n_add_sigma)
        doc["referred"] = {"loss_db": cable_loss_db, "n_add": n, "n_add_sigma": s, "gain_db": g,
                           "gain_db_sigma": fit.gain_db_sigma}
    return json.dumps(doc, indent=2)
