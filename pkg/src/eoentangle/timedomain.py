"""Brute-force time-domain reference for the windowed output covariance.

Integrates the linear Langevin equations as c-number stochastic equations in
the symmetric (Wigner) representation with Euler-Maruyama steps and forms the
windowed output modes directly from the simulated output increments.  Nothing
here touches the frequency-domain resolvent, so agreement with
``spectra.covariance_spectrum`` is a genuine cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .model import TransferMatrices


@dataclass(frozen=True)
class EnsembleResult:
    frequencies: np.ndarray   # analysis offsets, rad/s
    covariance: np.ndarray    # (n_freq, 4, 4) sample covariance
    std_error: np.ndarray     # (n_freq, 4, 4) Monte Carlo standard error per element
    n_windows: int


def _mode_drift(tm: TransferMatrices):
    """Split the drift rows of the annihilation operators into a and a* coefficients."""
    rows = tm.M[0::2]
    return rows[:, 0::2].copy(), rows[:, 1::2].copy()


def _real_form(tm: TransferMatrices):
    """Real drift and noise matrices for x = (Re a_e, Im a_e, Re a_o, ...)."""
    Ma, Mc = _mode_drift(tm)
    A = np.zeros((8, 8))
    for k in range(4):
        for part, unit in ((0, 1.0), (1, 1j)):
            da = Ma[:, k] * unit + Mc[:, k] * np.conj(unit)
            A[0::2, 2 * k + part] = da.real
            A[1::2, 2 * k + part] = da.imag
    k_modes = tm.K[0::2, 0::2]                       # 4 modes x 6 input channels
    sym_occ = 0.5 * (np.diag(tm.D)[0::2] + np.diag(tm.D)[1::2])   # n + 1/2
    B = np.kron(k_modes * np.sqrt(sym_occ / 2.0), np.eye(2))
    return A, B


def stationary_covariance(tm: TransferMatrices) -> np.ndarray:
    """Steady-state intracavity covariance of the real amplitudes (Lyapunov solve)."""
    A, B = _real_form(tm)
    S = solve_continuous_lyapunov(A, -B @ B.T)
    return 0.5 * (S + S.T)


def simulate_windows(tm: TransferMatrices, omegas, window_T: float, n_windows: int,
                     dt: float, seed: int = 0, chunk: int = 25_000,
                     warmup: float = 0.0) -> EnsembleResult:
    """Monte Carlo covariance of windowed output quadratures at offsets ``omegas``."""
    omegas = np.atleast_1d(np.asarray(omegas, float))
    n_steps = int(round(window_T / dt))
    dt = window_T / n_steps
    n_warm = int(round(warmup / dt))
    Ma, Mc = _mode_drift(tm)
    k_modes = tm.K[0::2, 0::2]
    sym_occ = 0.5 * (np.diag(tm.D)[0::2] + np.diag(tm.D)[1::2])
    noise_sd = np.sqrt(sym_occ * dt / 2.0)
    out_rate = np.array([tm.N[0, 0], tm.N[2, 2]])
    out_chan = np.array([1, 3])                       # e_in and o_in feed the outputs
    S0 = stationary_covariance(tm)
    L0 = np.linalg.cholesky(S0 + 1e-300 * np.eye(8))

    ss = np.random.SeedSequence(seed)
    n_f = len(omegas)
    sums = np.zeros((n_f, 4))
    prods = np.zeros((n_f, 4, 4))
    fourth = np.zeros((n_f, 4, 4))
    done = 0
    child_seeds = ss.spawn(int(np.ceil(n_windows / chunk)))
    for cs in child_seeds:
        n = min(chunk, n_windows - done)
        rng = np.random.Generator(np.random.Philox(cs))
        x0 = L0 @ rng.standard_normal((8, n))
        a = x0[0::2] + 1j * x0[1::2]

        def step(a):
            w = noise_sd[:, None] * (rng.standard_normal((6, n)) + 1j * rng.standard_normal((6, n)))
            a_new = a + (Ma @ a + Mc @ np.conj(a)) * dt + k_modes @ w
            return a_new, w

        for _ in range(n_warm):
            a, _w = step(a)
        b = np.zeros((n_f, 2, n), dtype=complex)
        t_mid = (np.arange(n_steps) + 0.5) * dt
        ph_e = np.exp(-1j * np.outer(omegas, t_mid))
        for s in range(n_steps):
            a_new, w = step(a)
            # trapezoidal estimate of the intracavity field over the step
            dA = w[out_chan] - out_rate[:, None] * 0.5 * (a[[0, 1]] + a_new[[0, 1]]) * dt
            b[:, 0] += ph_e[:, s, None] * dA[0]
            b[:, 1] += np.conj(ph_e[:, s, None]) * dA[1]
            a = a_new
        b /= np.sqrt(window_T)
        q = np.sqrt(2.0) * np.stack([b[:, 0].real, b[:, 0].imag, b[:, 1].real, b[:, 1].imag], axis=1)
        sums += q.sum(axis=2)
        prods += np.einsum("fin,fjn->fij", q, q)
        fourth += np.einsum("fin,fjn->fij", q**2, q**2)
        done += n

    mean = sums / done
    cov = prods / done - mean[:, :, None] * mean[:, None, :]
    second = prods / done
    var_prod = fourth / done - second**2
    err = np.sqrt(np.maximum(var_prod, 0.0) / done)
    return EnsembleResult(omegas, cov, err, done)
