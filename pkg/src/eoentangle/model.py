"""Linearized five-mode cavity electro-optic model.

Modes are the microwave ``e``, optical Stokes ``o``, anti-Stokes ``t`` and the
transverse-magnetic mode ``tm`` that hybridizes with the anti-Stokes mode.  The
pump is treated classically; its steady-state amplitude sets the multiphoton
coupling ``g``.  All rates are angular frequencies in rad/s.

Operator ordering used throughout (frequency-domain arguments in brackets)::

    v    = (a_e[w], a_e^+[-w], a_o[-w], a_o^+[w], a_t[w], a_t^+[-w], a_tm[w], a_tm^+[-w])
    f_in = (e0, e0^+, e_in, e_in^+, o0, o0^+, o_in, o_in^+, t, t^+, tm, tm^+)
    f_out = (a_e,out[w], a_e,out^+[-w], a_o,out[-w], a_o,out^+[w])
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class ModeParams:
    kappa: float
    eta: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")


@dataclass(frozen=True)
class PumpParams:
    kappa_p: float
    eta_p: float = 1.0
    delta_p: float = 0.0
    drive_amplitude: complex = 0.0
    g0: float = 0.0
    J: float = 0.0

    def __post_init__(self):
        if not self.kappa_p > 0:
            raise ValueError(f"kappa_p must be positive, got {self.kappa_p}")
        if self.g0 < 0 or self.J < 0:
            raise ValueError("g0 and J must be non-negative")
        if not 0.0 <= self.eta_p <= 1.0:
            raise ValueError(f"eta_p must lie in [0, 1], got {self.eta_p}")


@dataclass(frozen=True)
class BathOccupancy:
    n_e_int: float = 0.0
    n_e_wg: float = 0.0

    def __post_init__(self):
        if self.n_e_int < 0 or self.n_e_wg < 0:
            raise ValueError("bath occupancies must be non-negative")


@dataclass(frozen=True)
class SystemConfig:
    mode_e: ModeParams
    mode_o: ModeParams
    mode_t: ModeParams
    mode_tm: ModeParams
    pump: PumpParams
    bath: BathOccupancy = field(default_factory=BathOccupancy)

    def coupling(self) -> float:
        """Multiphoton coupling g (rad/s) set by the pump steady state."""
        return multiphoton_coupling(pump_steady_state(self.pump), self.pump.g0)

    def cooperativity(self) -> float:
        return cooperativity(self.coupling(), self.mode_e.kappa, self.mode_o.kappa)

    def with_cooperativity(self, C: float) -> "SystemConfig":
        """Copy with the pump drive rescaled so that the cooperativity equals ``C``."""
        if self.pump.g0 <= 0:
            raise ValueError("cannot set a cooperativity with g0 = 0")
        g = coupling_for_cooperativity(C, self.mode_e.kappa, self.mode_o.kappa)
        n_p = (g / self.pump.g0) ** 2
        return replace(self, pump=replace(self.pump, drive_amplitude=drive_for_photons(self.pump, n_p)))

    def with_bath(self, **kw) -> "SystemConfig":
        return replace(self, bath=replace(self.bath, **kw))


def pump_steady_state(pump: PumpParams) -> complex:
    """Steady-state intracavity pump amplitude, sqrt(eta kappa) a_in / (kappa/2 - i Delta)."""
    return complex(np.sqrt(pump.eta_p * pump.kappa_p) * pump.drive_amplitude
                   / (pump.kappa_p / 2 - 1j * pump.delta_p))


def drive_for_photons(pump: PumpParams, n_p: float) -> float:
    """Real input amplitude that yields ``n_p`` intracavity pump photons."""
    if pump.eta_p == 0:
        if n_p == 0:
            return 0.0
        raise ValueError("pump is not coupled (eta_p = 0)")
    denom = abs(pump.kappa_p / 2 - 1j * pump.delta_p)
    return float(np.sqrt(n_p) * denom / np.sqrt(pump.eta_p * pump.kappa_p))


def multiphoton_coupling(a_p: complex, g0: float) -> float:
    # the pump phase is absorbed into the mode definitions, so g is real
    return float(abs(a_p) * g0)


def cooperativity(g: float, kappa_e: float, kappa_o: float) -> float:
    if kappa_e <= 0 or kappa_o <= 0:
        raise ValueError("loss rates must be positive")
    return 4.0 * g**2 / (kappa_e * kappa_o)


def coupling_for_cooperativity(C: float, kappa_e: float, kappa_o: float) -> float:
    if C < 0:
        raise ValueError("cooperativity must be non-negative")
    return float(np.sqrt(C * kappa_e * kappa_o / 4.0))


@dataclass(frozen=True, eq=False)
class TransferMatrices:
    """Constant matrices of the Langevin equations and the input-output relation."""
    M: np.ndarray
    K: np.ndarray
    L: np.ndarray
    N: np.ndarray
    O: np.ndarray
    D: np.ndarray
    Lambda: np.ndarray

    def __post_init__(self):
        for name in ("M", "K", "L", "N", "O", "D", "Lambda"):
            getattr(self, name).setflags(write=False)

    def with_diffusion(self, D: np.ndarray) -> "TransferMatrices":
        return replace(self, D=np.array(D, dtype=float))


def diffusion_matrix(bath: BathOccupancy) -> np.ndarray:
    n_int, n_wg = bath.n_e_int, bath.n_e_wg
    return np.diag([n_int + 1, n_int, n_wg + 1, n_wg, 1, 0, 1, 0, 1, 0, 1, 0]).astype(float)


def drift_matrix(cfg: SystemConfig, g: float) -> np.ndarray:
    e, o, t, tm = cfg.mode_e, cfg.mode_o, cfg.mode_t, cfg.mode_tm
    J = cfg.pump.J
    gc = np.conj(g)
    M = np.zeros((8, 8), dtype=complex)
    M[0, 0] = M[1, 1] = -e.kappa / 2
    M[2, 2] = 1j * o.delta - o.kappa / 2
    M[3, 3] = -1j * o.delta - o.kappa / 2
    M[4, 4] = 1j * t.delta - t.kappa / 2
    M[5, 5] = -1j * t.delta - t.kappa / 2
    M[6, 6] = 1j * tm.delta - tm.kappa / 2
    M[7, 7] = -1j * tm.delta - tm.kappa / 2
    # two-mode squeezing e <-> o
    M[0, 3] = -1j * g
    M[1, 2] = 1j * gc
    M[2, 1] = -1j * g
    M[3, 0] = 1j * gc
    # beam splitter e <-> t
    M[0, 4] = -1j * gc
    M[1, 5] = 1j * g
    M[4, 0] = -1j * g
    M[5, 1] = 1j * gc
    # hybridization t <-> tm
    M[4, 6] = -1j * J
    M[5, 7] = 1j * J
    M[6, 4] = -1j * J
    M[7, 5] = 1j * J
    return M


def build_transfer_matrices(cfg: SystemConfig, g: float | None = None) -> TransferMatrices:
    if g is None:
        g = cfg.coupling()
    e, o, t, tm = cfg.mode_e, cfg.mode_o, cfg.mode_t, cfg.mode_tm
    k_small = np.zeros((4, 6))
    k_small[0, 0] = np.sqrt((1 - e.eta) * e.kappa)
    k_small[0, 1] = np.sqrt(e.eta * e.kappa)
    k_small[1, 2] = np.sqrt((1 - o.eta) * o.kappa)
    k_small[1, 3] = np.sqrt(o.eta * o.kappa)
    k_small[2, 4] = np.sqrt(t.kappa)
    k_small[3, 5] = np.sqrt(tm.kappa)
    K = np.kron(k_small, np.eye(2))

    l_small = np.zeros((2, 6))
    l_small[0, 1] = 1.0
    l_small[1, 3] = 1.0
    L = np.kron(l_small, np.eye(2))

    N_J = np.diag([np.sqrt(e.eta * e.kappa)] * 2 + [np.sqrt(o.eta * o.kappa)] * 2)
    N = np.hstack([N_J, np.zeros((4, 4))])

    O = np.kron(np.diag([1.0, -1.0, 1.0, 1.0]), np.diag([1.0, -1.0]))
    Lambda = np.kron(np.eye(6), np.diag([1.0, -1.0]))
    return TransferMatrices(M=drift_matrix(cfg, g), K=K, L=L, N=N, O=O,
                            D=diffusion_matrix(cfg.bath), Lambda=Lambda)


def default_config(C: float = 0.18, n_e_int: float = 0.07, eta_e: float = 0.41, eta_o: float = 0.38,
                   J_over_kappa_t: float = 10.0) -> SystemConfig:
    """Parameters of the reported device with anti-Stokes scattering suppressed.

    Coupling efficiencies are not published; the defaults are representative
    values chosen so the filtered on-resonance covariance lands near the
    reported one.
    """
    kappa_e = TWO_PI * 11e6
    kappa_o = TWO_PI * 28e6
    kappa_t = kappa_o
    pump = PumpParams(kappa_p=kappa_o, eta_p=1.0, g0=TWO_PI * 37.0, J=J_over_kappa_t * kappa_t)
    cfg = SystemConfig(
        mode_e=ModeParams(kappa_e, eta_e),
        mode_o=ModeParams(kappa_o, eta_o),
        mode_t=ModeParams(kappa_t, 1.0),
        mode_tm=ModeParams(kappa_t, 1.0),
        pump=pump,
        bath=BathOccupancy(n_e_int=n_e_int, n_e_wg=0.0),
    )
    return cfg.with_cooperativity(C)
