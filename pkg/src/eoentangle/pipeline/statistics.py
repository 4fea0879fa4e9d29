"""Covariance estimation, joint-quadrature statistics and error bars from reduced data."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from ..entanglement import mixing_angle
from ..measurement import DetectionChain
from ..spectra import CSV_COLUMNS
from .reduction import (ThresholdPolicy, RejectionReport, ddc, floor_power, measure_phase_reference,
                        normalize_spectra, phase_correct, post_select, to_quadratures, windowed_quadratures,
                        with_phase_reference)
from .synthesis import WindowedSpectra

_ELEMENTS = [(c, (int(c[1]) - 1, int(c[2]) - 1)) for c in CSV_COLUMNS[1:]]


class StatisticsError(ValueError):
    pass


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ReducedDataset:
    """Per-bin quadruples (X_e, P_e, X_o, P_o) in detector units plus the before-pulse floor."""
    frequencies: np.ndarray
    quadratures: np.ndarray          # (n_samples, n_bins, 4)
    floor: np.ndarray                # (2, n_bins) single-quadrature power before the pulse
    chain: DetectionChain
    segment: str = "pulse1"
    pulse_index: np.ndarray | None = None
    cold_reference: np.ndarray | None = None   # microwave baseline shape, (n_bins,)
    floor_count: int | None = None   # complex samples behind each floor estimate

    def __post_init__(self):
        q = np.asarray(self.quadratures, float)
        if q.ndim != 3 or q.shape[2] != 4 or q.shape[1] != len(self.frequencies):
            raise ValueError("quadratures must be shaped (n_samples, n_bins, 4)")
        if not np.all(np.isfinite(q)):
            raise ValueError("every retained pulse needs all four quadratures")
        object.__setattr__(self, "quadratures", q)

    @property
    def n(self) -> int:
        return self.quadratures.shape[0]

    def gains(self, chain: DetectionChain | None = None) -> np.ndarray:
        chain = chain or self.chain
        _, g_e = normalize_spectra(self.floor[0], self.floor[0], chain.n_add_e, self.cold_reference)
        _, g_o = normalize_spectra(self.floor[1], self.floor[1], chain.n_add_o)
        return np.stack([g_e, g_o])

    def calibrated(self, chain: DetectionChain | None = None) -> np.ndarray:
        """Quadruples in device-referenced units (vacuum 1/2 plus added noise)."""
        g = self.gains(chain)
        scale = np.sqrt(np.stack([g[0], g[0], g[1], g[1]], axis=-1))
        return self.quadratures / scale


def build_dataset(signal: WindowedSpectra, before: WindowedSpectra, chain: DetectionChain,
                  cold_reference=None) -> ReducedDataset:
    q = to_quadratures(signal, chain.lo_sign_e, chain.lo_sign_o)
    n_w = q.shape[1]
    return ReducedDataset(signal.frequencies, q.reshape(-1, q.shape[2], 4), floor_power(before), chain,
                          signal.segment, np.repeat(signal.pulse_index, n_w), cold_reference,
                          before.mw.shape[0] * before.mw.shape[1])


def _cov(q: np.ndarray) -> np.ndarray:
    n = q.shape[0]
    if n < 2:
        raise StatisticsError("at least two pulses are needed for second moments")
    d = q - q.mean(axis=0)
    return np.einsum("nbi,nbj->bij", d, d) / (n - 1)


def sample_covariance(ds: ReducedDataset, chain: DetectionChain | None = None):
    """(V_meas, V) per bin, V = V_meas - N_add on the diagonal."""
    chain = chain or ds.chain
    V_meas = _cov(ds.calibrated(chain))
    return V_meas, V_meas - np.diag(chain.n_add)


def wishart_sigma(V_meas: np.ndarray, n: int, floor_count: int | None = None) -> np.ndarray:
    """1-sigma sampling error of every covariance element: Var = (V_ii V_jj + V_ij^2)/(n-1).

    With ``floor_count`` the relative error 1/sqrt(floor_count) of each channel's
    floor-derived gain is added; V_ij scales as 1/sqrt(g_i g_j).
    """
    d = np.diagonal(V_meas, axis1=-2, axis2=-1)
    var = (d[..., :, None] * d[..., None, :] + V_meas**2) / (n - 1)
    if floor_count:
        same = np.kron(np.eye(2), np.ones((2, 2)))
        # (r_i + r_j)^2 / 4 within a channel, (r_i^2 + r_j^2) / 4 across
        var = var + V_meas**2 * (1 + same) / (2 * floor_count)
    return np.sqrt(var)


@dataclass(frozen=True, eq=False)
class JointQuadratureStats:
    frequencies: np.ndarray
    phis: np.ndarray
    delta: np.ndarray          # (n_bins, n_phi)
    delta_min: np.ndarray      # exact minimum over phi from the first-harmonic fit
    phi_min: np.ndarray
    sigma_min: np.ndarray      # 1-sigma statistical error of delta_min


def _rotate_optical_q(q: np.ndarray, phi) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    out = q.copy()
    out[..., 2] = c * q[..., 2] + s * q[..., 3]
    out[..., 3] = -s * q[..., 2] + c * q[..., 3]
    return out


def joint_quadrature_stats(ds: ReducedDataset, phis=None, chain: DetectionChain | None = None
                           ) -> JointQuadratureStats:
    """Joint variances <X+^2> + <P-^2> over a local optical phase grid (vacuum = 1)."""
    chain = chain or ds.chain
    phis = np.linspace(0, 2 * np.pi, 73)[:-1] if phis is None else np.asarray(phis, float)
    if len(np.unique(np.mod(phis, 2 * np.pi))) < 3:
        raise ValueError("phase grid needs at least three distinct angles")
    q = ds.calibrated(chain)
    if q.shape[0] < 2:
        raise StatisticsError("at least two pulses are needed for variances")
    offset = (chain.n_add_e + chain.n_add_o) / 2
    delta = np.empty((q.shape[1], len(phis)))
    for k, phi in enumerate(phis):
        r = _rotate_optical_q(q, phi)
        x_plus = r[..., 0] + r[..., 2]
        p_minus = r[..., 1] - r[..., 3]
        delta[:, k] = (x_plus.var(axis=0, ddof=1) / 2 - offset) + (p_minus.var(axis=0, ddof=1) / 2 - offset)
    # the sweep is exactly a0 + a1 cos(phi) + b1 sin(phi)
    A = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    coef, *_ = np.linalg.lstsq(A, delta.T, rcond=None)
    a0, a1, b1 = coef
    dmin = a0 - np.hypot(a1, b1)
    phi_min = np.arctan2(-b1, -a1)
    sig = np.empty(q.shape[1])
    for b in range(q.shape[1]):
        r = _rotate_optical_q(q[:, b], phi_min[b])
        xp = r[:, 0] + r[:, 2]
        pm = r[:, 1] - r[:, 3]
        y = ((xp - xp.mean()) ** 2 + (pm - pm.mean()) ** 2) / 2
        sig[b] = y.std(ddof=1) / np.sqrt(len(y))
    return JointQuadratureStats(ds.frequencies, phis, delta, dmin, phi_min, sig)


def _quads_to_complex(q, chain):
    return q[..., 2] + 1j * chain.lo_sign_o * q[..., 3]


@dataclass(frozen=True)
class DelayEstimate:
    delay: float
    slope_before: float
    slope_after: float
    bins_used: int


def _phase_slope(ds: ReducedDataset, chain: DetectionChain, min_bins: int, z_sig: float):
    V_meas, _ = sample_covariance(ds, chain)
    n = ds.n
    order = np.argsort(ds.frequencies)
    w, th, wt = [], [], []
    for b in order:
        ang = mixing_angle(V_meas[b])
        se = np.sqrt((V_meas[b, 0, 0] * V_meas[b, 2, 2]) / (2 * n))
        if not ang.undefined and ang.magnitude > z_sig * se:
            w.append(ds.frequencies[b])
            th.append(ang.theta)
            wt.append((ang.magnitude / se) ** 2)
    if len(w) < min_bins:
        raise DegenerateFitError(f"only {len(w)} bins carry significant correlations; need {min_bins}")
    th = np.unwrap(np.array(th))
    slope, _ = np.polyfit(np.array(w), th, 1, w=np.sqrt(wt))
    return float(slope), len(w)


def group_delay_align(ds: ReducedDataset, chain: DetectionChain | None = None, min_bins: int = 3,
                      z_sig: float = 3.0):
    """Remove the inter-channel delay that tilts the optimal phase across bins.

    The mixing angle falls as ``-w_n tau`` for an optical delay ``tau``; the
    optical amplitudes are advanced by ``exp(+i w_n tau)``.
    """
    chain = chain or ds.chain
    slope, used = _phase_slope(ds, chain, min_bins, z_sig)
    tau = -slope
    q = ds.quadratures.copy()
    z = _quads_to_complex(q, chain) * np.exp(1j * ds.frequencies * tau)
    q[..., 2] = z.real
    q[..., 3] = chain.lo_sign_o * z.imag
    out = replace(ds, quadratures=q)
    try:
        after, _ = _phase_slope(out, chain, min_bins, z_sig)
    except DegenerateFitError:
        after = float("nan")
    return out, DelayEstimate(tau, slope, after, used)


@dataclass(frozen=True, eq=False)
class ErrorBars:
    statistical: np.ndarray     # 1-sigma per element
    syst_lo: np.ndarray
    syst_hi: np.ndarray
    total_lo: np.ndarray
    total_hi: np.ndarray
    n_sigma: float


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    frequencies: np.ndarray
    V: np.ndarray
    V_meas: np.ndarray
    errors: ErrorBars
    n: int


def covariance_with_errors(ds: ReducedDataset, n_sigma: float = 2.0, systematics: bool = True
                           ) -> CovarianceEstimate:
    """Sample covariance per bin with Wishart errors and a worst-case added-noise envelope."""
    if ds.n < 2:
        raise StatisticsError("at least two pulses are needed")
    chain = ds.chain
    V_meas, V = sample_covariance(ds, chain)
    stat = wishart_sigma(V_meas, ds.n, ds.floor_count)
    runs = [(V, stat)]
    if systematics:
        for de, do in itertools.product((-1, 0, 1), repeat=2):
            if de == do == 0:
                continue
            alt = _shifted(chain, de, do)
            Vm_k, V_k = sample_covariance(ds, alt)
            runs.append((V_k, wishart_sigma(Vm_k, ds.n, ds.floor_count)))
    Vs = np.stack([r[0] for r in runs])
    Ss = np.stack([r[1] for r in runs])
    errors = ErrorBars(stat, Vs.min(axis=0), Vs.max(axis=0), (Vs - n_sigma * Ss).min(axis=0),
                       (Vs + n_sigma * Ss).max(axis=0), n_sigma)
    return CovarianceEstimate(ds.frequencies, V, V_meas, errors, ds.n)


def _shifted(chain: DetectionChain, de: int, do: int) -> DetectionChain:
    return replace(chain, n_add_e=chain.n_add_e + de * chain.n_add_e_sigma,
              n_add_o=chain.n_add_o + do * chain.n_add_o_sigma, enforce_bound=False)


def write_reduced_csv(path, est: CovarianceEstimate) -> None:
    names = [c for c, _ in _ELEMENTS]
    cols = (["offset_hz"] + names + [f"stat_sigma_{c}" for c in names] + [f"syst_lo_{c}" for c in names]
            + [f"syst_hi_{c}" for c in names])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for b, f in enumerate(est.frequencies):
            row = [repr(float(f / (2 * np.pi)))]
            for arr in (est.V, est.errors.statistical, est.errors.syst_lo, est.errors.syst_hi):
                row += [repr(float(arr[b][ij])) for _, ij in _ELEMENTS]
            w.writerow(row)


@dataclass(frozen=True)
class ReductionConfig:
    window_T: float = 200e-9
    segment: str = "pulse1"
    policy: ThresholdPolicy = field(default_factory=ThresholdPolicy)
    reference_bin: int = 0
    tau_delay: float | None = None
    decimation: int = 25


@dataclass(frozen=True, eq=False)
class ChunkResult:
    signal: WindowedSpectra
    before: WindowedSpectra
    power: np.ndarray
    dropped: int


def reduce_chunk(mw_raw, opt_raw, chain: DetectionChain, cfg: ReductionConfig = ReductionConfig()) -> ChunkResult:
    """DDC, pulse-2 phase reference, optical phase correction and windowed transforms."""
    mw = ddc(mw_raw, chain.omega_if, cfg.decimation)
    opt = ddc(opt_raw, chain.omega_if, cfg.decimation)
    p2 = windowed_quadratures(mw, opt, cfg.window_T, "pulse2")
    phase, power = measure_phase_reference(p2, cfg.reference_bin)
    opt, dropped = phase_correct(with_phase_reference(opt, phase))
    if dropped:
        keep = np.isfinite(phase)
        mw, power = mw.select(keep), power[keep]
    signal = windowed_quadratures(mw, opt, cfg.window_T, cfg.segment, cfg.tau_delay)
    before = windowed_quadratures(mw, opt, cfg.window_T, "before")
    return ChunkResult(signal, before, power, dropped)


def spectra_chunk(spectra: dict, cfg: ReductionConfig = ReductionConfig()) -> ChunkResult:
    """Same as ``reduce_chunk`` for amplitudes that skipped the time domain."""
    phase, power = measure_phase_reference(spectra["pulse2"], cfg.reference_bin)
    signal, dropped = phase_correct(with_phase_reference(spectra[cfg.segment], phase))
    before = spectra["before"]
    if dropped:
        keep = np.isfinite(phase)
        before, power = before.select(keep), power[keep]
    return ChunkResult(signal, before, power, dropped)


def _concat(parts):
    first = parts[0]
    return WindowedSpectra(first.frequencies, np.concatenate([p.mw for p in parts]),
                           np.concatenate([p.opt for p in parts]), first.segment,
                           np.concatenate([p.pulse_index for p in parts]))


def assemble(chunks, chain: DetectionChain, cfg: ReductionConfig = ReductionConfig(), cold_reference=None):
    """Post-select across all chunks and build the calibrated dataset.

    Selection acts per pulse, so applying it after the windowed transform is
    equivalent to applying it to the records.
    """
    chunks = list(chunks)
    if not chunks or sum(len(c.power) for c in chunks) == 0:
        raise StatisticsError("no pulses to reduce")
    signal = _concat([c.signal for c in chunks])
    before = _concat([c.before for c in chunks])
    power = np.concatenate([c.power for c in chunks])
    order = np.argsort(signal.pulse_index, kind="stable")
    signal, before, power = signal.select(order), before.select(order), power[order]
    keep, report = post_select(power, cfg.policy)
    ds = build_dataset(signal.select(keep), before.select(keep), chain, cold_reference)
    return ds, report


def reduce_records(records, chain: DetectionChain, cfg: ReductionConfig = ReductionConfig()):
    from .records import split_channels
    mw, opt = split_channels(records)
    return assemble([reduce_chunk(mw, opt, chain, cfg)], chain, cfg)
