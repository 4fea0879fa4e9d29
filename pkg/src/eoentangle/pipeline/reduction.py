"""Data reduction: downconversion, phase correction, post-selection, windowing, normalization."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .records import RecordBatch, PulseRecord, analysis_bins, window_starts
from .synthesis import WindowedSpectra

DDC_DECIMATION = 25
NEIGHBOURS = 20


class AliasingError(ValueError):
    pass


class MissingReferenceError(ValueError):
    pass


class PostSelectionWarning(RuntimeWarning):
    pass


def _as_batch(obj):
    if isinstance(obj, PulseRecord):
        return RecordBatch.from_records([obj]), True
    return obj, False


def _restore(batch, single):
    return batch.records()[0] if single else batch


def ddc(record, omega_if: float, decimation: int = DDC_DECIMATION):
    """Mix a complex IF record to baseband and decimate with a boxcar.

    Each output sample is the mean of ``decimation`` consecutive inputs and is
    time-stamped at the centre of its block.
    """
    batch, single = _as_batch(record)
    fs = 1.0 / batch.sample_period
    if fs < 2 * omega_if / (2 * np.pi):
        raise AliasingError(f"sample rate {fs:.3g} Hz is below twice the IF {omega_if / (2 * np.pi):.3g} Hz")
    n = batch.samples.shape[1] // decimation * decimation
    y = batch.samples[:, :n] * np.exp(-1j * omega_if * batch.times[:n])
    y = y.reshape(len(batch), -1, decimation).mean(axis=2)
    t0 = batch.t0 + 0.5 * (decimation - 1) * batch.sample_period
    out = replace(batch, samples=y, sample_period=batch.sample_period * decimation, t0=t0)
    return _restore(out, single)


def boxcar_response(omega, sample_period: float, decimation: int = DDC_DECIMATION):
    """Zero-phase amplitude response of the centred DDC boxcar."""
    x = np.asarray(omega, float) * sample_period / 2
    num = np.sin(decimation * x)
    den = decimation * np.sin(x)
    return np.where(np.abs(den) < 1e-300, 1.0, num / np.where(den == 0, 1.0, den))


def windowed_quadratures(mw: RecordBatch, opt: RecordBatch, window_T: float, segment: str,
                         tau_delay: float | None = None) -> WindowedSpectra:
    """Discrete Fourier amplitudes of every analysis window in ``segment``.

    For each window starting at ``t_s``,
    ``b_n = (1/M) sum_m y_m exp(-i w_n (t_m - t_s))`` over its M baseband samples.
    """
    if mw.sample_period != opt.sample_period or mw.samples.shape != opt.samples.shape:
        raise ValueError("channels must share the baseband timing")
    if not np.array_equal(mw.pulse_index, opt.pulse_index):
        raise ValueError("channels must cover the same pulses")
    dt = mw.sample_period
    freqs = analysis_bins(window_T, dt)
    M = len(freqs)
    starts = window_starts(mw.segments, segment, window_T, tau_delay)
    t = mw.times
    out = []
    for batch in (mw, opt):
        windows = []
        for ts in starts:
            i0 = int(np.searchsorted(t, ts - 1e-12))
            if i0 + M > len(t):
                raise ValueError(f"window at {ts:.3g} s runs past the record")
            seg = batch.samples[:, i0:i0 + M]
            kernel = np.exp(-1j * np.outer(t[i0:i0 + M] - ts, freqs)) / M
            windows.append(seg @ kernel)
        out.append(np.stack(windows, axis=1))
    ref = opt.phase_ref if opt.phase_ref is not None else None
    return WindowedSpectra(freqs, out[0], out[1], segment, mw.pulse_index.copy(), ref)


def to_quadratures(spec: WindowedSpectra, lo_sign_e: int = -1, lo_sign_o: int = 1) -> np.ndarray:
    """(X_e, P_e, X_o, P_o) per pulse, window and bin: shape (..., n_bins, 4)."""
    return np.stack([spec.mw.real, lo_sign_e * spec.mw.imag, spec.opt.real, lo_sign_o * spec.opt.imag], axis=-1)


def measure_phase_reference(pulse2: WindowedSpectra, reference_bin: int = 0):
    """Relative phase arg(z_o) - arg(z_e) of the pulse-2 tone and its optical power."""
    step = pulse2.frequencies[1] - pulse2.frequencies[0]
    k = int(np.argmin(np.abs(pulse2.frequencies - reference_bin * step)))
    z_e = pulse2.mw[:, :, k].mean(axis=1)
    z_o = pulse2.opt[:, :, k].mean(axis=1)
    phase = np.angle(z_o * np.conj(z_e))
    return phase, np.abs(z_o) ** 2


def with_phase_reference(obj, phase_ref):
    return replace(obj, phase_ref=np.asarray(phase_ref, float))


def phase_correct(obj):
    """Rotate the optical amplitudes by -phase_ref; the microwave channel is left alone.

    Accepts an optical ``RecordBatch`` (baseband) or ``WindowedSpectra``.
    Pulses without a finite reference are dropped; returns (object, n_dropped).
    """
    ref = obj.phase_ref
    if ref is None:
        raise MissingReferenceError("no phase reference attached")
    ok = np.isfinite(ref)
    dropped = int((~ok).sum())
    if dropped:
        obj = obj.select(ok)
        ref = obj.phase_ref
    rot = np.exp(-1j * ref)
    if isinstance(obj, RecordBatch):
        if obj.channel != "optical":
            raise ValueError("phase correction applies to the optical channel")
        return replace(obj, samples=obj.samples * rot[:, None], phase_ref=np.zeros(len(obj))), dropped
    return replace(obj, opt=obj.opt * rot[:, None, None], phase_ref=np.zeros(len(obj))), dropped


@dataclass(frozen=True)
class ThresholdPolicy:
    """Post-selection threshold on pulse-2 power: a quantile, a fraction of the median, or absolute."""
    quantile: float | None = 0.02
    median_fraction: float | None = None
    absolute: float | None = None
    neighbours: int = NEIGHBOURS

    def threshold(self, powers: np.ndarray) -> float:
        if self.absolute is not None:
            return float(self.absolute)
        if self.median_fraction is not None:
            return float(self.median_fraction * np.median(powers))
        return float(np.quantile(powers, self.quantile))


@dataclass(frozen=True)
class RejectionReport:
    threshold: float
    n_total: int
    n_below: int
    n_removed: int

    @property
    def fraction_removed(self) -> float:
        return self.n_removed / self.n_total if self.n_total else 0.0


def post_select(powers, policy: ThresholdPolicy = ThresholdPolicy()):
    """Boolean keep-mask; a pulse below threshold takes ``neighbours`` pulses on each side with it."""
    powers = np.asarray(powers, float)
    n = len(powers)
    if n == 0:
        return np.ones(0, bool), RejectionReport(float("nan"), 0, 0, 0)
    thr = policy.threshold(powers)
    low = powers < thr
    # dilation of the low mask by +-neighbours via a running window sum
    w = policy.neighbours
    c = np.concatenate([[0], np.cumsum(low)])
    lo = np.clip(np.arange(n) - w, 0, n)
    hi = np.clip(np.arange(n) + w + 1, 0, n)
    keep = (c[hi] - c[lo]) == 0
    report = RejectionReport(thr, n, int(low.sum()), int((~keep).sum()))
    if report.fraction_removed > 0.9:
        warnings.warn(f"post-selection removed {report.fraction_removed:.1%} of pulses", PostSelectionWarning,
                      stacklevel=2)
    return keep, report


def normalize_spectra(on_pulse, before_pulse, n_add: float, cold_reference=None, off_resonant=None):
    """Per-bin gain and the on-pulse spectrum in device-referenced photon units.

    Without a cold reference the before-pulse floor is set to ``n_add + 1/2`` bin
    by bin.  With one, the baseline shape comes from ``cold_reference`` and a
    single scale factor puts the off-resonant before-pulse floor at ``n_add + 1/2``.
    Returns (calibrated on-pulse spectrum, gain).
    """
    if before_pulse is None:
        raise MissingReferenceError("before-pulse spectrum is required for the in-situ calibration")
    before = np.asarray(before_pulse, float)
    on = np.asarray(on_pulse, float)
    level = n_add + 0.5
    if cold_reference is None:
        gain = before / level
    else:
        ref = np.asarray(cold_reference, float)
        if np.any(ref <= 0):
            raise ValueError("cold reference must be positive")
        mask = np.ones(ref.shape, bool) if off_resonant is None else np.asarray(off_resonant, bool)
        scale = np.mean(before[mask] / ref[mask]) / level
        gain = scale * ref
    if np.any(gain <= 0):
        raise ValueError("non-positive calibration gain")
    return on / gain, gain


def floor_power(spec: WindowedSpectra) -> np.ndarray:
    """Mean single-quadrature power per bin over pulses and windows, (2, n_bins)."""
    return np.stack([0.5 * np.mean(np.abs(spec.mw) ** 2, axis=(0, 1)),
                     0.5 * np.mean(np.abs(spec.opt) ** 2, axis=(0, 1))])
