"""Synthetic heterodyne records drawn from a target covariance matrix.

Every 200 ns analysis window carries one complex amplitude per bin and channel,
rendered as tones around the intermediate frequency.  Detected amplitudes are
``z = sqrt(G) (X + i s P)`` with ``s`` the channel's LO sign, so the microwave
channel appears complex-conjugated.  Per-pulse LO phases, pulse-1/pulse-2
phase jitter, an optical group delay and pump drift events are optional.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..gaussian import check_physical
from ..measurement import DetectionChain
from .records import (DEFAULT_SEGMENTS, SEGMENT_ORDER, RecordBatch, analysis_bins, window_starts)

VACUUM = 0.5


@dataclass(frozen=True)
class SynthesisOptions:
    window_T: float = 200e-9
    raw_period: float = 1e-9
    decimation: int = 25
    phase_jitter: float = 0.17          # rad, optical LO phase change between pulse 1 and pulse 2
    random_lo_phase: bool = True        # uniform per-pulse LO phases on both channels
    group_delay: float = 0.0            # optical arrival delay, s
    reference_amplitude: float = 300.0  # pulse-2 tone, sqrt(photons) per window
    reference_bin: int = 0
    drift_rate: float = 0.0             # probability per pulse that a pump drift event starts
    drift_length: int = 5
    drift_pump_factor: float = 0.3
    residual_loss: float = 0.0          # extra fractional loss of cross-correlations, no mechanism implied
    segments: dict = field(default_factory=lambda: dict(DEFAULT_SEGMENTS))

    def __post_init__(self):
        if self.phase_jitter < 0 or self.reference_amplitude < 0:
            raise ValueError("phase_jitter and reference_amplitude must be non-negative")
        if not 0 <= self.drift_rate <= 1 or not 0 <= self.drift_pump_factor <= 1:
            raise ValueError("drift_rate and drift_pump_factor must lie in [0, 1]")
        if not 0 <= self.residual_loss <= 1:
            raise ValueError("residual_loss must lie in [0, 1]")

    @property
    def decimated_period(self) -> float:
        return self.raw_period * self.decimation

    @property
    def frequencies(self) -> np.ndarray:
        return analysis_bins(self.window_T, self.decimated_period)

    @property
    def duration(self) -> float:
        return max(stop for _, stop in self.segments.values())


@dataclass(frozen=True, eq=False)
class WindowedSpectra:
    """Detected complex amplitudes, arrays shaped (n_pulses, n_windows, n_bins)."""
    frequencies: np.ndarray
    mw: np.ndarray
    opt: np.ndarray
    segment: str
    pulse_index: np.ndarray
    phase_ref: np.ndarray | None = None

    def __len__(self):
        return self.mw.shape[0]

    def select(self, mask) -> "WindowedSpectra":
        ref = None if self.phase_ref is None else self.phase_ref[mask]
        return WindowedSpectra(self.frequencies, self.mw[mask], self.opt[mask], self.segment,
                               self.pulse_index[mask], ref)


@dataclass(frozen=True)
class _Block:
    start: float
    n_samples: int
    segment: str
    analysis: bool


def block_plan(opts: SynthesisOptions) -> list:
    """Tile the record with 25 ns aligned tone blocks; analysis windows first, fillers around them."""
    T, dt = opts.window_T, opts.raw_period
    blocks = []
    for name in SEGMENT_ORDER:
        if name not in opts.segments:
            continue
        start, stop = opts.segments[name]
        try:
            starts = window_starts(opts.segments, name, T)
        except ValueError:
            starts = np.array([])
        cursor = start
        for s in list(starts) + [None]:
            edge = stop if s is None else s
            while edge - cursor > 0.5 * dt:
                n = int(round(min(T, edge - cursor) / dt))
                blocks.append(_Block(cursor, n, name, False))
                cursor += n * dt
            if s is not None:
                blocks.append(_Block(s, int(round(T / dt)), name, True))
                cursor = s + T
    return blocks


def _target_stack(V_target, n_bins: int) -> np.ndarray:
    V = np.asarray(V_target, float)
    if V.shape == (4, 4):
        V = np.broadcast_to(V, (n_bins, 4, 4))
    if V.shape != (n_bins, 4, 4):
        raise ValueError(f"target covariance must be 4x4 or ({n_bins}, 4, 4)")
    for v in V:
        check_physical(v)
    return np.array(V)


def drift_events(n_pulses: int, opts: SynthesisOptions, rng) -> np.ndarray:
    """Per-pulse pump amplitude factor (1 outside drift events)."""
    factor = np.ones(n_pulses)
    if opts.drift_rate == 0 or n_pulses == 0:
        return factor
    for s in np.flatnonzero(rng.random(n_pulses) < opts.drift_rate):
        factor[s:s + opts.drift_length] = opts.drift_pump_factor
    return factor


def _sample(cov: np.ndarray, n: int, rng) -> np.ndarray:
    """Zero-mean Gaussian draws for a stack of covariances: (n, n_bins, 4)."""
    w, vec = np.linalg.eigh(cov)
    root = vec * np.sqrt(np.clip(w, 0, None))[:, None, :]
    return np.einsum("bij,nbj->nbi", root, rng.standard_normal((n,) + cov.shape[:2]))


def _to_complex(q: np.ndarray, chain: DetectionChain, gains) -> tuple:
    G_e, G_o = gains
    z_e = np.sqrt(G_e) * (q[..., 0] + 1j * chain.lo_sign_e * q[..., 1])
    z_o = np.sqrt(G_o) * (q[..., 2] + 1j * chain.lo_sign_o * q[..., 3])
    return z_e, z_o


def draw_blocks(V_stack, chain: DetectionChain, pump: np.ndarray, rng, opts: SynthesisOptions):
    """Complex amplitudes for every block of ``block_plan``: two arrays (n, n_blocks, n_bins)."""
    n = len(pump)
    freqs = opts.frequencies
    n_bins = len(freqs)
    plan = block_plan(opts)
    gains = chain.gains(freqs)
    N = np.diag(chain.n_add)
    vac = np.broadcast_to(VACUUM * np.eye(4) + N, (n_bins, 4, 4))

    V_sig = V_stack.copy()
    if opts.residual_loss:
        V_sig[:, :2, 2:] *= 1 - opts.residual_loss
        V_sig[:, 2:, :2] *= 1 - opts.residual_loss

    chi = rng.uniform(0, 2 * np.pi, n) if opts.random_lo_phase else np.zeros(n)
    psi = rng.uniform(0, 2 * np.pi, n) if opts.random_lo_phase else np.zeros(n)
    eps = opts.phase_jitter * rng.standard_normal(n)

    Z_e = np.empty((n, len(plan), n_bins), complex)
    Z_o = np.empty_like(Z_e)
    drifting = pump < 1
    for b, blk in enumerate(plan):
        if blk.analysis and blk.segment == "pulse1":
            q = _sample(V_sig + N, n, rng)
            if drifting.any():
                p2 = pump[drifting, None, None, None] ** 2
                V_drift = p2 * V_sig + (1 - p2) * VACUUM * np.eye(4)
                q_d = np.stack([_sample(v + N, 1, rng)[0] for v in V_drift])
                q[drifting] = q_d
        else:
            q = _sample(vac, n, rng)
        z_e, z_o = _to_complex(q, chain, gains)
        if blk.analysis and blk.segment == "pulse2":
            k = int(np.argmin(np.abs(freqs - 2 * np.pi * opts.reference_bin / opts.window_T)))
            amp = opts.reference_amplitude * pump
            z_e[:, k] += np.sqrt(gains[0][k]) * amp
            z_o[:, k] += np.sqrt(gains[1][k]) * amp
        late = SEGMENT_ORDER.index(blk.segment) >= SEGMENT_ORDER.index("pulse2")
        opt_phase = psi + (eps if late else 0.0)
        Z_e[:, b] = z_e * np.exp(1j * chi)[:, None]
        Z_o[:, b] = z_o * np.exp(1j * opt_phase)[:, None]
    if opts.group_delay:
        Z_o *= np.exp(-1j * (chain.omega_if + freqs) * opts.group_delay)
    return plan, Z_e, Z_o


def render(plan, Z: np.ndarray, chain: DetectionChain, opts: SynthesisOptions) -> np.ndarray:
    """Time-domain complex IF samples at the raw rate, (n, n_samples)."""
    dt = opts.raw_period
    freqs = opts.frequencies
    n_total = int(round(opts.duration / dt))
    out = np.zeros((Z.shape[0], n_total), complex)
    cache = {}
    for b, blk in enumerate(plan):
        if blk.n_samples not in cache:
            tau = dt * np.arange(blk.n_samples)
            cache[blk.n_samples] = np.exp(1j * np.outer(freqs, tau))
        i0 = int(round(blk.start / dt))
        out[:, i0:i0 + blk.n_samples] = Z[:, b] @ cache[blk.n_samples]
    t = dt * np.arange(n_total)
    out *= np.exp(1j * chain.omega_if * t)
    return out


def iter_synthesis(V_target, chain: DetectionChain, n_pulses: int, seed: int,
                   opts: SynthesisOptions | None = None, chunk: int = 2000, render_time_domain: bool = True):
    """Yield (microwave, optical) batches, or (plan, Z_e, Z_o, pulse_index) without rendering.

    Chunks draw from independent Philox streams spawned from ``seed``; the output
    depends only on ``seed`` and ``chunk``.
    """
    opts = opts or SynthesisOptions()
    V_stack = _target_stack(V_target, len(opts.frequencies))
    root = np.random.SeedSequence(seed)
    pump = drift_events(n_pulses, opts, np.random.Generator(np.random.Philox(root.spawn(1)[0])))
    n_chunks = int(np.ceil(n_pulses / chunk)) if n_pulses else 0
    for c, cs in enumerate(root.spawn(n_chunks)):
        rng = np.random.Generator(np.random.Philox(cs))
        sl = slice(c * chunk, min((c + 1) * chunk, n_pulses))
        idx = np.arange(sl.start, sl.stop)
        plan, Z_e, Z_o = draw_blocks(V_stack, chain, pump[sl], rng, opts)
        if not render_time_domain:
            yield plan, Z_e, Z_o, idx
            continue
        yield (RecordBatch("microwave", render(plan, Z_e, chain, opts), opts.raw_period, dict(opts.segments),
                           pulse_index=idx),
               RecordBatch("optical", render(plan, Z_o, chain, opts), opts.raw_period, dict(opts.segments),
                           pulse_index=idx))


def synthesize_pulses(V_target, chain: DetectionChain, n_pulses: int, seed: int = 0,
                      opts: SynthesisOptions | None = None) -> list:
    """Per-pulse records of both channels (time domain, raw sample rate)."""
    if n_pulses < 0:
        raise ValueError("n_pulses must be non-negative")
    out = []
    for mw, opt in iter_synthesis(V_target, chain, n_pulses, seed, opts):
        for a, b in zip(mw.records(), opt.records()):
            out += [a, b]
    return out


def synthesize_spectra(V_target, chain: DetectionChain, n_pulses: int, seed: int = 0,
                       opts: SynthesisOptions | None = None, chunk: int = 20000) -> dict:
    """Analysis-window amplitudes per segment without rendering the time domain.

    Returns what ``windowed_quadratures`` would extract from the rendered records,
    up to the per-bin gain of the decimation filter (which the floor
    normalization removes).
    """
    opts = opts or SynthesisOptions()
    parts = {}
    for plan, Z_e, Z_o, idx in iter_synthesis(V_target, chain, n_pulses, seed, opts, chunk,
                                              render_time_domain=False):
        for seg in ("before", "pulse1", "pulse2"):
            cols = [b for b, blk in enumerate(plan) if blk.analysis and blk.segment == seg]
            parts.setdefault(seg, []).append((Z_e[:, cols], Z_o[:, cols], idx))
    out = {}
    for seg, items in parts.items():
        out[seg] = WindowedSpectra(opts.frequencies, np.concatenate([a for a, _, _ in items]),
                                   np.concatenate([b for _, b, _ in items]), seg,
                                   np.concatenate([k for _, _, k in items]))
    return out
