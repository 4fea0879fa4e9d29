"""Per-pulse heterodyne records and their JSON-Lines store."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

CHANNELS = ("microwave", "optical")
SEGMENT_ORDER = ("before", "pulse1", "gap", "pulse2", "after")

# default pulse sequence in seconds: 1 us of pre-pulse noise, two 250 ns pulses
DEFAULT_SEGMENTS = {
    "before": (0.0, 1000e-9),
    "pulse1": (1000e-9, 1250e-9),
    "gap": (1250e-9, 1500e-9),
    "pulse2": (1500e-9, 1750e-9),
    "after": (1750e-9, 2000e-9),
}


def validate_segments(segments: dict, duration: float) -> None:
    spans = [(name, segments[name]) for name in SEGMENT_ORDER if name in segments]
    unknown = set(segments) - set(SEGMENT_ORDER)
    if unknown:
        raise ValueError(f"unknown segment labels {sorted(unknown)}")
    last = 0.0
    eps = 1e-15
    for name, (start, stop) in spans:
        if not start < stop:
            raise ValueError(f"segment {name!r} has non-positive length")
        if start < last - eps:
            raise ValueError(f"segment {name!r} overlaps or is out of order")
        if stop > duration + eps:
            raise ValueError(f"segment {name!r} ends after the record ({stop} > {duration})")
        last = stop


@dataclass(frozen=True, eq=False)
class PulseRecord:
    """One shot of one channel.  ``t0`` is the time stamp of the first sample."""
    channel: str
    i_samples: np.ndarray
    q_samples: np.ndarray
    sample_period: float
    segments: dict = field(default_factory=lambda: dict(DEFAULT_SEGMENTS))
    phase_ref: float = float("nan")
    pulse_index: int = 0
    t0: float = 0.0

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        i = np.asarray(self.i_samples, float)
        q = np.asarray(self.q_samples, float)
        if i.shape != q.shape or i.ndim != 1:
            raise ValueError("i and q must be 1-D arrays of equal length")
        object.__setattr__(self, "i_samples", i)
        object.__setattr__(self, "q_samples", q)
        validate_segments(self.segments, self.t0 + len(i) * self.sample_period + self.sample_period)

    @property
    def complex_samples(self) -> np.ndarray:
        return self.i_samples + 1j * self.q_samples


@dataclass(frozen=True, eq=False)
class RecordBatch:
    """Many shots of one channel sharing timing; arrays are (n_pulses, n_samples)."""
    channel: str
    samples: np.ndarray          # complex, i + j q
    sample_period: float
    segments: dict = field(default_factory=lambda: dict(DEFAULT_SEGMENTS))
    phase_ref: np.ndarray | None = None
    pulse_index: np.ndarray | None = None
    t0: float = 0.0

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        s = np.asarray(self.samples)
        if s.ndim != 2:
            raise ValueError("batch samples must be 2-D (pulses x samples)")
        object.__setattr__(self, "samples", s.astype(complex, copy=False))
        n = s.shape[0]
        if self.pulse_index is None:
            object.__setattr__(self, "pulse_index", np.arange(n))
        if self.phase_ref is None:
            object.__setattr__(self, "phase_ref", np.full(n, np.nan))
        validate_segments(self.segments, self.t0 + s.shape[1] * self.sample_period + self.sample_period)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.sample_period * np.arange(self.samples.shape[1])

    def select(self, mask) -> "RecordBatch":
        return replace(self, samples=self.samples[mask], phase_ref=self.phase_ref[mask],
                       pulse_index=self.pulse_index[mask])

    def records(self) -> list:
        return [PulseRecord(self.channel, s.real.copy(), s.imag.copy(), self.sample_period, dict(self.segments),
                            float(p), int(k), self.t0)
                for s, p, k in zip(self.samples, self.phase_ref, self.pulse_index)]

    @classmethod
    def from_records(cls, records) -> "RecordBatch":
        records = list(records)
        if not records:
            raise ValueError("no records")
        first = records[0]
        for r in records:
            if (r.channel != first.channel or r.sample_period != first.sample_period
                    or r.segments != first.segments or len(r.i_samples) != len(first.i_samples)
                    or r.t0 != first.t0):
                raise ValueError("records in a batch must share channel, timing and segments")
        return cls(first.channel, np.array([r.complex_samples for r in records]), first.sample_period,
                   dict(first.segments), np.array([r.phase_ref for r in records]),
                   np.array([r.pulse_index for r in records]), first.t0)


def split_channels(records):
    """Group records into (microwave batch, optical batch) aligned by pulse index."""
    by = {c: sorted((r for r in records if r.channel == c), key=lambda r: r.pulse_index) for c in CHANNELS}
    if not by["microwave"] or not by["optical"]:
        raise ValueError("both microwave and optical records are required")
    idx_e = [r.pulse_index for r in by["microwave"]]
    idx_o = [r.pulse_index for r in by["optical"]]
    if idx_e != idx_o:
        raise ValueError("microwave and optical records do not cover the same pulses")
    return RecordBatch.from_records(by["microwave"]), RecordBatch.from_records(by["optical"])


def _encode(r: PulseRecord) -> dict:
    return {
        "channel": r.channel,
        "pulse_index": r.pulse_index,
        "sample_period_s": r.sample_period,
        "t0_s": r.t0,
        "segments": {k: list(v) for k, v in r.segments.items()},
        "i": r.i_samples.tolist(),
        "q": r.q_samples.tolist(),
        "phase_ref": None if np.isnan(r.phase_ref) else r.phase_ref,
    }


def append_jsonl(fh, records) -> int:
    """Write records to an open text handle, one JSON object per line."""
    n = 0
    for r in records:
        fh.write(json.dumps(_encode(r)) + "\n")
        n += 1
    return n


def write_jsonl(path, records) -> int:
    with open(path, "w") as fh:
        return append_jsonl(fh, records)


def read_jsonl(path) -> list:
    out = []
    with open(Path(path)) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                ref = d.get("phase_ref")
                out.append(PulseRecord(
                    channel=d["channel"],
                    i_samples=np.array(d["i"], float),
                    q_samples=np.array(d["q"], float),
                    sample_period=float(d["sample_period_s"]),
                    segments={k: tuple(v) for k, v in d["segments"].items()},
                    phase_ref=float("nan") if ref is None else float(ref),
                    pulse_index=int(d.get("pulse_index", lineno - 1)),
                    t0=float(d.get("t0_s", 0.0)),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record ({exc})") from exc
    return out


# settling time skipped at the start of a pulse before the analysis window
DEFAULT_TAU_DELAY = {"pulse1": 50e-9, "pulse2": 50e-9}


class WindowTooLongError(ValueError):
    pass


def window_starts(segments: dict, segment: str, window_T: float, tau_delay: float | None = None) -> np.ndarray:
    """Start times of the analysis windows tiled inside ``segment``."""
    if segment not in segments:
        raise KeyError(f"record has no segment {segment!r}")
    start, stop = segments[segment]
    tau = DEFAULT_TAU_DELAY.get(segment, 0.0) if tau_delay is None else tau_delay
    n = int(np.floor((stop - start - tau) / window_T + 1e-9))
    if n < 1:
        raise WindowTooLongError(
            f"window of {window_T * 1e9:.0f} ns does not fit in segment {segment!r} "
            f"({(stop - start) * 1e9:.0f} ns with {tau * 1e9:.0f} ns delay)")
    return start + tau + window_T * np.arange(n)


def analysis_bins(window_T: float, sample_period: float) -> np.ndarray:
    """Bin offsets 2 pi k / T, k = -M/2 .. M/2 - 1, for M decimated samples per window."""
    M = int(round(window_T / sample_period))
    if abs(M * sample_period - window_T) > 1e-6 * window_T:
        raise ValueError("window length must be a whole number of samples")
    k = np.arange(-(M // 2), M - M // 2)
    return 2 * np.pi * k / window_T
