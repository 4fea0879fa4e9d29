"""Synthetic pulse records and the data-reduction chain."""
from .records import PulseRecord, RecordBatch, read_jsonl, write_jsonl, split_channels
from .synthesis import SynthesisOptions, WindowedSpectra, synthesize_pulses, synthesize_spectra, iter_synthesis
from .reduction import (ThresholdPolicy, ddc, phase_correct, post_select, windowed_quadratures,
                        normalize_spectra, measure_phase_reference)
from .statistics import (ReducedDataset, ReductionConfig, ErrorBars, covariance_with_errors,
                         joint_quadrature_stats, group_delay_align, reduce_chunk, spectra_chunk, assemble,
                         reduce_records, write_reduced_csv)

__all__ = [
    "PulseRecord", "RecordBatch", "read_jsonl", "write_jsonl", "split_channels",
    "SynthesisOptions", "WindowedSpectra", "synthesize_pulses", "synthesize_spectra", "iter_synthesis",
    "ThresholdPolicy", "ddc", "phase_correct", "post_select", "windowed_quadratures", "normalize_spectra",
    "measure_phase_reference", "ReducedDataset", "ReductionConfig", "ErrorBars", "covariance_with_errors",
    "joint_quadrature_stats", "group_delay_align", "reduce_chunk", "spectra_chunk", "assemble",
    "reduce_records", "write_reduced_csv",
]
