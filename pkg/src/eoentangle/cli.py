"""Command-line front end.

Every command writes its outputs plus ``run_manifest.json`` into one output
directory (``--out``, else ``$EOENTANGLE_OUT/<command>``, else
``./eoentangle_out/<command>``).  Exit codes: 0 success, 2 invalid input,
3 numerical failure, 4 file I/O.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (FitConvergenceError, ThermometrySweep, fit_thermometry, load_noise_model, read_sweep_csv,
                          thermometry_report, write_sweep_csv)
from .config import load_analysis, load_detection_chain, load_system_config
from .entanglement import EntanglementDomainError, delta_epr, entanglement_report, report_to_json
from .fitting import Spectrum, joint_theory_fit, lorentzian_fit
from .gaussian import UnphysicalCovarianceError, check_symmetric
from .model import TWO_PI, build_transfer_matrices
from .pipeline.records import append_jsonl, read_jsonl, split_channels
from .pipeline.reduction import ThresholdPolicy
from .pipeline.statistics import (DegenerateFitError, ReductionConfig, StatisticsError, assemble,
                                  covariance_with_errors, group_delay_align, joint_quadrature_stats, reduce_chunk,
                                  spectra_chunk, write_reduced_csv)
from .pipeline.synthesis import SynthesisOptions, WindowedSpectra, iter_synthesis, synthesize_spectra
from .spectra import (QuadratureAccuracyError, SpectralGrid, covariance_spectrum, mean_elements, read_spectra_csv,
                      write_spectra_csv)

OUT_ENV = "EOENTANGLE_OUT"
MANIFEST = "run_manifest.json"
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4
SPECTRA_SEGMENTS = ("before", "pulse1", "pulse2")


def _out_dir(args) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(os.environ.get(OUT_ENV, "eoentangle_out")) / args.command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out: Path, args, inputs: dict, outputs: list) -> None:
    doc = {
        "command": args.command,
        "config_paths": {k: str(v) for k, v in inputs.items() if v is not None},
        "seed": getattr(args, "seed", None),
        "output_directory": str(out),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "arguments": {k: v for k, v in vars(args).items() if k != "func"},
        "outputs": outputs,
    }
    (out / MANIFEST).write_text(json.dumps(doc, indent=2, default=str) + "\n")


def _load_cm(path) -> np.ndarray:
    """A 4x4 matrix from JSON (bare list or an object with "covariance") or whitespace text."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        V = np.asarray(doc["covariance"] if isinstance(doc, dict) else doc, float)
    else:
        V = np.loadtxt(path, delimiter="," if path.suffix == ".csv" else None, ndmin=2)
    if V.shape != (4, 4):
        raise ValueError(f"{path}: expected a 4x4 matrix, got shape {V.shape}")
    check_symmetric(V)
    return V


# commands ----------------------------------------------------------------------------------------

def cmd_spectra(args) -> int:
    cfg = load_system_config(args.config)
    analysis = load_analysis(args.config)
    T = args.window_ns * 1e-9 if args.window_ns else analysis["window_T"]
    if args.points:
        freqs = TWO_PI * 1e6 * np.linspace(-args.span_mhz, args.span_mhz, args.points)
        grid = SpectralGrid(freqs, T)
    else:
        grid = SpectralGrid.bins(T, args.bins if args.bins is not None else analysis["n_bins"])
    V = covariance_spectrum(build_transfer_matrices(cfg), grid)
    v11, v33, v13 = mean_elements(V)
    dm, dp = np.array([delta_epr(v) for v in V]).T
    out = _out_dir(args)
    write_spectra_csv(out / "spectra.csv", grid.frequencies, V,
                      {"V11bar": v11, "V33bar": v33, "V13bar": v13, "delta_epr_minus": dm, "delta_epr_plus": dp})
    _write_manifest(out, args, {"config": args.config}, ["spectra.csv"])
    print(f"wrote {len(grid.frequencies)} frequencies to {out / 'spectra.csv'}")
    return EXIT_OK


def cmd_entangle(args) -> int:
    V = _load_cm(args.cm)
    report = entanglement_report(V)
    out = _out_dir(args)
    (out / "entanglement.json").write_text(report_to_json(report, V) + "\n")
    _write_manifest(out, args, {"cm": args.cm}, ["entanglement.json"])
    print(f"E_N = {report.log_negativity:.4f}  purity = {report.purity:.4f}  "
          f"Delta- = {report.delta_epr_minus:.4f}  Delta+ = {report.delta_epr_plus:.4f}")
    return EXIT_OK


def _synthesis_options(args) -> SynthesisOptions:
    return SynthesisOptions(window_T=args.window_ns * 1e-9, phase_jitter=args.jitter,
                            group_delay=args.group_delay_ns * 1e-9, drift_rate=args.drift_rate)


def _save_spectra(out: Path, spectra: dict) -> list:
    names = []
    for seg in SPECTRA_SEGMENTS:
        s = spectra[seg]
        for part, arr in (("mw", s.mw), ("opt", s.opt)):
            name = f"spectra_{seg}_{part}.npy"
            np.save(out / name, arr)
            names.append(name)
    np.save(out / "spectra_pulse_index.npy", spectra["pulse1"].pulse_index)
    np.save(out / "spectra_frequencies.npy", spectra["pulse1"].frequencies)
    return names + ["spectra_pulse_index.npy", "spectra_frequencies.npy"]


def _load_spectra(directory: Path) -> dict:
    idx = np.load(directory / "spectra_pulse_index.npy")
    freqs = np.load(directory / "spectra_frequencies.npy")
    return {seg: WindowedSpectra(freqs, np.load(directory / f"spectra_{seg}_mw.npy"),
                                 np.load(directory / f"spectra_{seg}_opt.npy"), seg, idx)
            for seg in SPECTRA_SEGMENTS}


def cmd_synth(args) -> int:
    if args.pulses < 1:
        raise ValueError("--pulses must be at least 1")
    V = _load_cm(args.cm)
    chain = load_detection_chain(args.chain)
    opts = _synthesis_options(args)
    out = _out_dir(args)
    if args.fast:
        outputs = _save_spectra(out, synthesize_spectra(V, chain, args.pulses, args.seed, opts))
    else:
        with open(out / "records.jsonl", "w") as fh:
            for mw, opt in iter_synthesis(V, chain, args.pulses, args.seed, opts, chunk=500):
                for a, b in zip(mw.records(), opt.records()):
                    append_jsonl(fh, (a, b))
        outputs = ["records.jsonl"]
    _write_manifest(out, args, {"cm": args.cm, "chain": args.chain}, outputs)
    print(f"synthesized {args.pulses} pulses into {out}")
    return EXIT_OK


def _policy(args) -> ThresholdPolicy:
    if args.median_fraction is not None:
        return ThresholdPolicy(quantile=None, median_fraction=args.median_fraction)
    return ThresholdPolicy(quantile=args.quantile)


def cmd_reduce(args) -> int:
    chain = load_detection_chain(args.chain)
    cfg = ReductionConfig(window_T=args.window_ns * 1e-9, segment=args.segment, policy=_policy(args))
    src = Path(args.records)
    if src.is_dir():
        chunks = [spectra_chunk(_load_spectra(src), cfg)]
    else:
        records = read_jsonl(src)
        if not records:
            raise ValueError(f"{src}: no records")
        mw, opt = split_channels(records)
        chunks = [reduce_chunk(mw, opt, chain, cfg)]
    ds, rejection = assemble(chunks, chain, cfg)
    delay = None
    if args.align_delay:
        ds, delay = group_delay_align(ds)
    est = covariance_with_errors(ds, n_sigma=args.n_sigma)
    stats = joint_quadrature_stats(ds)
    out = _out_dir(args)
    write_reduced_csv(out / "reduced.csv", est)
    with open(out / "duan.csv", "w") as fh:
        fh.write("offset_hz,delta_min,sigma_min,phi_min,delta_from_cm\n")
        for b, f in enumerate(stats.frequencies):
            row = (f / TWO_PI, stats.delta_min[b], stats.sigma_min[b], stats.phi_min[b], delta_epr(est.V[b])[0])
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    summary = {"n_samples": ds.n, "segment": args.segment, "rejection": asdict(rejection),
               "group_delay": None if delay is None else asdict(delay)}
    centre = int(np.argmin(np.abs(est.frequencies)))
    try:
        summary["centre_bin_report"] = json.loads(report_to_json(entanglement_report(est.V[centre]), est.V[centre]))
    except (UnphysicalCovarianceError, EntanglementDomainError) as exc:
        summary["centre_bin_report"] = {"error": str(exc)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=float) + "\n")
    _write_manifest(out, args, {"records": args.records, "chain": args.chain},
                    ["reduced.csv", "duan.csv", "summary.json"])
    print(f"reduced {ds.n} samples; removed {rejection.n_removed} of {rejection.n_total} pulses")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    out = _out_dir(args)
    omega_e = TWO_PI * args.freq_hz
    outputs = []
    if args.simulate:
        rng = np.random.default_rng(args.seed)
        T = np.geomspace(0.04, 1.0, 8)
        P = load_noise_model(T, 10 ** (args.sim_gain_db / 10), args.sim_n_add, omega_e, args.bandwidth_hz)
        sweep = ThermometrySweep(T, P * (1 + args.sim_rel_noise * rng.standard_normal(T.size)), omega_e,
                                 args.bandwidth_hz)
        write_sweep_csv(out / "sweep.csv", sweep)
        outputs.append("sweep.csv")
        rel = args.sim_rel_noise
    else:
        if not args.sweep:
            raise ValueError("give --sweep FILE or --simulate")
        sweep = read_sweep_csv(args.sweep, omega_e, args.bandwidth_hz)
        rel = args.rel_sigma
    fit = fit_thermometry(sweep, rel_sigma=rel)
    (out / "thermometry.json").write_text(thermometry_report(fit, args.cable_loss_db) + "\n")
    outputs.append("thermometry.json")
    _write_manifest(out, args, {"sweep": args.sweep}, outputs)
    print(f"G = {fit.gain_db:.3f} +- {fit.gain_db_sigma:.3f} dB, N_add = {fit.n_add:.3f} +- {fit.n_add_sigma:.3f}")
    return EXIT_OK


def _bar_sigma(extra: dict, a: str, b: str):
    ka, kb = f"stat_sigma_{a}", f"stat_sigma_{b}"
    if ka in extra and kb in extra:
        return np.hypot(extra[ka], extra[kb]) / 2
    return None


def cmd_fit(args) -> int:
    cfg = load_system_config(args.config)
    freqs, V, extra = read_spectra_csv(args.spectra)
    v11, v33, _ = mean_elements(V)
    s11, s33 = _bar_sigma(extra, "V11", "V22"), _bar_sigma(extra, "V33", "V44")
    T = args.window_ns * 1e-9
    result = joint_theory_fit(Spectrum(freqs, v11, s11), Spectrum(freqs, v33, s33), cfg, T,
                              x0=(args.c0, args.n0))
    doc = {"joint": json.loads(result.to_json()), "reduced_chi2": result.reduced_chi2}
    if len(freqs) >= 5:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            try:
                doc["lorentzian_V11bar_hz"] = json.loads(lorentzian_fit(freqs / TWO_PI, v11, s11).to_json())
            except FitConvergenceError as exc:
                # supplementary output only, the joint fit above is the result
                doc["lorentzian_V11bar_hz"] = {"error": str(exc)}
    out = _out_dir(args)
    (out / "fit.json").write_text(json.dumps(doc, indent=2) + "\n")
    _write_manifest(out, args, {"config": args.config, "spectra": args.spectra}, ["fit.json"])
    p, s = result.params, result.sigma
    print(f"C = {p['C']:.4f} +- {s['C']:.4f}  n_e_int = {p['n_e_int']:.4f} +- {s['n_e_int']:.4f}")
    return EXIT_OK


# parser ------------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eoentangle", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=False):
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command>)")
        if seed:
            p.add_argument("--seed", type=int, default=0)
        return p

    p = common(sub.add_parser("spectra", help="filtered covariance spectra from a device config"))
    p.add_argument("--config", required=True)
    p.add_argument("--window-ns", type=float)
    p.add_argument("--bins", type=int, help="use window-resolved bins |n| <= BINS")
    p.add_argument("--points", type=int, help="dense detuning grid with this many points")
    p.add_argument("--span-mhz", type=float, default=30.0)
    p.set_defaults(func=cmd_spectra)

    p = common(sub.add_parser("entangle", help="entanglement report for one covariance matrix"))
    p.add_argument("--cm", required=True, help="4x4 matrix (.json, .csv or whitespace text)")
    p.set_defaults(func=cmd_entangle)

    p = common(sub.add_parser("synth", help="synthesize heterodyne pulse records"), seed=True)
    p.add_argument("--cm", required=True)
    p.add_argument("--chain", required=True)
    p.add_argument("--pulses", type=int, default=1000)
    p.add_argument("--window-ns", type=float, default=200.0)
    p.add_argument("--jitter", type=float, default=0.17, help="optical LO phase jitter, rad")
    p.add_argument("--group-delay-ns", type=float, default=0.0)
    p.add_argument("--drift-rate", type=float, default=0.0)
    p.add_argument("--fast", action="store_true", help="write window amplitudes instead of time records")
    p.set_defaults(func=cmd_synth)

    p = common(sub.add_parser("reduce", help="reduce records to covariance matrices with errors"))
    p.add_argument("--records", required=True, help="records.jsonl or a directory written by synth --fast")
    p.add_argument("--chain", required=True)
    p.add_argument("--window-ns", type=float, default=200.0)
    p.add_argument("--segment", default="pulse1", choices=("pulse1", "before"))
    p.add_argument("--quantile", type=float, default=0.02)
    p.add_argument("--median-fraction", type=float)
    p.add_argument("--align-delay", action="store_true")
    p.add_argument("--n-sigma", type=float, default=2.0)
    p.set_defaults(func=cmd_reduce)

    p = common(sub.add_parser("calibrate", help="noise-thermometry fit of gain and added noise"), seed=True)
    p.add_argument("--sweep", help="CSV with temperature_k, power_w")
    p.add_argument("--simulate", action="store_true", help="generate a synthetic sweep first")
    p.add_argument("--freq-hz", type=float, default=8.9e9)
    p.add_argument("--bandwidth-hz", type=float, default=11e6)
    p.add_argument("--rel-sigma", type=float)
    p.add_argument("--cable-loss-db", type=float)
    p.add_argument("--sim-gain-db", type=float, default=66.67)
    p.add_argument("--sim-n-add", type=float, default=11.74)
    p.add_argument("--sim-rel-noise", type=float, default=0.01)
    p.set_defaults(func=cmd_calibrate)

    p = common(sub.add_parser("fit", help="joint cooperativity / bath-occupancy fit to reduced spectra"))
    p.add_argument("--config", required=True)
    p.add_argument("--spectra", required=True, help="CSV from reduce or spectra")
    p.add_argument("--window-ns", type=float, default=200.0)
    p.add_argument("--c0", type=float, default=0.1)
    p.add_argument("--n0", type=float, default=0.05)
    p.set_defaults(func=cmd_fit)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FitConvergenceError, QuadratureAccuracyError, np.linalg.LinAlgError, FloatingPointError,
            DegenerateFitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, StatisticsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
