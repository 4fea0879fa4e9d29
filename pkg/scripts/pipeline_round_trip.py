"""Time-domain synthesis through reduction, compared against the input covariance."""
import argparse

import numpy as np

from eoentangle.gaussian import reference_cm
from eoentangle.measurement import DetectionChain, GainCurve
from eoentangle.pipeline import (ReductionConfig, SynthesisOptions, ThresholdPolicy, assemble,
                                 covariance_with_errors, iter_synthesis, joint_quadrature_stats, reduce_chunk)

ap = argparse.ArgumentParser()
ap.add_argument("--pulses", type=int, default=20_000)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

V = reference_cm()
chain = DetectionChain(13.09, 5.54, GainCurve.from_db([10e6, 70e6], [66.2, 65.0]), GainCurve.constant(1e4),
                       n_add_e_sigma=0.33, n_add_o_sigma=0.21)
cfg = ReductionConfig(policy=ThresholdPolicy(quantile=None, median_fraction=0.5))
chunks = [reduce_chunk(mw, opt, chain, cfg)
          for mw, opt in iter_synthesis(V, chain, args.pulses, args.seed, SynthesisOptions(drift_rate=2e-4))]
ds, rep = assemble(chunks, chain, cfg)
est = covariance_with_errors(ds)
st = joint_quadrature_stats(ds)

np.set_printoptions(precision=3, suppress=True)
print(f"kept {rep.n_total - rep.n_removed}/{rep.n_total} pulses")
for w, Vm, sig, dm, sm in zip(st.frequencies, est.V, est.errors.statistical, st.delta_min, st.sigma_min):
    print(f"{w / 2 / np.pi / 1e6:7.2f} MHz  max z {np.max(np.abs(Vm - V) / sig):4.2f}  D- {dm:.3f} +- {sm:.3f}")
