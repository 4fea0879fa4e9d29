"""Loss of the mean cross-correlation versus optical LO phase jitter (paired synthetic runs)."""
import numpy as np

from eoentangle.gaussian import reference_cm
from eoentangle.measurement import DetectionChain
from eoentangle.pipeline import (ReductionConfig, SynthesisOptions, ThresholdPolicy, assemble,
                                 covariance_with_errors, spectra_chunk, synthesize_spectra)
from eoentangle.spectra import mean_elements

N_PULSES = 100_000
chain = DetectionChain(0.5, 0.5)
cfg = ReductionConfig(policy=ThresholdPolicy(quantile=None, absolute=0.0))


def v13bar(jitter, seed):
    sp = synthesize_spectra(reference_cm(), chain, N_PULSES, seed=seed, opts=SynthesisOptions(phase_jitter=jitter))
    ds, _ = assemble([spectra_chunk(sp, cfg)], chain, cfg)
    return np.mean(mean_elements(covariance_with_errors(ds, systematics=False).V)[2])


if __name__ == "__main__":
    ref = v13bar(0.0, 3)
    print("jitter rad  loss %   gaussian %")
    for j in (0.05, 0.1, 0.17, 0.25, 0.35):
        loss = 1 - v13bar(j, 3) / ref
        print(f"{j:10.2f}  {100 * loss:6.3f}   {100 * (1 - np.exp(-j ** 2 / 2)):6.3f}")
