"""Microwave linewidth versus optical-to-microwave decay ratio at fixed cooperativity.

The narrowing reaches (1 - C) kappa_e only once the optical mode is fast.
"""
from dataclasses import replace

import numpy as np

from eoentangle.fitting import lorentzian_fit
from eoentangle.model import build_transfer_matrices, default_config
from eoentangle.spectra import quadrature_spectrum

C = 0.18


def width_ratio(ratio):
    cfg = default_config(C=C, J_over_kappa_t=10)
    if ratio is not None:
        cfg = replace(cfg, mode_o=replace(cfg.mode_o, kappa=ratio * cfg.mode_e.kappa)).with_cooperativity(C)
    w = np.linspace(-5, 5, 401) * cfg.mode_e.kappa
    v11 = quadrature_spectrum(build_transfer_matrices(cfg), w)[:, 0, 0]
    return cfg.mode_o.kappa / cfg.mode_e.kappa, lorentzian_fit(w, v11).params["width"] / cfg.mode_e.kappa


if __name__ == "__main__":
    print("kappa_o/kappa_e  width/kappa_e  (target %.3f)" % (1 - C))
    for ratio in (None, 3, 10, 30, 100, 300):
        r, wd = width_ratio(ratio)
        print(f"{r:15.1f}  {wd:13.4f}")
