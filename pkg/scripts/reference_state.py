"""Entanglement figures of the reference state and of the default device model."""
import numpy as np

from eoentangle.entanglement import entanglement_report
from eoentangle.gaussian import reference_cm
from eoentangle.model import TWO_PI, build_transfer_matrices, default_config
from eoentangle.spectra import SpectralGrid, covariance_spectrum


def main():
    rep = entanglement_report(reference_cm())
    print(f"reference: E_N={rep.log_negativity:.4f} purity={rep.purity:.4f} "
          f"D-={rep.delta_epr_minus:.3f} D+={rep.delta_epr_plus:.3f}")

    T = 200e-9
    tm = build_transfer_matrices(default_config())
    grid = SpectralGrid.bins(T, 6)
    print(" offset MHz    V11    V33    V13    D-     E_N")
    for w, V in zip(grid.frequencies, covariance_spectrum(tm, grid)):
        r = entanglement_report(V)
        print(f"{w / TWO_PI / 1e6:10.2f} {V[0, 0]:6.3f} {V[2, 2]:6.3f} {np.hypot(V[0, 2], V[0, 3]):6.3f} "
              f"{r.delta_epr_minus:6.3f} {r.log_negativity:6.3f}")


if __name__ == "__main__":
    main()
