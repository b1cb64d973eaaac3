"""Polarization state of the Sagnac source and its tomographic reconstruction.

Run: python demos/sagnac_tomography.py
"""
import numpy as np

from ppktp_source import (Imperfections, PumpPreparation, concurrence_tangle, default_crystal, fidelity,
                          mle_reconstruct, monte_carlo_errors, simulate_counts, source_state, subtract_accidentals,
                          visibility)

crystal = default_crystal()
prep = PumpPreparation.singlet()

for label, imp in (("ideal optics", Imperfections.ideal()),
                   ("PBS 100:1", Imperfections(pbs_extinction=100)),
                   ("PBS 100:1, HWP off by 2°", Imperfections(pbs_extinction=100,
                                                             hwp1_angle_error=np.deg2rad(2)))):
    rho = source_state(prep, imp, crystal, 49.8)
    c, t = concurrence_tangle(rho)
    print(f"{label:28s} F = {fidelity(rho):.4f}  T = {t:.4f}  V_diag = {visibility(rho, 'diag'):.4f}")

# 36-setting tomography with Poisson noise and accidental coincidences
rho = source_state(prep, Imperfections(pbs_extinction=100), crystal, 49.8)
data = simulate_counts(rho, 20500, 10, seed=1, singles=(3.6e4, 3.6e4), include_accidentals=True)
for label, d in (("raw", data), ("accidentals subtracted", subtract_accidentals(data))):
    est = mle_reconstruct(d)
    print(f"{label:24s} F = {fidelity(est):.4f}  T = {concurrence_tangle(est)[1]:.4f}")

m = monte_carlo_errors(data, runs=50, seed=2)
print(f"Monte Carlo: F = {m.fidelity:.4f} ± {m.std_fidelity:.4f}, T = {m.tangle:.4f} ± {m.std_tangle:.4f}")
