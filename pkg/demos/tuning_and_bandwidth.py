"""Temperature tuning and spectral bandwidth of a 25 mm PPKTP crystal pumped at 405 nm.

Run: python demos/tuning_and_bandwidth.py
"""
import numpy as np

from ppktp_source import (PumpSpec, default_crystal, degeneracy_temperature, fwhm_bandwidth_formula,
                          fwhm_bandwidth_numeric, spectrum, tuning_curve)

crystal = default_crystal()
pump = PumpSpec(405.0)

t_deg = degeneracy_temperature(crystal, pump)
print(f"degenerate at {t_deg:.2f} °C")

# signal and idler separate as the crystal is heated away from degeneracy
for p in tuning_curve(crystal, pump, 25, 180, 25):
    print(f"  {p.temperature:6.1f} °C  λ_s = {p.lambda_s:7.2f} nm  λ_i = {p.lambda_i:7.2f} nm"
          f"  spacing {abs(p.lambda_s - p.lambda_i):5.2f} nm")

# sinc² line at degeneracy, then the length scaling of its width
curve = spectrum(crystal, pump, t_deg, np.linspace(809, 811, 401))
print(f"peak at {curve.peak_wavelength:.3f} nm")
for L in (10, 15, 20, 25):
    c = crystal.with_length(L)
    print(f"  L = {L} mm: FWHM {fwhm_bandwidth_numeric(c, pump, t_deg):.4f} nm"
          f" (closed form {fwhm_bandwidth_formula(L):.4f} nm)")
