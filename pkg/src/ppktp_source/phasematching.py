"""Collinear quasi-phasematching: tuning curves, sinc² spectra and bandwidths.

The "signal" argument of :func:`phase_mismatch` and :func:`spectrum` is the
photon on the crystal's signal axis (Y for type-II PPKTP). Tuning-curve
points instead report the longer wavelength as ``lambda_s`` and the shorter
as ``lambda_i``; ``long_axis`` records which crystal axis carries the long one.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dispersion import poling_period, refractive_index
from .errors import DomainError, SolverError

# sinc²(x) = 1/2
SINC2_HALF_POINT = 1.3915573782515103
BANDWIDTH_CONSTANT_NM_M = 5.52e-3
DEGENERACY_SEARCH_C = (0.0, 200.0)
ROOT_SPAN_NM = 120.0
PRESCAN_STEP_NM = 0.5
DEGENERATE_TOLERANCE_NM = 0.2


@dataclass(frozen=True)
class PumpSpec:
    wavelength_nm: float = 405.0
    power_mw: float = 1.0

    def __post_init__(self):
        if not self.wavelength_nm > 0:
            raise ValueError(f"pump wavelength must be positive, got {self.wavelength_nm}")
        if not self.power_mw >= 0:
            raise ValueError(f"pump power must be non-negative, got {self.power_mw}")


@dataclass(frozen=True)
class PhaseMatchPoint:
    temperature: float
    lambda_s: float
    lambda_i: float
    dk_residual: float
    long_axis: str = ""
    degenerate: bool = False
    root_found: bool = True


@dataclass(frozen=True)
class SpectrumCurve:
    wavelengths: np.ndarray
    intensity: np.ndarray
    temperature: float = float("nan")

    def __post_init__(self):
        wl = np.asarray(self.wavelengths, dtype=float)
        if wl.ndim != 1 or wl.size != np.size(self.intensity):
            raise ValueError("wavelengths and intensity must be 1-D arrays of equal length")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("spectrum wavelengths must be strictly increasing")

    @property
    def peak_wavelength(self):
        return float(self.wavelengths[int(np.argmax(self.intensity))])

    def samples(self):
        return list(zip(self.wavelengths.tolist(), self.intensity.tolist()))


def conjugate_wavelength(pump_nm, signal_nm):
    """Idler wavelength from energy conservation, 1/λi = 1/λp − 1/λs."""
    ls = np.asarray(signal_nm, dtype=float)
    if np.any(ls <= pump_nm):
        raise DomainError(f"signal wavelength must exceed the pump wavelength {pump_nm} nm")
    li = 1.0 / (1.0 / pump_nm - 1.0 / ls)
    return li if np.ndim(li) else float(li)


def phase_mismatch(crystal, pump, signal_nm, temperature):
    """Δk = k_p − k_s − k_i − 2π/Λ(T) in 1/µm (collinear, scalar).

    Independent of crystal length. Vectorized over ``signal_nm``.
    """
    pump_axis, signal_axis, idler_axis = crystal.axes
    mat = crystal.material
    lp = pump.wavelength_nm
    ls = np.asarray(signal_nm, dtype=float)
    li = conjugate_wavelength(lp, ls)
    n_p = refractive_index(mat, pump_axis, lp, temperature)
    n_s = refractive_index(mat, signal_axis, ls, temperature)
    n_i = refractive_index(mat, idler_axis, li, temperature)
    # nm → µm: k = 2π n / λ = 2π n · 1000 / λ_nm
    dk = 2e3 * np.pi * (n_p / lp - n_s / ls - n_i / li) - 2 * np.pi / poling_period(crystal, temperature)
    return dk if np.ndim(dk) else float(dk)


def degeneracy_temperature(crystal, pump, t_range=DEGENERACY_SEARCH_C, scan_step=1.0):
    """Crystal temperature where Δk(2λp, T) = 0, i.e. wavelength-degenerate emission."""
    degenerate_nm = 2.0 * pump.wavelength_nm

    def f(t):
        return phase_mismatch(crystal, pump, degenerate_nm, t)

    t_lo, t_hi = t_range
    grid = np.arange(t_lo, t_hi + 0.5 * scan_step, scan_step)
    values = np.array([f(t) for t in grid])
    exact = np.flatnonzero(values == 0.0)
    if exact.size:
        return float(grid[exact[0]])
    change = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    if not change.size:
        raise SolverError(
            f"no sign change of the phase mismatch between {t_lo} and {t_hi} °C "
            f"(Δk = {values[0]:.3e} and {values[-1]:.3e} /µm at the endpoints)",
            endpoints=(t_lo, t_hi), values=(float(values[0]), float(values[-1])))
    i = change[0]
    return float(brentq(f, grid[i], grid[i + 1], xtol=1e-12, rtol=4 * np.finfo(float).eps))


def _phasematch_at(crystal, pump, temperature, span_nm, step_nm):
    """Solve Δk(λ, T) = 0 for the wavelength on the signal axis.

    The search covers wavelengths whose conjugate stays within ``span_nm`` of
    degeneracy on either side, so both type-II branches are reachable.
    """
    lp = pump.wavelength_nm
    deg = 2.0 * lp
    hi = deg + span_nm
    lo = conjugate_wavelength(lp, hi)
    grid = np.arange(lo, hi + 0.5 * step_nm, step_nm)
    values = phase_mismatch(crystal, pump, grid, temperature)

    def f(x):
        return phase_mismatch(crystal, pump, x, temperature)

    roots = [float(grid[k]) for k in np.flatnonzero(values == 0.0)]
    for k in np.flatnonzero(values[:-1] * values[1:] < 0):
        roots.append(float(brentq(f, grid[k], grid[k + 1], xtol=1e-12, rtol=4 * np.finfo(float).eps)))
    if not roots:
        return None
    # Several roots only occur for exotic dispersion; take the one nearest degeneracy.
    return min(roots, key=lambda r: abs(r - deg))


def tuning_curve(crystal, pump, t_min, t_max, step, span_nm=ROOT_SPAN_NM, prescan_step_nm=PRESCAN_STEP_NM):
    """Phasematched wavelength pairs over a temperature range (inclusive of ``t_max``).

    Temperatures without a root in the search window produce a point with
    ``root_found=False``, ``degenerate=True`` and both wavelengths at 2λp;
    its ``dk_residual`` is the mismatch at degeneracy.
    """
    if not t_min < t_max:
        raise ValueError(f"t_min ({t_min}) must be below t_max ({t_max})")
    if not step > 0:
        raise ValueError(f"temperature step must be positive, got {step}")
    n = int(np.floor((t_max - t_min) / step + 1e-9)) + 1
    temps = t_min + step * np.arange(n)
    signal_axis, idler_axis = crystal.axes[1], crystal.axes[2]
    lp = pump.wavelength_nm
    points = []
    for t in temps:
        t = float(t)
        root = _phasematch_at(crystal, pump, t, span_nm, prescan_step_nm)
        if root is None:
            deg = 2.0 * lp
            points.append(PhaseMatchPoint(t, deg, deg, phase_mismatch(crystal, pump, deg, t),
                                          long_axis="", degenerate=True, root_found=False))
            continue
        conj = conjugate_wavelength(lp, root)
        if root >= conj:
            ls, li, long_axis = root, conj, signal_axis
        else:
            ls, li, long_axis = conj, root, idler_axis
        points.append(PhaseMatchPoint(
            t, ls, li, phase_mismatch(crystal, pump, root, t), long_axis=long_axis,
            degenerate=bool(ls - li < DEGENERATE_TOLERANCE_NM), root_found=True))
    return points


def _sinc2(x):
    return np.sinc(np.asarray(x) / np.pi) ** 2


def spectrum(crystal, pump, temperature, wavelengths):
    """sinc²((L/2)Δk) power spectrum on a wavelength grid, normalized to peak 1."""
    wl = np.asarray(wavelengths, dtype=float)
    dk = phase_mismatch(crystal, pump, wl, temperature)
    intensity = _sinc2(0.5 * crystal.length_um * np.atleast_1d(dk))
    peak = intensity.max()
    if peak > 0:
        intensity = intensity / peak
    return SpectrumCurve(np.atleast_1d(wl), intensity, float(temperature))


def fwhm_bandwidth_formula(length_mm):
    """Closed-form single-mode bandwidth in nm; the constant is in nm·m."""
    if not length_mm > 0:
        raise ValueError(f"crystal length must be positive, got {length_mm}")
    return BANDWIDTH_CONSTANT_NM_M / (length_mm * 1e-3)


def fwhm_bandwidth_numeric(crystal, pump, temperature, initial_halfwidth_nm=None, max_halfwidth_nm=20.0):
    """FWHM in nm of the central sinc² lobe around the phasematched wavelength."""
    root = _phasematch_at(crystal, pump, temperature, ROOT_SPAN_NM, PRESCAN_STEP_NM)
    if root is None:
        raise SolverError(f"no phasematched wavelength at {temperature} °C")
    half_len = 0.5 * crystal.length_um

    def excess(x):
        return _sinc2(half_len * phase_mismatch(crystal, pump, x, temperature)) - 0.5

    # Side lobes of sinc² stay below 0.05, so any point under half intensity
    # brackets exactly one crossing while Δk is monotonic across the lobe.
    width = initial_halfwidth_nm or 0.5 * fwhm_bandwidth_formula(crystal.length_mm)
    edges = []
    for sign in (-1.0, 1.0):
        w = width
        while excess(root + sign * w) >= 0:
            w *= 2.0
            if w > max_halfwidth_nm:
                raise SolverError(f"half-intensity point not bracketed within ±{max_halfwidth_nm} nm")
        a, b = sorted((root, root + sign * w))
        edges.append(brentq(excess, a, b, xtol=1e-7))
    return float(edges[1] - edges[0])


def write_tuning_csv(points, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["T_C", "lambda_s_nm", "lambda_i_nm", "degenerate_flag", "root_found", "dk_residual_per_um", "long_axis"])
        for p in points:
            w.writerow([f"{p.temperature:.6f}", f"{p.lambda_s:.6f}", f"{p.lambda_i:.6f}",
                        int(p.degenerate), int(p.root_found), f"{p.dk_residual:.3e}", p.long_axis])


def write_spectrum_csv(curve, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda_nm", "intensity_rel"])
        for x, y in zip(curve.wavelengths, curve.intensity):
            w.writerow([f"{x:.6f}", f"{y:.9f}"])
