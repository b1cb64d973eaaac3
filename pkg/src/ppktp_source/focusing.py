"""Focusing parameters, rate and brightness scaling, and sweep-fit optimization.

Units: waists in µm, wavelengths in nm, crystal lengths and Rayleigh ranges
in mm, rates in counts (or pairs) per second, pump power in mW.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .dispersion import refractive_index
from .errors import DomainError, InconsistencyError, InsufficientDataError

# Empirical optimum focus parameters for PPKTP (ξ = L / z_r).
XI_SI_MAX_PAIRS = 3.2
XI_P_MAX_PAIRS_RANGE = ((10.0, 1.8), (25.0, 2.6))  # (L_mm, ξ_p) endpoints
XI_P_MAX_COUPLING = 0.7
XI_SI_MAX_COUPLING = 1.5
SWEEP_POLY_DEGREE = 4
OBJECTIVES = ("max_pairs", "max_coupling")


@dataclass(frozen=True)
class BeamGeometry:
    w_p: float
    w_si: float
    xi_p: float
    xi_si: float
    z_r_p: float
    z_r_si: float


@dataclass(frozen=True)
class SweepRecord:
    w_p: float
    w_si: float
    R_c: float
    R_s: float
    R_i: float

    def __post_init__(self):
        if min(self.R_c, self.R_s, self.R_i) < 0:
            raise ValueError("rates must be non-negative")
        if self.R_c > min(self.R_s, self.R_i):
            raise ValueError(f"coincidence rate {self.R_c} exceeds a singles rate")


@dataclass(frozen=True)
class RateSummary:
    R_c: float
    R_s: float
    R_i: float
    eta_c: float
    B: float


@dataclass
class SweepOptimum:
    """Result of :func:`sweep_optimum`.

    ``slices`` holds (w_p, w_si_opt, R_c_max) per pump waist; ``on_boundary``
    is set when the optimum sits on the edge of the sampled region (including
    the degenerate case of a flat fit). ``residual_norm`` is the root of the
    summed squared residuals of the per-slice polynomial fits.
    """

    w_p_opt: float
    w_si_opt: float
    R_c_max: float
    on_boundary: bool = False
    slices: list = field(default_factory=list)
    residual_norm: float = 0.0

    def __iter__(self):
        return iter((self.w_p_opt, self.w_si_opt, self.R_c_max))


def rayleigh_range(w, wavelength, n=1.0):
    """In-medium Rayleigh range π w² n / λ, returned in mm."""
    if w <= 0 or wavelength <= 0 or n <= 0:
        raise DomainError("waist, wavelength and index must be positive")
    return np.pi * w * w * n / (wavelength * 1e-3) * 1e-3


def focus_parameter(w, length_mm, wavelength, n=1.0):
    """ξ = L / z_r."""
    if length_mm <= 0:
        raise DomainError(f"crystal length must be positive, got {length_mm}")
    return length_mm / rayleigh_range(w, wavelength, n)


def waist_for_xi(xi, length_mm, wavelength, n=1.0):
    """Inverse of :func:`focus_parameter`: the waist (µm) giving focus parameter ``xi``."""
    if xi <= 0 or length_mm <= 0 or wavelength <= 0 or n <= 0:
        raise DomainError("xi, length, wavelength and index must be positive")
    z_r_um = length_mm * 1e3 / xi
    return float(np.sqrt(z_r_um * wavelength * 1e-3 / (np.pi * n)))


def optimal_xi_p(length_mm):
    """Pump focus parameter for maximal pair rate, interpolated linearly in L."""
    (l0, x0), (l1, x1) = XI_P_MAX_PAIRS_RANGE
    return float(x0 + (x1 - x0) * (length_mm - l0) / (l1 - l0))


def optimal_geometry(crystal, pump, objective="max_pairs", temperature=None):
    """Empirically optimal pump and collection waists for a crystal.

    The collection mode is evaluated at 2λp with the mean index of the signal
    and idler axes; the pump uses its own axis. ``temperature`` defaults to
    the crystal's reference temperature.
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"objective must be one of {OBJECTIVES}, got {objective!r}")
    L = crystal.length_mm
    if objective == "max_pairs":
        xi_p, xi_si = optimal_xi_p(L), XI_SI_MAX_PAIRS
    else:
        xi_p, xi_si = XI_P_MAX_COUPLING, XI_SI_MAX_COUPLING
    t = crystal.reference_temperature if temperature is None else temperature
    lp = pump.wavelength_nm
    mat = crystal.material
    n_p = refractive_index(mat, crystal.axes[0], lp, t)
    n_si = 0.5 * (refractive_index(mat, crystal.axes[1], 2 * lp, t)
                  + refractive_index(mat, crystal.axes[2], 2 * lp, t))
    w_p = waist_for_xi(xi_p, L, lp, n_p)
    w_si = waist_for_xi(xi_si, L, 2 * lp, n_si)
    return BeamGeometry(w_p=w_p, w_si=w_si, xi_p=xi_p, xi_si=xi_si,
                        z_r_p=rayleigh_range(w_p, lp, n_p), z_r_si=rayleigh_range(w_si, 2 * lp, n_si))


def _poly_argmax(x, y, degree):
    """Fit a polynomial and return (x_best, y_best, on_boundary, rss) inside [min x, max x].

    Candidates are the real stationary points inside the data range plus both
    endpoints. Values equal to within 1e-9 relative are resolved toward smaller x.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = x.min(), x.max()
    deg = min(degree, np.unique(x).size - 1)
    poly = np.polynomial.Polynomial.fit(x, y, deg)
    candidates = [lo, hi]
    for r in poly.deriv().roots():
        if abs(r.imag) < 1e-9 and lo < r.real < hi:
            candidates.append(float(r.real))
    candidates = np.array(sorted(candidates))
    values = poly(candidates)
    scale = max(np.abs(y).max(), np.finfo(float).tiny)
    best = values.max()
    tied = np.flatnonzero(values >= best - 1e-9 * scale)
    k = tied[0]
    on_boundary = bool(k == 0 or k == candidates.size - 1)
    rss = float(np.sum((poly(x) - y) ** 2))
    return float(candidates[k]), float(values[k]), on_boundary, rss


def sweep_optimum(records, degree=SWEEP_POLY_DEGREE):
    """Optimal (w_p, w_si) from a two-dimensional waist sweep.

    Each pump-waist slice is fitted with a polynomial in w_si and maximized
    analytically; the slice maxima are then fitted against w_p. The returned
    w_si is interpolated linearly between the slice optima.
    """
    recs = sorted(records, key=lambda r: (r.w_p, r.w_si, r.R_c))
    if not recs:
        raise InsufficientDataError("no sweep records given")
    by_wp = {}
    for r in recs:
        by_wp.setdefault(r.w_p, []).append(r)
    if len(by_wp) < 3:
        raise InsufficientDataError(f"need at least 3 distinct pump waists w_p, got {len(by_wp)}")
    short = [wp for wp, rs in by_wp.items() if len({r.w_si for r in rs}) < 4]
    if short:
        raise InsufficientDataError(
            f"need at least 4 distinct collection waists w_si per pump waist; "
            f"w_p = {short} fall short")

    slices = []
    boundary = False
    rss = 0.0
    for wp in sorted(by_wp):
        rs = by_wp[wp]
        w_si, rc, edge, r2 = _poly_argmax([r.w_si for r in rs], [r.R_c for r in rs], degree)
        slices.append((float(wp), w_si, rc))
        boundary |= edge
        rss += r2
    wps = np.array([s[0] for s in slices])
    w_p_opt, rc_max, edge, _ = _poly_argmax(wps, [s[2] for s in slices], degree)
    w_si_opt = float(np.interp(w_p_opt, wps, [s[1] for s in slices]))
    return SweepOptimum(w_p_opt, w_si_opt, rc_max, on_boundary=bool(boundary or edge), slices=slices,
                        residual_norm=float(np.sqrt(rss)))


def fit_rate_scaling(points):
    """Least-squares coefficient a of R_c = a·√L (L in mm)."""
    pts = [(float(L), float(r)) for L, r in points]
    if not pts:
        raise InsufficientDataError("no (L, R_c) points given")
    L = np.array([p[0] for p in pts])
    rc = np.array([p[1] for p in pts])
    if np.any(L <= 0):
        raise DomainError("crystal lengths must be positive")
    return float(np.sum(rc * np.sqrt(L)) / np.sum(L))


def rate_scaling_residuals(points, a):
    return np.array([float(r) - a * np.sqrt(float(L)) for L, r in points])


def coupling_ratio(R_c, R_s, R_i):
    """η_c = R_c / √(R_s R_i)."""
    if R_s <= 0 or R_i <= 0:
        raise DomainError("singles rates must be positive")
    return R_c / np.sqrt(R_s * R_i)


def spectral_brightness(R_c, power_mw, bandwidth_nm):
    """Detected pairs per second, per mW of pump, per nm of bandwidth."""
    if power_mw <= 0 or bandwidth_nm <= 0:
        raise DomainError("pump power and bandwidth must be positive")
    return R_c / (power_mw * bandwidth_nm)


def max_coupling_ratio(transmission, detector_efficiency):
    """Upper bound η_c⁰ on the coupling ratio set by losses and detection."""
    for name, v in (("transmission", transmission), ("detector_efficiency", detector_efficiency)):
        if not 0 < v <= 1:
            raise DomainError(f"{name} must lie in (0, 1], got {v}")
    return transmission * detector_efficiency


def mode_overlap(eta_c, eta_c0):
    """Fraction η_c/η_c⁰ of the loss-limited coupling actually achieved."""
    if not 0 < eta_c0 <= 1:
        raise DomainError(f"eta_c0 must lie in (0, 1], got {eta_c0}")
    if eta_c < 0:
        raise DomainError(f"eta_c must be non-negative, got {eta_c}")
    overlap = eta_c / eta_c0
    if overlap > 1 + 1e-9:
        raise InconsistencyError(f"coupling ratio {eta_c} exceeds its upper bound {eta_c0}")
    return min(overlap, 1.0)


def rate_summary(R_c, R_s, R_i, power_mw, bandwidth_nm):
    return RateSummary(R_c=R_c, R_s=R_s, R_i=R_i, eta_c=float(coupling_ratio(R_c, R_s, R_i)),
                       B=float(spectral_brightness(R_c, power_mw, bandwidth_nm)))


SWEEP_COLUMNS = ("w_p_um", "w_si_um", "Rc", "Rs", "Ri")
RATE_COLUMNS = ("L_mm", "Rc")


def read_sweep_csv(path):
    """SweepRecords from a CSV with columns w_p_um, w_si_um, Rc, Rs, Ri."""
    rows = _read_numeric_csv(path, SWEEP_COLUMNS)
    return [SweepRecord(*row) for row in rows]


def read_rate_csv(path):
    """(L_mm, Rc) points from a CSV; lines starting with '#' are comments."""
    return [tuple(row) for row in _read_numeric_csv(path, RATE_COLUMNS)]


def _read_numeric_csv(path, columns):
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    reader = csv.DictReader(lines)
    missing = [c for c in columns if c not in (reader.fieldnames or [])]
    if missing:
        raise ValueError(f"{path}: missing column(s) {missing}; expected {list(columns)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        values = []
        for c in columns:
            try:
                values.append(float(row[c]))
            except (TypeError, ValueError):
                raise ValueError(f"{path}: row {lineno - 1}, column {c!r}: not a number ({row[c]!r})") from None
        rows.append(values)
    return rows
