"""Two-photon polarization state of a bidirectionally pumped Sagnac source.

Two-qubit states use the basis order |HH>, |HV>, |VH>, |VV> with the first
qubit in output mode 3 (signal) and the second in mode 4 (idler).

State model
-----------
The ideal emission is α|HV> + β e^{iφ}|VH>. Two imperfections are modeled:

* HWP1 errors. In the counterclockwise arm each photon is flipped by HWP1
  with amplitude a (ideal |a| = 1) or left unflipped with amplitude b. Pairs
  with both photons flipped are walkoff-compensated. Pairs with neither
  flipped still reach modes 3/4 as |VH>, but their H photon leads, so their
  arrival-time difference is reversed (relative delay 2·δt). Pairs with one
  photon flipped leave through a single port and are lost to coincidences.
  The reversed-delay component overlaps the compensated one by the Gaussian
  wavepacket factor of :func:`wavepacket_overlap`.
* PBS leakage. At recombination each photon is misrouted into the wrong
  polarization with probability 1/extinction. The misrouted contributions
  are added as populations only (no coherence), producing |HH>/|VV> weight.
  Leakage at the input split removes pump power symmetrically from both
  directions and cancels on normalization.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import group_index
from .phasematching import fwhm_bandwidth_formula
from .errors import DomainError

C_M_PER_S = 299_792_458.0

H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)

PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)
PSI_PLUS = np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)
PHI_MINUS = np.array([1, 0, 0, -1], dtype=complex) / np.sqrt(2)
PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)

SINGLET_PHASE = np.pi


@dataclass(frozen=True)
class PumpPreparation:
    alpha: float
    beta: float
    phi: float
    phase_undefined: bool = False
    qwp_aligned: bool = True

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("pump amplitudes must be non-negative")
        if abs(self.alpha ** 2 + self.beta ** 2 - 1) > 1e-12:
            raise ValueError(f"alpha² + beta² must be 1, got {self.alpha ** 2 + self.beta ** 2}")

    @classmethod
    def balanced(cls, phi=SINGLET_PHASE):
        s = 1 / np.sqrt(2)
        return cls(s, s, float(phi))

    @classmethod
    def singlet(cls):
        return cls.balanced(SINGLET_PHASE)


@dataclass(frozen=True)
class Imperfections:
    """Component and detection imperfections.

    Ratios are N for an N:1 extinction (``np.inf`` for ideal). Transmission is
    per output arm; the window is the coincidence window in ns; dark counts
    are per detector per second.
    """

    pbs_extinction: float = np.inf
    hwp1_angle_error: float = 0.0
    hwp1_retardance_error: float = 0.0
    path_transmission: float = 1.0
    detector_efficiency: float = 1.0
    dark_count_rate: float = 0.0
    coincidence_window: float = 4.4
    polarizer_extinction: float = np.inf
    # optional ((wavelength_nm, transmission), ...) overriding path_transmission
    transmission_table: tuple = ()

    def __post_init__(self):
        if self.pbs_extinction < 1 or self.polarizer_extinction < 1:
            raise ValueError("extinction ratios must be >= 1")
        for name in ("path_transmission", "detector_efficiency"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if not self.coincidence_window > 0:
            raise ValueError("coincidence window must be positive")
        if self.dark_count_rate < 0:
            raise ValueError("dark count rate must be non-negative")
        if self.transmission_table:
            table = np.asarray(self.transmission_table, dtype=float)
            if table.ndim != 2 or table.shape[1] != 2 or np.any(np.diff(table[:, 0]) <= 0):
                raise ValueError("transmission_table must be (wavelength_nm, T) rows with increasing wavelength")
            if np.any((table[:, 1] <= 0) | (table[:, 1] > 1)):
                raise ValueError("transmission_table values must lie in (0, 1]")

    def transmission(self, wavelength_nm):
        """Per-arm transmission at a wavelength, interpolated from the table if one is given."""
        if not self.transmission_table:
            return self.path_transmission
        table = np.asarray(self.transmission_table, dtype=float)
        return float(np.interp(wavelength_nm, table[:, 0], table[:, 1]))

    @classmethod
    def ideal(cls):
        return cls()

    @classmethod
    def lab(cls):
        """Measured operating point: 100:1 PBS, 84.6% transmission, 40% detectors."""
        return cls(pbs_extinction=100.0, path_transmission=0.846, detector_efficiency=0.40,
                   dark_count_rate=500.0, coincidence_window=4.4, polarizer_extinction=10000.0)


def _rotation(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


def retarder(retardance, angle):
    """Linear retarder with fast axis at ``angle`` from H (symmetric phase convention)."""
    core = np.diag([np.exp(-0.5j * retardance), np.exp(0.5j * retardance)])
    return _rotation(angle) @ core @ _rotation(-angle)


def waveplate(kind, angle, retardance_error=0.0):
    """Jones matrix of a half- or quarter-wave plate."""
    base = {"half": np.pi, "quarter": np.pi / 2}
    if kind not in base:
        raise ValueError(f"kind must be 'half' or 'quarter', got {kind!r}")
    return retarder(base[kind] + retardance_error, angle)


def pump_preparation(hwp2_angle, qwp_angle, tol=1e-12):
    """Pump amplitudes after HWP2 then QWP acting on horizontal laser light.

    φ is the phase of the V component relative to H. When either amplitude
    vanishes φ is reported as 0 with ``phase_undefined`` set. ``qwp_aligned``
    is false when the QWP axes are not along H/V, in which case the QWP also
    changes the amplitudes.
    """
    e = waveplate("quarter", qwp_angle) @ waveplate("half", hwp2_angle) @ H
    alpha, beta = float(abs(e[0])), float(abs(e[1]))
    norm = np.hypot(alpha, beta)
    alpha, beta = float(alpha / norm), float(beta / norm)
    undefined = bool(alpha < tol or beta < tol)
    phi = 0.0 if undefined else float(np.angle(e[1] / e[0]))
    aligned = bool(abs(np.sin(2 * qwp_angle)) < 1e-12)
    return PumpPreparation(alpha, beta, phi, phase_undefined=undefined, qwp_aligned=aligned)


def plate_angles_for(alpha, phi):
    """HWP2 and QWP angles producing (α, √(1−α²), φ) from horizontal light.

    Found numerically (coarse grid, then Nelder-Mead); the solution is not
    unique. Returns (hwp2_angle, qwp_angle).
    """
    beta = np.sqrt(max(0.0, 1 - alpha ** 2))
    target = np.array([alpha, beta * np.exp(1j * phi)])
    from scipy.optimize import minimize

    def cost(x):
        e = waveplate("quarter", x[1]) @ waveplate("half", x[0]) @ H
        return 1 - abs(np.vdot(target, e)) ** 2

    grid = np.linspace(-np.pi / 2, np.pi / 2, 25)
    x0 = min(((h, q) for h in grid for q in grid), key=cost)
    res = minimize(cost, x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
    return float(res.x[0]), float(res.x[1])


def group_delay_walkoff(crystal, wavelength, temperature):
    """Mean signal-idler group delay (ps) for pairs born uniformly along the crystal.

    Positive when the idler axis is the slow axis.
    """
    mat = crystal.material
    ng_s = group_index(mat, crystal.axes[1], wavelength, temperature)
    ng_i = group_index(mat, crystal.axes[2], wavelength, temperature)
    return (ng_i - ng_s) * (0.5 * crystal.length_mm * 1e-3) / C_M_PER_S * 1e12


def spectral_sigma(bandwidth_nm, wavelength_nm):
    """Angular-frequency rms width (rad/ps) of a Gaussian power spectrum with given FWHM."""
    d_omega = 2 * np.pi * C_M_PER_S * bandwidth_nm * 1e-9 / (wavelength_nm * 1e-9) ** 2 * 1e-12
    return d_omega / (2 * np.sqrt(2 * np.log(2)))


def wavepacket_overlap(delay_ps, bandwidth_nm, wavelength_nm):
    """|<f(t)|f(t − τ)>| for a photon with Gaussian power spectrum.

    For spectral intensity of rms width σ_ω the overlap is exp(−σ_ω² τ² / 2),
    equivalently exp(−Δω² τ² / (16 ln 2)) with Δω the intensity FWHM.
    """
    sigma = spectral_sigma(bandwidth_nm, wavelength_nm)
    return float(np.exp(-0.5 * (sigma * delay_ps) ** 2))


def _flip_amplitudes(imp):
    """(flip, keep) amplitudes for the H-born and V-born photon at HWP1.

    Amplitudes are referred to the ideal plate so that a perfect HWP1 gives
    flip = 1, keep = 0 with no extra phase.
    """
    plate = waveplate("half", np.pi / 4 + imp.hwp1_angle_error, imp.hwp1_retardance_error)
    ideal = waveplate("half", np.pi / 4)
    ref_h = ideal[1, 0]
    ref_v = ideal[0, 1]
    flip_h, keep_h = plate[1, 0] / ref_h, plate[0, 0] / ref_h
    flip_v, keep_v = plate[0, 1] / ref_v, plate[1, 1] / ref_v
    return flip_h * flip_v, keep_h * keep_v


def walkoff_coherence(imp, crystal, temperature, wavelength=None, bandwidth_nm=None):
    """Coherence factor D and relative |VH> weight from HWP1 imperfections.

    Returns (D, weight, phase) where the counterclockwise term becomes
    √weight · D-coherent with the clockwise term and ``phase`` is the extra
    phase picked up by the imperfect plate.
    """
    if wavelength is None:
        wavelength = 810.0
    if bandwidth_nm is None:
        bandwidth_nm = fwhm_bandwidth_formula(crystal.length_mm)
    comp, uncomp = _flip_amplitudes(imp)
    if uncomp == 0:
        return 1.0, float(abs(comp) ** 2), float(np.angle(comp))
    delay = 2 * abs(group_delay_walkoff(crystal, wavelength, temperature))
    overlap = wavepacket_overlap(delay, bandwidth_nm, wavelength)
    # temporal modes: compensated f, reversed g with <f|g> = overlap
    g = np.array([overlap, np.sqrt(max(0.0, 1 - overlap ** 2))])
    vec = comp * np.array([1.0, 0.0]) + uncomp * g
    weight = float(np.vdot(vec, vec).real)
    coherent = vec[0]
    D = float(abs(coherent) / np.sqrt(weight))
    return D, weight, float(np.angle(coherent))


def _populations_only(rho):
    return np.diag(np.diag(rho).real).astype(complex)


def pbs_leakage(rho, extinction):
    """Apply misrouting with probability 1/extinction to each photon (populations only)."""
    if not np.isfinite(extinction):
        return rho
    p = 1.0 / extinction
    x1 = np.kron(SIGMA_X, np.eye(2))
    x2 = np.kron(np.eye(2), SIGMA_X)
    x12 = x1 @ x2
    out = (1 - p) ** 2 * rho
    out = out + p * (1 - p) * (_populations_only(x1 @ rho @ x1) + _populations_only(x2 @ rho @ x2))
    out = out + p * p * _populations_only(x12 @ rho @ x12)
    return out


def ideal_state(alpha, beta, phi):
    """Pure state vector α|HV> + β e^{iφ}|VH>."""
    return np.array([0, alpha, beta * np.exp(1j * phi), 0], dtype=complex)


def source_state(prep, imp, crystal, temperature, wavelength=810.0):
    """Density matrix of the coincidence-postselected pair emitted into modes 3 and 4."""
    D, weight, extra_phase = walkoff_coherence(imp, crystal, temperature, wavelength)
    a2 = prep.alpha ** 2
    b2 = prep.beta ** 2 * weight
    coh = prep.alpha * prep.beta * np.sqrt(weight) * D * np.exp(-1j * (prep.phi + extra_phase))
    rho = np.zeros((4, 4), dtype=complex)
    rho[1, 1] = a2
    rho[2, 2] = b2
    rho[1, 2] = coh
    rho[2, 1] = np.conj(coh)
    tr = np.trace(rho).real
    if tr <= 0:
        raise DomainError("no coincidences survive the HWP1 imperfections")
    rho = pbs_leakage(rho / tr, imp.pbs_extinction)
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real



def _coincidence(rho, a, b):
    v = np.kron(a, b)
    return float(np.vdot(v, rho @ v).real)


def visibility(rho, basis="diag"):
    """Two-photon polarization visibility.

    Analyzer A is fixed at H (``"HV"``) or at +45° (``"diag"``). Analyzer B
    takes the matching and orthogonal settings: H/V for ``"HV"``, and for
    ``"diag"`` the pair of opposite equatorial states that maximizes the
    fringe, so the result does not depend on the phase of the HV/VH coherence.
    """
    rho = np.asarray(rho, dtype=complex)
    if basis == "HV":
        c1, c2 = _coincidence(rho, H, H), _coincidence(rho, H, V)
    elif basis == "diag":
        plus = (H + V) / np.sqrt(2)
        # B-side operator conditioned on A = +: M = Tr_A[(P+ ⊗ I) ρ].
        # For B = (H + e^{iθ}V)/√2, C(θ) = (M00 + M11)/2 + Re(M10 e^{-iθ}).
        M = np.einsum("ab,bjal->jl", np.outer(plus, plus.conj()), rho.reshape(2, 2, 2, 2))
        a = 0.5 * (M[0, 0] + M[1, 1]).real
        c1, c2 = a + abs(M[1, 0]), a - abs(M[1, 0])
    else:
        raise ValueError(f"basis must be 'HV' or 'diag', got {basis!r}")
    hi, lo = max(c1, c2), min(c1, c2)
    if hi + lo <= 0:
        raise DomainError("visibility undefined: no coincidences with analyzer A fixed")
    return (hi - lo) / (hi + lo)


def visibility_from_contrast(contrast):
    """Visibility (N − 1)/(N + 1) for an N:1 polarization contrast."""
    return (contrast - 1) / (contrast + 1)


def accidental_rate(R_s, R_i, window_ns):
    """Uncorrelated coincidences R_s R_i τ in 1/s."""
    if not window_ns > 0:
        raise DomainError("coincidence window must be positive")
    return R_s * R_i * window_ns * 1e-9
