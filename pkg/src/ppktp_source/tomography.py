"""Two-qubit polarization tomography with Poissonian maximum likelihood.

Single-qubit states: D = (H+V)/√2, A = (H−V)/√2, R = (H+iV)/√2,
L = (H−iV)/√2. The full measurement set is all 36 pairs of these labels.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .errors import ConvergenceError, DomainError
from .sagnac import PSI_MINUS

log = logging.getLogger(__name__)

LABELS = "HVDARL"
_S = 1 / np.sqrt(2)
STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * _S], dtype=complex),
    "L": np.array([_S, -1j * _S], dtype=complex),
}
PAULI = [
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
]
SIGMA_YY = np.kron(PAULI[2], PAULI[2])


@dataclass(frozen=True)
class MeasurementSetting:
    a: str
    b: str

    def __post_init__(self):
        if self.a not in STATES or self.b not in STATES:
            raise ValueError(f"projector labels must be in {LABELS!r}, got ({self.a!r}, {self.b!r})")

    def __str__(self):
        return self.a + self.b


FULL_SETTINGS = tuple(MeasurementSetting(a, b) for a, b in product(LABELS, LABELS))


@dataclass
class TomographyDataset:
    settings: tuple
    counts: np.ndarray
    integration_time: float
    singles_a: float = 0.0
    singles_b: float = 0.0
    window_ns: float = 4.4
    floored: np.ndarray | None = None

    def __post_init__(self):
        self.settings = tuple(s if isinstance(s, MeasurementSetting) else MeasurementSetting(*s)
                              for s in self.settings)
        self.counts = np.asarray(self.counts, dtype=float)
        if self.counts.shape != (len(self.settings),):
            raise ValueError(f"{self.counts.size} counts for {len(self.settings)} settings")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if not self.integration_time > 0:
            raise ValueError("integration time must be positive")


@dataclass
class StateMetrics:
    fidelity: float
    concurrence: float
    tangle: float
    std_fidelity: float = float("nan")
    std_tangle: float = float("nan")
    runs: int = 0
    failed_runs: list = field(default_factory=list)


@dataclass
class MLEResult:
    rho: np.ndarray
    loglik: list
    iterations: int
    grad_norm: float


def _rank1(v):
    return np.outer(v, v.conj())


def projector(setting, polarizer_extinction=np.inf):
    """Two-qubit projector for a measurement setting.

    A finite ``polarizer_extinction`` N mixes in the orthogonal projector with
    weight 1/N on each analyzer (off by default).
    """
    if not isinstance(setting, MeasurementSetting):
        setting = MeasurementSetting(*setting)
    ops = []
    for label in (setting.a, setting.b):
        p = _rank1(STATES[label])
        if np.isfinite(polarizer_extinction):
            eps = 1.0 / polarizer_extinction
            p = (1 - eps) * p + eps * (np.eye(2) - p)
        ops.append(p)
    return np.kron(ops[0], ops[1])


def _projector_stack(settings, polarizer_extinction=np.inf):
    return np.array([projector(s, polarizer_extinction) for s in settings])


def _probabilities(proj, rho):
    # Tr(Π ρ) for each Π in the stack
    return np.einsum("kij,ji->k", proj, rho).real


def is_density_matrix(rho, tol=1e-10):
    rho = np.asarray(rho)
    return (rho.shape == (4, 4) and np.allclose(rho, rho.conj().T, atol=1e-12)
            and abs(np.trace(rho) - 1) < 1e-12 and np.linalg.eigvalsh(rho).min() >= -tol)


def simulate_counts(rho, flux, integration_time, seed, settings=FULL_SETTINGS, singles=(0.0, 0.0),
                    window_ns=4.4, include_accidentals=False, polarizer_extinction=np.inf):
    """Poisson-sampled coincidence counts for each setting.

    The mean for setting k is flux·time·Tr(ρ Π_k), plus singles_a·singles_b·τ·time
    when ``include_accidentals`` is set. ``flux`` is pairs/s into one complete
    basis, so a complete basis of 4 settings sums to flux·time on average.
    """
    if not (flux > 0 and integration_time > 0):
        raise DomainError("flux and integration time must be positive")
    proj = _projector_stack(settings, polarizer_extinction)
    mean = flux * integration_time * np.clip(_probabilities(proj, np.asarray(rho, dtype=complex)), 0, None)
    if include_accidentals:
        mean = mean + singles[0] * singles[1] * window_ns * 1e-9 * integration_time
    rng = np.random.default_rng(seed)
    counts = rng.poisson(mean).astype(float)
    return TomographyDataset(tuple(settings), counts, integration_time, singles[0], singles[1], window_ns)


def expected_counts(rho, flux, integration_time, settings=FULL_SETTINGS):
    """Noiseless counts flux·time·Tr(ρ Π_k)."""
    proj = _projector_stack(settings)
    counts = flux * integration_time * _probabilities(proj, np.asarray(rho, dtype=complex))
    return TomographyDataset(tuple(settings), np.clip(counts, 0, None), integration_time)


def _pauli_basis():
    return [np.kron(a, b) for a in PAULI for b in PAULI]


def linear_reconstruct(data):
    """Linear inversion onto the two-qubit Pauli basis.

    The overall count scale is fitted alongside the 15 Stokes parameters, so
    the result is Hermitian with unit trace but may have negative eigenvalues.
    """
    proj = _projector_stack(data.settings)
    basis = _pauli_basis()
    design = np.array([[np.trace(p @ g).real / 4 for g in basis] for p in proj])
    if np.linalg.matrix_rank(design) < 16:
        raise DomainError("measurement settings are not informationally complete (design rank < 16)")
    x, *_ = np.linalg.lstsq(design, data.counts, rcond=None)
    if x[0] <= 0:
        raise DomainError("no counts to reconstruct from")
    r = x / x[0]
    rho = sum(rj * g for rj, g in zip(r, basis)) / 4
    return 0.5 * (rho + rho.conj().T)


def _physical_start(rho, floor=1e-9):
    # clip negative eigenvalues, then lift the spectrum just enough for a Cholesky factor
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        w = np.ones(4)
    w = w / w.sum()
    w = np.maximum(w, floor)
    rho = (v * (w / w.sum())) @ v.conj().T
    return 0.5 * (rho + rho.conj().T)


def _t_from_rho(rho):
    # ρ = T†T with T lower triangular: Cholesky of the index-reversed matrix
    J = np.eye(4)[::-1]
    L = np.linalg.cholesky(J @ rho @ J)
    return (J @ L @ J).conj().T


_TRIL = np.tril_indices(4)
_OFF = np.tril_indices(4, -1)


def _pack(T):
    return np.concatenate([np.diag(T).real, T[_OFF].real, T[_OFF].imag])


def _unpack(x):
    T = np.zeros((4, 4), dtype=complex)
    T[np.diag_indices(4)] = x[:4]
    T[_OFF] = x[4:10] + 1j * x[10:16]
    return T


def _rho_from_t(T):
    m = T.conj().T @ T
    return m / np.trace(m).real


def _loglik(proj, counts, rho, total, proj_sum):
    p = _probabilities(proj, rho)
    mask = counts > 0
    if np.any(p[mask] <= 0):
        return -np.inf
    return float(np.sum(counts[mask] * np.log(p[mask])) - total * np.log(np.trace(proj_sum @ rho).real))


def _gradient(proj, counts, T, total, proj_sum):
    """d(loglik)/dx for the packed Cholesky parameters."""
    m = T.conj().T @ T
    t = np.trace(m).real
    rho = m / t
    p = _probabilities(proj, rho)
    w = np.where(counts > 0, counts / np.where(p > 0, p, 1.0), 0.0)
    G = np.einsum("k,kij->ij", w, proj) - total * proj_sum / np.trace(proj_sum @ rho).real
    G = 0.5 * (G + G.conj().T)
    G = G - np.trace(G @ rho).real * np.eye(4)
    X = 2.0 / t * (T @ G)
    return np.concatenate([np.diag(X).real, X[_OFF].real, X[_OFF].imag])


def _lbfgs_direction(g, history):
    # two-loop recursion; ``history`` holds (s, y) pairs for the ascent problem
    q = g.copy()
    alphas = []
    for s_k, y_k in reversed(history):
        rho_k = 1.0 / (y_k @ s_k)
        a = rho_k * (s_k @ q)
        alphas.append((a, rho_k, s_k, y_k))
        q = q - a * y_k
    if history:
        s_k, y_k = history[-1]
        q = q * (s_k @ y_k) / (y_k @ y_k)
    for a, rho_k, s_k, y_k in reversed(alphas):
        b = rho_k * (y_k @ q)
        q = q + (a - b) * s_k
    return q


def mle_fit(data, tol=1e-10, max_iter=10_000, start=None, memory=10):
    """Maximum-likelihood ρ = T†T / Tr(T†T) over the 16 real parameters of T.

    The log-likelihood is Poissonian with the count scale profiled out. Each
    iteration takes a quasi-Newton (L-BFGS) ascent direction built from past
    gradients and backtracks until the Armijo condition holds, so the recorded
    log-likelihood never decreases. Iteration stops once the relative
    improvement falls below ``tol`` on two successive steps; ConvergenceError
    (carrying the best iterate) is raised after ``max_iter`` iterations.
    """
    proj = _projector_stack(data.settings)
    counts = np.asarray(data.counts, dtype=float)
    total = counts.sum()
    if total <= 0:
        raise DomainError("dataset has no counts")
    proj_sum = proj.sum(axis=0)
    rho0 = _physical_start(linear_reconstruct(data) if start is None else np.asarray(start, dtype=complex))
    x = _pack(_t_from_rho(rho0))

    # work with the per-count log-likelihood so tolerances do not depend on the count scale
    def f(x):
        return _loglik(proj, counts, _rho_from_t(_unpack(x)), total, proj_sum) / total

    def grad(x):
        return _gradient(proj, counts, _unpack(x), total, proj_sum) / total

    fx, g = f(x), grad(x)
    trace = [fx * total]
    history = []
    quiet = 0
    for it in range(1, max_iter + 1):
        d = _lbfgs_direction(g, history)
        slope = float(g @ d)
        if slope <= 0:
            history.clear()
            d, slope = g, float(g @ g)
        step = 1.0 if history else 1.0 / max(1.0, np.sqrt(slope))
        while True:
            x_new = x + step * d
            f_new = f(x_new)
            if f_new >= fx + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                x_new, f_new = x, fx
                break
        improvement = f_new - fx
        g_new = grad(x_new)
        s_k, y_k = x_new - x, g - g_new
        if s_k @ y_k > 1e-16 * np.linalg.norm(s_k) * np.linalg.norm(y_k):
            history.append((s_k, y_k))
            del history[:-memory]
        x, fx, g = x_new, f_new, g_new
        trace.append(fx * total)
        quiet = quiet + 1 if improvement <= tol * max(1.0, abs(fx)) else 0
        if quiet >= 2:
            return MLEResult(_rho_from_t(_unpack(x)), trace, it, float(np.linalg.norm(g)))
    raise ConvergenceError(
        f"MLE did not converge in {max_iter} iterations", best=_rho_from_t(_unpack(x)),
        grad_norm=float(np.linalg.norm(g)), iterations=max_iter)


def mle_reconstruct(data, **kwargs):
    """Physical density matrix maximizing the Poisson likelihood of ``data``."""
    return mle_fit(data, **kwargs).rho


def fidelity(rho, psi=PSI_MINUS):
    """<ψ|ρ|ψ> for a normalized pure state ψ."""
    psi = np.asarray(psi, dtype=complex)
    if abs(np.vdot(psi, psi).real - 1) > 1e-9:
        raise DomainError("target state must be normalized")
    return float(np.clip(np.vdot(psi, np.asarray(rho) @ psi).real, 0.0, 1.0))


def _psd_sqrt(rho):
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def concurrence_tangle(rho):
    """Wootters concurrence C and tangle T = C².

    The λ_i are square roots of the eigenvalues of ρ ρ̃ with
    ρ̃ = (σy⊗σy) ρ* (σy⊗σy), computed from the Hermitian form √ρ ρ̃ √ρ.
    """
    rho = np.asarray(rho, dtype=complex)
    s = _psd_sqrt(rho)
    flipped = SIGMA_YY @ rho.conj() @ SIGMA_YY
    ev = np.linalg.eigvalsh(s @ flipped @ s)
    lam = np.sort(np.sqrt(np.clip(ev, 0, None)))[::-1]
    c = float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))
    return c, c * c


def state_metrics(rho, psi=PSI_MINUS):
    c, t = concurrence_tangle(rho)
    return StateMetrics(fidelity(rho, psi), c, t)


def accidentals_per_setting(data):
    return data.singles_a * data.singles_b * data.window_ns * 1e-9 * data.integration_time


def subtract_accidentals(data):
    """Remove the expected accidental coincidences from every setting, flooring at 0.

    Settings where the estimate exceeded the counts are marked in ``floored``.
    """
    acc = accidentals_per_setting(data)
    raw = data.counts - acc
    return replace(data, counts=np.clip(raw, 0, None), floored=raw < 0)


def _run_seed(seed, run):
    return np.random.SeedSequence([int(seed), int(run)])


def monte_carlo_errors(data, runs=100, seed=0, psi=PSI_MINUS, max_failure_fraction=0.1):
    """Fidelity and tangle with Monte Carlo standard deviations.

    Each run redraws every count from Poisson(count) and repeats the MLE.
    Run ``r`` uses its own stream derived from (seed, r), so results do not
    depend on evaluation order.
    """
    if runs < 2:
        raise ValueError("need at least 2 Monte Carlo runs")
    base = state_metrics(mle_reconstruct(data), psi)
    fids, tangles, failed = [], [], []
    for r in range(runs):
        rng = np.random.default_rng(_run_seed(seed, r))
        sample = replace(data, counts=rng.poisson(data.counts).astype(float))
        try:
            rho = mle_reconstruct(sample)
        except ConvergenceError as exc:
            log.warning("Monte Carlo run %d did not converge: %s", r, exc)
            failed.append(r)
            continue
        fids.append(fidelity(rho, psi))
        tangles.append(concurrence_tangle(rho)[1])
    if len(failed) > max_failure_fraction * runs:
        raise ConvergenceError(f"{len(failed)} of {runs} Monte Carlo runs failed to converge")
    base.std_fidelity = float(np.std(fids, ddof=1))
    base.std_tangle = float(np.std(tangles, ddof=1))
    base.runs = len(fids)
    base.failed_runs = failed
    return base


def trace_distance(rho1, rho2):
    return 0.5 * float(np.abs(np.linalg.eigvalsh(np.asarray(rho1) - np.asarray(rho2))).sum())


def random_density_matrix(rng, rank=4):
    """Random physical state T†T/Tr with Gaussian complex T (4 × rank)."""
    g = rng.normal(size=(rank, 4)) + 1j * rng.normal(size=(rank, 4))
    m = g.conj().T @ g
    return m / np.trace(m).real


def write_dataset(data, csv_path, sidecar_path):
    """CSV of (setting_A, setting_B, counts) plus a JSON sidecar of acquisition parameters."""
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["setting_A", "setting_B", "counts"])
        for s, c in zip(data.settings, data.counts):
            w.writerow([s.a, s.b, repr(float(c))])
    meta = {"integration_time_s": data.integration_time, "singles_A_per_s": data.singles_a,
            "singles_B_per_s": data.singles_b, "window_ns": data.window_ns}
    with open(sidecar_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset(csv_path, sidecar_path):
    settings, counts = [], []
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for k, row in enumerate(reader, start=1):
            try:
                settings.append(MeasurementSetting(row["setting_A"].strip(), row["setting_B"].strip()))
                counts.append(float(row["counts"]))
            except (KeyError, ValueError, AttributeError, TypeError) as exc:
                raise ValueError(f"{csv_path}: row {k}: {exc}") from None
    with open(sidecar_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    return TomographyDataset(tuple(settings), np.array(counts), float(meta["integration_time_s"]),
                             float(meta.get("singles_A_per_s", 0.0)), float(meta.get("singles_B_per_s", 0.0)),
                             float(meta.get("window_ns", 4.4)))


def write_matrix_csv(rho, path):
    """4×4 complex matrix, row-major, one row per matrix row with re/im column pairs."""
    rho = np.asarray(rho, dtype=complex)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{part}{j}" for j in range(rho.shape[1]) for part in ("re", "im")])
        for row in rho:
            w.writerow([f"{getattr(v, part):.12e}" for v in row for part in ("real", "imag")])


def read_matrix_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    vals = np.array([[float(x) for x in r] for r in rows])
    return vals[:, 0::2] + 1j * vals[:, 1::2]
