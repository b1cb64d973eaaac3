"""Design and simulation toolkit for PPKTP Sagnac entangled-photon sources."""
from .dispersion import KTP, CrystalSpec, MaterialModel, default_crystal, group_index, poling_period, refractive_index
from .errors import ConvergenceError, DomainError, InconsistencyError, InsufficientDataError, SolverError
from .focusing import (BeamGeometry, SweepRecord, coupling_ratio, fit_rate_scaling, focus_parameter,
                       max_coupling_ratio, mode_overlap, optimal_geometry, rayleigh_range, spectral_brightness,
                       sweep_optimum)
from .phasematching import (PumpSpec, degeneracy_temperature, fwhm_bandwidth_formula, fwhm_bandwidth_numeric,
                            phase_mismatch, spectrum, tuning_curve)
from .sagnac import (PSI_MINUS, Imperfections, PumpPreparation, accidental_rate, group_delay_walkoff,
                     pump_preparation, source_state, visibility, waveplate)
from .tomography import (TomographyDataset, concurrence_tangle, fidelity, linear_reconstruct, mle_reconstruct,
                         monte_carlo_errors, projector, simulate_counts, subtract_accidentals)

__version__ = "0.1.0"
