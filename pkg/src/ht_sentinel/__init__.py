"""Heavy-tail spectral diagnostics for neural-network weight matrices.

Fit power laws to eigenvalue spectra of ``W^T W``, calibrate the KS
threshold ``d* = C / sqrt(n_tail)`` by Monte Carlo, and track the heavy-tail
indicator ``d* - d`` over training checkpoints to pick a stopping epoch.
"""

from .calibration import CalibrationConfig, CalibrationResult, run_calibration, threshold_d_star
from .criterion import (
    EpochRecord,
    PhaseRules,
    PhaseSegmentation,
    StopDecision,
    StopMode,
    Trajectory,
    classify_phases,
    evaluate_epoch,
    fit_spectrum,
    stop_epoch,
)
from .errors import (
    DegenerateSampleError,
    DomainError,
    FormatError,
    HTSentinelError,
    InsufficientTailError,
    InvalidConfigError,
    InvalidDataError,
    InvalidInputError,
    NumericFailureError,
    SchemaError,
    UnsupportedFormatError,
)
from .ingest import RunManifest, load_manifest, read_eigenvalues, read_matrix, write_eigenvalues, write_matrix
from .powerlaw import (
    PowerLawFit,
    TailSample,
    Winner,
    bootstrap_pvalue,
    fit_alpha,
    fit_exponential,
    fit_lognormal,
    ks_distance,
    loglik_ratio,
    select_xmin,
)
from .spectra import Spectrum, WeightMatrix, ecdf_at, esd

__version__ = "0.1.0"
