"""Quantum state tomography with informationally (over)complete measurements."""

from .opspace import HermitianBasis, devectorize, gellmann_basis, vectorize
from .povm import (
    BoundaryStateError,
    NotInformationallyCompleteError,
    Povm,
    PovmError,
    covariant_povm,
    frame_superop,
    frame_superop_at,
    is_informationally_complete,
    is_tight_ic,
    mub_povm,
    platonic_povm,
    resolve_povm,
    sic_povm,
)
from .estimators import (
    EstimationResult,
    Frequencies,
    ReconstructionSet,
    blue,
    blue_mse_matrix,
    canonical_recon,
    cle,
    mle,
    mse_matrix,
    optimal_recon,
)
from .metrics import BURES, CHERNOFF, HS, WeightSpec, ellipsoid_volume, weight_superop, wmse
from .analytic import CovariantParams, covariant_blue_figures, covariant_params, qubit_closed_form
from .simulate import ExperimentConfig, TrialRecord, haar_average, run_experiment, sample_counts

__version__ = "0.1.0"
