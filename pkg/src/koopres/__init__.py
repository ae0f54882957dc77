"""koopres: Koopman spectral analysis via residual minimization.

Learn neural observable dictionaries by minimizing the spectral residual
of the finite-dimensional Koopman approximation; compute EDMD spectra,
ResDMD-filtered eigenpairs, pseudospectra, Koopman modes, and Hankel-DMD
baselines over generated dynamical-system data.
"""

from .dictionaries import (
    AdamState,
    FixedDictionary,
    NeuralDictionary,
    adam_init,
    adam_step,
    evaluate_batch,
)
from .dynamics import (
    SnapshotPairs,
    Trajectory,
    load_snapshots,
    pairs_from_trajectories,
    pairs_from_trajectory,
    save_snapshots,
    simulate_linear,
    simulate_multiregime,
    simulate_pendulum,
)
from .edmd import (
    EigenPair,
    KoopmanMatrix,
    RegularizationRequiredError,
    Spectrum,
    eig,
    eval_eigenfunctions,
    koopman_modes,
    solve_koopman,
)
from .gram import GramTriple, compute_gram
from .hankel import HankelMatrix, build_hankel, hankel_dmd
from .preprocess import SvdReducer, davies_bouldin, fit_truncated_svd, lift_modes, project
from .residual import (
    NullEigenfunctionError,
    PseudospectrumGrid,
    complex_grid,
    pseudospectrum,
    resdmd_filter,
    residuals_for_spectrum,
    spectral_residual,
)
from .reskoopnet import (
    TrainConfig,
    TrainReport,
    TrainingDivergedError,
    grad_loss,
    loss_J,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "EigenPair",
    "FixedDictionary",
    "GramTriple",
    "HankelMatrix",
    "KoopmanMatrix",
    "NeuralDictionary",
    "NullEigenfunctionError",
    "PseudospectrumGrid",
    "RegularizationRequiredError",
    "SnapshotPairs",
    "Spectrum",
    "SvdReducer",
    "TrainConfig",
    "TrainReport",
    "TrainingDivergedError",
    "Trajectory",
    "adam_init",
    "adam_step",
    "build_hankel",
    "complex_grid",
    "compute_gram",
    "davies_bouldin",
    "eig",
    "eval_eigenfunctions",
    "evaluate_batch",
    "fit_truncated_svd",
    "grad_loss",
    "hankel_dmd",
    "koopman_modes",
    "lift_modes",
    "load_snapshots",
    "loss_J",
    "pairs_from_trajectories",
    "pairs_from_trajectory",
    "project",
    "pseudospectrum",
    "resdmd_filter",
    "residuals_for_spectrum",
    "save_snapshots",
    "simulate_linear",
    "simulate_multiregime",
    "simulate_pendulum",
    "solve_koopman",
    "spectral_residual",
    "train",
]
