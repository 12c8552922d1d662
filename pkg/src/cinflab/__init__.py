"""Numerical laboratory for exact recovery in block matrix completion.

Submodules
----------
instances
    Block masks, Haar low-rank ground truths, persistence.
solver
    Nuclear-norm minimization by Douglas-Rachford splitting.
equivalence
    Spectral certificate of exact recovery and related checks.
fpt
    Free-probability transforms and the limiting certificate spectrum.
phase
    Closed-form phase-transition curves.
montecarlo
    Phase-transition grids and spectrum experiments.
"""

__version__ = "0.1.0"

from .errors import (CinfLabError, DomainError, FptSolverError, PoleError,
                     SingularConfigurationError)
from .instances import (BlockMask, LowRankInstance, ProblemDims, apply_mask, load_instance,
                        make_block_mask, make_instance, save_instance)
from .solver import SolverOptions, SolveReport, classify_success, solve_nuclear_min
from .equivalence import SpectralCertificate, certificate, verify_identity_block
from .phase import beta_ac, beta_ac_from_alpha, beta_wc, pt_curve
from .fpt import g_dtilde, q1_density, solve_gq1, spectral_edge_beta, stieltjes_invert
from .montecarlo import GridConfig, run_grid, spectrum_experiment

__all__ = [
    "CinfLabError", "DomainError", "FptSolverError", "PoleError",
    "SingularConfigurationError",
    "BlockMask", "LowRankInstance", "ProblemDims", "apply_mask", "load_instance",
    "make_block_mask", "make_instance", "save_instance",
    "SolverOptions", "SolveReport", "classify_success", "solve_nuclear_min",
    "SpectralCertificate", "certificate", "verify_identity_block",
    "beta_ac", "beta_ac_from_alpha", "beta_wc", "pt_curve",
    "g_dtilde", "q1_density", "solve_gq1", "spectral_edge_beta", "stieltjes_invert",
    "GridConfig", "run_grid", "spectrum_experiment",
]
