"""Space-variant TV_p image restoration (L2 and L1 fidelities) solved by ADMM."""

__version__ = "0.1.0"

from .degrade import NoiseSpec, bsnr, degrade, degrade_awgn, degrade_spn, isnr
from .estimator import TVRestorer, sweep_mu
from .operators import BlurOperator, divergence, gradient, spectral_multipliers
from .pmap import PMapEstimator, RatioLookup, estimate_pmap, ggd_ratio, ratio_inverse, spn_prefilter
from .solver import RestoreReport, SolverConfig, SolverDivergence, solve

__all__ = [
    "BlurOperator",
    "NoiseSpec",
    "PMapEstimator",
    "RatioLookup",
    "RestoreReport",
    "SolverConfig",
    "SolverDivergence",
    "TVRestorer",
    "bsnr",
    "degrade",
    "degrade_awgn",
    "degrade_spn",
    "divergence",
    "estimate_pmap",
    "ggd_ratio",
    "gradient",
    "isnr",
    "ratio_inverse",
    "solve",
    "spectral_multipliers",
    "spn_prefilter",
    "sweep_mu",
]
