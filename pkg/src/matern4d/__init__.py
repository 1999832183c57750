"""Frequency-space tools for stationary Matern fields in four dimensions.

Simulation of microergodically matched models, the localized-Fourier score
statistic that separates them, and Whittle estimation of the range.
"""

from .model import MaternParams, ModelPair, microergodic, spectral_density, covariance
from .taper import FreqLattice, TaperSpec
from .simulator import SimConfig
from .score import Shell, shell_indices, mc_experiment
from .whittle import WhittleConfig, fit

__all__ = [
    "MaternParams",
    "ModelPair",
    "microergodic",
    "spectral_density",
    "covariance",
    "FreqLattice",
    "TaperSpec",
    "SimConfig",
    "Shell",
    "shell_indices",
    "mc_experiment",
    "WhittleConfig",
    "fit",
]

__version__ = "0.1.0"
