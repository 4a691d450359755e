"""Peak height distribution of smooth centered Gaussian random fields.

Closed forms for 1D processes with general covariance, Monte Carlo
Kac-Rice estimators in any dimension, and a direct-simulation oracle.
"""

from . import errors
from ._backend import BACKEND
from .covmodel import (
    CovDerivatives,
    Cosine,
    DerivativeMoments,
    HDerivatives,
    Kernel,
    PolyProfile,
    ProcessModel,
    ScaledVariance,
    StationaryKernel,
    VaryingBandwidth,
    h_derivatives_numeric,
    moments_from_h,
    moments_via_quadrature,
)
from .fieldsim import (
    GridSpec,
    PeakSampleSet,
    empirical_tail,
    find_local_maxima,
    grid_values_1d,
    simulate_process_1d,
    simulate_scale_space,
)
from .kacrice import JointGaussianSpec, PeakCdfEstimate, algorithm1, algorithm2, spec_from_moments_1d
from .peak1d import (
    PeakParams,
    height_density,
    height_moments,
    height_tail,
    peak_density,
    peak_params,
    peak_params_from_h,
    peak_tail,
)
from .scalespace import ScaleSpaceSpec, blocks_for, gaussian_blocks, spec_for_kacrice

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CovDerivatives", "Cosine", "DerivativeMoments", "GridSpec", "HDerivatives",
    "JointGaussianSpec", "Kernel", "PeakCdfEstimate", "PeakParams", "PeakSampleSet", "PolyProfile",
    "ProcessModel", "ScaleSpaceSpec", "ScaledVariance", "StationaryKernel", "VaryingBandwidth",
    "algorithm1", "algorithm2", "blocks_for", "empirical_tail", "errors", "find_local_maxima",
    "gaussian_blocks", "h_derivatives_numeric", "height_density", "height_moments", "height_tail",
    "moments_from_h", "moments_via_quadrature", "peak_density", "peak_params", "peak_params_from_h",
    "peak_tail", "grid_values_1d", "simulate_process_1d", "simulate_scale_space", "spec_for_kacrice",
    "spec_from_moments_1d",
]
