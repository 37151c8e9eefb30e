"""Simulation and verification tools for anisotropic Gaussian random fields."""

__version__ = "0.1.0"

from .errors import (
    DegenerateGridError,
    GFLError,
    InsufficientDataError,
    NondegeneracyError,
    NumericalError,
    QuadratureError,
    SpecError,
)
from .kernels import (
    ExponentSet,
    Family,
    FieldSpec,
    canonical_distance,
    covariance,
    covariance_matrix,
    derive_exponents,
    metric_delta,
)
from .engine import CovarianceMatrix, FieldSample, Grid, assemble_covariance, condition, sample
from .geometry import AnisoRect, MetricBall, build_dyadic_cubes, covering_number, separated_tuples
from .bands import Band, band_covariance, residual_increment_norm, residual_tail_probe
from .verifier import check_a2, check_anticoncentration, check_increment_bound, check_nondegeneracy
from .multipoint import (
    classify_phase,
    count_scaling_fit,
    favorable_scale_probe,
    scan_multipoints,
    smallball_estimate,
)
