"""Rényi-DP accounting for private hyperparameter tuning on a random subset."""

from .calibration import (
    GridPoint,
    calibrate_sigma,
    calibrate_sigma_alpha_line,
    calibrate_steps,
    forward_epsilon,
    grid_uniform_curve,
)
from .errors import (
    DomainError,
    GridMismatchError,
    MissingOrderError,
    NoSolutionError,
    NonConvergenceError,
)
from .extrapolation import (
    HyperParams,
    Optimizer,
    extrapolate,
    injected_noise_variance,
    optimal_lr_estimate,
)
from .mechanisms import Composed, Gaussian, SubsampledGaussian, dp_sgd, mechanism_curve
from .rdp_core import (
    AlphaGrid,
    PrivacyTarget,
    RdpCurve,
    compose,
    gaussian_curve,
    gaussian_rdp,
    parallel_compose,
    rdp_to_delta,
    rdp_to_dp,
    uniform_grid_bound,
)
from .subsampling import renyi_quadrature_oracle, subsample_curve, subsample_rdp
from .tuning import (
    CostModel,
    TuningConfig,
    Variant,
    expected_cost,
    pipeline_epsilon,
    tuning_rdp,
    variant1_curve,
    variant1_rdp,
    variant2_curve,
)

__version__ = "0.1.0"
