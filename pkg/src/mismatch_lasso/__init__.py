"""Constrained least squares under model mismatch.

Submodules
----------
datagen      isotropic latent factors, mixing matrices, observation models
mismatch     mismatch covariance/deviation, exact backends, target vectors
geometry     hypothesis sets, support functions, Gaussian mean widths
solver       projections, projected gradient descent, adapted estimation
experiments  config-driven experiment harness (CSV/JSON reports)
"""

from .datagen import (
    GLMLogistic,
    DitheredOneBit,
    LatentDistribution,
    Linear,
    MixingMatrix,
    MultiFn,
    MultiIndex,
    NoisySplit,
    OutputFn,
    SIM,
    SampleSet,
    Superimposed,
    VariableSelection,
    apply_mixing,
    build_sample_set,
    dithering_scale,
    generate_outputs,
    isotropic_decomposition,
    sample_latent,
)
from .geometry import (
    Box,
    L1Ball,
    L2Ball,
    LinearImage,
    Shifted,
    Subspace,
    WidthEstimate,
    conic_width_l1_descent,
    local_width_bound,
    mean_width_global,
    required_samples,
    support_function,
)
from .mismatch import (
    MismatchReport,
    TargetVector,
    UnsupportedExactError,
    exact_output_correlation,
    mismatch_covariance,
    mismatch_covariance_exact,
    mismatch_decomposition,
    mismatch_deviation,
    mismatch_report,
    noise_power_target,
    subgaussian_norm,
    target_multi_index,
    target_single_index,
    target_superimposed,
)
from .solver import (
    FitResult,
    SolverConfig,
    adapted_reference_beta,
    project,
    pushforward_estimate,
    solve_adapted,
    solve_klasso,
    spectral_norm,
)
from .experiments import ExperimentConfig, fit_decay_slope, run_experiment, top_k_support

__version__ = "0.1.0"
