"""Adjacent-category autoregression for ordinal time series.

Library surface: model mathematics (:mod:`acar.core`), exact simulation
(:mod:`acar.simulate`), conditional maximum-likelihood fitting
(:mod:`acar.fit`), diagnostic and comparison tests (:mod:`acar.inference`),
Monte Carlo harnesses (:mod:`acar.montecarlo`) and the climate-covariate
data pipeline (:mod:`acar.data`, :mod:`acar.search`).  The ``acar`` console
script wraps all of it.
"""

from .core import (
    LatentPath,
    ModelData,
    ResidualMatrix,
    adjacent_to_probs,
    compute_latent_path,
    hessian_path,
    latent_gradients,
    negative_log_likelihood,
    residual_path,
    score_path,
)
from .exceptions import (
    AcarError,
    ConvergenceWarning,
    DataError,
    DataWarning,
    NumericalError,
    ParameterError,
)
from .fit import (
    FitConfig,
    FitResult,
    ThresholdResult,
    aic,
    fit,
    quadratic_threshold,
    sandwich_covariance,
    vertex_threshold,
)
from .inference import (
    ComparisonResult,
    PortmanteauResult,
    chi_square_upper_tail,
    compare_models,
    comparison_covariance,
    cross_score_covariance,
    estimate_W,
    normal_upper_tail,
    portmanteau_test,
    residual_autocorrelations,
)
from .montecarlo import (
    MCDesign,
    MCSummary,
    ScenarioReport,
    run_recovery_study,
    run_scenario_study,
)
from .params import (
    BENCHMARK_THETAS,
    CovariateMatrix,
    OrdinalSeries,
    ParameterVector,
    benchmark_theta,
    validate_parameters,
)
from .simulate import (
    Coupling,
    SimConfig,
    simulate_covariates,
    simulate_paired_sites,
    simulate_path,
)

__version__ = "0.1.0"
