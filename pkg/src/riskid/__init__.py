"""riskid: decision-theoretic identification of discrete LTI output-error models.

The library estimates nonparametric impulse-response summaries (classical
least squares or kernel-regularized Gaussian posteriors), tunes the kernel by
marginal likelihood, and projects the summary onto a rational model class by
minimizing a weighted risk. A seeded Monte Carlo harness compares the
classical and regularized decisions at desk scale.
"""

from .experiment import (
    BENCHMARK_SYSTEM,
    DEFAULT_KERNEL_INIT,
    DEMO_SYSTEM,
    BenchmarkCell,
    BoxSummary,
    ErrorDistribution,
    ExperimentConfig,
    IdentifyResult,
    ReplicationResult,
    benchmark_suite,
    identify_dataset,
    normalized_error,
    run_monte_carlo,
    run_single,
)
from .kernel import (
    DcHyperParams,
    FactorizationError,
    dc_kernel,
    marginal_log_likelihood,
    tune_hyperparameters,
)
from .lti import (
    Dataset,
    DivergedResponseError,
    RationalModel,
    build_toeplitz,
    equation_error_fit,
    impulse_response,
    impulse_response_jacobian,
    load_dataset,
    load_model,
    sample_white_noise,
    save_dataset,
    save_model,
    simulate,
)
from .posterior import PosteriorSummary, gaussian_posterior, ls_summary
from .risk import (
    AllStartsDivergedError,
    Decision,
    RiskSpec,
    minimize_risk,
    monte_carlo_risk_check,
    pem_prediction_error,
    risk_gradient,
    risk_value,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # lti
    "RationalModel",
    "Dataset",
    "DivergedResponseError",
    "impulse_response",
    "impulse_response_jacobian",
    "build_toeplitz",
    "simulate",
    "sample_white_noise",
    "equation_error_fit",
    "load_model",
    "save_model",
    "load_dataset",
    "save_dataset",
    # kernel
    "DcHyperParams",
    "FactorizationError",
    "dc_kernel",
    "marginal_log_likelihood",
    "tune_hyperparameters",
    # posterior
    "PosteriorSummary",
    "ls_summary",
    "gaussian_posterior",
    # risk
    "RiskSpec",
    "Decision",
    "AllStartsDivergedError",
    "risk_value",
    "risk_gradient",
    "minimize_risk",
    "pem_prediction_error",
    "monte_carlo_risk_check",
    # experiment
    "ExperimentConfig",
    "BoxSummary",
    "ErrorDistribution",
    "ReplicationResult",
    "BenchmarkCell",
    "IdentifyResult",
    "BENCHMARK_SYSTEM",
    "DEMO_SYSTEM",
    "DEFAULT_KERNEL_INIT",
    "normalized_error",
    "identify_dataset",
    "run_single",
    "run_monte_carlo",
    "benchmark_suite",
]
