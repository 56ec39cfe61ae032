"""Bayesian anisotropic smoothing with tensor-product P-splines."""

from .basis import MarginalBasis, TensorDesign, build_design, design_row, eval_marginal, make_marginal_basis
from .diagnostics import SummaryRow, summarize, summary_table
from .effects import EffectResult, credible_bands, interaction, interaction_coefs, main_effect, main_effect_coefs
from .errors import (
    BasisError,
    BayesTPSError,
    DegenerateFit,
    DomainError,
    InsufficientSamples,
    NumericalBreakdown,
    ScalingError,
    ValidationError,
)
from .penalty import (
    PenaltyEigenstructure,
    build_eigenstructure,
    eigenstructure_for,
    grad_hess_rho,
    log_fcp_rho,
    log_pseudo_det,
    quadratic_forms,
    second_diff_penalty,
)
from .priors import InverseGammaPrior, WeibullPrior, kernel_derivs, log_kernel_rho, prior_scaling
from .sampler import (
    ChainOutput,
    ChainState,
    SamplerConfig,
    gibbs_b,
    gibbs_sigma2,
    mh_rho,
    modify_hessian,
    newton_step_rho,
    run_chain,
    run_chains,
)

__version__ = "0.1.0"

__all__ = [
    "MarginalBasis",
    "TensorDesign",
    "build_design",
    "design_row",
    "eval_marginal",
    "make_marginal_basis",
    "SummaryRow",
    "summarize",
    "summary_table",
    "EffectResult",
    "credible_bands",
    "interaction",
    "interaction_coefs",
    "main_effect",
    "main_effect_coefs",
    "BasisError",
    "BayesTPSError",
    "DegenerateFit",
    "DomainError",
    "InsufficientSamples",
    "NumericalBreakdown",
    "ScalingError",
    "ValidationError",
    "PenaltyEigenstructure",
    "build_eigenstructure",
    "eigenstructure_for",
    "grad_hess_rho",
    "log_fcp_rho",
    "log_pseudo_det",
    "quadratic_forms",
    "second_diff_penalty",
    "InverseGammaPrior",
    "WeibullPrior",
    "kernel_derivs",
    "log_kernel_rho",
    "prior_scaling",
    "ChainOutput",
    "ChainState",
    "SamplerConfig",
    "gibbs_b",
    "gibbs_sigma2",
    "mh_rho",
    "modify_hessian",
    "newton_step_rho",
    "run_chain",
    "run_chains",
]
