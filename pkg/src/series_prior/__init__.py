"""Finite random-series (B-spline) priors for Bayesian nonparametrics.

Submodules:
    basis       B-spline construction, evaluation, integrals, tensor products,
                grid approximation fitting.
    priors      truncated priors on the series length and coefficient priors.
    density     MCMC-free posterior moments for density estimation.
    regression  conjugate Gaussian (g-prior), binary (Beta), and Poisson
                (Gamma) series regression.
    rates       contraction-rate exponents and sieve certification.
    harness     reference densities, simulation experiments, metrics, CSV I/O.
    cli         command-line interface (series-prior).
"""

from .basis import (
    Basis,
    TensorBasis,
    SimplexInfeasibleError,
    active_set,
    eval_basis,
    eval_normalized,
    eval_tensor,
    fit_coefficients,
    make_basis,
    make_tensor,
    simplex_coefficients,
)
from .density import (
    DensityDataset,
    EnumerationCapError,
    PosteriorSummary,
    TermIndex,
    bases_for_prior,
    credible_band,
    exact_moment,
    j_posterior,
    log_term,
    mc_moment,
)
from .priors import (
    CoefficientPrior,
    ModelSizePrior,
    log_dirichlet_normalizer,
    log_pmf_J,
    priors_from_config,
    sample_coefficients,
)
from .rates import RateProblem, RateResult, SieveConstants, rate_exponents, solve_sieve
from .regression import (
    FunctionalDataset,
    GaussianPosterior,
    LongitudinalDataset,
    RegressionDataset,
    binary_moment,
    design_matrix,
    gaussian_fit,
    gaussian_predict,
    poisson_moment,
)

__version__ = "0.1.0"
