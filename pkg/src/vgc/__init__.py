"""Variational Gaussian copula inference.

A proposal ``q(x)`` is built from a multivariate Gaussian ``N(mu, C C^T)``
whose coordinates are pushed through monotone maps ``x_j = h_j(z_j)``:
Bernstein-polynomial maps with learned weights, the exponential map
(log-normal margins) or the identity (plain Gaussian). Parameters are
fitted by stochastic ascent on the evidence lower bound.
"""

from .copula import GaussianFactor, VgcState, correlation_of, gaussian_score, log_density, marginal_pdf, push_sample
from .errors import (
    ConvergenceError,
    DerivativeOverflowError,
    DomainError,
    InvariantError,
    OptimizationAborted,
    ParameterError,
    RangeError,
    SingularFactorError,
    SupportError,
    VariantError,
    VgcError,
)
from .estimator import VariationalCopula
from .models import (
    Beta,
    BivariateLogNormal,
    Gamma,
    Horseshoe,
    Normal,
    PoissonLogLinear,
    PoissonRegressionData,
    SkewNormal,
    StudentT,
    TargetModel,
    generate_poisson_data,
    model_grad,
    model_log_joint,
)
from .optimizer import (
    ElboEstimate,
    ElboTrace,
    FitResult,
    OptimizerConfig,
    Scheme,
    StepSize,
    elbo_estimate,
    fit,
    grad_z_local,
    initial_state,
    local_objective,
    per_sample_gradients,
    project_simplex,
    step,
)
from .specfun import Family, ReferenceCdf, Support, reference_eval
from .transforms import BernsteinTransform, ExponentialTransform, IdentityTransform, MarginalTransform

__version__ = "0.1.0"
