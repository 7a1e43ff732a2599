"""scikit-learn style wrapper around :func:`vgc.optimizer.fit`.

The "data" passed to :meth:`VariationalCopula.fit` is a target model rather
than a design matrix; everything else follows the usual conventions:
constructor arguments are hyper-parameters, fitted attributes end in ``_``,
and :meth:`transform` / :meth:`inverse_transform` move points between the
model space and the latent Gaussian space.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ParameterError
from .models import TargetModel
from .optimizer import OptimizerConfig, elbo_estimate, fit, initial_state
from .specfun import ReferenceCdf


class VariationalCopula(TransformerMixin, BaseEstimator):
    """Gaussian copula proposal with per-coordinate monotone margins.

    Parameters
    ----------
    margins : {"bernstein", "exponential", "identity"} or sequence
        Marginal map for every coordinate, or one entry per coordinate.
    k : int
        Bernstein degree.
    scheme : {"stochastic", "analytic"}
        Entropy-gradient estimator.
    iterations, samples_per_iter : int
    mu_step, chol_step, weight_step : float or str
        ``"scale"`` or ``"scale/decay"``.
    init_scale : float
        Initial Cholesky factor is ``init_scale * I``.
    reference : ReferenceCdf or sequence, optional
        Outer reference distribution of Bernstein maps; defaults by support.
    tol : float or None
        Relative tolerance of the moving-window convergence test.
    seed : int, optional

    Attributes
    ----------
    state_ : VgcState
    trace_ : ElboTrace
    n_iter_ : int
    converged_ : bool
    """

    def __init__(
        self,
        margins="bernstein",
        k=10,
        scheme="stochastic",
        iterations=10_000,
        samples_per_iter=1,
        mu_step=0.01,
        chol_step=0.01,
        weight_step=0.001,
        init_scale=0.1,
        reference=None,
        tol=None,
        seed=0,
    ):
        self.margins = margins
        self.k = k
        self.scheme = scheme
        self.iterations = iterations
        self.samples_per_iter = samples_per_iter
        self.mu_step = mu_step
        self.chol_step = chol_step
        self.weight_step = weight_step
        self.init_scale = init_scale
        self.reference = reference
        self.tol = tol
        self.seed = seed

    def _config(self):
        return OptimizerConfig(
            iterations=int(self.iterations),
            samples_per_iter=int(self.samples_per_iter),
            mu_step=self.mu_step,
            chol_step=self.chol_step,
            weight_step=self.weight_step,
            scheme=self.scheme,
            tol=self.tol,
            seed=self.seed,
        )

    def fit(self, X: TargetModel, y=None):
        """Fit the proposal to the target model ``X``; ``y`` is ignored."""
        if not isinstance(X, TargetModel):
            raise ParameterError("VariationalCopula.fit expects a TargetModel")
        if not self.init_scale > 0:
            raise ParameterError("init_scale must be positive")
        refs = self.reference
        if isinstance(refs, ReferenceCdf):
            refs = [refs] * X.p
        init = initial_state(X, self.margins, k=int(self.k), scale=float(self.init_scale), refs=refs)
        res = fit(X, init, self._config())
        self.model_ = X
        self.state_ = res.state
        self.trace_ = res.trace
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        self.n_features_in_ = X.p
        return self

    @property
    def correlation_(self):
        check_is_fitted(self, "state_")
        return self.state_.correlation()

    def _check_points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.n_features_in_ == 1 else X[None, :]
        if X.shape[-1] != self.n_features_in_:
            raise ParameterError(f"expected {self.n_features_in_} columns, got {X.shape[-1]}")
        return X

    def transform(self, X):
        """Latent Gaussian coordinates ``h^{-1}(x)`` of model-space points."""
        check_is_fitted(self, "state_")
        return self.state_.latent(self._check_points(X))

    def inverse_transform(self, Z):
        """Model-space points ``h(z)`` of latent coordinates."""
        check_is_fitted(self, "state_")
        Z = self._check_points(Z)
        out = np.empty_like(Z)
        for j, t in enumerate(self.state_.transforms):
            out[:, j] = t.evaluate(Z[:, j]).h
        return out

    def sample(self, n_samples=1, random_state=None):
        check_is_fitted(self, "state_")
        return self.state_.sample(int(n_samples), random_state)

    def score_samples(self, X):
        """Proposal log density at model-space points."""
        check_is_fitted(self, "state_")
        return np.atleast_1d(self.state_.log_density(self._check_points(X)))

    def score(self, X=None, y=None, n_samples=10_000):
        """Monte Carlo ELBO against ``X`` (defaults to the fitted model)."""
        check_is_fitted(self, "state_")
        model = self.model_ if X is None else X
        return elbo_estimate(self.state_, model, n_samples, np.random.default_rng(self.seed)).value
