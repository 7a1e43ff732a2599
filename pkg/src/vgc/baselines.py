"""Reference inference methods for the horseshoe target and a generic sampler.

* :func:`gibbs_horseshoe` - exact two-block Gibbs sampler.
* :func:`mfvb_horseshoe` - mean-field fixed point with closed-form ELBO.
* :func:`vgc_ln_deterministic` - log-normal Gaussian-copula proposal fitted by
  gradient ascent on its closed-form ELBO.
* :func:`rwmh_sample` - random-walk Metropolis in unconstrained coordinates.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import differentiate, optimize, special

from .errors import ConvergenceError, ParameterError
from .models import HORSESHOE_C0, TargetModel
from .specfun import LOG_2PI, Support

logger = logging.getLogger(__name__)

HORSESHOE_C1 = HORSESHOE_C0 + LOG_2PI + 1.0


def _check_y(y):
    y = float(y)
    if not math.isfinite(y):
        raise ParameterError("observation must be finite")
    return y


# -- Gibbs ---------------------------------------------------------------------
def horseshoe_conditionals(y, gamma=None, tau=None):
    """Parameters of the full conditionals.

    Returns ``(shape, scale)`` of ``tau | gamma ~ InvGa`` when ``gamma`` is
    given, or ``(shape, rate)`` of ``gamma | tau ~ Ga`` when ``tau`` is given.
    """
    y = _check_y(y)
    if (gamma is None) == (tau is None):
        raise ParameterError("give exactly one of gamma or tau")
    if gamma is not None:
        return 1.0, 0.5 * y * y + float(gamma)
    return 1.0, 1.0 / float(tau) + 1.0


def gibbs_horseshoe(y, n_samples, burn_in=100_000, seed=None):
    """Draw ``(tau, gamma)`` from the horseshoe posterior by Gibbs sampling.

    Both conditionals have shape 1, so each draw is a scaled exponential:
    ``tau = (y^2/2 + gamma) / E`` and ``gamma = E' / (1/tau + 1)``.

    Parameters
    ----------
    y : float
        The single observation.
    n_samples : int
        Number of retained draws.
    burn_in : int
        Draws discarded before the first retained one.
    seed : int or Generator, optional

    Returns
    -------
    ndarray of shape (n_samples, 2)
    """
    y = _check_y(y)
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ParameterError("n_samples must be at least 1")
    burn_in = max(int(burn_in), 0)
    rng = np.random.default_rng(seed)
    total = n_samples + burn_in
    e_tau = rng.standard_exponential(total)
    e_gam = rng.standard_exponential(total)
    half_y2 = 0.5 * y * y
    out = np.empty((total, 2))
    gamma = 1.0
    for i in range(total):
        tau = (half_y2 + gamma) / e_tau[i]
        gamma = e_gam[i] / (1.0 / tau + 1.0)
        out[i, 0] = tau
        out[i, 1] = gamma
    return out[burn_in:]


# -- mean field ------------------------------------------------------------------
@dataclass(frozen=True)
class MfvbHorseshoeState:
    """``q(tau) = InvGa(alpha1, beta1)`` and ``q(gamma) = Ga(alpha2, beta2)``."""

    alpha1: float
    beta1: float
    alpha2: float
    beta2: float

    def __post_init__(self):
        if min(self.alpha1, self.beta1, self.alpha2, self.beta2) <= 0:
            raise ParameterError("all mean-field parameters must be positive")

    @property
    def mean_log_tau(self):
        return math.log(self.beta1) - special.digamma(self.alpha1)

    @property
    def mean_inv_tau(self):
        return self.alpha1 / self.beta1

    @property
    def mean_gamma(self):
        return self.alpha2 / self.beta2


def mfvb_elbo(y, state: MfvbHorseshoeState):
    """Closed-form mean-field ELBO: expected log joint plus both entropies."""
    y = _check_y(y)
    a1, b1, a2, b2 = state.alpha1, state.beta1, state.alpha2, state.beta2
    g, it = state.mean_gamma, state.mean_inv_tau
    expected = HORSESHOE_C0 - 2.0 * state.mean_log_tau - 0.5 * y * y * it - g * it - g
    h1 = a1 + math.log(b1) + special.gammaln(a1) - (1.0 + a1) * special.digamma(a1)
    h2 = a2 - math.log(b2) + special.gammaln(a2) + (1.0 - a2) * special.digamma(a2)
    return float(expected + h1 + h2)


def mfvb_horseshoe(y, max_iters=10_000, tol=1e-12, init_gamma=1.0):
    """Iterate the mean-field moment equations to their fixed point.

    Returns
    -------
    (MfvbHorseshoeState, float)
        The converged factors and their ELBO.

    Raises
    ------
    ConvergenceError
        If ``<gamma>`` still moves by more than ``tol`` after ``max_iters``.
    """
    y = _check_y(y)
    half_y2 = 0.5 * y * y

    def update(g):
        # <gamma> -> beta1 = y^2/2 + <gamma> -> beta2 = 1/beta1 + 1 -> 1/beta2
        return 1.0 / (1.0 / (half_y2 + g) + 1.0)

    # the plain iteration contracts at rate ~1 - 2 sqrt(y^2/2) for small y;
    # Steffensen (del2) acceleration reaches the fixed point to rounding
    try:
        g = float(optimize.fixed_point(update, float(init_gamma), xtol=tol, maxiter=int(max_iters)))
    except RuntimeError as exc:
        raise ConvergenceError(f"mean-field iteration did not settle in {max_iters} steps") from exc
    beta1 = half_y2 + g
    state = MfvbHorseshoeState(1.0, beta1, 1.0, 1.0 / beta1 + 1.0)
    return state, mfvb_elbo(y, state)


# -- deterministic log-normal copula ---------------------------------------------------
@dataclass(frozen=True)
class VgcLnHorseshoeParams:
    """Mean and lower Cholesky factor of the latent Gaussian of ``(ln tau, ln gamma)``."""

    mu1: float
    mu2: float
    c11: float
    c21: float
    c22: float

    def __post_init__(self):
        if not (self.c11 > 0 and self.c22 > 0):
            raise ParameterError("Cholesky diagonal must be positive")

    def as_array(self):
        return np.array([self.mu1, self.mu2, self.c11, self.c21, self.c22])

    @classmethod
    def from_array(cls, a):
        return cls(*(float(v) for v in a))

    @property
    def mu(self):
        return np.array([self.mu1, self.mu2])

    @property
    def C(self):
        return np.array([[self.c11, 0.0], [self.c21, self.c22]])


def _ln_terms(y, p):
    m1, m2, c11, c21, c22 = p
    ell0 = math.exp(m2 - m1 + 0.5 * ((c11 - c21) ** 2 + c22 * c22))
    e_tau = 0.5 * y * y * math.exp(0.5 * c11 * c11 - m1)
    e_gam = math.exp(m2 + 0.5 * (c21 * c21 + c22 * c22))
    return ell0, e_tau, e_gam


def vgc_ln_elbo(y, params: VgcLnHorseshoeParams):
    """Closed-form ELBO of the log-normal copula proposal on the horseshoe."""
    y = _check_y(y)
    p = params.as_array()
    try:
        ell0, e_tau, e_gam = _ln_terms(y, p)
    except OverflowError:
        return -math.inf
    return HORSESHOE_C1 - p[0] + p[1] - e_tau - ell0 - e_gam + math.log(p[2] * p[4])


def vgc_ln_elbo_grad(y, params: VgcLnHorseshoeParams):
    """Gradient in ``(mu1, mu2, C11, C21, C22)``."""
    y = _check_y(y)
    m1, m2, c11, c21, c22 = params.as_array()
    ell0, e_tau, e_gam = _ln_terms(y, (m1, m2, c11, c21, c22))
    return np.array([
        -1.0 + e_tau + ell0,
        1.0 - ell0 - e_gam,
        -c11 * e_tau - (c11 - c21) * ell0 + 1.0 / c11,
        (c11 - c21) * ell0 - c21 * e_gam,
        -c22 * ell0 - c22 * e_gam + 1.0 / c22,
    ])


def vgc_ln_deterministic(y, mode="full", init=None, max_iters=50_000, tol=1e-10):
    """Maximise the closed-form ELBO by gradient ascent with backtracking.

    Parameters
    ----------
    y : float
    mode : {"full", "diag"}
        ``"diag"`` pins ``C21 = 0`` (independence copula).
    init : VgcLnHorseshoeParams, optional
        Defaults to ``mu = 0, C = I``.
    max_iters : int
    tol : float
        Stop when the gradient norm falls below ``tol``.

    Returns
    -------
    (VgcLnHorseshoeParams, float)

    Raises
    ------
    ConvergenceError
        If the line search cannot find an ascent step.
    """
    if mode not in ("full", "diag"):
        raise ParameterError(f"mode must be 'full' or 'diag', got {mode!r}")
    y = _check_y(y)
    params = init if init is not None else VgcLnHorseshoeParams(0.0, 0.0, 1.0, 0.0, 1.0)
    x = params.as_array()
    if mode == "diag":
        x[3] = 0.0
    mask = np.ones(5)
    if mode == "diag":
        mask[3] = 0.0

    def value(v):
        if v[2] <= 0 or v[4] <= 0:
            return -math.inf
        return vgc_ln_elbo(y, VgcLnHorseshoeParams.from_array(v))

    f = value(x)
    if not math.isfinite(f):
        raise ParameterError("initial point has non-finite ELBO")
    step = 1.0
    for _ in range(int(max_iters)):
        g = vgc_ln_elbo_grad(y, VgcLnHorseshoeParams.from_array(x)) * mask
        gg = float(g @ g)
        if math.sqrt(gg) < tol:
            break
        # Armijo backtracking; start from a slightly enlarged previous step
        step = min(step * 2.0, 1e3)
        while True:
            cand = x + step * g
            with np.errstate(over="ignore"):
                fc = value(cand)
            if fc >= f + 1e-4 * step * gg:
                break
            step *= 0.5
            if step < 1e-16:
                if gg < 1e-12:
                    return VgcLnHorseshoeParams.from_array(x), f
                raise ConvergenceError("line search failed to find an ascent step")
        x, f = cand, fc
    else:
        logger.info("deterministic ascent stopped at max_iters=%d", max_iters)
    return VgcLnHorseshoeParams.from_array(x), f


# -- random-walk Metropolis -------------------------------------------------------------
def _to_unconstrained(x, supports):
    # out-of-support points map to nan, which callers reject
    u = np.array(x, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        for j, s in enumerate(supports):
            s = Support(s)
            if s is Support.POSITIVE:
                u[..., j] = np.log(x[..., j])
            elif s is Support.UNIT:
                u[..., j] = special.logit(x[..., j])
    return u


def _from_unconstrained(u, supports):
    """Map back and return ``(x, log|dx/du|)``."""
    x = np.array(u, dtype=float)
    logjac = np.zeros(np.shape(u)[:-1])
    for j, s in enumerate(supports):
        s = Support(s)
        if s is Support.POSITIVE:
            x[..., j] = np.exp(u[..., j])
            logjac = logjac + u[..., j]
        elif s is Support.UNIT:
            x[..., j] = special.expit(u[..., j])
            logjac = logjac - np.logaddexp(0.0, u[..., j]) - np.logaddexp(0.0, -u[..., j])
    return x, logjac


def unconstrained_logpdf(model: TargetModel, u):
    """Log density of the model pushed to unconstrained coordinates."""
    x, logjac = _from_unconstrained(np.asarray(u, dtype=float), model.supports)
    ok = model.in_support(x)
    if np.ndim(ok) == 0:
        return float(model._log_joint(x) + logjac) if ok else -math.inf
    out = np.full(ok.shape, -math.inf)
    out[ok] = model._log_joint(x[ok]) + logjac[ok]
    return out


def log_acceptance_ratio(model: TargetModel, u, u_new):
    """``ln min(1, pi(u') / pi(u))`` for a symmetric proposal, returned
    without the ``min`` so that the forward and reverse ratios cancel."""
    return unconstrained_logpdf(model, u_new) - unconstrained_logpdf(model, u)


@dataclass
class RwmhResult:
    samples: np.ndarray
    acceptance_rate: float
    names: tuple

    def __array__(self, dtype=None, copy=None):
        return self.samples if dtype is None else self.samples.astype(dtype)


def laplace_approximation(model: TargetModel, init=None):
    """Mode and inverse negative Hessian of the unconstrained log density.

    Returns
    -------
    mode : ndarray
        Mode in the model space.
    cov : ndarray
        Covariance of the Gaussian approximation in unconstrained coordinates.
    """
    supports = model.supports
    if init is None:
        init = [{Support.REAL: 0.0, Support.POSITIVE: 1.0, Support.UNIT: 0.5}[Support(s)] for s in supports]
    u0 = _to_unconstrained(np.asarray(init, dtype=float), supports)

    def neg(u):
        v = unconstrained_logpdf(model, u)
        return -v if np.isfinite(v) else np.inf

    res = optimize.minimize(neg, u0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    res = optimize.minimize(neg, res.x, method="BFGS")
    hess = differentiate.hessian(lambda u: unconstrained_logpdf(model, np.moveaxis(u, 0, -1)), res.x).ddf
    try:
        cov = np.linalg.inv(-hess)
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("Hessian at the mode is not negative definite") from exc
    x, _ = _from_unconstrained(res.x, supports)
    return x, cov


def rwmh_sample(model: TargetModel, n_samples, proposal_scale=0.5, seed=None, init=None, burn_in=None,
                proposal_cov=None):
    """Random-walk Metropolis in unconstrained space.

    Positive coordinates move on the log scale and unit-interval ones on the
    logit scale; the Jacobian of the map is part of the target.

    Parameters
    ----------
    model : TargetModel
    n_samples : int
        Retained draws.
    proposal_scale : float or array_like
        Gaussian proposal standard deviation, scalar or one per coordinate.
        Multiplies the Cholesky factor when ``proposal_cov`` is given.
    seed : int or Generator, optional
    init : array_like, optional
        Starting point in the model space; defaults to 1 / 0.5 / 0 per support.
    burn_in : int, optional
        Defaults to 10% of ``n_samples``.
    proposal_cov : array_like, optional
        Proposal covariance in unconstrained coordinates, e.g. from
        :func:`laplace_approximation`.

    Returns
    -------
    RwmhResult
    """
    n_samples = int(n_samples)
    if n_samples < 1:
        raise ParameterError("n_samples must be at least 1")
    burn_in = n_samples // 10 if burn_in is None else int(burn_in)
    rng = np.random.default_rng(seed)
    supports = model.supports
    p = model.p
    if init is None:
        init = [{Support.REAL: 0.0, Support.POSITIVE: 1.0, Support.UNIT: 0.5}[Support(s)] for s in supports]
    u = _to_unconstrained(np.asarray(init, dtype=float), supports)
    lp = unconstrained_logpdf(model, u)
    if not math.isfinite(lp):
        raise ParameterError("initial point has zero target density")
    scale = np.broadcast_to(np.asarray(proposal_scale, dtype=float), (p,))
    total = n_samples + burn_in
    steps = rng.standard_normal((total, p))
    if proposal_cov is not None:
        steps = steps @ np.linalg.cholesky(np.asarray(proposal_cov, dtype=float)).T
    steps *= scale
    logu = np.log(rng.random(total))
    chain = np.empty((total, p))
    accepted = 0
    for i in range(total):
        cand = u + steps[i]
        lc = unconstrained_logpdf(model, cand)
        if logu[i] < lc - lp:
            u, lp = cand, lc
            accepted += 1
        chain[i] = u
    x, _ = _from_unconstrained(chain[burn_in:], supports)
    return RwmhResult(x, accepted / total, tuple(model.names))


def write_samples_csv(path, samples, names):
    """One row per draw, header = coordinate names."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names))
        w.writerows(samples.tolist())
