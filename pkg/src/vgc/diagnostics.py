"""Quadrature diagnostics: KL divergences, their copula/margin split, RMSE of rho.

All integrals are taken in whitened latent coordinates. A point ``e`` of the
standard normal maps to ``z = mu + C e`` and then to ``x = h(z)``, so the
proposal weight is a Gaussian and no inverse transforms are needed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .copula import VgcState
from .errors import ConvergenceError, ParameterError
from .models import BivariateLogNormal, TargetModel
from .specfun import LOG_2PI, std_normal_logpdf

#: half-width, in standard deviations, of the latent integration box
LATENT_HALF_WIDTH = 12.0
#: inner Gauss-Legendre rule used by the nested 2-d integrals
INNER_NODES = 240

_GL_X, _GL_W = np.polynomial.legendre.leggauss(INNER_NODES)


def _target_logpdf(target) -> Callable:
    """Vectorised normalised log density of a 1-d target."""
    if isinstance(target, TargetModel):
        if target.log_normalizer is None:
            raise ParameterError(f"{type(target).__name__} has no closed-form normaliser")
        norm = target.log_normalizer

        def f(x):
            x = np.asarray(x, dtype=float)
            return target._log_joint(x[..., None]) - norm

        return f
    if callable(target):
        return target
    raise ParameterError("target must be a TargetModel or a callable log density")


def _quad(f, lo, hi, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, lo, hi, epsabs=tol * 1e-3, epsrel=1e-10, limit=400)
    if not math.isfinite(val) or err > tol:
        raise ConvergenceError(f"quadrature did not converge (estimate {val:g}, error {err:g})")
    return val


def _nested(f, tol):
    """``int int phi(e1) phi(e2) f(e1, e2) de1 de2`` on the latent box.

    ``f(e1, e2)`` receives a scalar ``e1`` and a vector ``e2``.
    """
    L = LATENT_HALF_WIDTH
    e2 = L * _GL_X
    w2 = L * _GL_W * np.exp(std_normal_logpdf(e2))

    def outer(e1):
        vals = f(e1, e2)
        # zero weight times a non-finite log term contributes nothing
        vals = np.where(w2 > 0, vals, 0.0)
        return math.exp(std_normal_logpdf(e1)) * float(np.dot(w2, vals))

    return _quad(outer, -L, L, tol)


def _marginal_log_ratio(state: VgcState, j, target_logpdf, e):
    """``ln q_j(x) - ln p_j(x)`` at ``x = h_j(mu_j + sd_j e)``."""
    sd = state.gauss.marginal_sd[j]
    z = state.mu[j] + sd * np.asarray(e, dtype=float)
    ev = state.transforms[j].evaluate(z)
    lq = std_normal_logpdf(e) - math.log(sd) - ev.log_dh
    return lq - target_logpdf(ev.h)


def kl_1d_quadrature(state: VgcState, target, j=0, tol=1e-6):
    """``KL(q_j || p)`` for coordinate ``j`` of ``state``.

    Parameters
    ----------
    state : VgcState
    target : TargetModel or callable
        A model with a known normaliser, or a vectorised normalised
        log density of ``x``.
    j : int
        Coordinate of ``state`` whose marginal is compared.
    tol : float
        Absolute error target of the adaptive quadrature.

    Returns
    -------
    float
        Nonnegative up to quadrature error.
    """
    logp = _target_logpdf(target)

    def f(e):
        return math.exp(std_normal_logpdf(e)) * float(_marginal_log_ratio(state, j, logp, e))

    L = LATENT_HALF_WIDTH
    return _quad(f, -L, L, tol)


def kl_2d_quadrature(state: VgcState, target: TargetModel, tol=1e-6):
    """Total ``KL(q || p)`` for a two-coordinate state and a normalised target."""
    if state.p != 2 or target.p != 2:
        raise ParameterError("kl_2d_quadrature needs two coordinates")
    if target.log_normalizer is None:
        raise ParameterError("target needs a closed-form normaliser")
    mu, C = state.mu, state.C
    logdet = state.gauss.log_det()
    t1, t2 = state.transforms

    def f(e1, e2):
        z1 = mu[0] + C[0, 0] * e1
        z2 = mu[1] + C[1, 0] * e1 + C[1, 1] * e2
        ev1 = t1.evaluate(np.full_like(e2, z1))
        ev2 = t2.evaluate(z2)
        lq = -LOG_2PI - logdet - 0.5 * (e1 * e1 + e2 * e2) - ev1.log_dh - ev2.log_dh
        x = np.stack([ev1.h, ev2.h], axis=-1)
        with np.errstate(all="ignore"):
            lp = target._log_joint(x) - target.log_normalizer
        return lq - lp

    return _nested(f, tol)


def _corr_logpdf(w1, w2, rho):
    """Bivariate standard normal log density with correlation ``rho``."""
    s = 1.0 - rho * rho
    return -LOG_2PI - 0.5 * math.log(s) - (w1 * w1 - 2.0 * rho * w1 * w2 + w2 * w2) / (2.0 * s)


def _log_copula(w1, w2, rho):
    return _corr_logpdf(w1, w2, rho) - std_normal_logpdf(w1) - std_normal_logpdf(w2)


def copula_kl_quadrature(state: VgcState, target: BivariateLogNormal, tol=1e-6):
    """``KL`` between the proposal's Gaussian copula and the copula the target
    induces after both are expressed on the proposal's marginal scale.

    Integrated over normal scores ``w ~ N(0, R)`` of the proposal copula.
    """
    R = state.correlation()
    r = float(R[1, 0])
    sd = state.gauss.marginal_sd
    mu = state.mu
    t1, t2 = state.transforms
    root = math.sqrt(max(1.0 - r * r, 0.0))

    def f(e1, e2):
        w1 = np.full_like(e2, e1)
        w2 = r * e1 + root * e2
        x1 = t1.evaluate(mu[0] + sd[0] * w1).h
        x2 = t2.evaluate(mu[1] + sd[1] * w2).h
        with np.errstate(all="ignore"):
            s1 = (np.log(x1) - target.mu[0]) / target.sigma[0]
            s2 = (np.log(x2) - target.mu[1]) / target.sigma[1]
        return _log_copula(w1, w2, r) - _log_copula(s1, s2, target.rho)

    if root == 0.0:
        raise ParameterError("degenerate proposal copula")
    return _nested(f, tol)


@dataclass(frozen=True)
class KlDecomposition:
    total_kl: float
    copula_kl: float
    margin_kl_sum: float
    residual: float

    def __iter__(self):
        return iter((self.total_kl, self.copula_kl, self.margin_kl_sum, self.residual))


def kl_decomposition_check(state: VgcState, target: BivariateLogNormal, tol=1e-6) -> KlDecomposition:
    """Total KL and its copula-plus-margins split, each by separate quadrature.

    Returns
    -------
    KlDecomposition
        ``(total_kl, copula_kl, margin_kl_sum, residual)`` with
        ``residual = total - (copula + margins)``.
    """
    total = kl_2d_quadrature(state, target, tol)
    margins = sum(
        kl_1d_quadrature(state, lambda x, j=j: target.marginal_logpdf(j, x), j=j, tol=tol) for j in range(2)
    )
    cop = copula_kl_quadrature(state, target, tol)
    return KlDecomposition(total, cop, margins, total - (cop + margins))


def rmse_rho(rho_hat, rho):
    """Relative squared error ``(rho_hat - rho)^2 / rho^2``."""
    rho = float(rho)
    if rho == 0.0:
        raise ZeroDivisionError("relative error is undefined for rho = 0")
    return (float(rho_hat) - rho) ** 2 / (rho * rho)


def gaussian_kl(mu0, S0, mu1, S1):
    """Closed-form ``KL(N(mu0, S0) || N(mu1, S1))``."""
    mu0, mu1 = np.atleast_1d(mu0).astype(float), np.atleast_1d(mu1).astype(float)
    S0, S1 = np.atleast_2d(S0).astype(float), np.atleast_2d(S1).astype(float)
    d = mu1 - mu0
    S1inv = np.linalg.inv(S1)
    p = mu0.size
    _, ld0 = np.linalg.slogdet(S0)
    _, ld1 = np.linalg.slogdet(S1)
    return 0.5 * float(np.trace(S1inv @ S0) + d @ S1inv @ d - p + ld1 - ld0)


def batch_means_se(samples, stat=np.mean, n_batches=50):
    """Standard error of ``stat`` per column from non-overlapping batches.

    Valid for autocorrelated chains as long as each batch is much longer
    than the autocorrelation time; for independent draws it reduces to the
    usual standard error.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m = x.shape[0] // int(n_batches)
    if m < 2:
        raise ValueError("too few samples for the requested number of batches")
    batches = x[: m * n_batches].reshape(n_batches, m, x.shape[1])
    vals = np.stack([stat(b, axis=0) for b in batches])
    return vals.std(axis=0, ddof=1) / np.sqrt(n_batches)


def _sd(x, axis=0):
    return np.std(x, axis=axis, ddof=1)


@dataclass
class MomentComparison:
    """Per-coordinate means and SDs of two sample sets with their z-scores."""

    mean_a: np.ndarray
    mean_b: np.ndarray
    sd_a: np.ndarray
    sd_b: np.ndarray
    z_mean: np.ndarray
    z_sd: np.ndarray
    corr_a: np.ndarray
    corr_b: np.ndarray

    def within(self, k=3.0):
        return bool(np.all(np.abs(self.z_mean) <= k) and np.all(np.abs(self.z_sd) <= k))

    def signs_match(self, min_abs=0.0):
        """Off-diagonal correlation signs agree wherever either exceeds ``min_abs``."""
        iu = np.triu_indices_from(self.corr_a, 1)
        a, b = self.corr_a[iu], self.corr_b[iu]
        big = np.maximum(np.abs(a), np.abs(b)) > min_abs
        return bool(np.all(np.sign(a[big]) == np.sign(b[big])))


def compare_moments(a, b, n_batches=50) -> MomentComparison:
    """Compare means and SDs of two sample arrays in units of combined SE."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    sa, sb = _sd(a), _sd(b)
    se_m = np.hypot(batch_means_se(a, np.mean, n_batches), batch_means_se(b, np.mean, n_batches))
    se_s = np.hypot(batch_means_se(a, _sd, n_batches), batch_means_se(b, _sd, n_batches))
    return MomentComparison(ma, mb, sa, sb, (ma - mb) / se_m, (sa - sb) / se_s,
                            np.corrcoef(a, rowvar=False), np.corrcoef(b, rowvar=False))


__all__ = [
    "KlDecomposition",
    "MomentComparison",
    "batch_means_se",
    "compare_moments",
    "copula_kl_quadrature",
    "gaussian_kl",
    "kl_1d_quadrature",
    "kl_2d_quadrature",
    "kl_decomposition_check",
    "rmse_rho",
]
