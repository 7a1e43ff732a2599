"""Target models: unnormalised log joints and their gradients.

Each model evaluates ``ln p(y, x)`` and ``d ln p(y, x) / dx`` on a single point
of shape ``(p,)`` or on a batch of shape ``(n, p)``. Constants are dropped
exactly where the usual proportional forms drop them; ``log_normalizer``
restores them for the one-dimensional targets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import special

from .errors import ParameterError, SupportError
from .specfun import LOG_2PI, LOG_SQRT_2PI, Support

HORSESHOE_C0 = -0.5 * LOG_2PI - 2.0 * special.gammaln(0.5)


class TargetModel:
    """Base class; subclasses implement ``_log_joint`` and ``_grad``."""

    names: tuple = ()
    supports: tuple = ()
    #: ``ln integral exp(log_joint)`` when known in closed form
    log_normalizer = None

    @property
    def p(self):
        return len(self.supports)

    def in_support(self, x):
        """Boolean mask over the leading axes: every coordinate inside its support."""
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for j, s in enumerate(self.supports):
            ok &= Support(s).contains(x[..., j])
        return ok

    def _prepare(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.p,):
            if self.p == 1 and x.ndim == 0:
                x = x[None]
            else:
                raise ParameterError(f"expected trailing dimension {self.p}, got shape {x.shape}")
        if not np.all(self.in_support(x)):
            raise SupportError(f"{type(self).__name__}: point outside the model support")
        return x

    def log_joint(self, x):
        out = self._log_joint(self._prepare(x))
        return float(out) if np.ndim(out) == 0 else out

    def grad(self, x):
        return self._grad(self._prepare(x))

    def normalized_logpdf(self, x):
        if self.log_normalizer is None:
            raise ParameterError(f"{type(self).__name__} has no closed-form normaliser")
        return self.log_joint(x) - self.log_normalizer

    def _log_joint(self, x):
        raise NotImplementedError

    def _grad(self, x):
        raise NotImplementedError


def model_log_joint(model: TargetModel, x):
    return model.log_joint(x)


def model_grad(model: TargetModel, x):
    return model.grad(x)


class Normal(TargetModel):
    """Normalised univariate Gaussian, mainly for checks with a known answer."""

    names = ("x",)
    supports = (Support.REAL,)
    log_normalizer = 0.0

    def __init__(self, mean=0.0, sd=1.0):
        if not sd > 0:
            raise ParameterError("sd must be positive")
        self.mean, self.sd = float(mean), float(sd)

    def _log_joint(self, x):
        s = (x[..., 0] - self.mean) / self.sd
        return -0.5 * s * s - LOG_SQRT_2PI - math.log(self.sd)

    def _grad(self, x):
        return -(x - self.mean) / (self.sd * self.sd)


class SkewNormal(TargetModel):
    """``ln p = ln phi(x) + ln Phi(alpha x)``."""

    names = ("x",)
    supports = (Support.REAL,)
    log_normalizer = -math.log(2.0)

    def __init__(self, alpha=5.0):
        self.alpha = float(alpha)

    def _log_joint(self, x):
        x = x[..., 0]
        return -0.5 * x * x - LOG_SQRT_2PI + special.log_ndtr(self.alpha * x)

    def _grad(self, x):
        ax = self.alpha * x
        mills = np.exp(-0.5 * ax * ax - LOG_SQRT_2PI - special.log_ndtr(ax))
        return -x + self.alpha * mills


class StudentT(TargetModel):
    """``ln p = -(nu + 1)/2 ln(1 + x^2/nu)``."""

    names = ("x",)
    supports = (Support.REAL,)

    def __init__(self, nu=1.0):
        if not nu > 0:
            raise ParameterError("degrees of freedom must be positive")
        self.nu = float(nu)
        nu = self.nu
        self.log_normalizer = 0.5 * math.log(nu * math.pi) + special.gammaln(nu / 2) - special.gammaln((nu + 1) / 2)

    def _log_joint(self, x):
        x = x[..., 0]
        return -0.5 * (self.nu + 1.0) * np.log1p(x * x / self.nu)

    def _grad(self, x):
        return -(self.nu + 1.0) * x / (self.nu + x * x)


class Gamma(TargetModel):
    """Shape/rate gamma: ``ln p = (a - 1) ln x - b x``."""

    names = ("x",)
    supports = (Support.POSITIVE,)

    def __init__(self, shape=5.0, rate=2.0):
        if not (shape > 0 and rate > 0):
            raise ParameterError("gamma parameters must be positive")
        self.shape, self.rate = float(shape), float(rate)
        self.log_normalizer = special.gammaln(self.shape) - self.shape * math.log(self.rate)

    def _log_joint(self, x):
        x = x[..., 0]
        return (self.shape - 1.0) * np.log(x) - self.rate * x

    def _grad(self, x):
        return (self.shape - 1.0) / x - self.rate


class Beta(TargetModel):
    """``ln p = (a - 1) ln x + (b - 1) ln(1 - x)``."""

    names = ("x",)
    supports = (Support.UNIT,)

    def __init__(self, a=0.5, b=0.5):
        if not (a > 0 and b > 0):
            raise ParameterError("beta parameters must be positive")
        self.a, self.b = float(a), float(b)
        self.log_normalizer = float(special.betaln(self.a, self.b))

    def _log_joint(self, x):
        x = x[..., 0]
        return (self.a - 1.0) * np.log(x) + (self.b - 1.0) * np.log1p(-x)

    def _grad(self, x):
        return (self.a - 1.0) / x - (self.b - 1.0) / (1.0 - x)


class BivariateLogNormal(TargetModel):
    """Bivariate log-normal with a Gaussian copula of correlation ``rho``.

    ``ln p = -ln x1 - ln x2 - zeta / 2`` where ``zeta`` is the Mahalanobis
    form of the standardised logs.
    """

    names = ("x1", "x2")
    supports = (Support.POSITIVE, Support.POSITIVE)

    def __init__(self, mu1=0.1, mu2=0.1, sigma1=0.5, sigma2=0.5, rho=0.4):
        if not -1.0 < rho < 1.0:
            raise ParameterError("correlation must satisfy -1 < rho < 1")
        if not (sigma1 > 0 and sigma2 > 0):
            raise ParameterError("log-scale deviations must be positive")
        self.mu = np.array([mu1, mu2], dtype=float)
        self.sigma = np.array([sigma1, sigma2], dtype=float)
        self.rho = float(rho)
        self.log_normalizer = LOG_2PI + float(np.sum(np.log(self.sigma))) + 0.5 * math.log1p(-rho * rho)

    def standardized(self, x):
        return (np.log(x) - self.mu) / self.sigma

    def _log_joint(self, x):
        al = self.standardized(x)
        a1, a2 = al[..., 0], al[..., 1]
        zeta = (a1 * a1 - 2.0 * self.rho * a1 * a2 + a2 * a2) / (1.0 - self.rho**2)
        return -np.log(x[..., 0]) - np.log(x[..., 1]) - 0.5 * zeta

    def _grad(self, x):
        al = self.standardized(x)
        swapped = al[..., ::-1]
        return -1.0 / x - (al - self.rho * swapped) / ((1.0 - self.rho**2) * x * self.sigma)

    def marginal_logpdf(self, j, x):
        """Exact log-normal margin of coordinate ``j``."""
        x = np.asarray(x, dtype=float)
        s = (np.log(x) - self.mu[j]) / self.sigma[j]
        return -0.5 * s * s - LOG_SQRT_2PI - math.log(self.sigma[j]) - np.log(x)


class Horseshoe(TargetModel):
    """Horseshoe shrinkage for one observation, coordinates ``(tau, gamma)``.

    ``y | tau ~ N(0, tau)``, ``tau | gamma ~ InvGa(1/2, gamma)``,
    ``gamma ~ Ga(1/2, 1)``; the log joint is normalised.
    """

    names = ("tau", "gamma")
    supports = (Support.POSITIVE, Support.POSITIVE)

    def __init__(self, y=0.01):
        self.y = float(y)

    def _log_joint(self, x):
        tau, gam = x[..., 0], x[..., 1]
        return HORSESHOE_C0 - 2.0 * np.log(tau) - self.y**2 / (2.0 * tau) - gam / tau - gam

    def _grad(self, x):
        tau, gam = x[..., 0], x[..., 1]
        g1 = -2.0 / tau + self.y**2 / (2.0 * tau * tau) + gam / (tau * tau)
        g2 = -1.0 / tau - 1.0
        return np.stack([g1, g2], axis=-1)

    def log_evidence(self):
        """``ln p(y)``; the gamma integral leaves ``e^a E1(a)`` with ``a = y^2/2``."""
        a = self.y**2 / 2.0
        return HORSESHOE_C0 + math.log(special.exp1(a)) + a


@dataclass(frozen=True)
class PoissonRegressionData:
    """Counts ``y`` with one covariate ``u`` per record."""

    y: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if y.ndim != 1 or y.shape != u.shape or y.size < 1:
            raise ParameterError("need at least one (y, u) record with matching lengths")
        if np.any(y < 0) or np.any(y != np.round(y)):
            raise ParameterError("counts must be nonnegative integers")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "u", u)

    @property
    def n(self):
        return self.y.size

    def standardized(self):
        sd = self.u.std()
        if sd == 0:
            raise ParameterError("covariate has zero variance")
        return PoissonRegressionData(self.y, (self.u - self.u.mean()) / sd)

    @classmethod
    def from_csv(cls, path):
        ys, us = [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"y", "u"} <= set(reader.fieldnames):
                raise ParameterError(f"{path}: expected header 'y,u'")
            for row in reader:
                ys.append(float(row["y"]))
                us.append(float(row["u"]))
        return cls(np.array(ys), np.array(us))

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["y", "u"])
            for yi, ui in zip(self.y, self.u):
                w.writerow([int(yi), repr(float(ui))])


def generate_poisson_data(beta0, beta1, beta2, grid, seed=None) -> PoissonRegressionData:
    """Draw ``y_i ~ Poisson(exp(b0 + b1 u_i + b2 u_i^2))`` on a covariate grid."""
    u = np.asarray(grid, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    mean = np.exp(beta0 + beta1 * u + beta2 * u * u)
    return PoissonRegressionData(rng.poisson(mean).astype(float), u)


class PoissonLogLinear(TargetModel):
    """Quadratic Poisson log-linear regression with a shared prior variance.

    Coordinates are ``(beta0, beta1, beta2, tau)``; ``beta_i ~ N(0, tau)``
    and ``tau ~ Ga(a0, b0)``. Covariates are standardised unless
    ``standardize=False``.
    """

    names = ("beta0", "beta1", "beta2", "tau")
    supports = (Support.REAL, Support.REAL, Support.REAL, Support.POSITIVE)

    def __init__(self, data: PoissonRegressionData, a0=1.0, b0=1.0, standardize=True):
        if not (a0 > 0 and b0 > 0):
            raise ParameterError("gamma prior parameters must be positive")
        self.data, self.a0, self.b0, self.standardize = data, float(a0), float(b0), bool(standardize)
        d = data.standardized() if standardize else data
        self.design = np.stack([np.ones_like(d.u), d.u, d.u * d.u], axis=1)
        self.counts = d.y
        self._log_fact = float(np.sum(special.gammaln(d.y + 1.0)))
        self._prior_const = self.a0 * math.log(self.b0) - special.gammaln(self.a0)

    def _log_joint(self, x):
        beta, tau = x[..., :3], x[..., 3]
        eta = beta @ self.design.T
        loglik = eta @ self.counts - np.exp(eta).sum(axis=-1) - self._log_fact
        prior = -1.5 * (LOG_2PI + np.log(tau)) - np.sum(beta * beta, axis=-1) / (2.0 * tau)
        return loglik + prior + (self.a0 - 1.0) * np.log(tau) - self.b0 * tau + self._prior_const

    def _grad(self, x):
        beta, tau = x[..., :3], x[..., 3]
        resid = self.counts - np.exp(beta @ self.design.T)
        g_beta = resid @ self.design - beta / tau[..., None]
        g_tau = -1.5 / tau + np.sum(beta * beta, axis=-1) / (2.0 * tau * tau) + (self.a0 - 1.0) / tau - self.b0
        return np.concatenate([g_beta, g_tau[..., None]], axis=-1)


BUILTIN_1D = {
    "skewnormal": SkewNormal,
    "studentt": StudentT,
    "gamma": Gamma,
    "beta": Beta,
    "normal": Normal,
}
