"""Scalar special functions and the fixed reference distributions.

Everything here is vectorised over numpy arrays and pure.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * LOG_2PI

#: probabilities are clamped to [QUANTILE_EPS, 1 - QUANTILE_EPS] before inversion
QUANTILE_EPS = 1e-14


def _check_unit(u, name="u"):
    u = np.asarray(u, dtype=float)
    if np.any(~(u >= 0.0) | ~(u <= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return u


def _check_shape_params(a, b, allow_zero=False):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    bad = (a < 0) | (b < 0) if allow_zero else (a <= 0) | (b <= 0)
    if np.any(bad | np.isnan(a) | np.isnan(b)):
        raise DomainError("beta shape parameters must be positive")
    return a, b


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def std_normal_cdf(z):
    return special.ndtr(z)


def std_normal_logpdf(z):
    z = np.asarray(z, dtype=float)
    return -0.5 * z * z - LOG_SQRT_2PI


def std_normal_pdf(z):
    return np.exp(std_normal_logpdf(z))


def reg_inc_beta(u, a, b):
    """Regularized incomplete beta function ``I_u(a, b)``.

    Exact at the end points: ``I_0 = 0`` and ``I_1 = 1``.
    """
    u = _check_unit(u)
    a, b = _check_shape_params(a, b)
    return _scalar(special.betainc(a, b, u))


def beta_pdf(u, a, b):
    """Beta density; by convention it vanishes when either shape is zero."""
    u = _check_unit(u)
    a, b = _check_shape_params(a, b, allow_zero=True)
    u, a, b = np.broadcast_arrays(u, a, b)
    out = np.zeros(u.shape)
    live = (a > 0) & (b > 0)
    if np.any(live):
        ul, al, bl = u[live], a[live], b[live]
        lognorm = special.gammaln(al + bl) - special.gammaln(al) - special.gammaln(bl)
        with np.errstate(divide="ignore"):
            logp = lognorm + special.xlogy(al - 1.0, ul) + special.xlog1py(bl - 1.0, -ul)
        out[live] = np.exp(logp)
    return _scalar(out)


def beta_pdf_deriv(u, a, b):
    """Derivative of the beta density in ``u``.

    Written as a difference of two lower-degree densities,
    ``(a + b - 1) * (beta(u; a-1, b) - beta(u; a, b-1))``.
    """
    u = _check_unit(u)
    a, b = _check_shape_params(a, b)
    return _scalar((a + b - 1.0) * (np.asarray(beta_pdf(u, a - 1.0, b)) - np.asarray(beta_pdf(u, a, b - 1.0))))


class Family(str, enum.Enum):
    STD_NORMAL = "std_normal"
    EXPONENTIAL = "exponential"
    BETA22 = "beta22"


class Support(str, enum.Enum):
    REAL = "real"
    POSITIVE = "positive"
    UNIT = "unit"

    @property
    def bounds(self):
        return {"real": (-np.inf, np.inf), "positive": (0.0, np.inf), "unit": (0.0, 1.0)}[self.value]

    def contains(self, x):
        """Elementwise open-support membership."""
        lo, hi = self.bounds
        x = np.asarray(x, dtype=float)
        return (x > lo) & (x < hi)


def _clamp_prob(p):
    p = np.asarray(p, dtype=float)
    clamped = np.clip(p, QUANTILE_EPS, 1.0 - QUANTILE_EPS)
    if logger.isEnabledFor(logging.DEBUG):
        n = int(np.count_nonzero(clamped != p))
        if n:
            logger.debug("clamped %d probabilities before inversion", n)
    return clamped


@dataclass(frozen=True)
class ReferenceCdf:
    """A fixed, tractable univariate distribution used as the outer map of a
    Bernstein transform.

    Parameters
    ----------
    family : Family
        ``std_normal``, ``exponential`` or ``beta22``.
    rate : float
        Rate of the exponential family; ignored otherwise.
    """

    family: Family = Family.STD_NORMAL
    rate: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise DomainError("exponential rate must be positive")

    @classmethod
    def std_normal(cls):
        return cls(Family.STD_NORMAL)

    @classmethod
    def exponential(cls, rate=1.0):
        return cls(Family.EXPONENTIAL, float(rate))

    @classmethod
    def beta22(cls):
        return cls(Family.BETA22)

    @classmethod
    def for_support(cls, support):
        """Default reference for a support type: N(0,1), Exp(1) or Beta(2,2)."""
        return {
            Support.REAL: cls.std_normal(),
            Support.POSITIVE: cls.exponential(1.0),
            Support.UNIT: cls.beta22(),
        }[Support(support)]

    @property
    def support(self):
        return {
            Family.STD_NORMAL: Support.REAL,
            Family.EXPONENTIAL: Support.POSITIVE,
            Family.BETA22: Support.UNIT,
        }[self.family]

    def _check_arg(self, x, closed=True):
        x = np.asarray(x, dtype=float)
        if np.any(np.isnan(x)):
            raise DomainError("argument is NaN")
        lo, hi = self.support.bounds
        bad = (x < lo) | (x > hi) if closed else (x <= lo) | (x >= hi)
        if np.any(bad):
            raise DomainError(f"argument outside the {self.support.value} support")
        return x

    # -- distribution functions -------------------------------------------
    def cdf(self, x):
        x = self._check_arg(x)
        if self.family is Family.STD_NORMAL:
            out = special.ndtr(x)
        elif self.family is Family.EXPONENTIAL:
            out = -np.expm1(-self.rate * x)
        else:
            out = x * x * (3.0 - 2.0 * x)
        return _scalar(out)

    def sf(self, x):
        x = self._check_arg(x)
        if self.family is Family.STD_NORMAL:
            out = special.ndtr(-x)
        elif self.family is Family.EXPONENTIAL:
            out = np.exp(-self.rate * x)
        else:
            y = 1.0 - x
            out = y * y * (3.0 - 2.0 * y)
        return _scalar(out)

    def quantile(self, u):
        """Inverse CDF; ``u`` is clamped to ``[1e-14, 1 - 1e-14]``."""
        u = _clamp_prob(_check_unit(u))
        return _scalar(self._quantile_pair(u, 1.0 - u))

    def quantile_pair(self, lower, upper):
        """Inverse CDF from a probability and its complement.

        ``lower + upper == 1`` mathematically; whichever is smaller is used so
        that both tails keep full relative precision.
        """
        lower = _clamp_prob(lower)
        upper = _clamp_prob(upper)
        return self._quantile_pair(lower, upper)

    def _quantile_pair(self, lower, upper):
        use_lower = lower <= upper
        if self.family is Family.STD_NORMAL:
            return np.where(use_lower, special.ndtri(lower), -special.ndtri(upper))
        if self.family is Family.EXPONENTIAL:
            return np.where(use_lower, -np.log1p(-lower), -np.log(upper)) / self.rate
        # Beta(2,2): x = 1/2 + sin(arcsin(2F - 1) / 3); evaluate in the nearer tail
        p = np.minimum(lower, upper)
        t = 0.5 - np.sin(np.arcsin(1.0 - 2.0 * p) / 3.0)
        # Newton polish on F(t) = p; arcsin loses relative accuracy near 0
        for _ in range(2):
            f = t * t * (3.0 - 2.0 * t) - p
            d = 6.0 * t * (1.0 - t)
            t = np.where(d > 0, t - f / np.where(d > 0, d, 1.0), t)
        return np.where(use_lower, t, 1.0 - t)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family is Family.STD_NORMAL:
            return std_normal_logpdf(x)
        if self.family is Family.EXPONENTIAL:
            with np.errstate(divide="ignore"):
                return np.where(x >= 0, math.log(self.rate) - self.rate * x, -np.inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where((x > 0) & (x < 1), math.log(6.0) + np.log(x) + np.log1p(-x), -np.inf)

    def pdf(self, x):
        x = self._check_arg(x)
        return _scalar(np.exp(self.logpdf(x)))

    def pdf_deriv(self, x):
        x = self._check_arg(x)
        if self.family is Family.STD_NORMAL:
            out = -x * std_normal_pdf(x)
        elif self.family is Family.EXPONENTIAL:
            out = -self.rate * self.rate * np.exp(-self.rate * x)
        else:
            out = 6.0 - 12.0 * x
        return _scalar(out)

    def dlogpdf(self, x):
        """``psi'(x) / psi(x)``, finite on the open support."""
        x = np.asarray(x, dtype=float)
        if self.family is Family.STD_NORMAL:
            return -x
        if self.family is Family.EXPONENTIAL:
            return np.full_like(x, -self.rate)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (1.0 - 2.0 * x) / (x * (1.0 - x))

    def to_dict(self):
        return {"ref_family": self.family.value, "ref_rate": float(self.rate)}


_MODES = ("cdf", "quantile", "pdf", "pdf_deriv")


def reference_eval(ref: ReferenceCdf, mode: str, arg):
    """Single dispatch over the four reference-distribution functions."""
    if mode not in _MODES:
        raise DomainError(f"unknown mode {mode!r}; expected one of {_MODES}")
    return getattr(ref, mode)(arg)
