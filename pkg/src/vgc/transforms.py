"""Monotone per-coordinate maps from a latent Gaussian coordinate to a support.

Three variants share one interface:

* :class:`BernsteinTransform` -- ``h(z) = Psi^{-1}(B(Phi(z); k, w))`` where ``B``
  is a mixture of regularized incomplete beta CDFs with simplex weights ``w``,
* :class:`ExponentialTransform` -- ``h(z) = exp(z)`` (log-normal margins),
* :class:`IdentityTransform` -- ``h(z) = z`` (Gaussian margins).

All methods accept scalars or arrays of latent values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import DerivativeOverflowError, DomainError, InvariantError, RangeError, VariantError
from .specfun import (
    Family,
    ReferenceCdf,
    Support,
    _check_unit,
    _scalar,
    std_normal_logpdf,
)

DEFAULT_DEGREE = 10
SIMPLEX_TOL = 1e-12
_BISECT_LO, _BISECT_HI = -40.0, 40.0


def check_simplex(omega, tol=SIMPLEX_TOL):
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 1 or omega.size == 0:
        raise InvariantError("weights must be a non-empty vector")
    if np.any(~np.isfinite(omega)) or np.any(omega < 0) or abs(omega.sum() - 1.0) > tol:
        raise InvariantError("weights must lie on the probability simplex")
    return omega


def _basis_shapes(k):
    r = np.arange(1, k + 1, dtype=float)
    return r, k - r + 1.0


def _log_beta_basis(u, ub, k):
    """Log of ``beta(u; r, k-r+1)`` for r = 1..k; shape ``u.shape + (k,)``."""
    a, b = _basis_shapes(k)
    lognorm = special.gammaln(k + 1.0) - special.gammaln(a) - special.gammaln(b)
    u = np.asarray(u)[..., None]
    ub = np.asarray(ub)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        return lognorm + special.xlogy(a - 1.0, u) + special.xlogy(b - 1.0, ub)


def _beta_basis_deriv(u, ub, k):
    """``d/du beta(u; r, k-r+1)`` for r = 1..k via the degree-lowering identity."""
    shape = np.shape(u) + (k,)
    if k == 1:
        return np.zeros(shape)
    # D_s = beta(u; s, k-s), s = 1..k-1, padded with the zero convention at both ends
    low = np.exp(_log_beta_basis(u, ub, k - 1))
    pad = np.zeros(np.shape(u) + (1,))
    d = np.concatenate([pad, low, pad], axis=-1)
    return k * (d[..., :-1] - d[..., 1:])


def bp_cdf(u, k, omega):
    """Bernstein CDF ``B(u; k, w) = sum_r w_r I_u(r, k-r+1)``."""
    u = _check_unit(u)
    omega = check_simplex(omega)
    if omega.size != k:
        raise InvariantError("weight vector length must equal the degree")
    a, b = _basis_shapes(k)
    return _scalar(special.betainc(a, b, u[..., None]) @ omega)


def bp_pdf(u, k, omega):
    """Bernstein density ``b(u; k, w) = sum_r w_r beta(u; r, k-r+1)``."""
    u = _check_unit(u)
    omega = check_simplex(omega)
    if omega.size != k:
        raise InvariantError("weight vector length must equal the degree")
    return _scalar(np.exp(_log_beta_basis(u, 1.0 - u, k)) @ omega)


@dataclass
class TransformEval:
    """Everything the optimizer needs from one transform at a batch of points.

    ``dh_dw`` and ``dlogdh_dw`` are only filled for Bernstein transforms and
    carry a trailing axis of length ``k``.
    """

    h: np.ndarray
    log_dh: np.ndarray
    dlog_dh: np.ndarray
    dh_dw: Optional[np.ndarray] = None
    dlogdh_dw: Optional[np.ndarray] = None

    @property
    def dh(self):
        return np.exp(self.log_dh)

    def finite(self):
        ok = np.isfinite(self.h) & np.isfinite(self.log_dh) & np.isfinite(self.dlog_dh)
        if self.dh_dw is not None:
            ok &= np.all(np.isfinite(self.dh_dw), axis=-1) & np.all(np.isfinite(self.dlogdh_dw), axis=-1)
        return ok


class MarginalTransform:
    """Interface of a monotone map ``h`` and its derivatives."""

    variant = "abstract"
    support = Support.REAL

    def evaluate(self, z, weights_grad=False, centered=False) -> TransformEval:
        raise NotImplementedError

    # -- public scalar/array API ------------------------------------------
    def _strict(self, z, **kw):
        z = np.asarray(z, dtype=float)
        if np.any(~np.isfinite(z)):
            raise DomainError("latent value must be finite")
        ev = self.evaluate(z, **kw)
        bad = ~(np.isfinite(ev.log_dh) & np.isfinite(ev.dlog_dh))
        if np.any(bad):
            zb = float(np.asarray(z)[bad].flat[0]) if np.ndim(z) else float(z)
            raise DerivativeOverflowError(f"transform derivative overflow at z={zb!r}", z=zb)
        return ev

    def forward(self, z):
        z = np.asarray(z, dtype=float)
        if np.any(~np.isfinite(z)):
            raise DomainError("latent value must be finite")
        return _scalar(self.evaluate(z).h)

    __call__ = forward

    def deriv(self, z):
        ev = self._strict(z)
        dh = ev.dh
        if np.any(dh <= 0):
            raise DerivativeOverflowError("transform derivative underflowed to zero")
        return _scalar(dh)

    def log_deriv(self, z):
        return _scalar(self._strict(z).log_dh)

    def second_deriv(self, z):
        ev = self._strict(z)
        return _scalar(ev.dh * ev.dlog_dh)

    def log_deriv_grad_z(self, z):
        """``d/dz ln h'(z) = h''(z) / h'(z)``."""
        return _scalar(self._strict(z).dlog_dh)

    def grad_weights(self, z):
        raise VariantError(f"{self.variant} transform has no weights")

    def inverse(self, x):
        raise NotImplementedError

    def _check_range(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(~self.support.contains(x)):
            raise RangeError(f"value outside the {self.support.value} range of the transform")
        return x

    def to_dict(self):
        return {"variant": self.variant, "k": None, "omega": None, "ref_family": None, "ref_rate": None}

    @staticmethod
    def from_dict(d):
        variant = d["variant"]
        if variant == "identity":
            return IdentityTransform()
        if variant == "exponential":
            return ExponentialTransform()
        if variant == "bernstein":
            ref = ReferenceCdf(Family(d["ref_family"]), float(d.get("ref_rate") or 1.0))
            return BernsteinTransform(int(d["k"]), np.asarray(d["omega"], dtype=float), ref)
        raise VariantError(f"unknown transform variant {variant!r}")


class IdentityTransform(MarginalTransform):
    variant = "identity"
    support = Support.REAL

    def evaluate(self, z, weights_grad=False, centered=False):
        z = np.asarray(z, dtype=float)
        return TransformEval(h=z.copy(), log_dh=np.zeros_like(z), dlog_dh=np.zeros_like(z))

    def inverse(self, x):
        return _scalar(self._check_range(x).copy())

    def __repr__(self):
        return "IdentityTransform()"


class ExponentialTransform(MarginalTransform):
    variant = "exponential"
    support = Support.POSITIVE

    def evaluate(self, z, weights_grad=False, centered=False):
        z = np.asarray(z, dtype=float)
        with np.errstate(over="ignore"):
            h = np.exp(z)
        return TransformEval(h=h, log_dh=z.copy(), dlog_dh=np.ones_like(z))

    def inverse(self, x):
        return _scalar(np.log(self._check_range(x)))

    def __repr__(self):
        return "ExponentialTransform()"


class BernsteinTransform(MarginalTransform):
    """``h(z) = Psi^{-1}(B(Phi(z); k, w))`` with ``Phi`` the standard normal CDF.

    Parameters
    ----------
    k : int
        Polynomial degree (number of beta basis functions).
    omega : array_like, optional
        Simplex weights of length ``k``; uniform by default, which makes
        ``B`` the identity on [0, 1].
    ref : ReferenceCdf, optional
        Outer reference distribution ``Psi``; standard normal by default.
    """

    variant = "bernstein"

    def __init__(self, k=DEFAULT_DEGREE, omega=None, ref=None):
        k = int(k)
        if k < 1:
            raise InvariantError("degree must be a positive integer")
        if omega is None:
            omega = np.full(k, 1.0 / k)
        omega = check_simplex(np.array(omega, dtype=float))
        if omega.size != k:
            raise InvariantError("weight vector length must equal the degree")
        omega.flags.writeable = False
        self.k = k
        self.omega = omega
        self.ref = ref if ref is not None else ReferenceCdf.std_normal()
        self.support = self.ref.support
        self._a, self._b = _basis_shapes(k)

    def with_weights(self, omega):
        return BernsteinTransform(self.k, omega, self.ref)

    def __repr__(self):
        return f"BernsteinTransform(k={self.k}, ref={self.ref.family.value}, rate={self.ref.rate:g})"

    def evaluate(self, z, weights_grad=False, centered=False):
        """Evaluate ``h`` and derivatives without raising on overflow.

        With ``centered=True`` the weight gradients are shifted by a constant
        across the basis index wherever ``B > 1/2``. Such a shift leaves a
        simplex projection unchanged but avoids cancellation in the upper tail.
        """
        z = np.asarray(z, dtype=float)
        k, omega, ref = self.k, self.omega, self.ref
        u = special.ndtr(z)
        ub = special.ndtr(-z)
        cdf_basis = special.betainc(self._a, self._b, u[..., None])
        sf_basis = special.betainc(self._b, self._a, ub[..., None])
        big_b = cdf_basis @ omega
        big_bc = sf_basis @ omega
        h = ref.quantile_pair(big_b, big_bc)

        log_basis = _log_beta_basis(u, ub, k)
        basis = np.exp(log_basis)
        b = basis @ omega
        # log b stays finite where b itself underflows
        log_b = special.logsumexp(log_basis, b=omega, axis=-1)
        log_psi = ref.logpdf(h)
        dlog_psi = ref.dlogpdf(h)
        log_phi = std_normal_logpdf(z)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            log_dh = log_b + log_phi - log_psi
            dh = np.exp(log_dh)
            db = _beta_basis_deriv(u, ub, k) @ omega
            dlog_dh = np.exp(log_phi) * db / b - z - dlog_psi * dh
        ev = TransformEval(h=h, log_dh=log_dh, dlog_dh=dlog_dh)
        if weights_grad:
            basis_cdf = cdf_basis
            if centered:
                basis_cdf = np.where((big_b > big_bc)[..., None], -sf_basis, cdf_basis)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                inv_psi = np.exp(-log_psi)[..., None]
                ev.dh_dw = basis_cdf * inv_psi
                ev.dlogdh_dw = basis / b[..., None] - (dlog_psi[..., None] * inv_psi) * basis_cdf
        return ev

    def grad_weights(self, z):
        """Return ``(dh/dw, d ln h'/dw)``, each with a trailing axis of length k."""
        ev = self._strict(z, weights_grad=True)
        if not (np.all(np.isfinite(ev.dh_dw)) and np.all(np.isfinite(ev.dlogdh_dw))):
            raise DerivativeOverflowError("weight gradient overflow")
        return ev.dh_dw, ev.dlogdh_dw

    def inverse(self, x):
        """Latent value with ``h(z) = x`` by bracketed bisection plus Newton polish."""
        x = self._check_range(x)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        lo = np.full(x.shape, _BISECT_LO)
        hi = np.full(x.shape, _BISECT_HI)
        for _ in range(64):
            mid = 0.5 * (lo + hi)
            below = self.evaluate(mid).h < x
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
            if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(mid))):
                break
        z = 0.5 * (lo + hi)
        for _ in range(2):
            ev = self.evaluate(z)
            step = (ev.h - x) / ev.dh
            cand = z - step
            ok = np.isfinite(cand) & (cand >= lo) & (cand <= hi)
            better = ok & (np.abs(self.evaluate(np.where(ok, cand, z)).h - x) < np.abs(ev.h - x))
            z = np.where(better, cand, z)
        return float(z[0]) if scalar else z

    def to_dict(self):
        d = {"variant": self.variant, "k": self.k, "omega": [float(w) for w in self.omega]}
        d.update(self.ref.to_dict())
        return d


def default_transform(support, kind="bernstein", k=DEFAULT_DEGREE, ref=None):
    """Transform of the requested kind whose range matches ``support``."""
    support = Support(support)
    if kind == "identity":
        if support is not Support.REAL:
            raise VariantError("identity transform only covers the real line")
        return IdentityTransform()
    if kind == "exponential":
        if support is not Support.POSITIVE:
            raise VariantError("exponential transform only covers the positive half-line")
        return ExponentialTransform()
    if kind == "bernstein":
        ref = ref if ref is not None else ReferenceCdf.for_support(support)
        if ref.support is not support:
            raise VariantError("reference distribution does not match the support")
        return BernsteinTransform(k, None, ref)
    raise VariantError(f"unknown transform kind {kind!r}")


__all__ = [
    "DEFAULT_DEGREE",
    "BernsteinTransform",
    "ExponentialTransform",
    "IdentityTransform",
    "MarginalTransform",
    "TransformEval",
    "bp_cdf",
    "bp_pdf",
    "check_simplex",
    "default_transform",
]
