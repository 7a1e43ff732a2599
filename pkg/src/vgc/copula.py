"""The variational proposal: a Gaussian factor pushed through monotone maps.

A :class:`VgcState` holds ``mu``, a lower-triangular Cholesky factor ``C``
and one :class:`~vgc.transforms.MarginalTransform` per coordinate. Samples are
``x_j = h_j(z_j)`` with ``z = mu + C eps``. The covariance ``C C^T`` is never
formed; every quadratic form goes through triangular solves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvariantError, SingularFactorError
from .specfun import LOG_2PI, std_normal_logpdf
from .transforms import MarginalTransform

#: smallest admissible Cholesky diagonal entry
MIN_DIAG = 1e-8


def _readonly(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GaussianFactor:
    """Mean ``mu`` and lower-triangular factor ``C`` of ``N(mu, C C^T)``."""

    mu: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        mu = _readonly(np.atleast_1d(self.mu))
        C = np.atleast_2d(np.array(self.C, dtype=float))
        p = mu.size
        if mu.ndim != 1 or C.shape != (p, p):
            raise InvariantError(f"factor shape {C.shape} does not match mean length {p}")
        if np.any(np.triu(C, 1) != 0):
            raise InvariantError("Cholesky factor must be lower triangular")
        if not np.all(np.isfinite(C)) or not np.all(np.isfinite(mu)):
            raise InvariantError("non-finite Gaussian parameters")
        if np.any(np.diag(C) < MIN_DIAG):
            raise SingularFactorError(f"Cholesky diagonal below {MIN_DIAG:g}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "C", _readonly(C))

    @property
    def p(self):
        return self.mu.size

    @property
    def marginal_sd(self):
        """Marginal standard deviations ``sqrt(diag(C C^T))``.

        These are the Euclidean norms of the rows of ``C`` (not ``C_jj``);
        the two coincide only for a diagonal factor.
        """
        return np.sqrt(np.einsum("ij,ij->i", self.C, self.C))

    def log_det(self):
        return float(np.sum(np.log(np.diag(self.C))))

    def whiten(self, z):
        """``eps = C^{-1} (z - mu)`` for one point or a batch of rows."""
        z = np.asarray(z, dtype=float)
        diff = (z - self.mu).T
        return solve_triangular(self.C, diff, lower=True, check_finite=False).T

    def logpdf(self, z):
        eps = self.whiten(z)
        return -0.5 * self.p * LOG_2PI - self.log_det() - 0.5 * np.sum(eps * eps, axis=-1)


@dataclass(frozen=True)
class VgcState:
    """Gaussian factor plus per-coordinate monotone transforms."""

    gauss: GaussianFactor
    transforms: tuple

    def __post_init__(self):
        ts = tuple(self.transforms)
        if len(ts) != self.gauss.p:
            raise InvariantError("need exactly one transform per coordinate")
        object.__setattr__(self, "transforms", ts)

    @classmethod
    def create(cls, mu, C, transforms: Sequence[MarginalTransform]):
        return cls(GaussianFactor(mu, C), tuple(transforms))

    @property
    def p(self):
        return self.gauss.p

    @property
    def mu(self):
        return self.gauss.mu

    @property
    def C(self):
        return self.gauss.C

    @property
    def supports(self):
        return tuple(t.support for t in self.transforms)

    def replace(self, mu=None, C=None, transforms=None):
        return VgcState.create(
            self.mu if mu is None else mu,
            self.C if C is None else C,
            self.transforms if transforms is None else transforms,
        )

    # -- sampling ------------------------------------------------------------
    def push_sample(self, eps):
        """Map standard-normal draws to ``(z, x)``; ``eps`` is ``(p,)`` or ``(n, p)``."""
        eps = np.asarray(eps, dtype=float)
        z = self.mu + eps @ self.C.T
        x = np.empty_like(z)
        for j, t in enumerate(self.transforms):
            x[..., j] = t.evaluate(z[..., j]).h
        return z, x

    def sample(self, n, rng=None):
        rng = np.random.default_rng(rng)
        eps = rng.standard_normal((n, self.p))
        return self.push_sample(eps)[1]

    # -- recovered views -------------------------------------------------------
    def correlation(self):
        """Copula correlation matrix ``D^{-1/2} Sigma D^{-1/2}``.

        Computed from row-normalised ``C`` so ``Sigma`` is never formed; a
        diagonal factor gives the identity exactly.
        """
        rows = self.C / self.gauss.marginal_sd[:, None]
        R = np.clip(rows @ rows.T, -1.0, 1.0)
        np.fill_diagonal(R, 1.0)
        return R

    def latent(self, x):
        """Inverse-transform points of the model space to latent coordinates."""
        x = np.asarray(x, dtype=float)
        z = np.empty_like(x)
        for j, t in enumerate(self.transforms):
            z[..., j] = t.inverse(x[..., j])
        return z

    def marginal_pdf(self, j, x):
        """Density of coordinate ``j``: Gaussian density at ``h^{-1}(x)`` times
        the marginal-correction factor ``1 / h'(h^{-1}(x))``."""
        t = self.transforms[j]
        z = np.asarray(t.inverse(x), dtype=float)
        sd = self.gauss.marginal_sd[j]
        ev = t.evaluate(z)
        out = np.exp(std_normal_logpdf((z - self.mu[j]) / sd) - np.log(sd) - ev.log_dh)
        return float(out) if out.ndim == 0 else out

    def log_density(self, x):
        """``ln q(x) = ln N(h^{-1}(x); mu, Sigma) - sum_j ln h_j'(h_j^{-1}(x_j))``."""
        z = self.latent(x)
        out = self.gauss.logpdf(z)
        for j, t in enumerate(self.transforms):
            out = out - t.evaluate(z[..., j]).log_dh
        return float(out) if np.ndim(out) == 0 else out

    def gaussian_score(self, z):
        """``grad_z ln N(z; mu, Sigma) = -C^{-T} C^{-1} (z - mu)``."""
        if np.any(np.diag(self.C) < MIN_DIAG):
            raise SingularFactorError("Cholesky diagonal below the floor")
        eps = self.gauss.whiten(z)
        return -solve_triangular(self.C, eps.T, lower=True, trans="T", check_finite=False).T

    # -- serialisation ----------------------------------------------------------
    def to_dict(self):
        rows, cols = np.tril_indices(self.p)
        return {
            "mu": [float(v) for v in self.mu],
            "C_rowmajor_lower": [float(v) for v in self.C[rows, cols]],
            "transforms": [t.to_dict() for t in self.transforms],
        }

    @classmethod
    def from_dict(cls, d):
        mu = np.asarray(d["mu"], dtype=float)
        p = mu.size
        rows, cols = np.tril_indices(p)
        flat = np.asarray(d["C_rowmajor_lower"], dtype=float)
        if flat.size != rows.size:
            raise InvariantError("lower-triangle length does not match the dimension")
        C = np.zeros((p, p))
        C[rows, cols] = flat
        return cls.create(mu, C, [MarginalTransform.from_dict(t) for t in d["transforms"]])

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, s):
        return cls.from_dict(json.loads(s))


def push_sample(state: VgcState, eps):
    return state.push_sample(eps)


def correlation_of(state: VgcState):
    return state.correlation()


def marginal_pdf(state: VgcState, j, x):
    return state.marginal_pdf(j, x)


def log_density(state: VgcState, x):
    return state.log_density(x)


def gaussian_score(state: VgcState, z):
    return state.gaussian_score(z)

