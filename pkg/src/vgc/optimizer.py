"""Stochastic ascent on the ELBO over ``(mu, C, {w_j})``.

Each iteration draws ``eps ~ N(0, I)``, sets ``z = mu + C eps`` and moves

* ``mu`` along the average of ``grad_z l_s(z) - grad_z ln q_G(z)``,
* ``C`` along the lower triangle of the same vector times ``eps^T``,
* each Bernstein weight vector along ``grad_w l_s`` followed by a Euclidean
  projection back onto the simplex,

where ``l_s(z) = ln p(y, h(z)) + sum_j ln h_j'(z_j)``. The analytic-entropy
scheme replaces the per-sample Gaussian score by its expectation, which gives
``grad_mu = E[grad_z l_s]`` and adds ``diag(1 / C_jj)`` to the ``C`` gradient.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.linalg import solve_triangular

from .copula import MIN_DIAG, VgcState
from .errors import OptimizationAborted, ParameterError, SupportError
from .models import TargetModel
from .specfun import LOG_2PI
from .transforms import BernsteinTransform

logger = logging.getLogger(__name__)


class Scheme(str, enum.Enum):
    #: entropy gradient estimated with the per-sample Gaussian score
    STOCHASTIC = "stochastic"
    #: entropy gradient replaced by its expectation
    ANALYTIC = "analytic"

    @classmethod
    def parse(cls, s):
        if isinstance(s, cls):
            return s
        aliases = {"entropystochastic": "stochastic", "entropyanalytic": "analytic"}
        key = str(s).strip().lower().replace("_", "").replace("-", "")
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ParameterError(f"unknown entropy scheme {s!r}") from None


@dataclass(frozen=True)
class StepSize:
    """Step-size schedule ``scale / (1 + decay * t)``; ``decay=0`` is constant.

    ``scale`` may be a tuple with one entry per coordinate, which acts as a
    fixed diagonal preconditioner (row ``j`` of ``C`` and the weights of
    coordinate ``j`` use entry ``j``).
    """

    scale: Union[float, Tuple[float, ...]]
    decay: float = 1e-3

    def __post_init__(self):
        if isinstance(self.scale, (list, tuple, np.ndarray)):
            object.__setattr__(self, "scale", tuple(float(c) for c in self.scale))
            if not self.scale:
                raise ParameterError("empty step-size vector")
        ok = all(c >= 0 for c in np.atleast_1d(self.scale))
        if not (ok and self.decay >= 0):
            raise ParameterError("step sizes must be nonnegative")

    @property
    def per_coordinate(self):
        return isinstance(self.scale, tuple)

    def at(self, t, p=None):
        """Step at iteration ``t``; a length-``p`` array when per-coordinate."""
        if self.per_coordinate:
            if p is not None and len(self.scale) != p:
                raise ParameterError(f"step-size vector has {len(self.scale)} entries for {p} coordinates")
            return np.asarray(self.scale) / (1.0 + self.decay * t)
        return self.scale / (1.0 + self.decay * t)

    @classmethod
    def parse(cls, s):
        """``"0.01"`` (default decay), ``"0.01/0.0"`` (scale/decay) or
        ``"1e-4,1e-4,0.01/1e-3"`` (one scale per coordinate)."""
        if isinstance(s, StepSize):
            return s
        if isinstance(s, (int, float)):
            return cls(float(s))
        parts = str(s).split("/")
        if len(parts) > 2:
            raise ParameterError(f"cannot parse step size {s!r}")
        try:
            scales = [float(c) for c in parts[0].split(",")]
            decay = None if len(parts) == 1 else float(parts[1])
        except ValueError:
            raise ParameterError(f"cannot parse step size {s!r}") from None
        scale = scales[0] if len(scales) == 1 else tuple(scales)
        return cls(scale) if decay is None else cls(scale, decay)

    def __str__(self):
        sc = ",".join(f"{c:g}" for c in self.scale) if self.per_coordinate else f"{self.scale:g}"
        return f"{sc}/{self.decay:g}"


def _default_threads():
    try:
        return max(1, int(os.environ.get("VGC_THREADS", "1")))
    except ValueError:
        return 1


@dataclass
class OptimizerConfig:
    iterations: int = 10_000
    samples_per_iter: int = 1
    mu_step: StepSize = field(default_factory=lambda: StepSize(0.01))
    chol_step: StepSize = field(default_factory=lambda: StepSize(0.01))
    weight_step: StepSize = field(default_factory=lambda: StepSize(0.1))
    scheme: Scheme = Scheme.STOCHASTIC
    seed: Optional[int] = 0
    #: convergence: relative change of consecutive ``window``-iteration means
    window: int = 200
    tol: Optional[float] = 1e-4
    min_diag: float = MIN_DIAG
    trace_every: int = 100
    trace_samples: int = 200
    update_gaussian: bool = True
    update_weights: bool = True
    max_rejections: int = 100
    threads: int = field(default_factory=_default_threads)

    def __post_init__(self):
        self.scheme = Scheme.parse(self.scheme)
        self.mu_step = StepSize.parse(self.mu_step)
        self.chol_step = StepSize.parse(self.chol_step)
        self.weight_step = StepSize.parse(self.weight_step)
        if self.iterations < 0 or self.samples_per_iter < 1:
            raise ParameterError("need iterations >= 0 and at least one sample per iteration")
        if self.trace_every < 1 or self.trace_samples < 1 or self.window < 1:
            raise ParameterError("trace and window sizes must be positive")

    def replace(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class ElboEstimate:
    value: float
    std_error: float
    n_samples: int


@dataclass
class ElboTrace:
    iters: list = field(default_factory=list)
    values: list = field(default_factory=list)
    std_errors: list = field(default_factory=list)

    def append(self, t, est: ElboEstimate):
        self.iters.append(int(t))
        self.values.append(float(est.value))
        self.std_errors.append(float(est.std_error))

    def __len__(self):
        return len(self.iters)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "elbo", "std_error"])
            for row in zip(self.iters, self.values, self.std_errors):
                w.writerow([row[0], repr(row[1]), repr(row[2])])


@dataclass
class FitResult:
    state: VgcState
    trace: ElboTrace
    iterations: int
    converged: bool
    rejections: int

    def __iter__(self):
        return iter((self.state, self.trace))


# -- simplex projection --------------------------------------------------------


def project_simplex(v):
    """Euclidean projection onto ``{w : w >= 0, sum(w) = 1}`` in O(k log k).

    A point already on the simplex is returned unchanged.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
        raise ParameterError("projection needs a finite non-empty vector")
    if np.all(v >= 0) and abs(v.sum() - 1.0) <= 4 * np.finfo(float).eps * v.size:
        return v.copy()
    # shifting by a constant leaves the projection unchanged and keeps the
    # threshold test exact for very large entries
    v = v - v.max()
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.maximum(v - theta, 0.0)


# -- per-sample quantities -----------------------------------------------------


@dataclass
class _Samples:
    eps: np.ndarray
    z: np.ndarray
    local: np.ndarray
    grad_local: np.ndarray
    log_qg: np.ndarray
    weight_grads: list
    valid: np.ndarray


def _evaluate(state: VgcState, model: TargetModel, eps, weights_grad=False):
    """Local objective, its z-gradient and the weight gradients for a batch."""
    eps = np.atleast_2d(eps)
    n, p = eps.shape
    z = state.mu + eps @ state.C.T
    evs = [t.evaluate(z[:, j], weights_grad=weights_grad, centered=True) for j, t in enumerate(state.transforms)]
    x = np.stack([ev.h for ev in evs], axis=1)
    valid = model.in_support(x)
    for ev in evs:
        valid &= ev.finite()
    local = np.full(n, np.nan)
    grad_local = np.full((n, p), np.nan)
    wgrads = [
        np.full((n, ev.dh_dw.shape[-1]), np.nan) if weights_grad and ev.dh_dw is not None else None for ev in evs
    ]
    if np.any(valid):
        xv = x[valid]
        with np.errstate(all="ignore"):
            lp = model._log_joint(xv)
            gx = np.atleast_2d(model._grad(xv))
            log_dh = np.stack([ev.log_dh[valid] for ev in evs], axis=1)
            dh = np.exp(log_dh)
            dlog_dh = np.stack([ev.dlog_dh[valid] for ev in evs], axis=1)
            local[valid] = lp + log_dh.sum(axis=1)
            grad_local[valid] = gx * dh + dlog_dh
            if weights_grad:
                for j, ev in enumerate(evs):
                    if wgrads[j] is not None:
                        wgrads[j][valid] = gx[:, j, None] * ev.dh_dw[valid] + ev.dlogdh_dw[valid]
    valid &= np.isfinite(local) & np.all(np.isfinite(grad_local), axis=1)
    for g in wgrads:
        if g is not None:
            valid &= np.all(np.isfinite(g), axis=1)
    log_qg = -0.5 * p * LOG_2PI - state.gauss.log_det() - 0.5 * np.sum(eps * eps, axis=1)
    return _Samples(eps, z, local, grad_local, log_qg, wgrads, valid)


def _draw_valid(state, model, rng, n, weights_grad, max_rejections, threads=1):
    """Draw ``n`` samples, redrawing any whose image leaves the support."""
    eps = rng.standard_normal((n, state.p))
    s = _evaluate_parallel(state, model, eps, weights_grad, threads)
    rejected = 0
    streak = 0
    while not np.all(s.valid):
        bad = ~s.valid
        nbad = int(bad.sum())
        rejected += nbad
        streak += 1
        if streak > max_rejections:
            raise OptimizationAborted(f"{max_rejections} consecutive rejected samples")
        eps[bad] = rng.standard_normal((nbad, state.p))
        fresh = _evaluate(state, model, eps[bad], weights_grad)
        for name in ("z", "local", "grad_local", "log_qg", "valid"):
            getattr(s, name)[bad] = getattr(fresh, name)
        for j, g in enumerate(fresh.weight_grads):
            if g is not None:
                s.weight_grads[j][bad] = g
        s.eps = eps
    return s, rejected


#: samples per evaluation block; blocks are fixed by sample index so the
#: arithmetic, and hence the result, does not depend on the thread count
EVAL_BLOCK = 64


def _evaluate_parallel(state, model, eps, weights_grad, threads):
    n = eps.shape[0]
    if n <= EVAL_BLOCK:
        return _evaluate(state, model, eps, weights_grad)
    chunks = [eps[i : i + EVAL_BLOCK] for i in range(0, n, EVAL_BLOCK)]
    work = lambda e: _evaluate(state, model, e, weights_grad)  # noqa: E731
    if threads <= 1:
        parts = [work(e) for e in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    cat = lambda name: np.concatenate([getattr(s, name) for s in parts])  # noqa: E731
    wgrads = [
        None if parts[0].weight_grads[j] is None else np.concatenate([s.weight_grads[j] for s in parts])
        for j in range(state.p)
    ]
    return _Samples(eps, cat("z"), cat("local"), cat("grad_local"), cat("log_qg"), wgrads, cat("valid"))


def _score_from_eps(state, eps):
    """``grad_z ln q_G`` at ``z = mu + C eps`` equals ``-C^{-T} eps``."""
    return -solve_triangular(state.C, np.atleast_2d(eps).T, lower=True, trans="T", check_finite=False).T


# -- public single-point operations -------------------------------------------------


def local_objective(state: VgcState, model: TargetModel, z):
    """``l_s(z) = ln p(y, h(z)) + sum_j ln h_j'(z_j)``."""
    z = np.asarray(z, dtype=float)
    x = np.stack([t.forward(z[..., j]) for j, t in enumerate(state.transforms)], axis=-1)
    out = model.log_joint(x)
    for j, t in enumerate(state.transforms):
        out = out + t.log_deriv(z[..., j])
    return out


def grad_z_local(state: VgcState, model: TargetModel, z):
    """Chain-rule gradient ``dlnp/dx_j * h_j'(z_j) + h_j''(z_j)/h_j'(z_j)``."""
    z = np.asarray(z, dtype=float)
    x = np.stack([t.forward(z[..., j]) for j, t in enumerate(state.transforms)], axis=-1)
    g = np.array(model.grad(x), dtype=float)
    for j, t in enumerate(state.transforms):
        g[..., j] = g[..., j] * t.deriv(z[..., j]) + t.log_deriv_grad_z(z[..., j])
    return g


def per_sample_gradients(state: VgcState, model: TargetModel, eps, scheme=Scheme.STOCHASTIC):
    """Per-sample ``(g_mu, G_C)`` for fixed draws ``eps`` of shape ``(n, p)``.

    Raises on samples outside the support instead of redrawing them.
    """
    scheme = Scheme.parse(scheme)
    s = _evaluate(state, model, eps)
    if not np.all(s.valid):
        raise SupportError("a sample left the model support")
    g = s.grad_local
    if scheme is Scheme.STOCHASTIC:
        g = g - _score_from_eps(state, s.eps)
    G = np.tril(g[:, :, None] * s.eps[:, None, :])
    if scheme is Scheme.ANALYTIC:
        G = G + np.diag(1.0 / np.diag(state.C))
    return g, G


def elbo_estimate(state: VgcState, model: TargetModel, n_samples, rng=None, max_rejections=100) -> ElboEstimate:
    """Monte Carlo mean and standard error of ``l_s(z) - ln q_G(z)``."""
    rng = np.random.default_rng(rng)
    s, _ = _draw_valid(state, model, rng, int(n_samples), False, max_rejections)
    vals = s.local - s.log_qg
    n = vals.size
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return ElboEstimate(float(vals.mean()), se, n)


# -- the iteration ------------------------------------------------------------------


def _has_weights(state):
    return any(isinstance(t, BernsteinTransform) for t in state.transforms)


def _step(state: VgcState, model, config: OptimizerConfig, rng, t):
    wants_w = config.update_weights and _has_weights(state)
    s, rejected = _draw_valid(state, model, rng, config.samples_per_iter, wants_w, config.max_rejections, config.threads)
    new_mu, new_C, new_ts = None, None, None
    if config.update_gaussian:
        g = s.grad_local
        if config.scheme is Scheme.STOCHASTIC:
            g = g - _score_from_eps(state, s.eps)
        g_mu = g.mean(axis=0)
        G_C = np.tril(np.einsum("si,sj->ij", g, s.eps) / g.shape[0])
        if config.scheme is Scheme.ANALYTIC:
            G_C = G_C + np.diag(1.0 / np.diag(state.C))
        lam, eta = config.mu_step.at(t, state.p), config.chol_step.at(t, state.p)
        if np.any(lam != 0.0):
            new_mu = state.mu + lam * g_mu
        if np.any(eta != 0.0):
            new_C = state.C + (eta[:, None] if np.ndim(eta) else eta) * G_C
            d = np.diag(new_C)
            if np.any(d < config.min_diag):
                np.fill_diagonal(new_C, np.maximum(d, config.min_diag))
    if wants_w:
        xi = np.broadcast_to(config.weight_step.at(t, state.p), (state.p,))
        if np.any(xi != 0.0):
            new_ts = list(state.transforms)
            for j, tr in enumerate(state.transforms):
                if isinstance(tr, BernsteinTransform) and xi[j] != 0.0:
                    gw = s.weight_grads[j].mean(axis=0)
                    new_ts[j] = tr.with_weights(project_simplex(tr.omega + xi[j] * gw))
    if new_mu is None and new_C is None and new_ts is None:
        new_state = state
    else:
        new_state = state.replace(mu=new_mu, C=new_C, transforms=new_ts)
    return new_state, float(np.mean(s.local - s.log_qg)), rejected


def step(state: VgcState, model: TargetModel, config: OptimizerConfig, rng, t=1) -> VgcState:
    """One iteration at (1-based) iteration counter ``t``."""
    return _step(state, model, config, rng, t)[0]


def _streams(seed):
    ss = np.random.SeedSequence(seed)
    a, b = ss.spawn(2)
    return np.random.default_rng(a), np.random.default_rng(b)


def fit(
    model: TargetModel,
    init: VgcState,
    config: Optional[OptimizerConfig] = None,
    callback: Optional[Callable[[int, VgcState], None]] = None,
) -> FitResult:
    """Iterate :func:`step` until the iteration budget or convergence.

    The ELBO is re-estimated every ``trace_every`` iterations on an
    independent random stream. Convergence is declared when the means of the
    per-iteration ELBO integrand over two consecutive ``window``-iteration
    blocks differ by less than ``tol`` relative. ``callback(t, state)`` runs
    at every trace point.
    """
    config = config or OptimizerConfig()
    if init.p != model.p:
        raise ParameterError("state and model dimensions differ")
    rng, trace_rng = _streams(config.seed)
    state = init
    trace = ElboTrace()
    block, prev_mean = [], None
    converged = False
    rejections = 0
    t = 0
    trace.append(0, elbo_estimate(state, model, config.trace_samples, trace_rng, config.max_rejections))
    if callback is not None:
        callback(0, state)
    while t < config.iterations:
        t += 1
        state, integrand, rej = _step(state, model, config, rng, t)
        rejections += rej
        block.append(integrand)
        if t % config.trace_every == 0:
            trace.append(t, elbo_estimate(state, model, config.trace_samples, trace_rng, config.max_rejections))
            if callback is not None:
                callback(t, state)
        if len(block) == config.window:
            m = float(np.mean(block))
            block = []
            if config.tol is not None and prev_mean is not None:
                if abs(m - prev_mean) <= config.tol * max(abs(prev_mean), 1e-12):
                    converged = True
                    break
            prev_mean = m
    if trace.iters[-1] != t:
        trace.append(t, elbo_estimate(state, model, config.trace_samples, trace_rng, config.max_rejections))
        if callback is not None:
            callback(t, state)
    if rejections:
        logger.info("redrew %d samples outside the support", rejections)
    return FitResult(state, trace, t, converged, rejections)


def initial_state(model: TargetModel, kind="bernstein", k=10, scale=0.1, refs=None) -> VgcState:
    """``mu = 0``, ``C = scale * I`` and uniform weights.

    ``kind`` is one of ``bernstein``, ``exponential``, ``identity`` or a
    per-coordinate sequence of those; ``refs`` optionally overrides the
    reference distribution per coordinate.
    """
    from .transforms import default_transform

    p = model.p
    kinds = [kind] * p if isinstance(kind, str) else list(kind)
    refs = [None] * p if refs is None else list(refs)
    ts = [default_transform(s, kd, k, r) for s, kd, r in zip(model.supports, kinds, refs)]
    return VgcState.create(np.zeros(p), scale * np.eye(p), ts)


__all__ = [
    "ElboEstimate",
    "ElboTrace",
    "FitResult",
    "OptimizerConfig",
    "Scheme",
    "StepSize",
    "elbo_estimate",
    "fit",
    "grad_z_local",
    "initial_state",
    "local_objective",
    "per_sample_gradients",
    "project_simplex",
    "step",
]
