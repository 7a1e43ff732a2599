"""Experiment runner behind the ``vgc`` command.

An experiment is one of ``fit1d``, ``bvln``, ``horseshoe`` or ``poisson``
combined with an inference method. :func:`run_experiment` fits or samples,
then writes five files into the output directory:

``trace.csv``
    ``iter,elbo,std_error`` rows.
``state.json``
    Final proposal ``{mu, C_rowmajor_lower, transforms}``.
``margins.csv``
    Marginal densities on a grid, for plotting.
``samples.csv``
    Posterior draws, header = coordinate names.
``summary.json``
    Scalar diagnostics (ELBO, KL values, correlation estimates, ...).

All outputs are a deterministic function of the configuration and seed.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import baselines
from .copula import VgcState
from .diagnostics import kl_1d_quadrature, kl_2d_quadrature, rmse_rho
from .errors import ParameterError, VgcError
from .models import (
    BUILTIN_1D,
    BivariateLogNormal,
    Horseshoe,
    PoissonLogLinear,
    PoissonRegressionData,
    TargetModel,
    generate_poisson_data,
)
from .optimizer import (
    OptimizerConfig,
    Scheme,
    StepSize,
    elbo_estimate,
    fit,
    initial_state,
    per_sample_gradients,
)
from .specfun import ReferenceCdf, Support
from .transforms import ExponentialTransform

logger = logging.getLogger(__name__)

EXPERIMENTS = ("fit1d", "bvln", "horseshoe", "poisson")

METHODS = {
    "fit1d": ("vgc_bp", "vit_bp", "vg", "vgc_ln"),
    "bvln": ("vgc_ln", "vgc_bp"),
    "horseshoe": ("vgc_bp", "vgc_ln", "vgc_ln_det", "mfvb", "gibbs", "rwmh"),
    "poisson": ("vgc_bp", "vgc_ln", "rwmh"),
}

DEFAULT_METHOD = {"fit1d": "vgc_bp", "bvln": "vgc_ln", "horseshoe": "vgc_bp", "poisson": "vgc_bp"}

MODEL_DEFAULTS = {
    "fit1d": {"target": "gamma", "alpha": 5.0, "nu": 1.0, "shape": 5.0, "rate": 2.0, "a": 0.5, "b": 0.5,
              "mean": 0.0, "sd": 1.0},
    "bvln": {"mu1": 0.1, "mu2": 0.1, "sigma1": 0.5, "sigma2": 0.5, "rho": 0.4},
    "horseshoe": {"y": 0.01, "ref_rate": 100.0},
    "poisson": {"data": "", "n": 2500, "beta0": 0.5, "beta1": 0.3, "beta2": -0.2, "data_seed": 2015,
                "a0": 1.0, "b0": 1.0, "standardize": True},
}

#: optimizer settings per experiment, then per (experiment, method)
OPTIMIZER_DEFAULTS = {
    # larger weight steps let heavy-tailed weight gradients throw omega between simplex vertices
    "fit1d": {"iterations": 10_000, "tol": None, "weight_step": "0.0003"},
    "bvln": {"iterations": 20_000, "tol": None, "weight_step": "0.001"},
    "horseshoe": {"iterations": 5_000, "tol": None, "samples_per_iter": 20, "mu_step": "0.001",
                  "chol_step": "0.001", "weight_step": "0.0005"},
    # beta has curvature ~1e3-1e4 at n = 2500, log tau ~1: one step scale per coordinate
    "poisson": {"iterations": 40_000, "tol": None, "samples_per_iter": 4,
                "mu_step": "5e-6,5e-6,5e-6,0.002", "chol_step": "5e-6,5e-6,5e-6,0.002",
                "weight_step": "1e-6,1e-6,1e-6,0.001"},
}
METHOD_OPTIMIZER_DEFAULTS = {
    ("fit1d", "vit_bp"): {"update_gaussian": False},
    ("horseshoe", "vgc_ln"): {"iterations": 20_000, "samples_per_iter": 4, "mu_step": "0.01",
                              "chol_step": "0.01"},
}

RUN_DEFAULTS = {
    "fit1d": {"init_scale": 1.0},
    "bvln": {"init_scale": 0.1},
    "horseshoe": {"init_scale": 0.1, "mode": "full"},
    "poisson": {"init_scale": 0.1, "proposal": "laplace", "proposal_scale": "1.19"},
}
COMMON_RUN_DEFAULTS = {
    "init_scale": 0.1,
    "n_samples": 10_000,
    "burn_in": -1,
    "proposal": "isotropic",
    "proposal_scale": "0.5",
    "grid_points": 201,
    "elbo_samples": 100_000,
    "mode": "full",
}


def _parse_bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"not a boolean: {s!r}")


def _parse_optional_float(s):
    if s is None:
        return None
    if isinstance(s, (int, float)):
        return float(s)
    return None if str(s).strip().lower() in ("", "none") else float(s)


_OPT_PARSERS = {
    "iterations": int,
    "samples_per_iter": int,
    "mu_step": StepSize.parse,
    "chol_step": StepSize.parse,
    "weight_step": StepSize.parse,
    "scheme": Scheme.parse,
    "window": int,
    "tol": _parse_optional_float,
    "min_diag": float,
    "trace_every": int,
    "trace_samples": int,
    "update_gaussian": _parse_bool,
    "update_weights": _parse_bool,
    "max_rejections": int,
    "threads": int,
}


def build_optimizer_config(values: dict, seed) -> OptimizerConfig:
    kw = {}
    for key, raw in values.items():
        if key not in _OPT_PARSERS:
            raise ParameterError(f"unknown optimizer setting {key!r}")
        kw[key] = _OPT_PARSERS[key](raw)
    return OptimizerConfig(seed=seed, **kw)


@dataclass
class ExperimentConfig:
    """Everything :func:`run_experiment` needs.

    ``model`` holds target parameters, ``optimizer`` the fitted optimizer
    settings and ``run`` the method-independent options (initial scale,
    number of emitted draws, grid size, ...).
    """

    experiment: str
    method: Optional[str] = None
    seed: int = 0
    k: int = 10
    out: Optional[Path] = None
    model: dict = field(default_factory=dict)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    run: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.method is None:
            self.method = DEFAULT_METHOD[self.experiment]
        if self.method not in METHODS[self.experiment]:
            raise ParameterError(
                f"method {self.method!r} is not available for {self.experiment}; "
                f"choose from {METHODS[self.experiment]}"
            )
        if int(self.k) < 1:
            raise ParameterError("k must be a positive integer")
        self.k = int(self.k)
        self.seed = int(self.seed)
        merged = dict(MODEL_DEFAULTS[self.experiment])
        unknown = set(self.model) - set(merged)
        if unknown:
            raise ParameterError(f"unknown model settings for {self.experiment}: {sorted(unknown)}")
        merged.update(self.model)
        self.model = merged
        run = dict(COMMON_RUN_DEFAULTS)
        run.update(RUN_DEFAULTS[self.experiment])
        unknown = set(self.run) - set(run)
        if unknown:
            raise ParameterError(f"unknown run settings: {sorted(unknown)}")
        run.update(self.run)
        self.run = run
        data = self.model.get("data")
        if data and not Path(data).is_file():
            raise ParameterError(f"data file {data} does not exist")

    @classmethod
    def build(cls, experiment, method=None, seed=0, k=10, out=None, model=None, optimizer=None, run=None):
        """Layer built-in defaults, then ``optimizer`` overrides, into a config."""
        method = method or DEFAULT_METHOD.get(experiment)
        if experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
        opt = dict(OPTIMIZER_DEFAULTS[experiment])
        opt.update(METHOD_OPTIMIZER_DEFAULTS.get((experiment, method), {}))
        opt.update(optimizer or {})
        return cls(
            experiment,
            method,
            seed,
            k,
            Path(out) if out is not None else None,
            dict(model or {}),
            build_optimizer_config(opt, int(seed)),
            dict(run or {}),
        )


def load_config(path, experiment, method=None, seed=None, k=None, out=None, scheme=None) -> ExperimentConfig:
    """Read an INI configuration and apply command-line overrides.

    Sections: ``[experiment]`` (``method``, ``seed``, ``k``, ``out``),
    ``[model]``, ``[optimizer]``, ``[run]`` and optional per-method sections
    ``[method:NAME]`` whose keys override ``[optimizer]`` and ``[run]`` when
    ``NAME`` is the selected method.
    """
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ParameterError(f"config file {path} does not exist")
        cp.read(path)
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    name = exp.pop("name", experiment)
    if experiment is not None and name != experiment:
        raise ParameterError(f"config file is for {name!r}, not {experiment!r}")
    method = method or exp.pop("method", None) or DEFAULT_METHOD.get(name)
    seed = seed if seed is not None else int(exp.pop("seed", 0))
    k = k if k is not None else int(exp.pop("k", 10))
    out = out if out is not None else exp.pop("out", None)
    model = _coerce(dict(cp["model"])) if cp.has_section("model") else {}
    optimizer = dict(cp["optimizer"]) if cp.has_section("optimizer") else {}
    run = _coerce(dict(cp["run"])) if cp.has_section("run") else {}
    section = f"method:{method}"
    if cp.has_section(section):
        for key, val in cp[section].items():
            if key in _OPT_PARSERS:
                optimizer[key] = val
            else:
                run[key] = _coerce({key: val})[key]
    if scheme is not None:
        optimizer["scheme"] = scheme
    return ExperimentConfig.build(name, method, seed, k, out, model, optimizer, run)


def _coerce(d):
    out = {}
    for key, val in d.items():
        try:
            out[key] = int(val)
        except ValueError:
            try:
                out[key] = float(val)
            except ValueError:
                lv = val.strip().lower()
                out[key] = {"true": True, "false": False}.get(lv, val)
    return out


# -- model and proposal construction ------------------------------------------------


def build_model(config: ExperimentConfig) -> TargetModel:
    m = config.model
    if config.experiment == "fit1d":
        name = str(m["target"]).lower()
        if name not in BUILTIN_1D:
            raise ParameterError(f"unknown 1-d target {name!r}; choose from {sorted(BUILTIN_1D)}")
        params = {
            "skewnormal": ("alpha",),
            "studentt": ("nu",),
            "gamma": ("shape", "rate"),
            "beta": ("a", "b"),
            "normal": ("mean", "sd"),
        }[name]
        return BUILTIN_1D[name](*(float(m[p]) for p in params))
    if config.experiment == "bvln":
        return BivariateLogNormal(m["mu1"], m["mu2"], m["sigma1"], m["sigma2"], m["rho"])
    if config.experiment == "horseshoe":
        return Horseshoe(m["y"])
    return PoissonLogLinear(poisson_data(config), m["a0"], m["b0"], _parse_bool(m["standardize"]))


def poisson_data(config: ExperimentConfig) -> PoissonRegressionData:
    """Data file when given, otherwise a synthetic quadratic-trend grid."""
    m = config.model
    if m.get("data"):
        return PoissonRegressionData.from_csv(m["data"])
    n = int(m["n"])
    grid = np.linspace(-1.0, 1.0, n)
    return generate_poisson_data(m["beta0"], m["beta1"], m["beta2"], grid, seed=int(m["data_seed"]))


def _kind(method, support):
    if method in ("vgc_bp", "vit_bp"):
        return "bernstein"
    if method == "vgc_ln":
        return "exponential" if Support(support) is Support.POSITIVE else "identity"
    if method == "vg":
        if Support(support) is not Support.REAL:
            raise ParameterError("plain VG needs real-valued coordinates")
        return "identity"
    raise ParameterError(f"{method} is not a copula method")


def build_initial_state(config: ExperimentConfig, model: TargetModel) -> VgcState:
    kinds = [_kind(config.method, s) for s in model.supports]
    refs = None
    if config.experiment == "horseshoe":
        refs = [ReferenceCdf.exponential(float(config.model["ref_rate"]))] * model.p
    return initial_state(model, kinds, k=config.k, scale=float(config.run["init_scale"]), refs=refs)


# -- results ---------------------------------------------------------------------------


@dataclass
class ExperimentResult:
    """In-memory outputs; :meth:`write` serialises them."""

    config: ExperimentConfig
    names: tuple
    summary: dict
    trace: list = field(default_factory=list)
    state: Optional[VgcState] = None
    samples: Optional[np.ndarray] = None
    margins: list = field(default_factory=list)
    extra_state: Optional[dict] = None

    def write(self, out):
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "trace.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "elbo", "std_error"])
            for it, val, se in self.trace:
                w.writerow([int(it), repr(float(val)), repr(float(se))])
        payload = self.state.to_dict() if self.state is not None else {"mu": [], "C_rowmajor_lower": [], "transforms": []}
        if self.extra_state:
            payload = {**payload, **self.extra_state}
        (out / "state.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        with (out / "margins.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["coordinate", "x", "log_x", "density", "log_density", "target_density"])
            for row in self.margins:
                w.writerow([row[0]] + [_fmt(v) for v in row[1:]])
        baselines.write_samples_csv(out / "samples.csv", self.samples if self.samples is not None else np.empty((0, len(self.names))), self.names)
        (out / "summary.json").write_text(json.dumps(_jsonable(self.summary), indent=2, sort_keys=True) + "\n")


def _fmt(v):
    if v is None:
        return ""
    v = float(v)
    return repr(v) if math.isfinite(v) else ("-inf" if v < 0 else "inf" if v > 0 else "nan")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def _grid(samples_j, support, n, log_scale):
    lo, hi = np.quantile(samples_j, [0.001, 0.999])
    if log_scale:
        lo, hi = math.log(lo), math.log(hi)
        pad = 0.1 * (hi - lo)
        return np.exp(np.linspace(lo - pad, hi + pad, n))
    pad = 0.1 * (hi - lo)
    a, b = lo - pad, hi + pad
    blo, bhi = Support(support).bounds
    a = max(a, blo + 1e-6 * (hi - lo)) if math.isfinite(blo) else a
    b = min(b, bhi - 1e-6 * (hi - lo)) if math.isfinite(bhi) else b
    return np.linspace(a, b, n)


def _state_margins(state, names, samples, n, log_scale, target_margins=None):
    rows = []
    for j, name in enumerate(names):
        xs = _grid(samples[:, j], state.supports[j], n, log_scale)
        dens = np.asarray(state.marginal_pdf(j, xs), dtype=float)
        tgt = None if target_margins is None else np.exp(target_margins(j, xs))
        for i, x in enumerate(xs):
            d = dens[i]
            rows.append((name, x, math.log(x) if x > 0 else None, d, math.log(d) if d > 0 else -math.inf,
                         None if tgt is None else tgt[i]))
    return rows


def _sample_margins(samples, names, supports, n, log_scale):
    """Histogram densities on the same kind of grid as the proposal margins."""
    rows = []
    for j, name in enumerate(names):
        edges = _grid(samples[:, j], supports[j], n + 1, log_scale)
        counts, _ = np.histogram(samples[:, j], bins=edges)
        widths = np.diff(edges)
        dens = counts / (samples.shape[0] * widths)
        centers = np.sqrt(edges[:-1] * edges[1:]) if log_scale else 0.5 * (edges[:-1] + edges[1:])
        for x, d in zip(centers, dens):
            rows.append((name, x, math.log(x) if x > 0 else None, d, math.log(d) if d > 0 else -math.inf, None))
    return rows


def _trace_rows(trace):
    return list(zip(trace.iters, trace.values, trace.std_errors))


def _summary_stats(samples, names):
    mean = samples.mean(axis=0)
    sd = samples.std(axis=0, ddof=1)
    corr = np.corrcoef(samples, rowvar=False) if samples.shape[1] > 1 else np.ones((1, 1))
    return {
        "mean": dict(zip(names, mean)),
        "sd": dict(zip(names, sd)),
        "sample_correlation": corr.tolist(),
    }


# -- runners ---------------------------------------------------------------------------------


def _fit_copula(config, model, callback=None):
    init = build_initial_state(config, model)
    return fit(model, init, config.optimizer, callback=callback)


def _run_copula(config: ExperimentConfig, model: TargetModel) -> ExperimentResult:
    corr_trace = []

    def cb(t, state):
        if state.p > 1:
            corr_trace.append((t, state.correlation()))

    res = _fit_copula(config, model, cb)
    state = res.state
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1]))
    est = elbo_estimate(state, model, int(config.run["elbo_samples"]), rng, config.optimizer.max_rejections)
    samples = state.sample(int(config.run["n_samples"]), np.random.default_rng(np.random.SeedSequence([config.seed, 2])))
    summary = {
        "experiment": config.experiment,
        "method": config.method,
        "seed": config.seed,
        "k": config.k,
        "scheme": config.optimizer.scheme.value,
        "iterations": res.iterations,
        "converged": res.converged,
        "rejected_samples": res.rejections,
        "elbo": est.value,
        "elbo_std_error": est.std_error,
        "correlation": state.correlation().tolist(),
    }
    summary.update(_summary_stats(samples, model.names))
    target_margins = None
    log_scale = config.experiment == "horseshoe"
    if config.experiment == "fit1d":
        summary["kl_1d"] = kl_1d_quadrature(state, model)
        target_margins = lambda j, x: model._log_joint(np.asarray(x)[:, None]) - model.log_normalizer  # noqa: E731
    elif config.experiment == "bvln":
        rho = model.rho
        rho_hat = float(state.correlation()[1, 0])
        summary["rho"] = rho
        summary["rho_hat"] = rho_hat
        summary["rmse_rho"] = rmse_rho(rho_hat, rho)
        summary["rmse_trace"] = [[t, rmse_rho(R[1, 0], rho)] for t, R in corr_trace]
        summary["kl_total"] = kl_2d_quadrature(state, model)
        target_margins = model.marginal_logpdf
    elif config.experiment == "horseshoe":
        summary["log_evidence"] = model.log_evidence()
    margins = _state_margins(state, model.names, samples, int(config.run["grid_points"]), log_scale, target_margins)
    return ExperimentResult(config, model.names, summary, _trace_rows(res.trace), state, samples, margins)


def _run_horseshoe_baseline(config: ExperimentConfig, model: Horseshoe) -> ExperimentResult:
    y = model.y
    n = int(config.run["n_samples"])
    names = model.names
    summary = {"experiment": "horseshoe", "method": config.method, "seed": config.seed,
               "log_evidence": model.log_evidence()}
    state = None
    extra = None
    trace = []
    if config.method == "mfvb":
        q, elbo = baselines.mfvb_horseshoe(y)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, 2]))
        tau = q.beta1 / rng.standard_gamma(q.alpha1, n)
        gam = rng.standard_gamma(q.alpha2, n) / q.beta2
        samples = np.column_stack([tau, gam])
        summary.update(elbo=elbo, alpha1=q.alpha1, beta1=q.beta1, alpha2=q.alpha2, beta2=q.beta2)
        extra = {"mfvb": {"alpha1": q.alpha1, "beta1": q.beta1, "alpha2": q.alpha2, "beta2": q.beta2}}
        trace = [(0, elbo, 0.0)]
    elif config.method == "vgc_ln_det":
        params, elbo = baselines.vgc_ln_deterministic(y, str(config.run["mode"]))
        state = VgcState.create(params.mu, params.C, [ExponentialTransform(), ExponentialTransform()])
        samples = state.sample(n, np.random.default_rng(np.random.SeedSequence([config.seed, 2])))
        summary.update(elbo=elbo, mode=str(config.run["mode"]), correlation=state.correlation().tolist())
        trace = [(0, elbo, 0.0)]
    elif config.method == "gibbs":
        burn = int(config.run["burn_in"])
        samples = baselines.gibbs_horseshoe(y, n, 100_000 if burn < 0 else burn, seed=config.seed)
    else:
        res = _rwmh(config, model, n)
        samples = res.samples
        summary["acceptance_rate"] = res.acceptance_rate
    summary.update(_summary_stats(samples, names))
    logs = np.log(samples)
    summary["mean_log"] = dict(zip(names, logs.mean(axis=0)))
    grid_n = int(config.run["grid_points"])
    if state is not None:
        margins = _state_margins(state, names, samples, grid_n, True)
    else:
        margins = _sample_margins(samples, names, model.supports, grid_n, True)
    return ExperimentResult(config, names, summary, trace, state, samples, margins, extra)


def _rwmh(config, model, n):
    scale = [float(s) for s in str(config.run["proposal_scale"]).split(",")]
    burn = int(config.run["burn_in"])
    kind = str(config.run["proposal"]).lower()
    init = cov = None
    if kind == "laplace":
        # start at the mode, propose along the local Gaussian approximation
        init, cov = baselines.laplace_approximation(model)
    elif kind != "isotropic":
        raise ParameterError(f"unknown proposal {kind!r}; use isotropic or laplace")
    return baselines.rwmh_sample(model, n, scale if len(scale) > 1 else scale[0], seed=config.seed, init=init,
                                 burn_in=None if burn < 0 else burn, proposal_cov=cov)


def _run_poisson_rwmh(config, model) -> ExperimentResult:
    n = int(config.run["n_samples"])
    res = _rwmh(config, model, n)
    summary = {"experiment": "poisson", "method": "rwmh", "seed": config.seed, "acceptance_rate": res.acceptance_rate}
    summary.update(_summary_stats(res.samples, model.names))
    margins = _sample_margins(res.samples, model.names, model.supports, int(config.run["grid_points"]), False)
    return ExperimentResult(config, model.names, summary, [], None, res.samples, margins)


def execute(config: ExperimentConfig) -> ExperimentResult:
    """Run one experiment in memory."""
    model = build_model(config)
    if config.method in ("vgc_bp", "vit_bp", "vg", "vgc_ln"):
        result = _run_copula(config, model)
    elif config.experiment == "horseshoe":
        result = _run_horseshoe_baseline(config, model)
    else:
        result = _run_poisson_rwmh(config, model)
    if config.experiment == "poisson":
        result.summary["n_records"] = model.data.n
    return result


def run_experiment(config: ExperimentConfig) -> int:
    """Run and write outputs; returns a process exit code."""
    try:
        result = execute(config)
        result.write(config.out if config.out is not None else Path("vgc-out") / config.experiment)
    except (VgcError, ValueError, ArithmeticError, OSError) as exc:
        logger.error("%s", exc)
        import sys

        print(f"vgc: error: {exc}", file=sys.stderr)
        return 1
    return 0


# -- scheme comparison ------------------------------------------------------------------------


def mu_gradient_variance(state: VgcState, model: TargetModel, scheme, n=1000, seed=0):
    """Per-coordinate variance of single-sample ``mu`` gradients at ``state``."""
    eps = np.random.default_rng(seed).standard_normal((int(n), state.p))
    g, _ = per_sample_gradients(state, model, eps, scheme)
    return g.var(axis=0)


def scheme_comparison(rho=0.4, seeds=range(10), iterations=5000, step=0.01, init_scale=0.1, model_params=None):
    """Final ``rmse_rho`` of VGC-LN under both entropy schemes for each seed.

    Returns
    -------
    dict
        ``{"stochastic": [...], "analytic": [...]}`` in seed order.
    """
    params = dict(MODEL_DEFAULTS["bvln"])
    params.update(model_params or {})
    params["rho"] = rho
    out = {}
    for scheme in (Scheme.STOCHASTIC, Scheme.ANALYTIC):
        errs = []
        for seed in seeds:
            cfg = ExperimentConfig.build(
                "bvln", "vgc_ln", seed, model=params,
                optimizer={"iterations": iterations, "scheme": scheme, "mu_step": step, "chol_step": step,
                           "trace_every": max(iterations, 1)},
                run={"init_scale": init_scale},
            )
            model = build_model(cfg)
            res = _fit_copula(cfg, model)
            errs.append(rmse_rho(res.state.correlation()[1, 0], rho))
        out[scheme.value] = errs
    return out


def describe_defaults():
    """Human-readable table of every built-in default, for ``--help``."""
    opt = {f.name: f.default for f in fields(OptimizerConfig) if not callable(f.default_factory)}  # type: ignore[arg-type]
    base = OptimizerConfig()
    opt.update(mu_step=str(base.mu_step), chol_step=str(base.chol_step), weight_step=str(base.weight_step),
               scheme=base.scheme.value, threads="$VGC_THREADS or 1")
    opt.pop("seed", None)
    lines = ["optimizer defaults (section [optimizer]; steps are scale/decay for scale/(1+decay*t)):"]
    lines += [f"  {k} = {v}" for k, v in opt.items()]
    lines.append("run defaults (section [run]):")
    lines += [f"  {k} = {v}" for k, v in COMMON_RUN_DEFAULTS.items()]
    for exp in EXPERIMENTS:
        lines.append(f"{exp}: methods {', '.join(METHODS[exp])} (default {DEFAULT_METHOD[exp]})")
        lines.append("  [model] " + ", ".join(f"{k}={v}" for k, v in MODEL_DEFAULTS[exp].items()))
        lines.append("  [optimizer] " + ", ".join(f"{k}={v}" for k, v in OPTIMIZER_DEFAULTS[exp].items()))
        for (e, m), d in METHOD_OPTIMIZER_DEFAULTS.items():
            if e == exp:
                lines.append(f"  [method:{m}] " + ", ".join(f"{k}={v}" for k, v in d.items()))
        lines.append("  [run] " + ", ".join(f"{k}={v}" for k, v in RUN_DEFAULTS[exp].items()))
    return "\n".join(lines)
