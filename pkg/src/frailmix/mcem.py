"""Monte Carlo EM for the mixture Weibull frailty model.

Three model tags are supported:

* ``independence``: no frailty (w = 1); eta draws are independent Bernoullis.
* ``gamma-frailty``: w is integrated out; eta is imputed by a Gibbs sweep
  that draws w from its conjugate Gamma posterior, uses it to draw eta, and
  then discards it.  The M-step maximises the marginal log-likelihood.
* ``lognormal-frailty``: w is imputed by rejection sampling and kept; the
  M-step maximises the complete-data log-likelihood.

Randomness is keyed per cluster (``seed``, stage, iteration, cluster), so a
draw does not depend on evaluation order.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, gammaln

from .data import Dataset, IntervalObservation
from .errors import DomainError, InformationError, OptimizationError
from .frailty import ClusterSuffStats, sample_posterior, segment_sum, suff_stats_matrix
from .hazards import (
    cumhaz_weibull,
    linear_predictor,
    log_hazard_weibull,
    log_mixture_probs,
)
from .latent import DrawSet
from .likelihood import cluster_loglik_matrix, gamma_marginal_norm, interval_terms
from .params import (
    MODEL_TAGS,
    FrailtySpec,
    MixtureParams,
    ModelParams,
    Type1Params,
    Type2Params,
    from_internal,
    internal_jacobian,
    positive_mask,
    to_internal,
)

log = logging.getLogger(__name__)

ASCENT_SLACK = 1e-6
FD_REL_STEP = 1e-4
FAR_PENALTY = 1e15

_STAGE_INIT, _STAGE_ESTEP, _STAGE_FINAL = 0, 1, 2


@dataclass
class MCEMConfig:
    M0: int = 50
    M_growth: float = 1.2
    M_max: int = 500
    tol: float = 1e-3
    window: int = 3
    max_iter: int = 100
    seed: int = 0
    M_final: int = 200
    final_sweeps: int = 5
    threads: int = 1

    def __post_init__(self):
        if self.M0 < 1 or self.M_max < 1 or self.M_final < 1:
            raise ValueError("sample sizes must be >= 1")
        if self.M_growth < 1:
            raise ValueError("M_growth must be >= 1")
        if not self.tol > 0 or self.window < 1 or self.max_iter < 1:
            raise ValueError("tol must be > 0; window and max_iter >= 1")

    def sample_size(self, d: int) -> int:
        return int(min(math.ceil(self.M0 * self.M_growth**d), self.M_max))


@dataclass
class FitResult:
    theta_hat: ModelParams
    se: dict[str, float]
    q_trace: list[float]
    q_se_trace: list[float]
    theta_trace: list[np.ndarray]
    final_draws: DrawSet
    converged: bool
    model_tag: str
    q_final: float = float("nan")
    q_final_se: float = float("nan")
    information: np.ndarray | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return len(self.q_trace)

    @property
    def names(self) -> list[str]:
        return self.theta_hat.names()

    @property
    def estimates(self) -> dict[str, float]:
        return self.theta_hat.to_dict()


# ---------------------------------------------------------------------------
# random streams


class ClusterStreams:
    """Independent generator per (stage, iteration, sweep, cluster)."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def get(self, stage: int, iteration: int, sweep: int, cluster: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(stage, iteration, sweep, cluster))
        return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# E-step


def family_for(model_tag: str) -> str:
    try:
        return MODEL_TAGS[model_tag]
    except KeyError:
        raise DomainError(f"unknown model tag {model_tag!r}; expected one of {sorted(MODEL_TAGS)}") from None


def eta_probability(interval: IntervalObservation, w: float, params: ModelParams) -> float:
    """P(eta = 1 | y, delta, z, w) for an interval whose predecessor was a corner."""
    if interval.delta_prev != 1:
        raise DomainError("eta is only defined for intervals with delta_prev = 1")
    if not (interval.y > 0 and w > 0):
        raise DomainError("y and w must be > 0")
    z = np.asarray(interval.z, dtype=float)
    xb = linear_predictor(z, params.beta)
    lp, l1p = log_mixture_probs(z, params.mix)
    log_p1 = lp - w * cumhaz_weibull(interval.y, params.t1.lambda1, params.t1.gamma1) * np.exp(xb)
    log_p2 = l1p - cumhaz_weibull(interval.y, params.t2.lambda2, params.t2.gamma2)
    if interval.delta == 1:
        log_p1 += np.log(w) + log_hazard_weibull(interval.y, params.t1.lambda1, params.t1.gamma1) + xb
        log_p2 += log_hazard_weibull(interval.y, params.t2.lambda2, params.t2.gamma2)
    return float(expit(log_p1 - log_p2))


def _eta_logodds(terms, arr, sl: slice, w: np.ndarray) -> np.ndarray:
    """Log-odds of eta = 1 for the Type-2 intervals ``arr.type2[sl]``; ``w`` has shape (M, 1)."""
    idx = arr.type2[sl]
    observed = arr.delta[idx] == 1
    return terms.t2_long[sl] + np.where(observed, np.log(w), 0.0) - w * terms.H0[idx] - terms.t2_short[sl]


def initial_eta(dataset: Dataset, params: ModelParams, M: int, seed: int) -> DrawSet:
    """Starting eta chains: Bernoulli draws at w = 1."""
    return _sweep(dataset, params, None, M, ClusterStreams(seed), _STAGE_INIT, 0, 0, frailty="degenerate")


def _expand(prev: DrawSet | None, M: int) -> np.ndarray | None:
    if prev is None:
        return None
    idx = np.arange(M) % len(prev)
    return prev.eta[idx].astype(float)


def _sweep(
    dataset: Dataset,
    params: ModelParams,
    E_prev: np.ndarray | None,
    M: int,
    streams: ClusterStreams,
    stage: int,
    iteration: int,
    sweep: int,
    frailty: str,
    keep_all_w: bool = True,
    threads: int = 1,
) -> DrawSet:
    arr = dataset.arrays
    terms = interval_terms(arr, params)
    C, N2 = arr.n_clusters, arr.n_type2
    starts2 = arr.type2_starts
    spec = params.frailty if frailty != "degenerate" else FrailtySpec.degenerate()
    if spec.family != "degenerate":
        if E_prev is None:
            raise DomainError("a frailty E-step needs the previous eta draws")
        phi, psi = suff_stats_matrix(arr, E_prev, terms.H0)
    E = np.zeros((M, N2), dtype=np.int8)
    W = np.ones((M, C)) if keep_all_w else None

    def one(c: int) -> None:
        lo, hi = starts2[c], starts2[c + 1]
        if hi == lo and not keep_all_w:
            return
        rng = streams.get(stage, iteration, sweep, c)
        if spec.family == "degenerate":
            w = np.ones(M)
        else:
            w = sample_posterior(spec, ClusterSuffStats(phi[:, c], psi[:, c]), rng)
        if keep_all_w:
            W[:, c] = w
        if hi > lo:
            sl = slice(lo, hi)
            E[:, sl] = rng.random((M, hi - lo)) < expit(_eta_logodds(terms, arr, sl, w[:, None]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(C)))
    else:
        for c in range(C):
            one(c)
    return DrawSet(E, W)


def mce_step_general(
    dataset: Dataset,
    params: ModelParams,
    prev_draws: DrawSet | None,
    M: int,
    streams: ClusterStreams | int,
    iteration: int = 0,
    sweeps: int = 1,
    stage: int = _STAGE_ESTEP,
    threads: int = 1,
) -> DrawSet:
    """Draw w per cluster from its posterior given the previous eta, then eta given w."""
    if isinstance(streams, int):
        streams = ClusterStreams(streams)
    family = params.frailty.family
    E_prev = _expand(prev_draws, M)
    draws = None
    for s in range(sweeps):
        draws = _sweep(dataset, params, E_prev, M, streams, stage, iteration, s, family, True, threads)
        E_prev = draws.eta.astype(float)
    return draws


def mce_step_gamma(
    dataset: Dataset,
    params: ModelParams,
    M: int,
    streams: ClusterStreams | int,
    prev_draws: DrawSet | None = None,
    iteration: int = 0,
    sweeps: int = 1,
    stage: int = _STAGE_ESTEP,
    threads: int = 1,
) -> DrawSet:
    """Eta-only draws for the gamma-marginal algorithm (w drawn transiently)."""
    if params.frailty.family != "gamma":
        raise DomainError("mce_step_gamma requires gamma frailty")
    if isinstance(streams, int):
        streams = ClusterStreams(streams)
    if prev_draws is None:
        prev_draws = initial_eta(dataset, params, M, streams.seed)
    E_prev = _expand(prev_draws, M)
    draws = None
    for s in range(sweeps):
        draws = _sweep(dataset, params, E_prev, M, streams, stage, iteration, s, "gamma", False, threads)
        E_prev = draws.eta.astype(float)
    return draws


def mce_step(
    dataset: Dataset,
    params: ModelParams,
    prev_draws: DrawSet | None,
    M: int,
    streams: ClusterStreams,
    iteration: int,
    sweeps: int = 1,
    stage: int = _STAGE_ESTEP,
    threads: int = 1,
) -> DrawSet:
    if params.frailty.family == "gamma":
        return mce_step_gamma(dataset, params, M, streams, prev_draws, iteration, sweeps, stage, threads)
    if params.frailty.family == "degenerate":
        draws = _sweep(dataset, params, None, M, streams, stage, iteration, 0, "degenerate", False, threads)
        return DrawSet(draws.eta, None)
    return mce_step_general(dataset, params, prev_draws, M, streams, iteration, sweeps, stage, threads)


# ---------------------------------------------------------------------------
# Q function and M-step


def likelihood_kind(family: str, draws: DrawSet) -> str:
    if family == "degenerate":
        return "independence"
    if family == "gamma" and draws.w is None:
        return "marginal"
    return "complete"


class QFunction:
    """Monte Carlo estimate of E[log-likelihood] over a fixed set of draws.

    ``value`` uses draw-averaged sufficient statistics wherever the
    log-likelihood is linear in the latent values; ``per_draw`` evaluates
    each draw separately and is used for Louis standard errors.
    """

    def __init__(self, dataset: Dataset, draws: DrawSet, family: str, p: int):
        self.dataset = dataset
        self.arr = arr = dataset.arrays
        self.draws = draws
        self.family = family
        self.p = p
        self.kind = likelihood_kind(family, draws)
        if self.kind == "complete" and draws.w is None and family != "degenerate":
            raise DomainError("complete-data Q needs frailty draws")
        self.M = len(draws)
        E = draws.eta.astype(float)
        self.E = E
        self.ebar = E.mean(axis=0)
        C = arr.n_clusters
        t1, t2 = arr.type1, arr.type2
        self.d1 = arr.delta[t1] == 1
        if self.kind == "complete":
            W = draws.w
            # average frailty weight of each interval's exposure
            Wi = W[:, arr.cluster]
            omega = np.ones((self.M, arr.n_intervals))
            omega[:, t2] = E
            self.abar = (omega * Wi).mean(axis=0)
            phi = np.zeros((self.M, C))
            phi += np.bincount(arr.cluster[t1], weights=arr.delta[t1], minlength=C)
            phi += segment_sum(E * arr.delta[t2], arr)
            logW = np.log(W)
            self.const = float((phi * logW).sum(axis=1).mean())
            self.sum_logw = float(logW.sum(axis=1).mean())
            self.sum_logw2 = float((logW**2).sum(axis=1).mean())
            self.sum_w = float(W.sum(axis=1).mean())
        self._cluster_cache = lru_cache(maxsize=8)(self._marginal_part)

    def params(self, u: np.ndarray) -> ModelParams:
        return from_internal(u, self.family, self.p)

    def _marginal_part(self, key: tuple) -> float:
        theta_w, lam1, gam1, *beta = key
        arr = self.arr
        xb = linear_predictor(arr.Z, np.asarray(beta))
        H0 = np.exp(gam1 * np.log(lam1 * arr.y) + xb)
        phi, psi = suff_stats_matrix(arr, self.E, H0)
        return float(gamma_marginal_norm(theta_w, phi, psi).sum(axis=1).mean())

    def value(self, u: np.ndarray) -> float:
        params = self.params(u)
        arr = self.arr
        terms = interval_terms(arr, params)
        t1, t2 = arr.type1, arr.type2
        q = float(terms.logh0[t1][self.d1].sum())
        q += float(self.ebar @ terms.t2_long + (1.0 - self.ebar) @ terms.t2_short)
        if self.kind == "independence":
            q -= float(terms.H0[t1].sum() + self.ebar @ terms.H0[t2])
        elif self.kind == "marginal":
            key = (params.frailty.param, params.t1.lambda1, params.t1.gamma1, *params.t1.beta)
            q += self._cluster_cache(key)
        else:
            q += self.const - float(self.abar @ terms.H0)
            q += self._mean_log_density(params.frailty)
        return q

    def _mean_log_density(self, spec: FrailtySpec) -> float:
        C = self.arr.n_clusters
        if spec.family == "degenerate":
            return 0.0
        if spec.family == "lognormal":
            s = spec.param
            s2 = s * s
            quad = self.sum_logw2 + s2 * self.sum_logw + C * s2 * s2 / 4.0
            return -quad / (2.0 * s2) - self.sum_logw - C * (np.log(s) + 0.5 * np.log(2 * np.pi))
        a = 1.0 / spec.param
        return C * (a * np.log(a) - gammaln(a)) + (a - 1.0) * self.sum_logw - a * self.sum_w

    def per_draw(self, u: np.ndarray) -> np.ndarray:
        params = self.params(u)
        mat = cluster_loglik_matrix(self.dataset, params, self.E, self.draws.w, self.kind)
        return mat.sum(axis=1)

    def __call__(self, u: np.ndarray) -> float:
        return self.value(u)


def fd_steps(u: np.ndarray) -> np.ndarray:
    return FD_REL_STEP * np.maximum(1.0, np.abs(u))


def numerical_gradient(f, u: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
    """Central differences; ``f`` may return a scalar or a vector (stacked on the last axis)."""
    u = np.asarray(u, dtype=float)
    h = fd_steps(u) if h is None else h
    cols = []
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h[i]
        cols.append((np.asarray(f(u + e)) - np.asarray(f(u - e))) / (2.0 * h[i]))
    return np.stack(cols, axis=-1)


def numerical_hessian(f, u: np.ndarray, h: np.ndarray | None = None) -> np.ndarray:
    """Central-difference Hessian of a scalar function (symmetric by construction)."""
    u = np.asarray(u, dtype=float)
    h = fd_steps(u) if h is None else h
    q = u.size
    f0 = float(f(u))
    H = np.zeros((q, q))
    plus = np.empty(q)
    minus = np.empty(q)
    for i in range(q):
        e = np.zeros(q)
        e[i] = h[i]
        plus[i] = f(u + e)
        minus[i] = f(u - e)
        H[i, i] = (plus[i] - 2.0 * f0 + minus[i]) / (h[i] * h[i])
    for i in range(q):
        for j in range(i + 1, q):
            ei = np.zeros(q)
            ej = np.zeros(q)
            ei[i] = h[i]
            ej[j] = h[j]
            v = f(u + ei + ej) - f(u + ei - ej) - f(u - ei + ej) + f(u - ei - ej)
            H[i, j] = H[j, i] = v / (4.0 * h[i] * h[j])
    return H


def _bounds(family: str, p: int) -> list[tuple[float, float]]:
    mask = positive_mask(family, p)
    return [(-25.0, 8.0) if pos else (-30.0, 30.0) for pos in mask]


def _at_bounds(params: ModelParams, atol: float = 1e-6) -> list[str]:
    u = to_internal(params)
    bounds = _bounds(params.frailty.family, params.p)
    return [n for n, x, (lo, hi) in zip(params.names(), u, bounds) if x - lo < atol or hi - x < atol]


def m_step(
    dataset: Dataset,
    draws: DrawSet,
    model_tag: str,
    start: ModelParams,
    max_fun: int = 20000,
) -> tuple[ModelParams, float]:
    """Maximise Q over theta for fixed draws; returns (theta, Q(theta)).

    Positive parameters are optimised on the log scale with L-BFGS-B and
    central-difference gradients, falling back to Powell's method when
    L-BFGS-B does not ascend.  If neither ascends (beyond a 1e-6 slack),
    the starting point is returned.
    """
    theta, q, _ = _m_step(dataset, draws, model_tag, start, max_fun)
    return theta, q


def _m_step(dataset, draws, model_tag, start, max_fun=20000):
    if len(draws) == 0:
        raise DomainError("m_step needs at least one draw")
    family = family_for(model_tag)
    if start.frailty.family != family:
        raise DomainError(f"start parameters have frailty {start.frailty.family}, model needs {family}")
    Q = QFunction(dataset, draws, family, start.p)
    u0 = to_internal(start)
    q0 = Q.value(u0)
    if not np.isfinite(q0):
        raise OptimizationError(f"non-finite Q at starting point {start.to_dict()}")

    def objective(u):
        # overflow far from the optimum becomes a large finite value so the
        # line search backtracks instead of stopping on a NaN gradient
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            v = Q.value(u)
        return -v if np.isfinite(v) else FAR_PENALTY

    def gradient(u):
        return numerical_gradient(objective, u)

    bounds = _bounds(family, start.p)
    res = minimize(
        objective,
        u0,
        jac=gradient,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxfun": max_fun, "maxiter": max_fun, "ftol": 1e-13, "gtol": 1e-7},
    )
    if res.nfev >= max_fun:
        raise OptimizationError(f"M-step exceeded {max_fun} function evaluations")
    if -res.fun < q0 - ASCENT_SLACK or res.fun >= FAR_PENALTY:
        log.info("L-BFGS-B did not ascend; retrying with Powell")
        res = minimize(objective, u0, method="Powell", bounds=bounds,
                       options={"maxfev": max_fun, "xtol": 1e-8, "ftol": 1e-12})
    if res.fun >= FAR_PENALTY:
        raise OptimizationError(f"non-finite Q at {from_internal(res.x, family, start.p).to_dict()}")
    q1 = -float(res.fun)
    if q1 < q0 - ASCENT_SLACK:
        log.warning("M-step failed to ascend (%.6g < %.6g); keeping previous estimate", q1, q0)
        return start, q0, False
    return from_internal(res.x, family, start.p), q1, True


# ---------------------------------------------------------------------------
# initialisation and driver


def default_init(dataset: Dataset, model_tag: str, frailty_param: float = 0.5) -> ModelParams:
    """Moment-style starting values.

    lambda1 = Type-1 events / Type-1 exposure; shapes 1; coefficients 0;
    alpha0 = logit of the share of Type-2 gaps longer than 2 minutes;
    lambda2 = 1 / mean of the Type-2 gaps up to 2 minutes.
    """
    arr = dataset.arrays
    p = dataset.covariate_dim
    t1, t2 = arr.type1, arr.type2
    n_ev = max(float(arr.delta[t1].sum()), 1.0)
    lam1 = n_ev / float(arr.y[t1].sum()) if t1.size else 1.0 / float(arr.y.mean())
    if t2.size:
        y2 = arr.y[t2]
        frac_long = np.clip((y2 > 2.0).mean(), 0.05, 0.95)
        short = y2[y2 <= 2.0]
        lam2 = 1.0 / float(short.mean()) if short.size else 1.0
    else:
        frac_long, lam2 = 0.5, 1.0
    family = family_for(model_tag)
    frailty = FrailtySpec.degenerate() if family == "degenerate" else FrailtySpec(family, frailty_param)
    return ModelParams(
        frailty,
        Type1Params(lam1, 1.0, np.zeros(p)),
        Type2Params(lam2, 1.0),
        MixtureParams(float(np.log(frac_long / (1 - frac_long))), np.zeros(p)),
    )


def q_standard_error(dataset: Dataset, draws: DrawSet, params: ModelParams) -> float:
    """Monte Carlo standard error of Q-tilde at ``params``."""
    if len(draws) < 2:
        return 0.0
    Q = QFunction(dataset, draws, params.frailty.family, params.p)
    vals = Q.per_draw(to_internal(params))
    return float(vals.std(ddof=1) / np.sqrt(len(vals)))


def run_mcem(
    dataset: Dataset,
    init: ModelParams | None,
    config: MCEMConfig,
    model_tag: str,
    compute_se: bool = True,
) -> FitResult:
    family = family_for(model_tag)
    if init is None:
        init = default_init(dataset, model_tag)
    if init.frailty.family != family:
        raise DomainError(f"init has frailty {init.frailty.family}, model {model_tag} needs {family}")
    if init.p != dataset.covariate_dim:
        raise DomainError(f"init has {init.p} covariates, dataset has {dataset.covariate_dim}")
    streams = ClusterStreams(config.seed)
    theta = init
    prev = None
    if family != "degenerate":
        prev = initial_eta(dataset, init, config.sample_size(0), config.seed)
    q_trace: list[float] = []
    q_se_trace: list[float] = []
    theta_trace: list[np.ndarray] = []
    streak = 0
    failed_steps = 0
    converged = False
    for d in range(config.max_iter):
        M = config.sample_size(d)
        draws = mce_step(dataset, theta, prev, M, streams, d, threads=config.threads)
        new_theta, q, ascended = _m_step(dataset, draws, model_tag, theta)
        q_trace.append(q)
        q_se_trace.append(q_standard_error(dataset, draws, new_theta))
        theta_trace.append(new_theta.to_vector())
        change = float(np.linalg.norm(new_theta.to_vector() - theta.to_vector()))
        log.info("iter %d  M=%d  Q=%.4f  |dtheta|=%.3g", d + 1, M, q, change)
        theta, prev = new_theta, draws
        if not ascended:
            failed_steps += 1
        if d > 0:
            streak = streak + 1 if (change < config.tol and ascended) else 0
        if streak >= config.window:
            converged = True
            break

    pinned = _at_bounds(theta)
    if pinned:
        converged = False

    final = mce_step(
        dataset, theta, prev, config.M_final, streams, 0, sweeps=config.final_sweeps,
        stage=_STAGE_FINAL, threads=config.threads,
    )
    Qf = QFunction(dataset, final, family, theta.p)
    vals = Qf.per_draw(to_internal(theta))
    result = FitResult(
        theta_hat=theta,
        se={n: float("nan") for n in theta.names()},
        q_trace=q_trace,
        q_se_trace=q_se_trace,
        theta_trace=theta_trace,
        final_draws=final,
        converged=converged,
        model_tag=model_tag,
        q_final=float(vals.mean()),
        q_final_se=float(vals.std(ddof=1) / np.sqrt(len(vals))) if len(vals) > 1 else 0.0,
    )
    if not converged and not pinned:
        result.notes.append(f"no convergence within {config.max_iter} iterations")
    if pinned:
        result.notes.append(f"estimate on the optimizer boundary for {', '.join(pinned)}")
    if failed_steps:
        result.notes.append(f"{failed_steps} M-step(s) kept the previous estimate")
    if compute_se:
        try:
            info = louis_information(dataset, theta, final, model_tag)
            result.information = info
            result.se = dict(zip(theta.names(), map(float, standard_errors(info))))
        except InformationError as exc:
            # no positive-definite information means no interior maximum
            result.converged = False
            result.notes.append(f"standard errors unavailable: {exc}")
    return result


# ---------------------------------------------------------------------------
# Louis standard errors


def louis_information(
    dataset: Dataset,
    theta_hat: ModelParams,
    final_draws: DrawSet,
    model_tag: str | None = None,
    coords: str = "natural",
) -> np.ndarray:
    """Observed information by Louis' identity over Monte Carlo draws.

        I = -mean_m Hess l_m - [mean_m g_m g_m' - gbar gbar']

    Derivatives are central differences in the optimizer coordinates (log
    scale for positive parameters).  With ``coords="natural"`` the matrix is
    mapped to the natural parameters by the diagonal Jacobian of the log
    transform.
    """
    family = theta_hat.frailty.family
    if model_tag is not None and family_for(model_tag) != family:
        raise DomainError(f"model tag {model_tag} does not match frailty family {family}")
    Q = QFunction(dataset, final_draws, family, theta_hat.p)
    u = to_internal(theta_hat)
    M = Q.M
    G = numerical_gradient(Q.per_draw, u)  # (M, q)
    H = numerical_hessian(Q.value, u)
    gbar = G.mean(axis=0)
    info = -H - (G.T @ G / M - np.outer(gbar, gbar))
    info = 0.5 * (info + info.T)
    if coords == "natural":
        J = internal_jacobian(theta_hat)
        info = info / np.outer(J, J)
    elif coords != "internal":
        raise ValueError("coords must be 'natural' or 'internal'")
    eig = np.linalg.eigvalsh(info)
    if eig[0] <= 0:
        raise InformationError(f"observed information is not positive definite (smallest eigenvalue {eig[0]:.4g})")
    return info


def standard_errors(information: np.ndarray) -> np.ndarray:
    information = np.asarray(information, dtype=float)
    try:
        cov = np.linalg.inv(information)
    except np.linalg.LinAlgError as exc:
        raise InformationError(f"information matrix is singular: {exc}") from None
    var = np.diag(cov)
    if np.any(~np.isfinite(var)) or np.any(var < 0):
        raise InformationError("information matrix inverse has negative or non-finite variances")
    return np.sqrt(var)
