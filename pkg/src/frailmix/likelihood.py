"""Complete-data, independence and gamma-marginal log-likelihoods.

Every function here is built on :func:`cluster_loglik_matrix`, which
evaluates the per-cluster log-likelihood for a stack of M latent draws at
once and returns an (M, C) array.  Per-interval contributions are

    omega_k = 1:  delta_k * log(w h0_k) - w H0_k           (Type 1 / Type 2-L)
    omega_k = 0:  delta_k * log h2_k - H2_k                (Type 2-S)
    delta_prev_k = 1:  eta_k log pi_k + (1 - eta_k) log(1 - pi_k)

and the cluster adds log f_W(w) (complete data) or, for gamma frailty with
w integrated out, the closed-form normaliser in (phi, psi).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import Dataset, DesignArrays
from .errors import DomainError
from .frailty import log_frailty_density, segment_sum, suff_stats_matrix
from .hazards import (
    cumhaz_weibull,
    linear_predictor,
    log_hazard_weibull,
    log_mixture_probs,
)
from .latent import DrawSet, LatentDraw
from .params import ModelParams


@dataclass(frozen=True)
class IntervalTerms:
    """Parameter-dependent per-interval quantities (length N unless noted)."""

    logh0: np.ndarray  # frailty-free log h1
    H0: np.ndarray  # frailty-free cumulative hazard of the Type-1 law
    t2_long: np.ndarray  # Type-2 only: delta*logh0 + log pi
    t2_short: np.ndarray  # Type-2 only: delta*log h2 - H2 + log(1 - pi)


def interval_terms(arr: DesignArrays, params: ModelParams) -> IntervalTerms:
    p1, p2 = params.t1, params.t2
    xb = linear_predictor(arr.Z, p1.beta)
    logh0 = log_hazard_weibull(arr.y, p1.lambda1, p1.gamma1) + xb
    H0 = np.exp(p1.gamma1 * np.log(p1.lambda1 * arr.y) + xb)
    t2 = arr.type2
    y2, d2 = arr.y[t2], arr.delta[t2]
    logpi, log1mpi = log_mixture_probs(arr.Z[t2], params.mix)
    logh2 = log_hazard_weibull(y2, p2.lambda2, p2.gamma2)
    H2 = cumhaz_weibull(y2, p2.lambda2, p2.gamma2)
    t2_long = np.where(d2 == 1, logh0[t2], 0.0) + logpi
    t2_short = np.where(d2 == 1, logh2, 0.0) - H2 + log1mpi
    return IntervalTerms(logh0, H0, t2_long, t2_short)


STIRLING_SWITCH = 1e3


def _lgamma_ratio_minus_log(a, phi):
    """gammaln(a + phi) - gammaln(a) - phi * log(a), stable for large a."""
    a, phi = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(phi, dtype=float))
    out = np.empty(a.shape)
    small = a < STIRLING_SWITCH
    out[small] = gammaln(a[small] + phi[small]) - gammaln(a[small]) - phi[small] * np.log(a[small])
    al, ph = a[~small], phi[~small]
    b = al + ph
    # Stirling series difference; the next term is O(a^-5)
    out[~small] = (
        (b - 0.5) * np.log1p(ph / al) - ph
        + (1.0 / b - 1.0 / al) / 12.0
        - (1.0 / b**3 - 1.0 / al**3) / 360.0
    )
    return out


def gamma_marginal_norm(theta_w: float, phi, psi):
    """log of (a^a / Gamma(a)) * Gamma(a + phi) / (a + psi)^(a + phi), a = 1/theta_w.

    Rewritten as [gammaln(a+phi) - gammaln(a) - phi log a] - (a + phi) log1p(psi/a)
    so nothing of size a log a is formed; stable as theta_w -> 0.
    """
    if not theta_w > 0:
        raise DomainError(f"theta_w must be > 0, got {theta_w}")
    a = 1.0 / theta_w
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    out = _lgamma_ratio_minus_log(a, phi) - (a + phi) * np.log1p(psi / a)
    return out if out.ndim else float(out)


def _as_eta_matrix(arr: DesignArrays, eta) -> np.ndarray:
    if isinstance(eta, (LatentDraw, DrawSet)):
        eta = eta.eta
    E = np.asarray(eta, dtype=float)
    if E.ndim == 1:
        E = E[None, :]
    if E.shape[1] != arr.n_type2:
        raise DomainError(f"eta must supply {arr.n_type2} values per draw, got {E.shape[1]}")
    if np.any((E != 0) & (E != 1)):
        raise DomainError("eta values must be 0 or 1")
    return E


def _check_y(arr: DesignArrays) -> None:
    if np.any(~(arr.y > 0)):
        raise DomainError("all gap times must be > 0")


def cluster_loglik_matrix(
    dataset: Dataset,
    params: ModelParams,
    eta,
    w=None,
    kind: str = "complete",
    terms: IntervalTerms | None = None,
) -> np.ndarray:
    """Per-draw, per-cluster log-likelihood, shape (M, C).

    kind: "complete" (frailty values ``w`` supplied, log f_W included),
    "independence" (w = 1, no frailty density) or "marginal" (gamma frailty
    integrated out analytically).
    """
    arr = dataset.arrays
    _check_y(arr)
    E = _as_eta_matrix(arr, eta)
    M = E.shape[0]
    if terms is None:
        terms = interval_terms(arr, params)
    t1 = arr.type1
    C = arr.n_clusters
    d = arr.delta

    ev1 = np.bincount(arr.cluster[t1], weights=np.where(d[t1] == 1, terms.logh0[t1], 0.0), minlength=C)
    ev2 = segment_sum(E * terms.t2_long + (1.0 - E) * terms.t2_short, arr)
    events = ev1[None, :] + ev2
    phi, psi = suff_stats_matrix(arr, E, terms.H0)

    if kind == "independence":
        return events - psi
    if kind == "marginal":
        if params.frailty.family != "gamma":
            raise DomainError("marginal likelihood requires gamma frailty")
        return events + gamma_marginal_norm(params.frailty.param, phi, psi)
    if kind != "complete":
        raise ValueError(f"unknown likelihood kind {kind!r}")

    if w is None:
        if isinstance(eta, (LatentDraw, DrawSet)) and eta.w is not None:
            w = eta.w
        elif params.frailty.family == "degenerate":
            w = np.ones((M, C))
        else:
            raise DomainError("complete-data likelihood needs one frailty value per cluster")
    W = np.asarray(w, dtype=float).reshape(-1, C)
    if W.shape[0] != M:
        W = np.broadcast_to(W, (M, C))
    if np.any(~(W > 0)):
        raise DomainError("frailty values must be > 0")
    out = events + phi * np.log(W) - W * psi
    if params.frailty.family != "degenerate":
        out = out + log_frailty_density(W, params.frailty)
    return out


def complete_loglik(dataset: Dataset, latent: LatentDraw, params: ModelParams) -> float:
    """log L^(1): all latent values (eta and one w per cluster) supplied."""
    return float(cluster_loglik_matrix(dataset, params, latent.eta, latent.w, "complete").sum())


def independence_loglik(dataset: Dataset, eta, params: ModelParams) -> float:
    """Log-likelihood with every frailty fixed at 1 (no frailty density term)."""
    return float(cluster_loglik_matrix(dataset, params, eta, kind="independence").sum())


def marginal_gamma_loglik(dataset: Dataset, eta, params: ModelParams) -> float:
    """log L^(2): gamma frailty integrated out, eta supplied."""
    return float(marginal_gamma_loglik_by_cluster(dataset, eta, params).sum())


def marginal_gamma_loglik_by_cluster(dataset: Dataset, eta, params: ModelParams) -> np.ndarray:
    return cluster_loglik_matrix(dataset, params, eta, kind="marginal")[0]


def complete_loglik_by_cluster(dataset: Dataset, latent: LatentDraw, params: ModelParams) -> np.ndarray:
    return cluster_loglik_matrix(dataset, params, latent.eta, latent.w, "complete")[0]
