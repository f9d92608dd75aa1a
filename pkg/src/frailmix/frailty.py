"""Frailty families, cluster sufficient statistics and posterior samplers.

Given the eta assignment of a cluster, the frailty enters the complete-data
likelihood only through

    phi = sum_k delta_k * omega_k          (event weight)
    psi = sum_k (lambda1 y_k)^gamma1 exp(z_k'beta) * omega_k   (exposure weight)

with omega_k = 1 - delta_prev_k + eta_k * delta_prev_k, so the frailty
posterior kernel is f_W(w) * w^phi * exp(-w psi).
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .data import DesignArrays, GameCluster
from .errors import DataError, DomainError, SamplerError
from .hazards import cumhaz_weibull, linear_predictor
from .params import FrailtySpec, Type1Params

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


def log_frailty_density(w, spec: FrailtySpec):
    w = np.asarray(w, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("frailty density requires w > 0")
    if spec.family == "gamma":
        a = 1.0 / spec.param
        return a * np.log(a) - gammaln(a) + (a - 1.0) * np.log(w) - a * w
    if spec.family == "lognormal":
        s = spec.param
        lw = np.log(w)
        return -((lw + 0.5 * s * s) ** 2) / (2.0 * s * s) - lw - np.log(s) - LOG_SQRT_2PI
    raise DomainError("degenerate frailty is a point mass and has no density")


def frailty_density(w, spec: FrailtySpec):
    out = np.exp(log_frailty_density(w, spec))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ClusterSuffStats:
    """Event weight ``phi`` and exposure weight ``psi`` (scalars or arrays)."""

    phi: float | np.ndarray
    psi: float | np.ndarray


def suff_stats(cluster: GameCluster, eta: Sequence[int], p1: Type1Params) -> ClusterSuffStats:
    """Sufficient statistics of one cluster; ``eta`` lists the Type-2 intervals in order."""
    eta = list(eta)
    n2 = sum(iv.delta_prev for iv in cluster.intervals)
    if len(eta) != n2:
        raise DataError(f"cluster {cluster.label} has {n2} Type-2 intervals but {len(eta)} eta values")
    beta = np.asarray(p1.beta, dtype=float)
    phi = 0.0
    psi = 0.0
    it = iter(eta)
    for iv in cluster.intervals:
        weight = 1 if iv.delta_prev == 0 else int(next(it))
        if weight:
            phi += iv.delta
            psi += float(cumhaz_weibull(iv.y, p1.lambda1, p1.gamma1) * np.exp(linear_predictor(iv.z, beta)))
    return ClusterSuffStats(phi, psi)


def suff_stats_matrix(arr: DesignArrays, eta: np.ndarray, H0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (phi, psi), each of shape (M, C), for stacked eta draws.

    ``H0`` is the frailty-free Type-1 cumulative hazard of every interval.
    """
    C = arr.n_clusters
    t1 = arr.type1
    phi1 = np.bincount(arr.cluster[t1], weights=arr.delta[t1], minlength=C)
    psi1 = np.bincount(arr.cluster[t1], weights=H0[t1], minlength=C)
    E = np.asarray(eta, dtype=float)
    t2 = arr.type2
    phi2 = segment_sum(E * arr.delta[t2], arr)
    psi2 = segment_sum(E * H0[t2], arr)
    return phi1 + phi2, psi1 + psi2


def segment_sum(X: np.ndarray, arr: DesignArrays) -> np.ndarray:
    """Sum columns of an (M, n_type2) array within clusters -> (M, C)."""
    M = X.shape[0]
    out = np.zeros((M, arr.n_clusters))
    if arr.n_type2 == 0:
        return out
    starts = arr.type2_starts
    nonempty = np.flatnonzero(np.diff(starts) > 0)
    out[:, nonempty] = np.add.reduceat(X, starts[nonempty], axis=1)
    return out


def sample_prior(spec: FrailtySpec, rng: np.random.Generator, size=None):
    if spec.family == "degenerate":
        return 1.0 if size is None else np.ones(size)
    if spec.family == "gamma":
        return rng.gamma(1.0 / spec.param, spec.param, size=size)
    s = spec.param
    return np.exp(rng.normal(-0.5 * s * s, s, size=size))


def sample_gamma_posterior(stats: ClusterSuffStats, theta_w: float, rng: np.random.Generator, size=None):
    """Exact conjugate draw from Gamma(1/theta_w + phi, rate 1/theta_w + psi)."""
    if not theta_w > 0:
        raise DomainError(f"theta_w must be > 0, got {theta_w}")
    a = 1.0 / theta_w
    return rng.gamma(a + np.asarray(stats.phi, float), 1.0 / (a + np.asarray(stats.psi, float)), size=size)


def lognormal_kernel(u, sigma_w: float):
    """Unnormalised log-normal kernel exp(-(ln u + s^2/2)^2 / (2 s^2)); its maximum is 1."""
    lu = np.log(u)
    return np.exp(-((lu + 0.5 * sigma_w**2) ** 2) / (2.0 * sigma_w**2))


def sample_lognormal_posterior(
    stats: ClusterSuffStats,
    sigma_w: float,
    rng: np.random.Generator,
    size=None,
    max_proposals: int = 1_000_000,
):
    """Rejection sampler for r(w) = LN-kernel(w) * w^(phi-1) * exp(-w psi).

    * phi >= 1, psi > 0: propose Gamma(phi, rate psi); the Gamma density
      matches w^(phi-1) exp(-w psi) up to a constant, so the acceptance
      probability is the log-normal kernel itself (<= 1).
    * phi == 0: propose from the log-normal prior and accept with
      probability exp(-u psi), which is u^phi exp(-u psi) divided by its
      supremum (1) over u > 0.
    * psi == 0, phi >= 1: the target is log-normal with log-mean shifted by
      phi * sigma^2 and is drawn exactly.

    These envelopes replace the unbounded ratio test r(u)/g(u) and the
    Gamma(phi+1, psi+1) fallback, neither of which is a valid envelope.
    """
    if not sigma_w > 0:
        raise DomainError(f"sigma_w must be > 0, got {sigma_w}")
    phi = np.asarray(stats.phi, dtype=float)
    psi = np.asarray(stats.psi, dtype=float)
    if np.any(phi < 0) or np.any(psi < 0):
        raise DomainError("phi and psi must be >= 0")
    shape = np.broadcast_shapes(phi.shape, psi.shape) if size is None else tuple(np.atleast_1d(size))
    phi = np.broadcast_to(phi, shape).ravel()
    psi = np.broadcast_to(psi, shape).ravel()
    s2 = sigma_w * sigma_w
    n = phi.size
    out = np.empty(n)
    tries = np.zeros(n, dtype=np.int64)

    exact = (psi == 0) & (phi >= 1)
    if np.any(exact):
        out[exact] = np.exp(rng.normal(-0.5 * s2 + phi[exact] * s2, sigma_w))
    pending = np.flatnonzero(~exact)
    while pending.size:
        ph, ps = phi[pending], psi[pending]
        use_gamma = (ph >= 1) & (ps > 0)
        u = np.empty(pending.size)
        accept_p = np.empty(pending.size)
        g = np.flatnonzero(use_gamma)
        if g.size:
            u[g] = rng.gamma(ph[g], 1.0 / ps[g])
            accept_p[g] = lognormal_kernel(u[g], sigma_w)
        o = np.flatnonzero(~use_gamma)
        if o.size:
            u[o] = np.exp(rng.normal(-0.5 * s2, sigma_w, size=o.size))
            accept_p[o] = np.exp(-u[o] * ps[o])
        v = rng.random(pending.size)
        ok = v < accept_p
        out[pending[ok]] = u[ok]
        tries[pending] += 1
        pending = pending[~ok]
        if pending.size and tries[pending].max() >= max_proposals:
            i = pending[np.argmax(tries[pending])]
            raise SamplerError(
                f"rejection sampler exceeded {max_proposals} proposals "
                f"(phi={phi[i]}, psi={psi[i]}, sigma_w={sigma_w})"
            )
    out = out.reshape(shape)
    return float(out) if out.ndim == 0 else out


def sample_posterior(spec: FrailtySpec, stats: ClusterSuffStats, rng: np.random.Generator, size=None):
    if spec.family == "gamma":
        return sample_gamma_posterior(stats, spec.param, rng, size)
    if spec.family == "lognormal":
        return sample_lognormal_posterior(stats, spec.param, rng, size)
    shape = np.broadcast_shapes(np.shape(stats.phi), np.shape(stats.psi)) if size is None else size
    return np.ones(shape)
