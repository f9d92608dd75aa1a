"""Weibull hazards, survival functions and the Type-2 mixture probability.

Type 1 and Type 2-L gaps share the proportional-hazards Weibull

    h1(t | z, w) = w * gamma1 * lambda1 * (lambda1 t)^(gamma1 - 1) * exp(z'beta)

and Type 2-S gaps follow a covariate-free Weibull with (lambda2, gamma2).
All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, log_expit
from scipy.special import gamma as gamma_fn

from .errors import DomainError
from .params import MixtureParams, Type1Params, Type2Params


def _check_time(t, strict: bool) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    bad = ~(t > 0) if strict else ~(t >= 0)
    if np.any(bad):
        raise DomainError(f"time must be {'> 0' if strict else '>= 0'}")
    return t


def _check_frailty(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if np.any(~(w > 0)):
        raise DomainError("frailty value must be > 0")
    return w


def linear_predictor(z, coef) -> np.ndarray:
    """z'coef for a single vector or a row-stacked matrix of covariates."""
    coef = np.asarray(coef, dtype=float)
    if coef.size == 0:
        z = np.asarray(z, dtype=float)
        return np.zeros(z.shape[:-1]) if z.ndim > 1 else np.float64(0.0)
    return np.asarray(z, dtype=float) @ coef


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def log_hazard_weibull(t, lam, shape) -> np.ndarray:
    return np.log(shape) + np.log(lam) + (shape - 1.0) * np.log(lam * t)


def cumhaz_weibull(t, lam, shape) -> np.ndarray:
    return np.power(lam * t, shape)


def hazard1(t, z, w, p1: Type1Params):
    t = _check_time(t, strict=True)
    w = _check_frailty(w)
    eta = linear_predictor(z, p1.beta)
    return _scalar(w * np.exp(log_hazard_weibull(t, p1.lambda1, p1.gamma1) + eta))


def survival1(t, z, w, p1: Type1Params):
    t = _check_time(t, strict=False)
    w = _check_frailty(w)
    eta = linear_predictor(z, p1.beta)
    return _scalar(np.exp(-w * cumhaz_weibull(t, p1.lambda1, p1.gamma1) * np.exp(eta)))


def hazard2(t, p2: Type2Params):
    t = _check_time(t, strict=True)
    return _scalar(np.exp(log_hazard_weibull(t, p2.lambda2, p2.gamma2)))


def survival2(t, p2: Type2Params):
    t = _check_time(t, strict=False)
    return _scalar(np.exp(-cumhaz_weibull(t, p2.lambda2, p2.gamma2)))


def mixture_logit(z, mix: MixtureParams):
    return mix.alpha0 + linear_predictor(z, mix.alpha)


def mixture_prob(z, mix: MixtureParams):
    """P(eta = 1 | z): logistic in alpha0 + z'alpha."""
    return _scalar(expit(mixture_logit(z, mix)))


def log_mixture_probs(z, mix: MixtureParams) -> tuple[np.ndarray, np.ndarray]:
    """(log pi, log(1 - pi)) without cancellation for large |logit|."""
    x = mixture_logit(z, mix)
    return log_expit(x), log_expit(-x)


def weibull_mean(lam: float, shape: float) -> float:
    """Mean of a Weibull with cumulative hazard (lam t)^shape."""
    if not (lam > 0 and shape > 0):
        raise DomainError(f"rate and shape must be > 0, got {lam}, {shape}")
    return float(gamma_fn(1.0 + 1.0 / shape) / lam)
