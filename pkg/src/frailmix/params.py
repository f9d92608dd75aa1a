"""Parameter containers and the flat-vector layout used by the optimizer.

The flat layout orders parameters as

    [frailty param], lambda1, gamma1, beta_1..beta_p, lambda2, gamma2, alpha0, alpha_1..alpha_p

where the frailty parameter is ``theta_w`` (gamma variance) or ``sigma_w``
(log-normal log-scale SD) and is absent for the degenerate (no-frailty)
model.  Rates, shapes and the frailty parameter are strictly positive; the
optimizer works on their logarithms ("internal" coordinates).
"""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError

FAMILIES = ("gamma", "lognormal", "degenerate")

MODEL_TAGS = {
    "independence": "degenerate",
    "gamma-frailty": "gamma",
    "lognormal-frailty": "lognormal",
}
FAMILY_TO_TAG = {v: k for k, v in MODEL_TAGS.items()}


@dataclass(frozen=True)
class FrailtySpec:
    family: str
    param: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown frailty family {self.family!r}")
        if self.family == "degenerate":
            if self.param is not None:
                raise DomainError("degenerate frailty takes no parameter")
        elif self.param is None or not self.param > 0 or not np.isfinite(self.param):
            raise DomainError(f"{self.family} frailty parameter must be > 0, got {self.param}")

    @classmethod
    def gamma(cls, theta_w: float) -> FrailtySpec:
        return cls("gamma", float(theta_w))

    @classmethod
    def lognormal(cls, sigma_w: float) -> FrailtySpec:
        return cls("lognormal", float(sigma_w))

    @classmethod
    def degenerate(cls) -> FrailtySpec:
        return cls("degenerate", None)

    @property
    def param_name(self) -> str | None:
        return {"gamma": "theta_w", "lognormal": "sigma_w"}.get(self.family)


def _as_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class Type1Params:
    """Weibull PH parameters for Type 1 and Type 2-L gaps."""

    lambda1: float
    gamma1: float
    beta: tuple[float, ...] = ()

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.gamma1 > 0):
            raise DomainError(f"lambda1, gamma1 must be > 0, got {self.lambda1}, {self.gamma1}")
        object.__setattr__(self, "beta", _as_tuple(self.beta) if len(self.beta) else ())


@dataclass(frozen=True)
class Type2Params:
    """Weibull parameters for Type 2-S gaps (no covariates, no frailty)."""

    lambda2: float
    gamma2: float

    def __post_init__(self):
        if not (self.lambda2 > 0 and self.gamma2 > 0):
            raise DomainError(f"lambda2, gamma2 must be > 0, got {self.lambda2}, {self.gamma2}")


@dataclass(frozen=True)
class MixtureParams:
    """Logistic model for P(eta = 1 | z)."""

    alpha0: float
    alpha: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_tuple(self.alpha) if len(self.alpha) else ())
        if not np.isfinite(self.alpha0) or not all(np.isfinite(self.alpha)):
            raise DomainError("mixture coefficients must be finite")


@dataclass(frozen=True)
class ModelParams:
    frailty: FrailtySpec
    t1: Type1Params
    t2: Type2Params
    mix: MixtureParams = field(default_factory=lambda: MixtureParams(0.0))

    def __post_init__(self):
        if len(self.t1.beta) != len(self.mix.alpha):
            raise DomainError(
                f"beta has length {len(self.t1.beta)} but alpha has length {len(self.mix.alpha)}"
            )

    @property
    def p(self) -> int:
        return len(self.t1.beta)

    @property
    def model_tag(self) -> str:
        return FAMILY_TO_TAG[self.frailty.family]

    @property
    def beta(self) -> np.ndarray:
        return np.asarray(self.t1.beta, dtype=float)

    @property
    def alpha(self) -> np.ndarray:
        return np.asarray(self.mix.alpha, dtype=float)

    def names(self) -> list[str]:
        return param_names(self.frailty.family, self.p)

    def to_vector(self) -> np.ndarray:
        head = [] if self.frailty.param is None else [self.frailty.param]
        return np.array(
            head
            + [self.t1.lambda1, self.t1.gamma1, *self.t1.beta]
            + [self.t2.lambda2, self.t2.gamma2, self.mix.alpha0, *self.mix.alpha],
            dtype=float,
        )

    def to_dict(self) -> dict[str, float]:
        return dict(zip(self.names(), map(float, self.to_vector())))

    def with_frailty(self, frailty: FrailtySpec) -> ModelParams:
        return replace(self, frailty=frailty)

    @classmethod
    def from_vector(cls, vec: Sequence[float], family: str, p: int) -> ModelParams:
        vec = np.asarray(vec, dtype=float)
        expected = n_params(family, p)
        if vec.shape != (expected,):
            raise DomainError(f"expected {expected} parameters for family={family}, p={p}; got {vec.shape}")
        i = 0
        if family == "degenerate":
            frailty = FrailtySpec.degenerate()
        else:
            frailty = FrailtySpec(family, float(vec[0]))
            i = 1
        lam1, gam1 = vec[i], vec[i + 1]
        beta = vec[i + 2 : i + 2 + p]
        i += 2 + p
        lam2, gam2, a0 = vec[i], vec[i + 1], vec[i + 2]
        alpha = vec[i + 3 : i + 3 + p]
        return cls(
            frailty,
            Type1Params(float(lam1), float(gam1), tuple(beta)),
            Type2Params(float(lam2), float(gam2)),
            MixtureParams(float(a0), tuple(alpha)),
        )

    @classmethod
    def from_dict(cls, values: dict[str, float], family: str, p: int) -> ModelParams:
        names = param_names(family, p)
        missing = [n for n in names if n not in values]
        if missing:
            raise DomainError(f"missing parameters: {', '.join(missing)}")
        return cls.from_vector([values[n] for n in names], family, p)


def param_names(family: str, p: int) -> list[str]:
    head = {"gamma": ["theta_w"], "lognormal": ["sigma_w"]}.get(family, [])
    return (
        head
        + ["lambda1", "gamma1"]
        + [f"beta{j}" for j in range(1, p + 1)]
        + ["lambda2", "gamma2", "alpha0"]
        + [f"alpha{j}" for j in range(1, p + 1)]
    )


def n_params(family: str, p: int) -> int:
    return len(param_names(family, p))


def positive_mask(family: str, p: int) -> np.ndarray:
    names = param_names(family, p)
    positive = {"theta_w", "sigma_w", "lambda1", "gamma1", "lambda2", "gamma2"}
    return np.array([n in positive for n in names])


def to_internal(params: ModelParams) -> np.ndarray:
    """Natural vector -> optimizer coordinates (log for positive entries)."""
    vec = params.to_vector()
    mask = positive_mask(params.frailty.family, params.p)
    vec[mask] = np.log(vec[mask])
    return vec


def from_internal(u: np.ndarray, family: str, p: int) -> ModelParams:
    vec = np.array(u, dtype=float)
    mask = positive_mask(family, p)
    vec[mask] = np.exp(vec[mask])
    return ModelParams.from_vector(vec, family, p)


def internal_jacobian(params: ModelParams) -> np.ndarray:
    """Diagonal of d(natural)/d(internal) at ``params``."""
    vec = params.to_vector()
    mask = positive_mask(params.frailty.family, params.p)
    return np.where(mask, vec, 1.0)


# Estimates and standard errors reported for the 2019 Chinese Super League
# gamma-frailty fit.  Used as simulation truth and as a reference table.
CSL_2019_ESTIMATES = {
    "theta_w": 0.247,
    "lambda1": 0.021,
    "gamma1": 0.924,
    "beta1": -0.024,
    "beta2": 0.172,
    "beta3": -0.096,
    "beta4": -0.134,
    "beta5": -0.019,
    "lambda2": 1.463,
    "gamma2": 3.542,
    "alpha0": 1.638,
    "alpha1": 0.122,
    "alpha2": 0.296,
    "alpha3": 0.050,
    "alpha4": -0.385,
    "alpha5": 0.076,
}
CSL_2019_STANDARD_ERRORS = {
    "theta_w": 0.051,
    "lambda1": 0.002,
    "gamma1": 0.024,
    "beta1": 0.066,
    "beta2": 0.082,
    "beta3": 0.029,
    "beta4": 0.113,
    "beta5": 0.015,
    "lambda2": 0.062,
    "gamma2": 0.379,
    "alpha0": 0.086,
    "alpha1": 0.228,
    "alpha2": 0.118,
    "alpha3": 0.089,
    "alpha4": 0.069,
    "alpha5": 0.030,
}


def csl_2019_params() -> ModelParams:
    return ModelParams.from_dict(CSL_2019_ESTIMATES, "gamma", 5)
