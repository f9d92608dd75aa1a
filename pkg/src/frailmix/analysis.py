"""Wald tests, likelihood-ratio comparison, BIC and survival-curve tables."""
from __future__ import annotations

import csv
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import chi2, norm

from .errors import DomainError
from .frailty import sample_prior
from .hazards import survival1, survival2
from .params import ModelParams

LRT_SLACK = 1e-6
FIGURES = ("fig1", "fig2", "fig3")
BOUNDARY_NOTE = (
    "theta_w = 0 lies on the boundary of the parameter space; the plain "
    "chi-square reference is conservative (a 50:50 chi-square mixture would halve p)."
)


# ---------------------------------------------------------------------------
# Wald tests


@dataclass(frozen=True)
class WaldRow:
    name: str
    estimate: float
    se: float
    z: float
    p_value: float
    significant: bool


def wald_table(estimates: Mapping[str, float], se: Mapping[str, float], level: float = 0.05) -> list[WaldRow]:
    """z = estimate / SE with a two-sided normal p-value; significant iff p < level."""
    if not 0 < level < 1:
        raise DomainError(f"level must be in (0, 1), got {level}")
    rows = []
    for name, est in estimates.items():
        s = float(se[name])
        if not (np.isfinite(s) and s > 0):
            raise DomainError(f"standard error of {name} must be finite and > 0, got {s}")
        z = float(est) / s
        p = float(2.0 * norm.sf(abs(z)))
        rows.append(WaldRow(name, float(est), s, z, p, p < level))
    return rows


def wald_tests(fit, level: float = 0.05) -> list[WaldRow]:
    """Wald table for a :class:`~frailmix.mcem.FitResult`."""
    return wald_table(fit.estimates, fit.se, level)


# ---------------------------------------------------------------------------
# model comparison


def likelihood_ratio_test(loglik_reduced: float, loglik_full: float, df: int = 1) -> tuple[float, float]:
    """Lambda = -2 (l_reduced - l_full) and its chi-square(df) upper-tail p-value."""
    if df < 1:
        raise DomainError(f"df must be >= 1, got {df}")
    lam = -2.0 * (float(loglik_reduced) - float(loglik_full))
    if lam < -LRT_SLACK:
        raise DomainError(
            f"full model log-likelihood {loglik_full} is below the reduced model's {loglik_reduced}; "
            "fits are not nested or did not converge"
        )
    lam = max(lam, 0.0)
    return lam, float(chi2.sf(lam, df))


def bic(loglik: float, n_params: int, n_obs: int) -> float:
    if n_obs < 1:
        raise DomainError(f"n_obs must be >= 1, got {n_obs}")
    return -2.0 * float(loglik) + n_params * math.log(n_obs)


@dataclass(frozen=True)
class ComparisonReport:
    """LRT of a reduced model (a) against a full model (b), plus both BICs.

    ``preferred`` is the tag with the lower BIC; ties go to the reduced model.
    """

    lambda_stat: float
    p_value: float
    df: int
    bic_a: float
    bic_b: float
    preferred: str
    model_a: str
    model_b: str
    loglik_a: float
    loglik_b: float
    n_obs: int
    notes: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "model_a": self.model_a,
            "model_b": self.model_b,
            "loglik_a": self.loglik_a,
            "loglik_b": self.loglik_b,
            "lambda": self.lambda_stat,
            "df": self.df,
            "p_value": self.p_value,
            "n_obs": self.n_obs,
            "bic_a": self.bic_a,
            "bic_b": self.bic_b,
            "preferred": self.preferred,
            "notes": list(self.notes),
        }

    def to_text(self) -> str:
        p = "< 0.0001" if self.p_value < 1e-4 else f"{self.p_value:.4f}"
        lines = [
            f"reduced model   {self.model_a:<20s} loglik {self.loglik_a:.4f}",
            f"full model      {self.model_b:<20s} loglik {self.loglik_b:.4f}",
            f"LRT statistic   {self.lambda_stat:.4f}",
            f"df              {self.df}",
            f"p-value         {p}",
            f"n_obs (BIC)     {self.n_obs}",
            f"BIC reduced     {self.bic_a:.2f}",
            f"BIC full        {self.bic_b:.2f}",
            f"preferred       {self.preferred}",
        ]
        lines += [f"note: {n}" for n in self.notes]
        return "\n".join(lines) + "\n"


def compare_models(
    loglik_a: float,
    loglik_b: float,
    n_params_a: int,
    n_params_b: int,
    n_obs: int,
    model_a: str = "independence",
    model_b: str = "gamma-frailty",
) -> ComparisonReport:
    """Compare a reduced model ``a`` nested in a full model ``b``."""
    df = n_params_b - n_params_a
    if df < 1:
        raise DomainError(f"model {model_b} must have more parameters than {model_a}")
    lam, p = likelihood_ratio_test(loglik_a, loglik_b, df)
    bic_a = bic(loglik_a, n_params_a, n_obs)
    bic_b = bic(loglik_b, n_params_b, n_obs)
    preferred = model_b if bic_b < bic_a else model_a
    notes = (BOUNDARY_NOTE,) if model_a == "independence" else ()
    return ComparisonReport(lam, p, df, bic_a, bic_b, preferred, model_a, model_b,
                            float(loglik_a), float(loglik_b), int(n_obs), notes)


# ---------------------------------------------------------------------------
# survival curves


def default_grid() -> np.ndarray:
    """0 to 3 minutes by 0.01 joined with 3 to 90 minutes by 0.1."""
    fine = np.round(np.arange(0, 301) * 0.01, 10)
    coarse = np.round(np.arange(31, 901) * 0.1, 10)
    return np.concatenate([fine, coarse])


@dataclass(frozen=True)
class CurveTable:
    """Survival curves on a shared grid; every column starts at 1 and never increases."""

    t_grid: np.ndarray
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        t = np.asarray(self.t_grid, dtype=float)
        if t.ndim != 1 or t.size == 0 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise DomainError("t_grid must be increasing and start at 0")
        for name, col in self.columns.items():
            col = np.asarray(col)
            if col.shape != t.shape:
                raise DomainError(f"column {name} has {col.size} values for {t.size} grid points")
            if col[0] != 1.0 or np.any(np.diff(col) > 0):
                raise DomainError(f"column {name} is not a survival curve")

    def to_csv(self, path: str | Path) -> None:
        names = list(self.columns)
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", *names])
            cols = [self.columns[n] for n in names]
            for i, t in enumerate(self.t_grid):
                writer.writerow([f"{t:.10g}", *(f"{c[i]:.12g}" for c in cols)])


def _reference_z(p: int, home: bool | None = None) -> np.ndarray:
    z = np.zeros(p)
    if home is not None:
        if p < 2:
            raise DomainError("home/away curves need the home indicator as the second covariate")
        z[1] = float(home)
    return z


def survival_curves(
    params: ModelParams,
    figure: str,
    n_frailty_draws: int = 50,
    t_grid=None,
    rng: np.random.Generator | int | None = 0,
    old_params: ModelParams | None = None,
) -> CurveTable:
    """Survival tables with all covariates at zero (home indicator excepted in fig2).

    fig1: ``S1`` (Type 1 / 2-L at w = 1) and ``S2`` (Type 2-S).
    fig2: ``home_w1`` and ``away_w1`` at w = 1, plus ``n_frailty_draws``
    replicates each at frailties drawn from the fitted frailty law.
    fig3: ``S1_old``/``S1_new`` and ``S2_old``/``S2_new`` for an
    independence fit (``old_params``) against ``params``.
    """
    t = default_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    p = params.p
    z0 = _reference_z(p)
    if figure == "fig1":
        cols = {"S1": survival1(t, z0, 1.0, params.t1), "S2": survival2(t, params.t2)}
    elif figure == "fig2":
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        if n_frailty_draws < 0:
            raise DomainError("n_frailty_draws must be >= 0")
        zh, za = _reference_z(p, True), _reference_z(p, False)
        cols = {"home_w1": survival1(t, zh, 1.0, params.t1), "away_w1": survival1(t, za, 1.0, params.t1)}
        ws = np.atleast_1d(sample_prior(params.frailty, rng, size=n_frailty_draws))
        width = max(2, len(str(n_frailty_draws)))
        for side, z in (("home", zh), ("away", za)):
            for i, w in enumerate(ws, 1):
                cols[f"{side}_w{i:0{width}d}"] = survival1(t, z, float(w), params.t1)
    elif figure == "fig3":
        if old_params is None:
            raise DomainError("fig3 needs the independence-model parameters")
        if old_params.p != p:
            raise DomainError("old and new parameters have different covariate dimensions")
        cols = {
            "S1_old": survival1(t, z0, 1.0, old_params.t1),
            "S1_new": survival1(t, z0, 1.0, params.t1),
            "S2_old": survival2(t, old_params.t2),
            "S2_new": survival2(t, params.t2),
        }
    else:
        raise DomainError(f"unknown figure {figure!r}; expected one of {FIGURES}")
    return CurveTable(t, {k: np.asarray(v, dtype=float) for k, v in cols.items()})
