"""Synthetic clustered gap-time data from the full generative model.

Each game produces two independent clusters (home and away).  Within a
cluster, time runs forward through two halves.  At every step a candidate
corner gap is drawn from the Type-1 law (predecessor not a corner) or the
Type-2 mixture (predecessor a corner), and competes with an interior
censoring time ~ Exponential(censor_rate) and with the end of the half.

Covariate rules (p = 5): z1 = 1 in the first half; z2 = 1 for the home
team; z3 (score differential) and z4 (red-card differential) move by +-1 at
interior censoring events, each event carrying a goal with probability
goal_rate / censor_rate and a red card with probability
red_card_rate / censor_rate (both capped at 1), so the covariate paths keep
realistic per-minute rates whatever the censoring intensity; z5 (decimal
odds) is drawn once per team-game from Uniform(odds_range).  With p = 0 no
covariates are generated.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, GameCluster, IntervalObservation
from .errors import DomainError
from .frailty import sample_prior
from .hazards import linear_predictor, mixture_prob
from .params import ModelParams, Type1Params, Type2Params, csl_2019_params

# Interior censoring rate per minute: about 2.7 stoppages per 90 minutes,
# a typical goal rate.
DEFAULT_CENSOR_RATE = 0.03


@dataclass(frozen=True)
class SimConfig:
    truth: ModelParams
    n_games: int
    half_length: float = 45.0
    censor_rate: float = DEFAULT_CENSOR_RATE
    n_teams: int = 16
    odds_range: tuple[float, float] = (1.3, 6.0)
    goal_rate: float = DEFAULT_CENSOR_RATE
    red_card_rate: float = 0.0015
    seed: int = 0

    def __post_init__(self):
        if self.n_games < 1:
            raise DomainError("n_games must be >= 1")
        if not self.half_length > 0:
            raise DomainError("half_length must be > 0")
        if not self.censor_rate >= 0:
            raise DomainError("censor_rate must be >= 0")
        if not (self.goal_rate >= 0 and self.red_card_rate >= 0):
            raise DomainError("goal_rate and red_card_rate must be >= 0")
        if self.n_teams < 2:
            raise DomainError("need at least two teams")
        lo, hi = self.odds_range
        if not (1 < lo <= hi):
            raise DomainError("odds_range must satisfy 1 < low <= high")
        if self.truth.p not in (0, 5):
            raise DomainError("the simulator generates either 0 or 5 covariates")


@dataclass(frozen=True)
class SimTruth:
    """Latent values behind a simulated dataset.

    ``w`` has one entry per cluster; ``eta`` is aligned with the dataset's
    Type-2 intervals.
    """

    w: np.ndarray
    eta: np.ndarray


def type1_quantile(e, z, w, p1: Type1Params):
    """Gap with cumulative hazard ``e``: (1/lambda1) (e / (w exp(z'beta)))^(1/gamma1)."""
    if np.any(np.asarray(w) <= 0):
        raise DomainError("frailty value must be > 0")
    scale = w * np.exp(linear_predictor(z, p1.beta))
    return (np.asarray(e) / scale) ** (1.0 / p1.gamma1) / p1.lambda1


def draw_gap_type1(z, w, p1: Type1Params, rng: np.random.Generator, size=None):
    return type1_quantile(rng.exponential(size=size), z, w, p1)


def draw_gap_type2s(p2: Type2Params, rng: np.random.Generator, size=None):
    return rng.exponential(size=size) ** (1.0 / p2.gamma2) / p2.lambda2


def draw_gap_type2(z, w, params: ModelParams, rng: np.random.Generator, size=None):
    """Gap after a corner and its true eta (1 = long gap from the Type-1 law)."""
    pi = mixture_prob(z, params.mix)
    eta = np.asarray(rng.random(size) < pi, dtype=np.int8)
    long_gap = draw_gap_type1(z, w, params.t1, rng, size)
    short_gap = draw_gap_type2s(params.t2, rng, size)
    gap = np.where(eta == 1, long_gap, short_gap)
    if size is None:
        return float(gap), int(eta)
    return gap, eta


def _simulate_cluster(rng, cfg: SimConfig, home: bool, w: float):
    truth = cfg.truth
    p = truth.p
    odds = rng.uniform(*cfg.odds_range) if p else 0.0
    score = 0
    reds = 0
    rate = cfg.censor_rate
    p_goal = min(1.0, cfg.goal_rate / rate) if rate > 0 else 0.0
    p_red = min(1.0, cfg.red_card_rate / rate) if rate > 0 else 0.0
    rows = []
    etas = []
    for half in (1, 2):
        t = 0.0
        prev = 0
        while True:
            z = (float(half == 1), float(home), float(score), float(reds), odds) if p else ()
            if prev == 1:
                gap, eta = draw_gap_type2(z, w, truth, rng)
            else:
                gap, eta = float(draw_gap_type1(z, w, truth.t1, rng)), None
            interior = rng.exponential(1.0 / cfg.censor_rate) if cfg.censor_rate > 0 else np.inf
            remaining = cfg.half_length - t
            cens = min(interior, remaining)
            if gap <= cens:
                y, delta = gap, 1
            else:
                y, delta = cens, 0
            if not y > 0:
                # zero-length gap from floating underflow; redraw the step
                continue
            rows.append(IntervalObservation(float(y), delta, prev, z))
            if prev == 1:
                etas.append(eta)
            t += y
            prev = delta
            if delta == 0:
                if interior < remaining:
                    if rng.random() < p_goal:
                        score += 1 if rng.random() < 0.5 else -1
                    if rng.random() < p_red:
                        reds += 1 if rng.random() < 0.5 else -1
                else:
                    break
    return rows, etas


def _teams(g: int, n_teams: int) -> tuple[int, int]:
    home = g % n_teams
    away = (home + 1 + (g // n_teams) % (n_teams - 1)) % n_teams
    return home, away


def simulate_dataset(config: SimConfig) -> tuple[Dataset, SimTruth]:
    clusters = []
    ws = []
    etas: list[int] = []
    for g in range(config.n_games):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed, spawn_key=(g,))))
        game_id = f"G{g + 1:04d}"
        for team, home in zip(_teams(g, config.n_teams), (True, False)):
            w = float(sample_prior(config.truth.frailty, rng))
            rows, eta = _simulate_cluster(rng, config, home, w)
            clusters.append(GameCluster(f"T{team + 1:02d}", game_id, tuple(rows)))
            ws.append(w)
            etas.extend(eta)
    return Dataset(tuple(clusters), config.truth.p), SimTruth(np.array(ws), np.array(etas, dtype=np.int8))


def write_truth_csv(dataset: Dataset, truth: SimTruth, path: str | Path) -> None:
    """Sidecar file: one row per interval with the cluster's w and the interval's eta (blank if Type 1)."""
    it = iter(truth.eta)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["team_id", "game_id", "k", "w_true", "eta_true"])
        for c, w in zip(dataset.clusters, truth.w):
            for k, iv in enumerate(c.intervals, 1):
                eta = int(next(it)) if iv.delta_prev == 1 else ""
                writer.writerow([c.team_id, c.game_id, k, repr(float(w)), eta])


def default_truth() -> ModelParams:
    return csl_2019_params()
