"""Monte Carlo imputations of the latent (eta, w) values."""
from __future__ import annotations

from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LatentDraw:
    """One imputation for a whole dataset.

    ``eta`` is aligned with ``dataset.arrays.type2`` (intervals whose
    predecessor was a corner); ``w`` holds one frailty per cluster, or is
    None when frailties have been integrated out.
    """

    eta: np.ndarray
    w: np.ndarray | None = None


@dataclass(frozen=True)
class DrawSet:
    """M stacked draws: ``eta`` has shape (M, n_type2), ``w`` (M, n_clusters)."""

    eta: np.ndarray
    w: np.ndarray | None = None

    def __post_init__(self):
        if self.eta.ndim != 2:
            raise ValueError("eta must be 2-D (draws x type-2 intervals)")
        if self.w is not None and self.w.shape[0] != self.eta.shape[0]:
            raise ValueError("eta and w disagree on the number of draws")

    def __len__(self) -> int:
        return self.eta.shape[0]

    def __getitem__(self, m: int) -> LatentDraw:
        return LatentDraw(self.eta[m], None if self.w is None else self.w[m])

    def __iter__(self) -> Iterator[LatentDraw]:
        return (self[m] for m in range(len(self)))

    @classmethod
    def from_draws(cls, draws: Sequence[LatentDraw]) -> DrawSet:
        if not draws:
            raise ValueError("need at least one draw")
        eta = np.stack([np.asarray(d.eta, dtype=np.int8) for d in draws])
        ws = [d.w for d in draws]
        w = None if any(x is None for x in ws) else np.stack([np.asarray(x, dtype=float) for x in ws])
        return cls(eta, w)

    def eta_mean(self) -> np.ndarray:
        return self.eta.mean(axis=0)
