"""Clustered gap-time data: containers, CSV ingestion and validation.

One cluster is one team in one game.  Within a cluster, intervals are
ordered; ``delta_prev`` of interval k is the event indicator of interval
k-1 and is 0 for the first interval (play always starts with a non-corner
restart).  Intervals with ``delta_prev == 1`` ("Type 2") carry a latent
indicator eta during fitting.
"""
from __future__ import annotations

import csv
import hashlib
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DataError

BASE_COLUMNS = ("team_id", "game_id", "k", "y", "delta")
_Z_COLUMN = re.compile(r"^z(\d+)$")

# Column layout of the corner-kick covariates: z1 first half, z2 home,
# z3 score differential, z4 red-card differential, z5 decimal odds.
CORNER_INDICATOR_COLUMNS = (0, 1)
CORNER_ODDS_COLUMNS = (4,)


@dataclass(frozen=True)
class IntervalObservation:
    y: float
    delta: int
    delta_prev: int
    z: tuple[float, ...] = ()

    @property
    def eta_defined(self) -> bool:
        return self.delta_prev == 1


@dataclass(frozen=True)
class GameCluster:
    team_id: str
    game_id: str
    intervals: tuple[IntervalObservation, ...]

    @property
    def key(self) -> tuple[str, str]:
        return (self.team_id, self.game_id)

    @property
    def label(self) -> str:
        return f"{self.team_id}/{self.game_id}"

    def __len__(self) -> int:
        return len(self.intervals)


@dataclass(frozen=True)
class DesignArrays:
    """Flat numpy view of a dataset, intervals in cluster order."""

    y: np.ndarray
    delta: np.ndarray
    delta_prev: np.ndarray
    Z: np.ndarray
    cluster: np.ndarray
    starts: np.ndarray
    type1: np.ndarray
    type2: np.ndarray

    @property
    def n_intervals(self) -> int:
        return self.y.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.starts.shape[0] - 1

    @property
    def n_type2(self) -> int:
        return self.type2.shape[0]

    @cached_property
    def type2_cluster(self) -> np.ndarray:
        return self.cluster[self.type2]

    @cached_property
    def type2_starts(self) -> np.ndarray:
        """Offsets into the type-2 index array, one slot per cluster (length C+1)."""
        counts = np.bincount(self.type2_cluster, minlength=self.n_clusters)
        return np.concatenate([[0], np.cumsum(counts)])


@dataclass(frozen=True)
class Dataset:
    clusters: tuple[GameCluster, ...]
    covariate_dim: int

    def __len__(self) -> int:
        return len(self.clusters)

    @property
    def n_intervals(self) -> int:
        return sum(len(c) for c in self.clusters)

    @property
    def n_events(self) -> int:
        return sum(iv.delta for c in self.clusters for iv in c.intervals)

    @cached_property
    def arrays(self) -> DesignArrays:
        ivs = [iv for c in self.clusters for iv in c.intervals]
        sizes = np.array([len(c) for c in self.clusters], dtype=np.int64)
        starts = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        p = self.covariate_dim
        Z = np.array([iv.z for iv in ivs], dtype=float).reshape(len(ivs), p)
        dprev = np.array([iv.delta_prev for iv in ivs], dtype=np.int8)
        return DesignArrays(
            y=np.array([iv.y for iv in ivs], dtype=float),
            delta=np.array([iv.delta for iv in ivs], dtype=np.int8),
            delta_prev=dprev,
            Z=Z,
            cluster=np.repeat(np.arange(len(self.clusters)), sizes),
            starts=starts,
            type1=np.flatnonzero(dprev == 0),
            type2=np.flatnonzero(dprev == 1),
        )

    def subset(self, indices: Iterable[int]) -> Dataset:
        return Dataset(tuple(self.clusters[i] for i in indices), self.covariate_dim)

    def sha256(self) -> str:
        h = hashlib.sha256()
        for c in self.clusters:
            for k, iv in enumerate(c.intervals, 1):
                h.update(repr((c.team_id, c.game_id, k, iv.y, iv.delta, iv.z)).encode())
        return h.hexdigest()


def make_cluster(team_id: str, game_id: str, rows: Sequence[tuple]) -> GameCluster:
    """Build a cluster from ``(y, delta, z)`` rows, deriving ``delta_prev``."""
    intervals = []
    prev = 0
    for y, delta, z in rows:
        intervals.append(IntervalObservation(float(y), int(delta), prev, tuple(float(v) for v in z)))
        prev = int(delta)
    return GameCluster(str(team_id), str(game_id), tuple(intervals))


def derive_delta_prev(deltas: Sequence[int]) -> list[int]:
    return [0] + [int(d) for d in deltas[:-1]] if len(deltas) else []


def load_event_csv(path: str | Path) -> Dataset:
    """Read the event CSV, raising :class:`DataError` at the first problem."""
    return _read_event_csv(path, None)


def scan_event_csv(path: str | Path) -> tuple[Dataset | None, list[str]]:
    """Read the event CSV leniently.

    Returns the dataset built from the rows and clusters that parsed cleanly
    together with one message per problem found.  File-level problems
    (missing file, bad header, no rows) yield ``(None, [message])``.
    """
    problems: list[str] = []
    try:
        ds = _read_event_csv(path, problems)
    except DataError as exc:
        return None, [str(exc)]
    return ds, problems


def _read_event_csv(path: str | Path, problems: list[str] | None) -> Dataset:
    path = Path(path)

    def report(msg: str) -> None:
        if problems is None:
            raise DataError(msg)
        problems.append(msg)

    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty dataset") from None
        missing = [c for c in BASE_COLUMNS if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {', '.join(missing)}")
        z_idx = sorted(
            (int(m.group(1)), i) for i, h in enumerate(header) if (m := _Z_COLUMN.match(h))
        )
        p = len(z_idx)
        if [j for j, _ in z_idx] != list(range(1, p + 1)):
            raise DataError(f"{path}: covariate columns must be z1..zp without gaps")
        col = {h: i for i, h in enumerate(header)}
        has_prev = "delta_prev" in col

        groups: dict[tuple[str, str], list[tuple]] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                report(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                continue
            try:
                team, game = row[col["team_id"]].strip(), row[col["game_id"]].strip()
                k = int(row[col["k"]])
                y = float(row[col["y"]])
                delta = int(row[col["delta"]])
                z = tuple(float(row[i]) for _, i in z_idx)
                dprev = int(row[col["delta_prev"]]) if has_prev else None
            except ValueError as exc:
                report(f"{path}:{lineno}: unparseable value ({exc})")
                continue
            bad = False
            if not (y > 0 and np.isfinite(y)):
                report(f"{path}:{lineno}: gap time y must be > 0, got {y}")
                bad = True
            if delta not in (0, 1):
                report(f"{path}:{lineno}: delta must be 0 or 1, got {delta}")
                bad = True
            if not all(np.isfinite(z)):
                report(f"{path}:{lineno}: non-finite covariate")
                bad = True
            # a dropped row still occupies its k so later checks stay local
            groups.setdefault((team, game), []).append((k, y, delta, z, dprev, lineno, bad))

    if not groups:
        raise DataError(f"{path}: empty dataset")

    clusters = []
    for (team, game), rows in groups.items():
        rows.sort(key=lambda r: r[0])
        ks = [r[0] for r in rows]
        ok = True
        dups = sorted({a for a, b in zip(ks, ks[1:]) if a == b})
        for a in dups:
            report(f"{path}: duplicate row ({team}, {game}, k={a})")
            ok = False
        if not dups and ks != list(range(1, len(ks) + 1)):
            report(f"{path}: cluster ({team}, {game}) has k sequence {ks}, expected 1..{len(ks)}")
            ok = False
        if not ok or any(r[6] for r in rows):
            continue
        cluster = make_cluster(team, game, [(r[1], r[2], r[3]) for r in rows])
        if has_prev:
            for iv, r in zip(cluster.intervals, rows):
                if r[4] != iv.delta_prev:
                    report(f"{path}:{r[5]}: delta_prev={r[4]} disagrees with derived value {iv.delta_prev}")
        clusters.append(cluster)
    if not clusters:
        raise DataError(f"{path}: no usable clusters")
    return Dataset(tuple(clusters), p)


def write_event_csv(dataset: Dataset, path: str | Path, include_delta_prev: bool = False) -> None:
    p = dataset.covariate_dim
    header = list(BASE_COLUMNS) + [f"z{j}" for j in range(1, p + 1)]
    if include_delta_prev:
        header.append("delta_prev")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for c in dataset.clusters:
            for k, iv in enumerate(c.intervals, 1):
                row = [c.team_id, c.game_id, k, repr(float(iv.y)), iv.delta, *map(repr, map(float, iv.z))]
                if include_delta_prev:
                    row.append(iv.delta_prev)
                writer.writerow(row)


@dataclass(frozen=True)
class Violation:
    cluster: str
    index: int | None
    rule: str

    def __str__(self) -> str:
        where = self.cluster if self.index is None else f"{self.cluster}[k={self.index}]"
        return f"{where}: {self.rule}"


def validate(
    dataset: Dataset,
    indicator_columns: Sequence[int] | None = None,
    odds_columns: Sequence[int] | None = None,
) -> list[Violation]:
    """Check every dataset invariant and report each breach.

    Covariate range rules default to the corner-kick layout (z1, z2
    indicators; z5 decimal odds) when the dataset has exactly five
    covariates, and to no range rules otherwise.
    """
    p = dataset.covariate_dim
    if indicator_columns is None:
        indicator_columns = CORNER_INDICATOR_COLUMNS if p == 5 else ()
    if odds_columns is None:
        odds_columns = CORNER_ODDS_COLUMNS if p == 5 else ()

    out: list[Violation] = []
    seen: set[tuple[str, str]] = set()
    for c in dataset.clusters:
        name = c.label
        if c.key in seen:
            out.append(Violation(name, None, "duplicate (team_id, game_id) cluster"))
        seen.add(c.key)
        if not c.intervals:
            out.append(Violation(name, None, "cluster must contain at least one interval"))
            continue
        dims = {len(iv.z) for iv in c.intervals}
        if dims != {p}:
            out.append(Violation(name, None, f"covariate dimension {sorted(dims)} != dataset dimension {p}"))
        for k, iv in enumerate(c.intervals, 1):
            if not (iv.y > 0 and np.isfinite(iv.y)):
                out.append(Violation(name, k, f"y must be > 0, got {iv.y}"))
            if iv.delta not in (0, 1):
                out.append(Violation(name, k, f"delta must be 0 or 1, got {iv.delta}"))
            if iv.delta_prev not in (0, 1):
                out.append(Violation(name, k, f"delta_prev must be 0 or 1, got {iv.delta_prev}"))
            if k == 1:
                if iv.delta_prev != 0:
                    out.append(Violation(name, k, "first interval must have delta_prev=0"))
            elif iv.delta_prev != c.intervals[k - 2].delta:
                out.append(Violation(name, k, "delta_prev must equal delta of the previous interval"))
            if len(iv.z) == p:
                for j in indicator_columns:
                    if iv.z[j] not in (0.0, 1.0):
                        out.append(Violation(name, k, f"z{j + 1} must be 0 or 1, got {iv.z[j]}"))
                for j in odds_columns:
                    if not iv.z[j] > 1:
                        out.append(Violation(name, k, f"z{j + 1} (decimal odds) must be > 1, got {iv.z[j]}"))
    return out
