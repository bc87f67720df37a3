"""Synthetic minority oversampling: new minority-class rows are drawn on
the segments between existing rows and their k nearest same-class
neighbors (Euclidean distance in the standardized feature space).

Runs on the flat, already-standardized training table, before any
sequence reshaping. Each class synthesizes from its own seeded RNG stream
(keyed by class id), so output is bit-reproducible and independent of
whether classes are processed serially or in parallel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import DataError, UsageError
from .ingest import FlowTable

MATCH_MAJORITY = "match_majority"
RATIO = "ratio"
EXPLICIT = "explicit"

# pairwise-distance chunking keeps the d^2 block around ~32 MB
_CHUNK_BYTES = 32 * 2 ** 20


@dataclass(frozen=True)
class SmoteConfig:
    """Neighbor count, per-class target policy, and the RNG seed."""

    k: int = 5
    policy: str = MATCH_MAJORITY
    ratio: Optional[float] = None
    targets: Optional[Tuple[int, ...]] = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.policy not in (MATCH_MAJORITY, RATIO, EXPLICIT):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.policy == RATIO:
            if self.ratio is None or not 0.0 < self.ratio <= 1.0:
                raise ValueError(
                    f"ratio policy needs ratio in (0, 1], got {self.ratio}"
                )
        if self.policy == EXPLICIT and not self.targets:
            raise ValueError("explicit policy needs per-class targets")


def parse_policy(text: str, k: int = 5, seed: int = 0) -> SmoteConfig:
    """CLI surface: 'match_majority', 'ratio:0.5', 'explicit:100,200,300'."""
    text = text.strip().lower()
    if text == MATCH_MAJORITY:
        return SmoteConfig(k=k, policy=MATCH_MAJORITY, seed=seed)
    if text.startswith("ratio:"):
        try:
            ratio = float(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad ratio in --smote-policy {text!r}") from None
        try:
            return SmoteConfig(k=k, policy=RATIO, ratio=ratio, seed=seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if text.startswith("explicit:"):
        try:
            targets = tuple(int(t) for t in text.split(":", 1)[1].split(","))
        except ValueError:
            raise UsageError(f"bad counts in --smote-policy {text!r}") from None
        return SmoteConfig(k=k, policy=EXPLICIT, targets=targets, seed=seed)
    raise UsageError(
        f"unknown SMOTE policy {text!r}; expected match_majority, "
        "ratio:<r>, or explicit:<counts>"
    )


def resolve_targets(histogram: np.ndarray, cfg: SmoteConfig) -> np.ndarray:
    """Per-class post-SMOTE row counts implied by the policy.

    SMOTE never removes rows, so every target is floored at the current
    count. RATIO r targets r * majority for every class.
    """
    histogram = np.asarray(histogram, dtype=np.int64)
    if cfg.policy == MATCH_MAJORITY:
        wanted = np.full_like(histogram, histogram.max())
    elif cfg.policy == RATIO:
        wanted = np.full_like(histogram,
                              int(round(cfg.ratio * histogram.max())))
    else:
        if len(cfg.targets) != histogram.shape[0]:
            raise DataError(
                f"{len(cfg.targets)} explicit targets for "
                f"{histogram.shape[0]} classes"
            )
        wanted = np.asarray(cfg.targets, dtype=np.int64)
    return np.maximum(histogram, wanted)


def knn_minority(points: np.ndarray, k: int) -> Tuple[np.ndarray, int]:
    """Indices of the k nearest same-class neighbors of every point.

    Euclidean distance, self excluded, distance ties broken by lower
    index. k is capped at (class size - 1) with a warning. Returns the
    (m, k_eff) index table and k_eff.
    """
    points = np.asarray(points, dtype=np.float64)
    m = points.shape[0]
    if m < 2:
        raise DataError("cannot synthesize from a class with fewer than 2 rows")
    k_eff = k
    if k > m - 1:
        k_eff = m - 1
        warnings.warn(
            f"k={k} exceeds class size {m} - 1; using k={k_eff}",
            stacklevel=2,
        )

    sq = np.sum(points * points, axis=1)
    out = np.empty((m, k_eff), dtype=np.int64)
    rows_per_chunk = max(1, _CHUNK_BYTES // max(1, m * 8))
    for start in range(0, m, rows_per_chunk):
        stop = min(start + rows_per_chunk, m)
        block = points[start:stop]
        # squared distances via the expansion |a-b|^2 = |a|^2+|b|^2-2ab;
        # clip guards the tiny negatives the expansion can produce
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (block @ points.T)
        np.clip(d2, 0.0, None, out=d2)
        d2[np.arange(start, stop) - start, np.arange(start, stop)] = np.inf
        # stable sort makes equal distances resolve to the lower index
        out[start:stop] = np.argsort(d2, axis=1, kind="stable")[:, :k_eff]
    return out, k_eff


def interpolate(x: np.ndarray, x_nn: np.ndarray, lam) -> np.ndarray:
    """The SMOTE segment point x + lam * (x_nn - x)."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.ndim == 1:
        lam = lam[:, None]
    return x + lam * (x_nn - x)


@dataclass
class SmoteReport:
    """Provenance of every synthetic row, in output order.

    seed_rows / neighbor_rows index into the ORIGINAL table; a duplicated
    singleton records itself as its own neighbor with lam 0.
    """

    class_ids: np.ndarray
    seed_rows: np.ndarray
    neighbor_rows: np.ndarray
    lams: np.ndarray
    targets: np.ndarray
    k_effective: Dict[int, int] = field(default_factory=dict)

    def __len__(self):
        return self.class_ids.shape[0]


def smote_oversample(table: FlowTable,
                     cfg: SmoteConfig) -> Tuple[FlowTable, SmoteReport]:
    """Append synthetic rows until every class meets its policy target.

    Original rows come first, unchanged and in order; synthetics follow,
    grouped by ascending class id. Each class consumes its own RNG stream
    seeded by (cfg.seed, class_id), so results are bit-identical across
    runs and across per-class parallelism. A singleton class cannot be
    interpolated and is duplicated instead (with a warning).
    """
    histogram = table.histogram()
    targets = resolve_targets(histogram, cfg)

    new_rows: List[np.ndarray] = []
    prov_class: List[np.ndarray] = []
    prov_seed: List[np.ndarray] = []
    prov_neighbor: List[np.ndarray] = []
    prov_lam: List[np.ndarray] = []
    k_effective: Dict[int, int] = {}

    for cls in range(len(table.class_names)):
        need = int(targets[cls] - histogram[cls])
        if need == 0:
            continue
        rows = np.flatnonzero(table.labels == cls)
        rng = np.random.default_rng([cfg.seed, cls])
        if rows.size == 0:
            warnings.warn(
                f"class {table.class_names[cls]!r} has no rows at all; "
                "nothing to synthesize from",
                stacklevel=2,
            )
            continue
        if rows.size == 1:
            warnings.warn(
                f"class {table.class_names[cls]!r} has a single row; "
                f"duplicating it {need} times instead of interpolating",
                stacklevel=2,
            )
            new_rows.append(np.repeat(table.features[rows], need, axis=0))
            prov_class.append(np.full(need, cls, dtype=np.int64))
            prov_seed.append(np.full(need, rows[0], dtype=np.int64))
            prov_neighbor.append(np.full(need, rows[0], dtype=np.int64))
            prov_lam.append(np.zeros(need))
            continue

        neighbors, k_eff = knn_minority(table.features[rows], cfg.k)
        k_effective[cls] = k_eff
        seed_local = rng.integers(0, rows.size, size=need)
        pick = rng.integers(0, k_eff, size=need)
        lam = rng.random(size=need)
        neighbor_local = neighbors[seed_local, pick]

        x = table.features[rows[seed_local]]
        x_nn = table.features[rows[neighbor_local]]
        new_rows.append(interpolate(x, x_nn, lam))
        prov_class.append(np.full(need, cls, dtype=np.int64))
        prov_seed.append(rows[seed_local])
        prov_neighbor.append(rows[neighbor_local])
        prov_lam.append(lam)

    if new_rows:
        features = np.vstack([table.features] + new_rows)
        labels = np.concatenate([table.labels, *prov_class]).astype(np.int64)
        report = SmoteReport(
            class_ids=np.concatenate(prov_class),
            seed_rows=np.concatenate(prov_seed),
            neighbor_rows=np.concatenate(prov_neighbor),
            lams=np.concatenate(prov_lam),
            targets=targets,
            k_effective=k_effective,
        )
    else:
        features = table.features.copy()
        labels = table.labels.copy()
        report = SmoteReport(
            class_ids=np.empty(0, dtype=np.int64),
            seed_rows=np.empty(0, dtype=np.int64),
            neighbor_rows=np.empty(0, dtype=np.int64),
            lams=np.empty(0),
            targets=targets,
            k_effective=k_effective,
        )
    out = FlowTable(features, labels, table.class_names)
    return out, report
