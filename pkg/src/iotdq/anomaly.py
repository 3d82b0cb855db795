"""Outlier and novelty detection for sensor time series.

Implements the two classic unsupervised detectors from first principles:

* Isolation Forest (Liu et al.): anomalies isolate in short branches of
  random trees, scored ``2 ** (-E(h) / c(psi))``.
* Local Outlier Factor (Breunig et al.): ratio of a point's local
  reachability density to that of its neighbors; values well above 1 flag
  locally sparse points.

Trained models are immutable after construction; scoring is pure and safe
for concurrent callers.  A trained model round-trips through a JSON document
so the streaming flow can reuse models trained on the static flow.

The streaming pipeline's default novelty rule is the forecast band:
an observation is novel when it deviates from the short-term forecast by
more than ``kappa`` residual standard deviations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, TrainingError

__all__ = [
    "EULER_GAMMA",
    "harmonic_number",
    "average_path_length",
    "anomaly_score",
    "IForestModel",
    "iforest_train",
    "iforest_score",
    "LofModel",
    "lof_scores",
    "lof_train",
    "lof_novelty_score",
    "forecast_band_novelty",
    "feature_rows",
    "LRD_CAP",
]

EULER_GAMMA = 0.5772156649015329

# H(0)..H(10); beyond that the asymptotic ln(m) + gamma is accurate enough.
_EXACT_HARMONIC = (
    0.0,
    1.0,
    1.5,
    11.0 / 6.0,
    25.0 / 12.0,
    137.0 / 60.0,
    49.0 / 20.0,
    363.0 / 140.0,
    761.0 / 280.0,
    7129.0 / 2520.0,
    7381.0 / 2520.0,
)

LRD_CAP = 1e12


def harmonic_number(m: int) -> float:
    """H(m), exact for m <= 10, ln(m) + Euler-Mascheroni beyond."""
    if m < 0:
        raise DomainError("harmonic number needs m >= 0")
    if m <= 10:
        return _EXACT_HARMONIC[m]
    return math.log(m) + EULER_GAMMA


def average_path_length(n: int) -> float:
    """Expected unsuccessful-search path length c(n) of a BST with n points."""
    if n <= 1:
        return 0.0
    return 2.0 * harmonic_number(n - 1) - 2.0 * (n - 1) / n


def anomaly_score(mean_depth: float, subsample_size: int) -> float:
    """Isolation score ``2 ** (-mean_depth / c(subsample_size))``."""
    return 2.0 ** (-mean_depth / average_path_length(subsample_size))


# --- isolation forest ------------------------------------------------------

def _build_tree(rng: np.random.Generator, data: np.ndarray, depth: int,
                limit: int) -> dict:
    n = data.shape[0]
    if depth >= limit or n <= 1:
        return {"size": int(n)}
    mins = data.min(axis=0)
    maxs = data.max(axis=0)
    splittable = np.nonzero(maxs > mins)[0]
    if splittable.size == 0:
        return {"size": int(n)}
    dim = int(splittable[rng.integers(splittable.size)])
    split = float(rng.uniform(mins[dim], maxs[dim]))
    mask = data[:, dim] < split
    return {
        "dim": dim,
        "split": split,
        "left": _build_tree(rng, data[mask], depth + 1, limit),
        "right": _build_tree(rng, data[~mask], depth + 1, limit),
    }


def _path_length(tree: dict, row: np.ndarray) -> float:
    depth = 0
    node = tree
    while "dim" in node:
        node = node["left"] if row[node["dim"]] < node["split"] else node["right"]
        depth += 1
    return depth + average_path_length(node["size"])


@dataclass(frozen=True)
class IForestModel:
    """Trained isolation forest: random trees plus a score threshold."""

    n_estimators: int
    subsample_size: int
    contamination: float
    seed: int
    n_features: int
    trees: list[dict]
    threshold: float
    standardize: bool = False
    feature_mean: tuple[float, ...] | None = None
    feature_std: tuple[float, ...] | None = None

    def _prepare(self, row: Sequence[float]) -> np.ndarray:
        arr = np.asarray(row, dtype=float)
        if arr.shape != (self.n_features,):
            raise DomainError(
                f"feature row has arity {arr.shape}, model expects {self.n_features}"
            )
        if self.standardize:
            arr = (arr - np.asarray(self.feature_mean)) / np.asarray(self.feature_std)
        return arr

    def score(self, row: Sequence[float]) -> float:
        arr = self._prepare(row)
        mean_depth = sum(_path_length(t, arr) for t in self.trees) / len(self.trees)
        return anomaly_score(mean_depth, self.subsample_size)

    def is_outlier(self, row: Sequence[float]) -> bool:
        return self.score(row) >= self.threshold

    def save(self, path: str | Path) -> None:
        doc = {
            "kind": "iforest",
            "n_estimators": self.n_estimators,
            "subsample_size": self.subsample_size,
            "contamination": self.contamination,
            "seed": self.seed,
            "n_features": self.n_features,
            "threshold": self.threshold,
            "standardize": self.standardize,
            "feature_mean": self.feature_mean,
            "feature_std": self.feature_std,
            "trees": self.trees,
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "IForestModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("kind") != "iforest":
            raise DomainError(f"{path} is not an isolation-forest model file")
        return cls(
            n_estimators=doc["n_estimators"],
            subsample_size=doc["subsample_size"],
            contamination=doc["contamination"],
            seed=doc["seed"],
            n_features=doc["n_features"],
            trees=doc["trees"],
            threshold=doc["threshold"],
            standardize=doc["standardize"],
            feature_mean=tuple(doc["feature_mean"]) if doc["feature_mean"] else None,
            feature_std=tuple(doc["feature_std"]) if doc["feature_std"] else None,
        )


def _quantile_threshold(scores: np.ndarray, contamination: float) -> float:
    return float(np.quantile(scores, 1.0 - contamination, method="midpoint"))


def _standardize_stats(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    std[std == 0.0] = 1.0
    return mean, std


def iforest_train(
    rows: Sequence[Sequence[float]],
    n_estimators: int = 200,
    subsample_size: int = 256,
    contamination: float = 0.035,
    seed: int = 0,
    standardize: bool = False,
) -> IForestModel:
    """Train an isolation forest; deterministic for a given seed.

    The classification threshold is the ``1 - contamination`` empirical
    quantile (midpoint interpolation) of the training scores.
    """
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise TrainingError("need at least 2 feature rows")
    if not np.isfinite(data).all():
        raise DomainError("feature rows must be finite")
    if not 0.0 < contamination < 0.5:
        raise DomainError("contamination must be in (0, 0.5)")
    mean = std = None
    if standardize:
        mean, std = _standardize_stats(data)
        data = (data - mean) / std
    n = data.shape[0]
    psi = min(subsample_size, n)
    if psi < 2:
        raise TrainingError("subsample size must be >= 2")
    limit = math.ceil(math.log2(psi))
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_estimators):
        sample = data[rng.choice(n, size=psi, replace=False)]
        trees.append(_build_tree(rng, sample, 0, limit))
    model = IForestModel(
        n_estimators=n_estimators,
        subsample_size=psi,
        contamination=contamination,
        seed=seed,
        n_features=data.shape[1],
        trees=trees,
        threshold=math.inf,
        standardize=standardize,
        feature_mean=tuple(mean) if mean is not None else None,
        feature_std=tuple(std) if std is not None else None,
    )
    raw_rows = np.asarray(rows, dtype=float)
    scores = np.array([model.score(r) for r in raw_rows])
    object.__setattr__(model, "threshold", _quantile_threshold(scores, contamination))
    return model


def iforest_score(model: IForestModel, row: Sequence[float]) -> float:
    """Isolation score of one feature row; outlier iff >= model threshold."""
    return model.score(row)


# --- local outlier factor --------------------------------------------------

def _pairwise_sq(data: np.ndarray) -> np.ndarray:
    sq = (data ** 2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * data @ data.T
    np.maximum(d2, 0.0, out=d2)
    return d2


def _lof_from_distances(dist: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[np.ndarray]]:
    """LOF pieces from a full distance matrix with inf on the diagonal.

    Returns (scores, k_distances, lrd, neighborhoods).  The neighborhood of a
    point is every other point within its k-distance (distance ties are all
    included, per the original definition).
    """
    n = dist.shape[0]
    order = np.argsort(dist, axis=1, kind="stable")
    kdist = dist[np.arange(n), order[:, k - 1]]
    neighborhoods = [np.nonzero(dist[i] <= kdist[i])[0] for i in range(n)]
    lrd = np.empty(n)
    for i in range(n):
        if kdist[i] == 0.0:
            lrd[i] = LRD_CAP
            continue
        nb = neighborhoods[i]
        reach = np.maximum(kdist[nb], dist[i, nb])
        lrd[i] = 1.0 / reach.mean()
    scores = np.empty(n)
    for i in range(n):
        scores[i] = lrd[neighborhoods[i]].mean() / lrd[i]
    return scores, kdist, lrd, neighborhoods


def lof_scores(rows: Sequence[Sequence[float]], k: int) -> np.ndarray:
    """LOF of every row against the rest (outlier-detection mode)."""
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2:
        raise DomainError("rows must be a 2-D collection of feature rows")
    if k < 1 or k >= data.shape[0]:
        raise DomainError(f"k={k} must satisfy 1 <= k < n={data.shape[0]}")
    dist = np.sqrt(_pairwise_sq(data))
    np.fill_diagonal(dist, np.inf)
    scores, _, _, _ = _lof_from_distances(dist, k)
    return scores


@dataclass(frozen=True)
class LofModel:
    """LOF novelty model: training rows with precomputed densities."""

    k: int
    contamination: float
    rows: np.ndarray
    k_distances: np.ndarray
    lrd: np.ndarray
    threshold: float
    standardize: bool = False
    feature_mean: tuple[float, ...] | None = None
    feature_std: tuple[float, ...] | None = None

    def _prepare(self, row: Sequence[float]) -> np.ndarray:
        arr = np.asarray(row, dtype=float)
        if arr.shape != (self.rows.shape[1],):
            raise DomainError(
                f"feature row has arity {arr.shape}, model expects {self.rows.shape[1]}"
            )
        if self.standardize:
            arr = (arr - np.asarray(self.feature_mean)) / np.asarray(self.feature_std)
        return arr

    def score(self, row: Sequence[float]) -> float:
        arr = self._prepare(row)
        dist = np.sqrt(np.maximum(((self.rows - arr) ** 2).sum(axis=1), 0.0))
        order = np.argsort(dist, kind="stable")
        kdist = dist[order[self.k - 1]]
        nb = np.nonzero(dist <= kdist)[0]
        if kdist == 0.0:
            lrd_q = LRD_CAP
        else:
            reach = np.maximum(self.k_distances[nb], dist[nb])
            lrd_q = 1.0 / reach.mean()
        return float(self.lrd[nb].mean() / lrd_q)

    def is_outlier(self, row: Sequence[float]) -> bool:
        return self.score(row) >= self.threshold

    def save(self, path: str | Path) -> None:
        doc = {
            "kind": "lof",
            "k": self.k,
            "contamination": self.contamination,
            "rows": self.rows.tolist(),
            "k_distances": self.k_distances.tolist(),
            "lrd": self.lrd.tolist(),
            "threshold": self.threshold,
            "standardize": self.standardize,
            "feature_mean": self.feature_mean,
            "feature_std": self.feature_std,
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LofModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("kind") != "lof":
            raise DomainError(f"{path} is not a LOF model file")
        return cls(
            k=doc["k"],
            contamination=doc["contamination"],
            rows=np.asarray(doc["rows"], dtype=float),
            k_distances=np.asarray(doc["k_distances"], dtype=float),
            lrd=np.asarray(doc["lrd"], dtype=float),
            threshold=doc["threshold"],
            standardize=doc["standardize"],
            feature_mean=tuple(doc["feature_mean"]) if doc["feature_mean"] else None,
            feature_std=tuple(doc["feature_std"]) if doc["feature_std"] else None,
        )


def lof_train(
    rows: Sequence[Sequence[float]],
    k: int = 20,
    contamination: float = 0.035,
    standardize: bool = False,
) -> LofModel:
    """Fit a LOF novelty model on clean rows.

    The threshold is the ``1 - contamination`` quantile of the training
    rows' own LOF scores.
    """
    data = np.asarray(rows, dtype=float)
    if data.ndim != 2:
        raise DomainError("rows must be a 2-D collection of feature rows")
    if not np.isfinite(data).all():
        raise DomainError("feature rows must be finite")
    if k < 1 or k >= data.shape[0]:
        raise DomainError(f"k={k} must satisfy 1 <= k < n={data.shape[0]}")
    if not 0.0 < contamination < 0.5:
        raise DomainError("contamination must be in (0, 0.5)")
    mean = std = None
    if standardize:
        mean, std = _standardize_stats(data)
        data = (data - mean) / std
    dist = np.sqrt(_pairwise_sq(data))
    np.fill_diagonal(dist, np.inf)
    scores, kdist, lrd, _ = _lof_from_distances(dist, k)
    return LofModel(
        k=k,
        contamination=contamination,
        rows=data,
        k_distances=kdist,
        lrd=lrd,
        threshold=_quantile_threshold(scores, contamination),
        standardize=standardize,
        feature_mean=tuple(mean) if mean is not None else None,
        feature_std=tuple(std) if std is not None else None,
    )


def lof_novelty_score(model: LofModel, row: Sequence[float]) -> float:
    """LOF of a query row against the training rows only (query not inserted)."""
    return model.score(row)


# --- streaming novelty rule ------------------------------------------------

def forecast_band_novelty(observed: float, forecast: float,
                          residual_sigma: float, kappa: float = 3.0) -> bool:
    """True when the observation leaves the forecast band ``+- kappa * sigma``."""
    if not residual_sigma > 0.0:
        raise DomainError("residual sigma must be > 0")
    if not kappa > 0.0:
        raise DomainError("kappa must be > 0")
    return abs(observed - forecast) > kappa * residual_sigma


# --- feature extraction ----------------------------------------------------

def feature_rows(points: Sequence[tuple[datetime, float]]) -> np.ndarray:
    """Default time-series features: [value, fractional hour of day (UTC)].

    Encoding the hour lets the detectors treat nighttime-normal values as
    normal at night instead of flagging them against the daytime bulk.
    """
    out = np.empty((len(points), 2))
    for i, (t, v) in enumerate(points):
        t = t.astimezone(timezone.utc)
        out[i, 0] = v
        out[i, 1] = t.hour + t.minute / 60.0 + (t.second + t.microsecond / 1e6) / 3600.0
    return out
