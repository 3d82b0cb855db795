"""Gap filling for time series plus the MAPE/MAE evaluation metrics.

Two imputers are provided: a local least-squares polynomial fit over the
points nearest in time, and a k-nearest-neighbors estimate using time
distance as the inter-instance metric.  Both are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from typing import Sequence

import numpy as np

from .errors import DomainError, InputError

__all__ = [
    "TimeSeriesPoint",
    "interpolate_poly",
    "impute_knn",
    "mape",
    "mae",
]


@dataclass(frozen=True)
class TimeSeriesPoint:
    """One (timestamp, value) sample."""

    t: datetime
    v: float


def _epoch_seconds(points: Sequence[TimeSeriesPoint]) -> np.ndarray:
    return np.array([p.t.timestamp() for p in points])


def _check_known(known: Sequence[TimeSeriesPoint]) -> np.ndarray:
    if not known:
        raise InputError("no known points to impute from")
    times = _epoch_seconds(known)
    if np.any(np.diff(times) < 0):
        raise InputError("known points must be sorted by timestamp")
    return times


def interpolate_poly(
    known: Sequence[TimeSeriesPoint],
    gaps: Sequence[datetime],
    degree: int = 2,
    window: int = 6,
) -> list[float]:
    """Estimate missing values with a local polynomial fit.

    For each gap timestamp, the ``window`` known points nearest in time are
    fitted with a least-squares polynomial of the given degree (falling back
    to the largest feasible degree when the window holds fewer than
    ``degree + 1`` points) and evaluated at the gap.
    """
    if degree < 0:
        raise DomainError("degree must be >= 0")
    if window < 1:
        raise DomainError("window must be >= 1")
    times = _check_known(known)
    values = np.array([p.v for p in known])
    out: list[float] = []
    for gap in gaps:
        g = gap.timestamp()
        offsets = times - g
        order = np.lexsort((times, np.abs(offsets)))
        take = order[: min(window, len(known))]
        x = offsets[take]
        y = values[take]
        span = np.abs(x).max()
        if span == 0.0:
            out.append(float(y.mean()))
            continue
        eff_degree = min(degree, len(take) - 1)
        coeffs = np.polyfit(x / span, y, eff_degree)
        out.append(float(np.polyval(coeffs, 0.0)))
    return out


def impute_knn(
    known: Sequence[TimeSeriesPoint],
    gaps: Sequence[datetime],
    k: int = 5,
    weighted: bool = False,
) -> list[float]:
    """Estimate missing values as the mean of the k nearest points in time.

    Distance ties are broken toward earlier timestamps.  With
    ``weighted=True`` neighbors are averaged with inverse-distance weights
    instead of uniformly.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    if len(known) < k:
        raise InputError(f"need at least k={k} known points, have {len(known)}")
    times = _check_known(known)
    values = np.array([p.v for p in known])
    out: list[float] = []
    for gap in gaps:
        g = gap.timestamp()
        dist = np.abs(times - g)
        order = np.lexsort((times, dist))
        take = order[:k]
        if not weighted:
            out.append(float(values[take].mean()))
            continue
        d = dist[take]
        if np.any(d == 0.0):
            exact = take[d == 0.0]
            out.append(float(values[exact].mean()))
        else:
            w = 1.0 / d
            out.append(float(np.average(values[take], weights=w)))
    return out


def mape(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Mean absolute percentage error, as a fraction."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.size == 0 or a.shape != p.shape:
        raise DomainError("actual and predicted must be equal-length and non-empty")
    if np.any(a == 0.0):
        raise DomainError("MAPE undefined when an actual value is 0")
    return float(np.mean(np.abs(a - p) / np.abs(a)))


def mae(actual: Sequence[float], predicted: Sequence[float]) -> float:
    """Mean absolute error."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.size == 0 or a.shape != p.shape:
        raise DomainError("actual and predicted must be equal-length and non-empty")
    return float(np.mean(np.abs(a - p)))
