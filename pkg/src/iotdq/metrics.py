"""Quality-dimension formulas.

All functions are pure.  ``timeliness_update`` transforms an explicit state
value; callers own per-sensor state and must serialize updates per sensor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime

from .errors import DomainError, InsufficientDataError, OrderingError

__all__ = [
    "TimelinessState",
    "CompletenessInputs",
    "accuracy",
    "completeness",
    "timeliness_update",
    "precision",
    "overhead_percent",
]


@dataclass(frozen=True)
class TimelinessState:
    """Running mean inter-arrival time for one sensor's stream.

    ``alpha`` weights the previous mean; ``1 - alpha`` weights the newly
    observed inter-arrival time.
    """

    mean_timeliness: float
    last_observed_at: datetime
    alpha: float = 0.8

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha {self.alpha!r} outside [0, 1]")
        if not math.isfinite(self.mean_timeliness) or self.mean_timeliness < 0.0:
            raise DomainError("mean timeliness must be finite and >= 0")


@dataclass(frozen=True)
class CompletenessInputs:
    """Window, expected inter-arrival time and missed count, all in seconds."""

    window_seconds: float
    rate_seconds: float
    missed_count: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.window_seconds) and self.window_seconds > 0.0):
            raise DomainError("window must be > 0")
        if not (math.isfinite(self.rate_seconds) and self.rate_seconds > 0.0):
            raise DomainError("rate must be > 0")
        if self.missed_count < 0:
            raise DomainError("missed count must be >= 0")


def accuracy(observed_value: float, ref_value: float) -> float:
    """Absolute difference between an observed value and its reference value."""
    if not (math.isfinite(observed_value) and math.isfinite(ref_value)):
        raise DomainError("accuracy inputs must be finite")
    return abs(observed_value - ref_value)


def completeness(inputs: CompletenessInputs) -> float:
    """Fraction of expected observations received in the window.

    ``(window - n * rate) / window`` clamped at 0 so the result stays a
    part-per-unit value even when more measurements were missed than the
    window nominally holds.
    """
    raw = (inputs.window_seconds - inputs.missed_count * inputs.rate_seconds)
    return max(0.0, raw / inputs.window_seconds)


def timeliness_update(
    state: TimelinessState, observed_at: datetime
) -> tuple[TimelinessState, float]:
    """Fold a new arrival into the weighted mean inter-arrival time.

    Returns the updated state and the new mean:
    ``alpha * previous_mean + (1 - alpha) * raw`` where ``raw`` is the
    seconds elapsed since the previous arrival.
    """
    raw = (observed_at - state.last_observed_at).total_seconds()
    if raw < 0.0:
        raise OrderingError(
            f"observation at {observed_at} precedes {state.last_observed_at}"
        )
    mean = state.alpha * state.mean_timeliness + (1.0 - state.alpha) * raw
    return TimelinessState(mean, observed_at, state.alpha), mean


def precision(assessed_value: float, neighbor_values: list[float]) -> float:
    """Root-mean-square deviation of neighbor values from the assessed value.

    The assessed value plays the role of the mean; callers must already have
    filtered the neighbors down to inliers.
    """
    if not neighbor_values:
        raise InsufficientDataError("no neighbor values; omit the precision dimension")
    if not math.isfinite(assessed_value) or not all(
        math.isfinite(v) for v in neighbor_values
    ):
        raise DomainError("precision inputs must be finite")
    total = sum((v - assessed_value) ** 2 for v in neighbor_values)
    return math.sqrt(total / len(neighbor_values))


def overhead_percent(enriched_bytes: int, raw_bytes: int) -> float:
    """Relative size increase, in percent, of the enriched entity."""
    if raw_bytes <= 0:
        raise DomainError("raw size must be > 0")
    if enriched_bytes < raw_bytes:
        raise DomainError("enriched size cannot be smaller than the raw size")
    return (enriched_bytes - raw_bytes) / raw_bytes * 100.0
