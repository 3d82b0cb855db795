"""Domain-knowledge cleaning for the static training flow.

Three steps: drop physically impossible values, drop readings taken outside
the deployment area (mobile sensors wander), and collapse everything to an
hourly series by averaging.  Bounds and bounding boxes come from caller
configuration, never from code.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Sequence

from .entities import Observation
from .errors import DomainError
from .imputation import TimeSeriesPoint

__all__ = ["BoundingBox", "filter_nonsense", "filter_geo", "aggregate_hourly"]


@dataclass(frozen=True)
class BoundingBox:
    """Closed latitude/longitude box."""

    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self) -> None:
        if not (self.lat_min < self.lat_max and self.lon_min < self.lon_max):
            raise DomainError("bounding box must have min < max on both axes")

    def contains(self, location: tuple[float, float]) -> bool:
        lat, lon = location
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max


def filter_nonsense(
    observations: Sequence[Observation], min_value: float, max_value: float
) -> tuple[list[Observation], list[Observation]]:
    """Partition observations by the closed value range [min, max]."""
    if not min_value < max_value:
        raise DomainError("min bound must be below max bound")
    kept, dropped = [], []
    for obs in observations:
        (kept if min_value <= obs.value <= max_value else dropped).append(obs)
    return kept, dropped


def filter_geo(
    observations: Sequence[Observation], box: BoundingBox
) -> tuple[list[Observation], list[Observation]]:
    """Partition observations by the closed bounding box."""
    kept, dropped = [], []
    for obs in observations:
        (kept if box.contains(obs.location) else dropped).append(obs)
    return kept, dropped


def aggregate_hourly(observations: Sequence[Observation]) -> list[TimeSeriesPoint]:
    """Average observation values into UTC calendar-hour buckets.

    Each bucket is the half-open interval [hour, hour + 1); empty hours
    produce no point.  Pooling across sensors also removes timestamp
    duplicates between sensors.
    """
    buckets: dict[datetime, list[float]] = {}
    for obs in observations:
        t = obs.observed_at.astimezone(timezone.utc)
        hour = t.replace(minute=0, second=0, microsecond=0)
        buckets.setdefault(hour, []).append(obs.value)
    return [
        TimeSeriesPoint(hour, sum(values) / len(values))
        for hour, values in sorted(buckets.items())
    ]
