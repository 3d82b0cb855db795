"""Seeded synthetic datasets for evaluation.

Real city-scale sensor archives are not redistributable, so the evaluation
harness runs on generated streams: a daily sinusoid with Gaussian noise,
optionally salted with planted anomalies, nonsense values, out-of-area
readings and gaps.  Everything is driven by an explicit seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from .entities import Observation, format_timestamp, parse_timestamp
from .errors import InputError
from .imputation import TimeSeriesPoint
from .pipeline import observation_entity_id
from .preprocess import BoundingBox

__all__ = [
    "SinusoidSignal",
    "SANTANDER_CENTER",
    "SANTANDER_BOX",
    "sensor_grid",
    "generate_stream",
    "DetectionFixture",
    "make_detection_fixture",
    "make_gapped_series",
    "StaticDataset",
    "make_static_dataset",
]

UTC = timezone.utc

SANTANDER_CENTER = (43.462, -3.810)
SANTANDER_BOX = BoundingBox(43.30, 43.60, -4.10, -3.60)

DEFAULT_START = datetime(2021, 6, 1, tzinfo=UTC)


@dataclass(frozen=True)
class SinusoidSignal:
    """Daily sinusoid: mean + amplitude * sin(2 pi (h - phase) / period)."""

    mean: float = 15.0
    amplitude: float = 5.0
    period_hours: float = 24.0
    phase_hours: float = 9.0

    def value(self, t: datetime) -> float:
        hours = t.timestamp() / 3600.0
        return self.mean + self.amplitude * math.sin(
            2.0 * math.pi * (hours - self.phase_hours) / self.period_hours
        )


def sensor_grid(n_sensors: int, center: tuple[float, float] = SANTANDER_CENTER,
                spacing_m: float = 90.0) -> list[tuple[float, float]]:
    """Lay sensors on a square grid around a center point."""
    side = math.ceil(math.sqrt(n_sensors))
    lat0, lon0 = center
    dlat = spacing_m / 111_320.0
    dlon = spacing_m / (111_320.0 * math.cos(math.radians(lat0)))
    positions = []
    for i in range(n_sensors):
        row, col = divmod(i, side)
        positions.append((
            lat0 + (row - (side - 1) / 2.0) * dlat,
            lon0 + (col - (side - 1) / 2.0) * dlon,
        ))
    return positions


def generate_stream(
    n_sensors: int,
    cadence_seconds: float,
    per_sensor: int,
    seed: int,
    signal: SinusoidSignal | None = None,
    noise_sigma: float = 0.3,
    start: datetime = DEFAULT_START,
    entity_type: str = "Temperature",
    unit_code: str = "CEL",
) -> list[Observation]:
    """Interleaved multi-sensor stream, one reading per sensor per tick.

    Sensors are staggered inside each tick so global timestamps strictly
    increase; each sensor still sees an exact ``cadence_seconds`` rate.
    """
    signal = signal or SinusoidSignal()
    rng = np.random.default_rng(seed)
    positions = sensor_grid(n_sensors)
    stagger = cadence_seconds / n_sensors
    observations = []
    for tick in range(per_sensor):
        for i in range(n_sensors):
            sensor = f"s{i:03d}"
            t = start + timedelta(seconds=tick * cadence_seconds + i * stagger)
            value = signal.value(t) + rng.normal(0.0, noise_sigma)
            observations.append(Observation(
                id=observation_entity_id(entity_type, sensor),
                entity_type=entity_type,
                value=float(value),
                unit_code=unit_code,
                observed_at=t,
                location=positions[i],
                source_sensor=sensor,
            ))
    return observations


@dataclass(frozen=True)
class DetectionFixture:
    """Hourly series with planted global spikes and local (contextual) anomalies."""

    points: tuple[TimeSeriesPoint, ...]
    global_indices: tuple[int, ...]
    local_indices: tuple[int, ...]

    @property
    def planted_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.global_indices + self.local_indices))


def make_detection_fixture(
    seed: int,
    n_points: int = 1000,
    n_global: int = 30,
    n_local: int = 5,
    noise_sigma: float = 0.3,
    start: datetime = datetime(2021, 3, 1, tzinfo=UTC),
) -> DetectionFixture:
    """Seeded 1000-point sinusoid with planted anomalies.

    Global spikes leave the signal's value range by a wide margin; local
    anomalies stay near the global maximum but occur at night, far from
    their hour-of-day neighborhood.
    """
    signal = SinusoidSignal()
    rng = np.random.default_rng(seed)
    times = [start + timedelta(hours=h) for h in range(n_points)]
    values = np.array([signal.value(t) for t in times]) + rng.normal(0.0, noise_sigma, n_points)

    night = [i for i, t in enumerate(times) if 2 <= t.hour <= 5]
    local_indices = tuple(sorted(rng.choice(night, size=n_local, replace=False).tolist()))
    candidates = [i for i in range(n_points) if i not in local_indices]
    global_indices = tuple(sorted(rng.choice(candidates, size=n_global, replace=False).tolist()))

    top = signal.mean + signal.amplitude + 3.0 * noise_sigma
    for i in global_indices:
        magnitude = rng.uniform(6.0, 14.0)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        values[i] = values[i] + sign * magnitude
    for i in local_indices:
        values[i] = top + rng.uniform(0.7, 1.7)

    points = tuple(TimeSeriesPoint(t, float(v)) for t, v in zip(times, values))
    return DetectionFixture(points, global_indices, local_indices)


def make_gapped_series(
    seed: int,
    n_points: int = 1440,
    cadence_minutes: float = 10.0,
    noise_sigma: float = 0.02,
    n_gaps: int = 40,
    max_gap_len: int = 3,
    start: datetime = datetime(2021, 3, 1, tzinfo=UTC),
) -> tuple[list[TimeSeriesPoint], list[TimeSeriesPoint]]:
    """Smooth seasonal series with short missing runs.

    Returns ``(known, held_out)``: the training points with gaps, and the
    removed points whose values act as ground truth for imputer scoring.
    """
    signal = SinusoidSignal()
    rng = np.random.default_rng(seed)
    times = [start + timedelta(minutes=cadence_minutes * i) for i in range(n_points)]
    values = np.array([signal.value(t) for t in times]) + rng.normal(0.0, noise_sigma, n_points)

    missing: set[int] = set()
    guard = 2 * max_gap_len
    while len(missing) < n_gaps:
        i = int(rng.integers(guard, n_points - guard))
        run = int(rng.integers(1, max_gap_len + 1))
        block = set(range(i, i + run))
        # keep gaps isolated so every gap has known points on both sides
        if any(j in missing or (j + 1) in missing or (j - 1) in missing for j in block):
            continue
        missing |= block
    known = [TimeSeriesPoint(times[i], float(values[i])) for i in range(n_points) if i not in missing]
    held_out = [TimeSeriesPoint(times[i], float(values[i])) for i in sorted(missing)]
    return known, held_out


@dataclass
class StaticDataset:
    """Raw observation set with planted defects plus the clean ground truth."""

    observations: tuple[Observation, ...]
    truth: dict[datetime, float]
    global_hours: tuple[datetime, ...] = ()
    local_hours: tuple[datetime, ...] = ()
    gap_hours: tuple[datetime, ...] = ()
    nonsense_hours: tuple[datetime, ...] = ()
    outside_hours: tuple[datetime, ...] = ()

    @property
    def planted_hours(self) -> tuple[datetime, ...]:
        return tuple(sorted(self.global_hours + self.local_hours))

    @property
    def missing_hours(self) -> tuple[datetime, ...]:
        """Hours with no usable record after domain-knowledge cleaning."""
        return tuple(sorted(self.gap_hours + self.nonsense_hours + self.outside_hours))


def make_static_dataset(
    seed: int,
    n_hours: int = 1104,
    n_global: int = 30,
    n_local: int = 5,
    n_gaps: int = 20,
    n_nonsense: int = 6,
    n_outside: int = 6,
    noise_sigma: float = 0.1,
    start: datetime = datetime(2021, 3, 1, tzinfo=UTC),
    entity_type: str = "Temperature",
) -> StaticDataset:
    """Hourly single-station dataset exercising the whole static flow."""
    signal = SinusoidSignal()
    rng = np.random.default_rng(seed)
    times = [start + timedelta(hours=h) for h in range(n_hours)]
    truth = {t: signal.value(t) for t in times}
    values = np.array([truth[t] for t in times]) + rng.normal(0.0, noise_sigma, n_hours)

    guard = 48
    taken: set[int] = set()

    def pick(count: int, pool: Sequence[int]) -> list[int]:
        free = [i for i in pool if i not in taken]
        chosen = rng.choice(free, size=count, replace=False).tolist()
        taken.update(chosen)
        return sorted(int(i) for i in chosen)

    interior = range(guard, n_hours - guard)
    night = [i for i in interior if 2 <= times[i].hour <= 5]
    local_idx = pick(n_local, night)
    global_idx = pick(n_global, list(interior))
    gap_idx = pick(n_gaps, list(interior))
    nonsense_idx = pick(n_nonsense, list(interior))
    outside_idx = pick(n_outside, list(interior))

    top = signal.mean + signal.amplitude + 3.0 * noise_sigma
    for i in global_idx:
        magnitude = rng.uniform(6.0, 14.0)
        sign = 1.0 if rng.random() < 0.5 else -1.0
        values[i] += sign * magnitude
    for i in local_idx:
        values[i] = top + rng.uniform(0.7, 1.7)
    for i in nonsense_idx:
        values[i] = 999.0 if rng.random() < 0.5 else -999.0

    observations = []
    for i, t in enumerate(times):
        if i in gap_idx:
            continue
        location = SANTANDER_CENTER if i not in outside_idx else (40.417, -3.703)
        observations.append(Observation(
            id=observation_entity_id(entity_type, "static-1"),
            entity_type=entity_type,
            value=float(values[i]),
            unit_code="CEL",
            observed_at=t,
            location=location,
            source_sensor="static-1",
        ))

    return StaticDataset(
        observations=tuple(observations),
        truth=truth,
        global_hours=tuple(times[i] for i in global_idx),
        local_hours=tuple(times[i] for i in local_idx),
        gap_hours=tuple(times[i] for i in gap_idx),
        nonsense_hours=tuple(times[i] for i in nonsense_idx),
        outside_hours=tuple(times[i] for i in outside_idx),
    )


# -- CSV round trip for the CLI ------------------------------------------------

_LABELS = ("ok", "spike", "local", "nonsense", "outside", "gap")


def save_static_dataset(dataset: StaticDataset, path: str | Path) -> None:
    """Write the dataset with its plant annotations as one CSV."""
    labels: dict[datetime, str] = {}
    for t in dataset.global_hours:
        labels[t] = "spike"
    for t in dataset.local_hours:
        labels[t] = "local"
    for t in dataset.nonsense_hours:
        labels[t] = "nonsense"
    for t in dataset.outside_hours:
        labels[t] = "outside"
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["observed_at", "value", "lat", "lon", "label", "truth"])
        for obs in dataset.observations:
            t = obs.observed_at
            writer.writerow([
                format_timestamp(t), repr(obs.value), obs.location[0], obs.location[1],
                labels.get(t, "ok"), repr(dataset.truth[t]),
            ])
        for t in dataset.gap_hours:
            writer.writerow([format_timestamp(t), "", "", "", "gap", repr(dataset.truth[t])])


def load_static_dataset(path: str | Path, entity_type: str = "Temperature") -> StaticDataset:
    """Inverse of :func:`save_static_dataset`."""
    observations: list[Observation] = []
    truth: dict[datetime, float] = {}
    by_label: dict[str, list[datetime]] = {label: [] for label in _LABELS}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"observed_at", "value", "lat", "lon", "label", "truth"}
        if reader.fieldnames is None or expected - set(reader.fieldnames):
            raise InputError(f"{path}: expected header {','.join(sorted(expected))}")
        for row in reader:
            t = parse_timestamp(row["observed_at"])
            truth[t] = float(row["truth"])
            label = row["label"]
            if label not in _LABELS:
                raise InputError(f"{path}: unknown label {label!r}")
            if label != "ok":
                by_label[label].append(t)
            if label == "gap":
                continue
            observations.append(Observation(
                id=observation_entity_id(entity_type, "static-1"),
                entity_type=entity_type,
                value=float(row["value"]),
                unit_code="CEL",
                observed_at=t,
                location=(float(row["lat"]), float(row["lon"])),
                source_sensor="static-1",
            ))
    observations.sort(key=lambda o: o.observed_at)
    return StaticDataset(
        observations=tuple(observations),
        truth=truth,
        global_hours=tuple(sorted(by_label["spike"])),
        local_hours=tuple(sorted(by_label["local"])),
        gap_hours=tuple(sorted(by_label["gap"])),
        nonsense_hours=tuple(sorted(by_label["nonsense"])),
        outside_hours=tuple(sorted(by_label["outside"])),
    )
