"""Embedded temporal entity store.

Plays the context-broker role for the curation pipeline: append-only
per-entity history with latest-value, windowed-temporal and geo-filtered
queries.  Histories are kept sorted by ``observedAt`` regardless of insertion
order.  Concurrency follows read-write lock semantics: any number of
concurrent readers, or one writer.
"""

from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Iterable

from .entities import (
    UTC,
    DQAssessment,
    Observation,
    deserialize,
    format_timestamp,
    serialize,
)
from .errors import DomainError, DuplicateRecordError, ValidationError

__all__ = [
    "EARTH_RADIUS_M",
    "haversine_m",
    "TemporalRecord",
    "TemporalQuery",
    "TemporalStore",
]

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance in meters between two (lat, lon) pairs."""
    lat1, lon1 = math.radians(a[0]), math.radians(a[1])
    lat2, lon2 = math.radians(b[0]), math.radians(b[1])
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class TemporalRecord:
    """One snapshot in an entity's history."""

    entity_id: str
    observed_at: datetime
    entity: Observation | DQAssessment
    snapshot: bytes
    value: float
    location: tuple[float, float] | None

    @property
    def record_id(self) -> str:
        return f"{self.entity_id}@{format_timestamp(self.observed_at)}"


@dataclass(frozen=True)
class TemporalQuery:
    """History query: exactly one of ``last_n`` / ``window_seconds`` is set.

    ``as_of`` anchors the query in time (records after it are invisible);
    when omitted, wall clock is used for window queries and nothing is
    excluded for last-N queries.  The optional geo filter keeps records whose
    location lies within ``geo_radius_m`` of ``geo_center`` (closed ball) and
    the attribute filter keeps records whose named attribute equals the given
    value.
    """

    entity_id: str | None = None
    entity_type: str | None = None
    last_n: int | None = None
    window_seconds: float | None = None
    as_of: datetime | None = None
    geo_center: tuple[float, float] | None = None
    geo_radius_m: float | None = None
    attr_equals: tuple[str, Any] | None = None

    def __post_init__(self) -> None:
        if (self.entity_id is None) == (self.entity_type is None):
            raise DomainError("set exactly one of entity_id / entity_type")
        if (self.last_n is None) == (self.window_seconds is None):
            raise DomainError("set exactly one of last_n / window_seconds")
        if self.last_n is not None and self.last_n < 1:
            raise DomainError("last_n must be >= 1")
        if self.window_seconds is not None and not self.window_seconds > 0.0:
            raise DomainError("window_seconds must be > 0")
        if (self.geo_center is None) != (self.geo_radius_m is None):
            raise DomainError("geo filter needs both center and radius")
        if self.geo_radius_m is not None and not self.geo_radius_m > 0.0:
            raise DomainError("geo radius must be > 0")


def _entity_attr(entity: Observation | DQAssessment, name: str) -> Any:
    """Resolve a wire-format attribute name against an entity."""
    if isinstance(entity, DQAssessment):
        if name == "isOutlier":
            return entity.outlier.is_outlier
        if name == "isSynthetic":
            return entity.synthetic.is_synthetic
        if name == "source":
            return entity.source
    if isinstance(entity, Observation) and name == "value":
        return entity.value
    raise DomainError(f"unsupported attribute filter {name!r}")


class _RWLock:
    """Many readers or one writer; writers wait for readers to drain."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self._readers = 0
        self._writer = False

    def acquire_read(self) -> None:
        with self._cond:
            while self._writer:
                self._cond.wait()
            self._readers += 1

    def release_read(self) -> None:
        with self._cond:
            self._readers -= 1
            if self._readers == 0:
                self._cond.notify_all()

    def acquire_write(self) -> None:
        with self._cond:
            while self._writer or self._readers:
                self._cond.wait()
            self._writer = True

    def release_write(self) -> None:
        with self._cond:
            self._writer = False
            self._cond.notify_all()


class TemporalStore:
    """In-memory append-only temporal store with optional JSONL persistence.

    ``duplicate_policy`` decides what happens when a record with the same
    (entity id, observedAt) arrives again: ``"reject"`` (default) raises,
    ``"overwrite"`` replaces the stored snapshot.
    """

    def __init__(self, duplicate_policy: str = "reject",
                 persist_path: str | Path | None = None) -> None:
        if duplicate_policy not in ("reject", "overwrite"):
            raise DomainError(f"unknown duplicate policy {duplicate_policy!r}")
        self._policy = duplicate_policy
        self._histories: dict[str, list[TemporalRecord]] = {}
        self._by_type: dict[str, list[str]] = {}
        self._lock = _RWLock()
        self._persist = Path(persist_path) if persist_path is not None else None

    # -- write side ---------------------------------------------------------

    def _make_record(self, entity: Observation | DQAssessment) -> TemporalRecord:
        if isinstance(entity, Observation):
            entity.validate()
            observed_at = entity.observed_at
            value = entity.value
            location: tuple[float, float] | None = entity.location
        elif isinstance(entity, DQAssessment):
            entity.validate()
            observed_at = entity.synthetic.observed_at
            value = math.nan
            location = None
        else:
            raise ValidationError(f"cannot store {type(entity).__name__}")
        return TemporalRecord(
            entity_id=entity.id,
            observed_at=observed_at,
            entity=entity,
            snapshot=serialize(entity),
            value=value,
            location=location,
        )

    def _check_duplicate(self, record: TemporalRecord) -> None:
        history = self._histories.get(record.entity_id, [])
        if any(r.observed_at == record.observed_at for r in history):
            if self._policy == "reject":
                raise DuplicateRecordError(
                    f"record {record.record_id} already exists"
                )

    def _append(self, record: TemporalRecord, entity_type: str) -> None:
        history = self._histories.setdefault(record.entity_id, [])
        if not history:
            self._by_type.setdefault(entity_type, []).append(record.entity_id)
        replaced = next(
            (i for i, r in enumerate(history) if r.observed_at == record.observed_at),
            None,
        )
        if replaced is not None:
            history[replaced] = record
        elif history and record.observed_at < history[-1].observed_at:
            lo, hi = 0, len(history)
            while lo < hi:
                mid = (lo + hi) // 2
                if history[mid].observed_at < record.observed_at:
                    lo = mid + 1
                else:
                    hi = mid
            history.insert(lo, record)
        else:
            history.append(record)
        if self._persist is not None:
            line = json.dumps(
                {"entityType": entity_type, "entity": record.snapshot.decode("utf-8")},
                separators=(",", ":"),
            )
            with self._persist.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    @staticmethod
    def _entity_type(entity: Observation | DQAssessment) -> str:
        return entity.entity_type

    def upsert(self, entity: Observation | DQAssessment) -> str:
        """Append a snapshot to the entity's history; returns the record id."""
        record = self._make_record(entity)
        self._lock.acquire_write()
        try:
            self._check_duplicate(record)
            self._append(record, self._entity_type(entity))
        finally:
            self._lock.release_write()
        return record.record_id

    def upsert_many(self, entities: Iterable[Observation | DQAssessment]) -> list[str]:
        """Append several snapshots atomically: either all land or none do."""
        records = [self._make_record(e) for e in entities]
        types = [self._entity_type(e) for e in entities]
        self._lock.acquire_write()
        try:
            for record in records:
                self._check_duplicate(record)
            for record, entity_type in zip(records, types):
                self._append(record, entity_type)
        finally:
            self._lock.release_write()
        return [r.record_id for r in records]

    # -- read side ----------------------------------------------------------

    def latest(self, entity_id: str) -> Observation | DQAssessment | None:
        """Entity snapshot with the maximal observedAt, or None if unseen."""
        self._lock.acquire_read()
        try:
            history = self._histories.get(entity_id)
            return history[-1].entity if history else None
        finally:
            self._lock.release_read()

    def history_length(self, entity_id: str) -> int:
        self._lock.acquire_read()
        try:
            return len(self._histories.get(entity_id, ()))
        finally:
            self._lock.release_read()

    def entity_ids(self, entity_type: str | None = None) -> list[str]:
        self._lock.acquire_read()
        try:
            if entity_type is None:
                return list(self._histories)
            return list(self._by_type.get(entity_type, ()))
        finally:
            self._lock.release_read()

    def temporal(self, query: TemporalQuery) -> list[TemporalRecord]:
        """Records satisfying the query, ascending by observedAt.

        Last-N mode returns the min(N, available) newest records; window mode
        returns records with observedAt in ``(as_of - window, as_of]``.
        """
        self._lock.acquire_read()
        try:
            if query.entity_id is not None:
                histories = [self._histories.get(query.entity_id, [])]
            else:
                histories = [
                    self._histories[eid]
                    for eid in self._by_type.get(query.entity_type, ())
                ]
            records: list[TemporalRecord] = []
            for history in histories:
                records.extend(history)
        finally:
            self._lock.release_read()
        if len(histories) > 1:
            records.sort(key=lambda r: r.observed_at)
        if query.as_of is not None:
            records = [r for r in records if r.observed_at <= query.as_of]
        if query.window_seconds is not None:
            now = query.as_of if query.as_of is not None else datetime.now(tz=UTC)
            cutoff = now - timedelta(seconds=query.window_seconds)
            records = [r for r in records if cutoff < r.observed_at <= now]
        if query.geo_center is not None:
            records = [
                r for r in records
                if r.location is not None
                and haversine_m(query.geo_center, r.location) <= query.geo_radius_m
            ]
        if query.attr_equals is not None:
            name, expected = query.attr_equals
            records = [r for r in records if _entity_attr(r.entity, name) == expected]
        if query.last_n is not None and len(records) > query.last_n:
            records = records[-query.last_n:]
        return records

    def nearby_latest(
        self,
        entity_type: str,
        center: tuple[float, float],
        radius_m: float,
        exclude_id: str | None = None,
    ) -> list[tuple[Observation, DQAssessment | None]]:
        """Latest snapshot of each entity of the type within the radius.

        Inclusion uses a closed ball (distance == radius is in).  Each entity
        is paired with its linked assessment when the ``hasQuality`` link
        resolves, else None.
        """
        if not radius_m > 0.0:
            raise DomainError("radius must be > 0")
        self._lock.acquire_read()
        try:
            results: list[tuple[Observation, DQAssessment | None]] = []
            for entity_id in self._by_type.get(entity_type, ()):
                if entity_id == exclude_id:
                    continue
                record = self._histories[entity_id][-1]
                if record.location is None:
                    continue
                if haversine_m(center, record.location) > radius_m:
                    continue
                entity = record.entity
                linked: DQAssessment | None = None
                if isinstance(entity, Observation) and entity.has_quality:
                    linked_history = self._histories.get(entity.has_quality)
                    if linked_history:
                        candidate = linked_history[-1].entity
                        if isinstance(candidate, DQAssessment):
                            linked = candidate
                results.append((entity, linked))
            return results
        finally:
            self._lock.release_read()

    # -- persistence --------------------------------------------------------

    @classmethod
    def from_jsonl(cls, path: str | Path, duplicate_policy: str = "reject",
                   persist_path: str | Path | None = None) -> "TemporalStore":
        """Rebuild a store by replaying an append-only persistence file."""
        store = cls(duplicate_policy=duplicate_policy)
        with Path(path).open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                envelope = json.loads(line)
                entity = deserialize(envelope["entity"], strict=False)
                store.upsert(entity)
        store._persist = Path(persist_path) if persist_path is not None else None
        return store

    def __len__(self) -> int:
        self._lock.acquire_read()
        try:
            return sum(len(h) for h in self._histories.values())
        finally:
            self._lock.release_read()
