"""Observation and quality-assessment entity types with a fixed wire format.

Entities serialize to compact UTF-8 JSON with a deterministic key order so
that byte sizes are reproducible across runs.  A quality assessment is a
standalone entity carrying the four quality dimensions plus outlier/synthetic
tags; it is bound to its observation through the observation's ``hasQuality``
relationship.

Completeness is stored as a part-per-unit fraction in [0, 1]; rendering it as
a percentage is a presentation concern.  Timestamps are serialized as
ISO-8601 UTC with millisecond precision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Mapping

from .errors import SchemaError, SerializationError, ValidationError

__all__ = [
    "DQ_ASSESSMENT_TYPE",
    "Observation",
    "DQProperty",
    "OutlierTag",
    "SyntheticTag",
    "DQAssessment",
    "serialize",
    "deserialize",
    "measure_size",
    "link_quality",
    "format_timestamp",
    "parse_timestamp",
]

DQ_ASSESSMENT_TYPE = "DataQualityAssessment"

UTC = timezone.utc


def format_timestamp(dt: datetime) -> str:
    """Render a timezone-aware datetime as ISO-8601 UTC with milliseconds."""
    if dt.tzinfo is None:
        raise SerializationError("timestamps must be timezone-aware")
    dt = dt.astimezone(UTC)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp, normalizing to UTC."""
    if not isinstance(text, str):
        raise SchemaError(f"timestamp must be a string, got {type(text).__name__}")
    candidate = text[:-1] + "+00:00" if text.endswith("Z") else text
    try:
        dt = datetime.fromisoformat(candidate)
    except ValueError as exc:
        raise SchemaError(f"invalid timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=UTC)
    return dt.astimezone(UTC)


def _check_finite(name: str, value: float) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
        raise SerializationError(f"{name} must be a finite number, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class DQProperty:
    """One quality dimension value with its own timestamp and unit code."""

    value: float
    observed_at: datetime
    unit_code: str

    def validate(self, name: str = "property") -> None:
        if not math.isfinite(self.value):
            raise ValidationError(f"{name}.value must be finite")


@dataclass(frozen=True)
class OutlierTag:
    """Whether the observation was judged anomalous, and by which method."""

    is_outlier: bool
    methodology: str
    observed_at: datetime


@dataclass(frozen=True)
class SyntheticTag:
    """Whether the observation was generated to fill a detected loss."""

    is_synthetic: bool
    methodology: str
    observed_at: datetime

    def validate(self) -> None:
        if self.is_synthetic and not self.methodology:
            raise ValidationError("synthetic.methodology must be set for synthetic entities")


@dataclass(frozen=True)
class Observation:
    """One time-stamped sensor reading with geo position and units.

    ``location`` is a (latitude, longitude) pair in degrees.  ``has_quality``
    names the linked quality-assessment entity once one has been attached.
    ``context`` is an optional JSON-LD context URL emitted verbatim.
    """

    id: str
    entity_type: str
    value: float
    unit_code: str
    observed_at: datetime
    location: tuple[float, float]
    source_sensor: str
    has_quality: str | None = None
    context: str | None = None
    extra: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("observation id must be non-empty")
        if not self.entity_type:
            raise ValidationError("observation entity_type must be non-empty")
        if not math.isfinite(self.value):
            raise ValidationError("observation value must be finite")
        lat, lon = self.location
        if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
            raise ValidationError(f"latitude {lat!r} outside [-90, 90]")
        if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
            raise ValidationError(f"longitude {lon!r} outside [-180, 180]")


@dataclass(frozen=True)
class DQAssessment:
    """Quality-metadata entity linked 1:1 to an observation.

    Carries the four dimension properties (accuracy and precision are
    optional: they are omitted when no reference value or no inlier
    neighbors were available) plus the outlier and synthetic tags.
    """

    id: str
    source: str
    date_calculated: datetime
    completeness: DQProperty
    timeliness: DQProperty
    outlier: OutlierTag
    synthetic: SyntheticTag
    accuracy: DQProperty | None = None
    precision: DQProperty | None = None
    context: str | None = None
    extra: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    entity_type = DQ_ASSESSMENT_TYPE

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("assessment id must be non-empty")
        self.completeness.validate("completeness")
        if not 0.0 <= self.completeness.value <= 1.0:
            raise ValidationError(
                f"completeness {self.completeness.value!r} outside [0, 1]"
            )
        self.timeliness.validate("timeliness")
        if self.timeliness.value < 0.0:
            raise ValidationError("timeliness must be >= 0")
        if self.accuracy is not None:
            self.accuracy.validate("accuracy")
            if self.accuracy.value < 0.0:
                raise ValidationError("accuracy must be >= 0")
        if self.precision is not None:
            self.precision.validate("precision")
            if self.precision.value < 0.0:
                raise ValidationError("precision must be >= 0")
        self.synthetic.validate()
        linked = min(
            t for t in (self.outlier.observed_at, self.synthetic.observed_at)
        )
        if self.date_calculated < linked:
            raise ValidationError("dateCalculated precedes the assessed observation")


# --- serialization ---------------------------------------------------------

def _property_doc(name: str, prop: DQProperty) -> dict[str, Any]:
    return {
        "type": "Property",
        "value": _check_finite(f"{name}.value", prop.value),
        "observedAt": format_timestamp(prop.observed_at),
        "unitCode": prop.unit_code,
    }


def _observation_doc(obs: Observation) -> dict[str, Any]:
    lat, lon = obs.location
    doc: dict[str, Any] = {
        "id": obs.id,
        "type": obs.entity_type,
        "value": {
            "type": "Property",
            "value": _check_finite("value", obs.value),
            "observedAt": format_timestamp(obs.observed_at),
            "unitCode": obs.unit_code,
        },
        "location": {
            "type": "GeoProperty",
            "value": {
                "type": "Point",
                "coordinates": [
                    _check_finite("longitude", lon),
                    _check_finite("latitude", lat),
                ],
            },
        },
        "sourceSensor": {"type": "Relationship", "object": obs.source_sensor},
    }
    if obs.has_quality is not None:
        doc["hasQuality"] = {"type": "Relationship", "object": obs.has_quality}
    if obs.context is not None:
        doc["@context"] = obs.context
    return doc


def _tag_doc(name: str, flag_key: str, flag: bool, methodology: str,
             observed_at: datetime) -> dict[str, Any]:
    return {
        "type": "Property",
        "value": {
            flag_key: {"type": "Property", "value": flag},
            "methodology": {"type": "Relationship", "object": methodology},
        },
        "observedAt": format_timestamp(observed_at),
    }


def _assessment_doc(dqa: DQAssessment) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "id": dqa.id,
        "type": DQ_ASSESSMENT_TYPE,
        "source": {"type": "Property", "value": dqa.source},
        "dateCalculated": {
            "type": "Property",
            "value": format_timestamp(dqa.date_calculated),
        },
    }
    if dqa.accuracy is not None:
        doc["accuracy"] = _property_doc("accuracy", dqa.accuracy)
    doc["completeness"] = _property_doc("completeness", dqa.completeness)
    doc["timeliness"] = _property_doc("timeliness", dqa.timeliness)
    if dqa.precision is not None:
        doc["precision"] = _property_doc("precision", dqa.precision)
    doc["outlier"] = _tag_doc(
        "outlier", "isOutlier", dqa.outlier.is_outlier,
        dqa.outlier.methodology, dqa.outlier.observed_at,
    )
    doc["synthetic"] = _tag_doc(
        "synthetic", "isSynthetic", dqa.synthetic.is_synthetic,
        dqa.synthetic.methodology, dqa.synthetic.observed_at,
    )
    if dqa.context is not None:
        doc["@context"] = dqa.context
    return doc


def serialize(entity: Observation | DQAssessment) -> bytes:
    """Serialize an entity to compact UTF-8 JSON in its canonical key order."""
    if isinstance(entity, Observation):
        doc = _observation_doc(entity)
    elif isinstance(entity, DQAssessment):
        doc = _assessment_doc(entity)
    else:
        raise SerializationError(f"cannot serialize {type(entity).__name__}")
    return json.dumps(
        doc, separators=(",", ":"), ensure_ascii=False, allow_nan=False
    ).encode("utf-8")


def measure_size(entity: Observation | DQAssessment) -> int:
    """Byte count of the compact serialized form."""
    return len(serialize(entity))


def link_quality(obs: Observation, dqa: DQAssessment) -> Observation:
    """Return the observation bound to the given assessment (last write wins)."""
    if not obs.id or not dqa.id:
        raise ValidationError("both entities need ids before linking")
    if obs.has_quality == dqa.id:
        return obs
    return replace(obs, has_quality=dqa.id)


# --- deserialization -------------------------------------------------------

_OBS_KEYS = {"id", "type", "value", "location", "sourceSensor", "hasQuality", "@context"}
_DQA_KEYS = {
    "id", "type", "source", "dateCalculated", "accuracy", "completeness",
    "timeliness", "precision", "outlier", "synthetic", "@context",
}
_PROP_KEYS = {"type", "value", "observedAt", "unitCode"}


def _require(doc: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in doc:
        raise SchemaError(f"missing mandatory field {key!r} in {where}")
    return doc[key]


def _reject_unknown(doc: Mapping[str, Any], allowed: set[str], where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise SchemaError(f"unknown keys {sorted(unknown)} in {where}")


def _parse_property(doc: Any, name: str, strict: bool) -> DQProperty:
    if not isinstance(doc, Mapping):
        raise SchemaError(f"{name} must be an object")
    if strict:
        _reject_unknown(doc, _PROP_KEYS, name)
    value = _require(doc, "value", name)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise SchemaError(f"{name}.value must be a number")
    return DQProperty(
        value=float(value),
        observed_at=parse_timestamp(_require(doc, "observedAt", name)),
        unit_code=str(_require(doc, "unitCode", name)),
    )


def _parse_tag(doc: Any, name: str, flag_key: str, strict: bool) -> tuple[bool, str, datetime]:
    if not isinstance(doc, Mapping):
        raise SchemaError(f"{name} must be an object")
    if strict:
        _reject_unknown(doc, {"type", "value", "observedAt"}, name)
    inner = _require(doc, "value", name)
    if not isinstance(inner, Mapping):
        raise SchemaError(f"{name}.value must be an object")
    flag_doc = _require(inner, flag_key, name)
    flag = _require(flag_doc, "value", f"{name}.{flag_key}")
    if not isinstance(flag, bool):
        raise SchemaError(f"{name}.{flag_key} must be a boolean")
    methodology = str(_require(_require(inner, "methodology", name), "object", name))
    observed_at = parse_timestamp(_require(doc, "observedAt", name))
    return flag, methodology, observed_at


def _parse_observation(doc: Mapping[str, Any], strict: bool) -> Observation:
    if strict:
        _reject_unknown(doc, _OBS_KEYS, "observation")
    value_doc = _require(doc, "value", "observation")
    loc_doc = _require(doc, "location", "observation")
    point = _require(loc_doc, "value", "location")
    coords = _require(point, "coordinates", "location")
    if not (isinstance(coords, (list, tuple)) and len(coords) == 2):
        raise SchemaError("location coordinates must be [lon, lat]")
    lon, lat = float(coords[0]), float(coords[1])
    source = _require(doc, "sourceSensor", "observation")
    has_quality = None
    if "hasQuality" in doc:
        has_quality = str(_require(doc["hasQuality"], "object", "hasQuality"))
    extra = {} if strict else {k: v for k, v in doc.items() if k not in _OBS_KEYS}
    obs = Observation(
        id=str(doc["id"]),
        entity_type=str(doc["type"]),
        value=float(_require(value_doc, "value", "value")),
        unit_code=str(_require(value_doc, "unitCode", "value")),
        observed_at=parse_timestamp(_require(value_doc, "observedAt", "value")),
        location=(lat, lon),
        source_sensor=str(_require(source, "object", "sourceSensor")),
        has_quality=has_quality,
        context=doc.get("@context"),
        extra=extra,
    )
    if strict:
        obs.validate()
    return obs


def _parse_assessment(doc: Mapping[str, Any], strict: bool) -> DQAssessment:
    if strict:
        _reject_unknown(doc, _DQA_KEYS, "assessment")
    accuracy = precision = None
    if "accuracy" in doc:
        accuracy = _parse_property(doc["accuracy"], "accuracy", strict)
    if "precision" in doc:
        precision = _parse_property(doc["precision"], "precision", strict)
    out_flag, out_method, out_at = _parse_tag(
        _require(doc, "outlier", "assessment"), "outlier", "isOutlier", strict
    )
    syn_flag, syn_method, syn_at = _parse_tag(
        _require(doc, "synthetic", "assessment"), "synthetic", "isSynthetic", strict
    )
    extra = {} if strict else {k: v for k, v in doc.items() if k not in _DQA_KEYS}
    dqa = DQAssessment(
        id=str(doc["id"]),
        source=str(_require(_require(doc, "source", "assessment"), "value", "source")),
        date_calculated=parse_timestamp(
            _require(_require(doc, "dateCalculated", "assessment"), "value", "dateCalculated")
        ),
        accuracy=accuracy,
        completeness=_parse_property(_require(doc, "completeness", "assessment"), "completeness", strict),
        timeliness=_parse_property(_require(doc, "timeliness", "assessment"), "timeliness", strict),
        precision=precision,
        outlier=OutlierTag(out_flag, out_method, out_at),
        synthetic=SyntheticTag(syn_flag, syn_method, syn_at),
        context=doc.get("@context"),
        extra=extra,
    )
    if strict:
        dqa.validate()
    return dqa


def deserialize(data: bytes | str, strict: bool = True) -> Observation | DQAssessment:
    """Parse a serialized entity.

    In strict mode unknown keys are rejected and entity invariants are
    enforced; in lenient mode unknown top-level keys are preserved on the
    entity's ``extra`` mapping and invariants are not checked.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("entity document must be a JSON object")
    _require(doc, "id", "entity")
    entity_type = _require(doc, "type", "entity")
    if entity_type == DQ_ASSESSMENT_TYPE:
        return _parse_assessment(doc, strict)
    return _parse_observation(doc, strict)
