import json
import math
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iotdq.entities import (
    DQAssessment,
    DQProperty,
    Observation,
    OutlierTag,
    SyntheticTag,
    deserialize,
    format_timestamp,
    link_quality,
    measure_size,
    parse_timestamp,
    serialize,
)
from iotdq.errors import SchemaError, SerializationError, ValidationError

from conftest import DATA_DIR, T0, make_assessment, make_observation

UTC = timezone.utc

FIG_KEYS = [
    "id", "type", "source", "dateCalculated", "accuracy", "completeness",
    "timeliness", "precision", "outlier", "synthetic",
]


class TestTimestamps:
    def test_format_is_utc_millisecond_z(self):
        t = datetime(2021, 6, 1, 12, 0, 0, 123456, tzinfo=UTC)
        assert format_timestamp(t) == "2021-06-01T12:00:00.123Z"

    def test_parse_round_trip(self):
        text = "2021-06-01T12:00:00.123Z"
        assert format_timestamp(parse_timestamp(text)) == text

    def test_naive_timestamp_rejected(self):
        with pytest.raises(SerializationError):
            format_timestamp(datetime(2021, 6, 1))

    def test_bad_text_rejected(self):
        with pytest.raises(SchemaError):
            parse_timestamp("last tuesday")


class TestSerialize:
    def test_full_assessment_has_exact_field_set_in_order(self):
        doc = json.loads(serialize(make_assessment()))
        assert list(doc.keys()) == FIG_KEYS

    def test_dimension_property_shape(self):
        doc = json.loads(serialize(make_assessment()))
        for name in ("accuracy", "completeness", "timeliness", "precision"):
            assert list(doc[name].keys()) == ["type", "value", "observedAt", "unitCode"]
            assert doc[name]["type"] == "Property"

    def test_tag_shape(self):
        doc = json.loads(serialize(make_assessment(is_outlier=True)))
        outlier = doc["outlier"]
        assert outlier["value"]["isOutlier"]["value"] is True
        assert outlier["value"]["methodology"]["object"] == "forecast-band(kappa=3)"
        assert "observedAt" in outlier
        synthetic = doc["synthetic"]
        assert synthetic["value"]["isSynthetic"]["value"] is False

    def test_absent_optional_emits_no_key(self):
        doc = json.loads(serialize(make_assessment(accuracy=None, precision=None)))
        assert "accuracy" not in doc and "precision" not in doc
        assert "completeness" in doc and "timeliness" in doc

    def test_compact_no_whitespace(self):
        text = serialize(make_assessment()).decode()
        assert ": " not in text and ", " not in text

    def test_round_trip_fixpoint(self):
        for entity in (make_observation(), make_assessment(is_outlier=True)):
            data = serialize(entity)
            assert serialize(deserialize(data)) == data

    def test_non_finite_value_rejected(self):
        for bad in (math.nan, math.inf):
            with pytest.raises(SerializationError):
                serialize(make_observation(value=bad))

    def test_observation_geojson_order_lon_lat(self):
        doc = json.loads(serialize(make_observation(location=(43.0, -3.8))))
        assert doc["location"]["value"]["coordinates"] == [-3.8, 43.0]


class TestDeserialize:
    def test_fig_shaped_document(self):
        data = (DATA_DIR / "dq_assessment.json").read_bytes()
        entity = deserialize(data)
        assert isinstance(entity, DQAssessment)
        assert entity.completeness.value == 0.95
        assert entity.outlier.is_outlier is False
        assert entity.synthetic.methodology == ""

    def test_missing_id_is_schema_error(self):
        doc = json.loads(serialize(make_assessment()))
        del doc["id"]
        with pytest.raises(SchemaError):
            deserialize(json.dumps(doc))

    def test_missing_type_is_schema_error(self):
        doc = json.loads(serialize(make_observation()))
        del doc["type"]
        with pytest.raises(SchemaError):
            deserialize(json.dumps(doc))

    def test_completeness_out_of_range_strict(self):
        doc = json.loads(serialize(make_assessment()))
        doc["completeness"]["value"] = 1.3
        with pytest.raises(ValidationError):
            deserialize(json.dumps(doc), strict=True)
        entity = deserialize(json.dumps(doc), strict=False)
        assert entity.completeness.value == 1.3

    def test_unknown_key_strict_vs_lenient(self):
        doc = json.loads(serialize(make_observation()))
        doc["surprise"] = 1
        with pytest.raises(SchemaError):
            deserialize(json.dumps(doc), strict=True)
        entity = deserialize(json.dumps(doc), strict=False)
        assert entity.extra == {"surprise": 1}
        # preserved on the object but never re-serialized
        assert b"surprise" not in serialize(entity)

    def test_not_json(self):
        with pytest.raises(SchemaError):
            deserialize(b"not json at all")


class TestMeasureSize:
    def test_additivity_of_optional_property(self):
        with_p = make_assessment()
        without_p = make_assessment(accuracy=None)
        diff = measure_size(with_p) - measure_size(without_p)
        doc = json.loads(serialize(with_p))
        fragment = len(
            f'"accuracy":{json.dumps(doc["accuracy"], separators=(",", ":"))},'.encode()
        )
        assert diff == fragment

    def test_monotonicity_as_properties_added(self):
        bare = make_assessment(accuracy=None, precision=None)
        one = make_assessment(precision=None)
        full = make_assessment()
        assert measure_size(bare) < measure_size(one) < measure_size(full)

    def test_golden_fixture_byte_counts(self):
        # Frozen from the fixture serializer; regression oracle.
        obs = deserialize((DATA_DIR / "observation.json").read_bytes())
        dqa = deserialize((DATA_DIR / "dq_assessment.json").read_bytes())
        assert measure_size(obs) == 763
        assert measure_size(dqa) == 1073
        assert serialize(obs) == (DATA_DIR / "observation.json").read_bytes()
        assert serialize(dqa) == (DATA_DIR / "dq_assessment.json").read_bytes()


class TestLinkQuality:
    def test_assignment(self):
        obs = make_observation()
        dqa = make_assessment(sensor="dqa7")
        linked = link_quality(obs, dqa)
        assert linked.has_quality == "urn:ngsi-ld:DataQualityAssessment:dqa7"

    def test_idempotent_bytes(self):
        obs = make_observation()
        dqa = make_assessment()
        once = link_quality(obs, dqa)
        twice = link_quality(once, dqa)
        assert serialize(once) == serialize(twice)

    def test_last_write_wins(self):
        obs = make_observation()
        linked = link_quality(link_quality(obs, make_assessment(sensor="a")),
                              make_assessment(sensor="b"))
        assert linked.has_quality == "urn:ngsi-ld:DataQualityAssessment:b"


class TestValidation:
    def test_latitude_bounds(self):
        with pytest.raises(ValidationError):
            make_observation(location=(91.0, 0.0)).validate()

    def test_longitude_bounds(self):
        with pytest.raises(ValidationError):
            make_observation(location=(0.0, -181.0)).validate()

    def test_synthetic_needs_methodology(self):
        dqa = make_assessment(
            synthetic=SyntheticTag(True, "", T0)
        )
        with pytest.raises(ValidationError):
            dqa.validate()

    def test_negative_timeliness_rejected(self):
        dqa = make_assessment(timeliness=-1.0)
        with pytest.raises(ValidationError):
            dqa.validate()


# --- property tests ---------------------------------------------------------

_timestamps = st.integers(min_value=0, max_value=2_000_000_000_000).map(
    lambda ms: datetime.fromtimestamp(ms / 1000.0, tz=UTC)
)
_names = st.text(
    alphabet=st.characters(min_codepoint=ord("a"), max_codepoint=ord("z")),
    min_size=1, max_size=24,
)
_values = st.floats(min_value=-1e9, max_value=1e9, allow_nan=False, allow_infinity=False)
_units = st.sampled_from(["CEL", "SEC", "C62", "P1", "MTR"])


def _property_st(value=_values):
    return st.builds(DQProperty, value=value, observed_at=_timestamps, unit_code=_units)


_nonneg = st.floats(min_value=0.0, max_value=1e9, allow_nan=False, allow_infinity=False)

observations = st.builds(
    Observation,
    id=_names.map(lambda s: f"urn:ngsi-ld:Temperature:{s}"),
    entity_type=st.just("Temperature"),
    value=_values,
    unit_code=_units,
    observed_at=_timestamps,
    location=st.tuples(
        st.floats(min_value=-90, max_value=90, allow_nan=False),
        st.floats(min_value=-180, max_value=180, allow_nan=False),
    ),
    source_sensor=_names,
    has_quality=st.none() | _names.map(lambda s: f"urn:ngsi-ld:DataQualityAssessment:{s}"),
    context=st.none() | st.just("https://example.org/context.jsonld"),
)


@st.composite
def assessments(draw):
    observed_at = draw(_timestamps)
    is_synthetic = draw(st.booleans())
    return DQAssessment(
        id=f"urn:ngsi-ld:DataQualityAssessment:{draw(_names)}",
        source=draw(_names),
        date_calculated=observed_at,
        accuracy=draw(st.none() | _property_st(_nonneg)),
        completeness=DQProperty(
            draw(st.floats(min_value=0.0, max_value=1.0, allow_nan=False)),
            observed_at, "C62",
        ),
        timeliness=DQProperty(draw(_nonneg), observed_at, "SEC"),
        precision=draw(st.none() | _property_st(_nonneg)),
        outlier=OutlierTag(draw(st.booleans()), draw(_names), observed_at),
        synthetic=SyntheticTag(is_synthetic, draw(_names), observed_at),
    )


@given(observations)
@settings(max_examples=200)
def test_observation_round_trip_identity(obs):
    assert deserialize(serialize(obs), strict=False) == obs


@given(assessments())
@settings(max_examples=200)
def test_assessment_round_trip_identity(dqa):
    assert deserialize(serialize(dqa), strict=False) == dqa


@given(assessments())
@settings(max_examples=100)
def test_assessment_field_set_never_exceeds_schema(dqa):
    doc = json.loads(serialize(dqa))
    assert set(doc).issubset(set(FIG_KEYS) | {"@context"})
    assert [k for k in FIG_KEYS if k in doc] == list(doc)
