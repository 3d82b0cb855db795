from datetime import datetime, timedelta, timezone
from pathlib import Path

import pytest

from iotdq.entities import (
    DQAssessment,
    DQProperty,
    Observation,
    OutlierTag,
    SyntheticTag,
)

UTC = timezone.utc

DATA_DIR = Path(__file__).parent / "data"

T0 = datetime(2021, 6, 1, 12, 0, tzinfo=UTC)


def make_observation(sensor="s001", value=21.5, observed_at=T0,
                     location=(43.462, -3.810), **kw) -> Observation:
    defaults = dict(
        id=f"urn:ngsi-ld:Temperature:{sensor}",
        entity_type="Temperature",
        value=value,
        unit_code="CEL",
        observed_at=observed_at,
        location=location,
        source_sensor=sensor,
    )
    defaults.update(kw)
    return Observation(**defaults)


def make_assessment(sensor="s001", observed_at=T0, *, accuracy=0.5,
                    completeness=1.0, timeliness=120.0, precision=0.3,
                    is_outlier=False, is_synthetic=False, **kw) -> DQAssessment:
    methodology = "sinusoid-band" if is_synthetic else ""
    defaults = dict(
        id=f"urn:ngsi-ld:DataQualityAssessment:{sensor}",
        source="iot-dq-curator",
        date_calculated=observed_at,
        accuracy=DQProperty(accuracy, observed_at, "CEL") if accuracy is not None else None,
        completeness=DQProperty(completeness, observed_at, "C62"),
        timeliness=DQProperty(timeliness, observed_at, "SEC"),
        precision=DQProperty(precision, observed_at, "CEL") if precision is not None else None,
        outlier=OutlierTag(is_outlier, "forecast-band(kappa=3)", observed_at),
        synthetic=SyntheticTag(is_synthetic, methodology, observed_at),
    )
    defaults.update(kw)
    return DQAssessment(**defaults)


@pytest.fixture
def t0():
    return T0


def ts(seconds: float, base: datetime = T0) -> datetime:
    return base + timedelta(seconds=seconds)
