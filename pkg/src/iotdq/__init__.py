"""Data-quality assessment and curation for IoT observation streams.

The package splits into a small set of layers:

* :mod:`iotdq.entities` — observation / quality-assessment entities and
  their canonical serialized form.
* :mod:`iotdq.store` — embedded temporal entity store with windowed and
  geo-filtered queries.
* :mod:`iotdq.metrics` — the quality-dimension formulas.
* :mod:`iotdq.anomaly`, :mod:`iotdq.imputation`, :mod:`iotdq.sarima`,
  :mod:`iotdq.preprocess` — the curation algorithms.
* :mod:`iotdq.pipeline` — the per-observation curator tying it together.
* :mod:`iotdq.datasets`, :mod:`iotdq.evaluation` — seeded synthetic data
  and the evaluation harness (also exposed through the ``iotdq`` CLI).
"""

from .entities import (
    DQAssessment,
    DQProperty,
    Observation,
    OutlierTag,
    SyntheticTag,
    deserialize,
    link_quality,
    measure_size,
    serialize,
)
from .errors import DQError
from .metrics import (
    CompletenessInputs,
    TimelinessState,
    accuracy,
    completeness,
    overhead_percent,
    precision,
    timeliness_update,
)
from .pipeline import Curator, PipelineConfig
from .store import TemporalQuery, TemporalStore

__version__ = "0.1.0"

__all__ = [
    "DQAssessment",
    "DQProperty",
    "Observation",
    "OutlierTag",
    "SyntheticTag",
    "serialize",
    "deserialize",
    "measure_size",
    "link_quality",
    "DQError",
    "TimelinessState",
    "CompletenessInputs",
    "accuracy",
    "completeness",
    "timeliness_update",
    "precision",
    "overhead_percent",
    "TemporalStore",
    "TemporalQuery",
    "Curator",
    "PipelineConfig",
    "__version__",
]
