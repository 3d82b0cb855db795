"""Per-observation curation pipeline.

For every incoming observation the curator, in order: fills detected losses
with synthetic observations (each routed through the same downstream steps),
runs novelty detection, computes the quality dimensions, then tags and
persists the observation together with its quality assessment, linked via
``hasQuality``.

One logical processing sequence runs per sensor id; different sensors may be
processed in parallel.  Timeliness state is sensor-local.
"""

from __future__ import annotations

import csv
from bisect import bisect_left
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path
from time import perf_counter
from typing import Iterable, Protocol

from . import metrics
from .anomaly import IForestModel, LofModel, feature_rows, forecast_band_novelty
from .entities import (
    DQAssessment,
    DQProperty,
    Observation,
    OutlierTag,
    SyntheticTag,
    link_quality,
    parse_timestamp,
    serialize,
)
from .errors import DomainError, InputError, OrderingError
from .sarima import SarimaModel, sarima_forecast
from .store import TemporalQuery, TemporalStore

__all__ = [
    "ReferenceProvider",
    "FileReferenceProvider",
    "ExpectedBand",
    "SarimaBand",
    "ConstantBand",
    "PipelineConfig",
    "load_config",
    "PhaseTiming",
    "CurationResult",
    "Curator",
    "observation_entity_id",
    "assessment_entity_id",
    "read_observations_csv",
    "write_pairs_jsonl",
]

DIMENSIONS = ("accuracy", "completeness", "timeliness", "precision")

COMPLETENESS_UNIT = "C62"  # dimensionless part-per-unit
SECONDS_UNIT = "SEC"

REFERENCE_MAX_AGE_S = 1800.0


class ReferenceProvider(Protocol):
    """Ground-truth source for the accuracy dimension."""

    def reference_value(
        self, phenomenon: str, location: tuple[float, float], observed_at: datetime
    ) -> float | None: ...


class FileReferenceProvider:
    """Reference values from a CSV table ``observed_at,lat,lon,value``.

    Lookup returns the record nearest in time within +-30 minutes, else None.
    """

    def __init__(self, path: str | Path) -> None:
        rows: list[tuple[float, float]] = []
        with Path(path).open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "observed_at" not in reader.fieldnames:
                raise InputError(f"{path}: expected header observed_at,lat,lon,value")
            for row in reader:
                t = parse_timestamp(row["observed_at"]).timestamp()
                rows.append((t, float(row["value"])))
        rows.sort()
        self._times = [t for t, _ in rows]
        self._values = [v for _, v in rows]

    def reference_value(
        self, phenomenon: str, location: tuple[float, float], observed_at: datetime
    ) -> float | None:
        if not self._times:
            return None
        target = observed_at.timestamp()
        idx = bisect_left(self._times, target)
        best = None
        for j in (idx - 1, idx):
            if 0 <= j < len(self._times):
                gap = abs(self._times[j] - target)
                if best is None or gap < best[0]:
                    best = (gap, self._values[j])
        if best is None or best[0] > REFERENCE_MAX_AGE_S:
            return None
        return best[1]


class ExpectedBand(Protocol):
    """Short-term expected value and residual sigma at a timestamp."""

    methodology: str

    def expected(self, observed_at: datetime) -> tuple[float, float]: ...


class SarimaBand:
    """Expected band backed by a fitted forecast model.

    Timestamps are mapped to the nearest forecast step past the model's
    training end; the forecast is extended lazily and cached.
    """

    def __init__(self, model: SarimaModel) -> None:
        self._model = model
        self._values: list[float] = []
        self._sigmas: list[float] = []
        self.methodology = model.spec.methodology

    def expected(self, observed_at: datetime) -> tuple[float, float]:
        offset = (observed_at - self._model.t_end).total_seconds()
        step = max(1, round(offset / self._model.step_seconds))
        if step > len(self._values):
            horizon = max(step, 2 * len(self._values), 24)
            result = sarima_forecast(self._model, horizon)
            self._values = [float(v) for v in result.values]
            self._sigmas = [float(s) for s in result.sigmas]
        return self._values[step - 1], self._sigmas[step - 1]


class ConstantBand:
    """Fixed expected value and sigma; handy for tests and replays."""

    def __init__(self, value: float, sigma: float, methodology: str = "constant-band") -> None:
        self._value = value
        self._sigma = sigma
        self.methodology = methodology

    def expected(self, observed_at: datetime) -> tuple[float, float]:
        return self._value, self._sigma


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the curator needs to process one phenomenon's streams."""

    nominal_rate_seconds: float = 120.0
    loss_factor: float = 1.5
    completeness_window_seconds: float = 7200.0
    alpha: float = 0.8
    precision_radius_m: float = 1000.0
    novelty_detector: str = "forecast-band"
    kappa: float = 3.0
    entity_type: str = "Temperature"
    unit_code: str = "CEL"
    source: str = "iot-dq-curator"
    sarima_model: str | None = None
    iforest_model: str | None = None
    lof_model: str | None = None
    reference_file: str | None = None

    def __post_init__(self) -> None:
        if self.nominal_rate_seconds <= 0:
            raise DomainError("nominal rate must be > 0")
        if self.loss_factor <= 1.0:
            raise DomainError("loss factor must be > 1")
        if self.completeness_window_seconds <= 0:
            raise DomainError("completeness window must be > 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError("alpha must be in [0, 1]")
        if self.precision_radius_m <= 0:
            raise DomainError("precision radius must be > 0")
        if self.kappa <= 0:
            raise DomainError("kappa must be > 0")
        if self.novelty_detector not in ("forecast-band", "iforest", "lof"):
            raise DomainError(f"unknown novelty detector {self.novelty_detector!r}")

    @property
    def completeness_last_n(self) -> int:
        return max(1, round(self.completeness_window_seconds / self.nominal_rate_seconds))


_FLOAT_KEYS = {
    "nominal_rate_seconds", "loss_factor", "completeness_window_seconds",
    "alpha", "precision_radius_m", "kappa",
}
_STR_KEYS = {
    "novelty_detector", "entity_type", "unit_code", "source",
    "sarima_model", "iforest_model", "lof_model", "reference_file",
}


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a ``key = value`` config file (# starts a comment)."""
    settings: dict[str, object] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key in _FLOAT_KEYS:
            settings[key] = float(value)
        elif key in _STR_KEYS:
            settings[key] = value
        else:
            raise InputError(f"{path}:{lineno}: unknown config key {key!r}")
    return PipelineConfig(**settings)


@dataclass(frozen=True)
class PhaseTiming:
    """Wall time split into the data-fetch and pure-computation phases."""

    requesting_s: float
    processing_s: float

    @property
    def total_s(self) -> float:
        return self.requesting_s + self.processing_s


@dataclass
class CurationResult:
    """Entities emitted for one incoming observation.

    ``pairs`` holds 0..n synthetic pairs followed by exactly one real pair,
    ordered by observedAt.  Timings and the completeness fetch count refer to
    the real observation's assessment.
    """

    pairs: list[tuple[Observation, DQAssessment]]
    timings: dict[str, PhaseTiming]
    records_fetched: int
    neighbors_fetched: int


@dataclass
class _SensorState:
    last_observed_at: datetime | None = None
    timeliness: metrics.TimelinessState | None = None


def observation_entity_id(entity_type: str, sensor_id: str) -> str:
    return f"urn:ngsi-ld:{entity_type}:{sensor_id}"


def assessment_entity_id(sensor_id: str) -> str:
    return f"urn:ngsi-ld:DataQualityAssessment:{sensor_id}"


class Curator:
    """Drives the curation steps for every observation of one phenomenon."""

    def __init__(
        self,
        store: TemporalStore,
        config: PipelineConfig,
        band: ExpectedBand | None = None,
        reference: ReferenceProvider | None = None,
        iforest_model: IForestModel | None = None,
        lof_model: LofModel | None = None,
    ) -> None:
        self.store = store
        self.config = config
        self.band = band
        self.reference = reference
        self.iforest_model = iforest_model
        self.lof_model = lof_model
        self._states: dict[str, _SensorState] = {}
        if config.novelty_detector == "forecast-band" and band is None:
            raise DomainError("forecast-band novelty needs an expected band")
        if config.novelty_detector == "iforest" and iforest_model is None:
            raise DomainError("iforest novelty needs a trained model")
        if config.novelty_detector == "lof" and lof_model is None:
            raise DomainError("lof novelty needs a trained model")

    # -- sensor state ---------------------------------------------------

    def _state(self, sensor_id: str) -> _SensorState:
        state = self._states.get(sensor_id)
        if state is None:
            state = _SensorState()
            # Resume from the store when this curator did not see the history.
            prev = self.store.latest(observation_entity_id(self.config.entity_type, sensor_id))
            prev_dqa = self.store.latest(assessment_entity_id(sensor_id))
            if isinstance(prev, Observation):
                state.last_observed_at = prev.observed_at
                if isinstance(prev_dqa, DQAssessment):
                    state.timeliness = metrics.TimelinessState(
                        prev_dqa.timeliness.value, prev.observed_at, self.config.alpha
                    )
            self._states[sensor_id] = state
        return state

    # -- loss management --------------------------------------------------

    def loss_manager(self, obs: Observation) -> list[Observation]:
        """Synthetic observations covering the gap before ``obs``, if any.

        A gap exists when the inter-arrival time exceeds
        ``loss_factor * nominal_rate``; the gap is then filled at the nominal
        cadence with values taken from the expected band.
        """
        state = self._state(obs.source_sensor)
        last = state.last_observed_at
        if last is None:
            return []
        rate = self.config.nominal_rate_seconds
        delta = (obs.observed_at - last).total_seconds()
        if delta <= self.config.loss_factor * rate:
            return []
        count = round(delta / rate) - 1
        if count <= 0:
            return []
        if self.band is None:
            raise DomainError("loss filling needs an expected band for synthetic values")
        synthetics = []
        for i in range(1, count + 1):
            t = last + timedelta(seconds=i * rate)
            value, _ = self.band.expected(t)
            synthetics.append(replace(obs, value=value, observed_at=t, has_quality=None))
        return synthetics

    # -- novelty -----------------------------------------------------------

    def _novelty(self, obs: Observation) -> tuple[bool, str]:
        detector = self.config.novelty_detector
        if detector == "forecast-band":
            expected_value, sigma = self.band.expected(obs.observed_at)
            flag = forecast_band_novelty(obs.value, expected_value, sigma, self.config.kappa)
            return flag, f"forecast-band(kappa={self.config.kappa:g})"
        row = _feature_row(obs)
        if detector == "iforest":
            model = self.iforest_model
            return model.is_outlier(row), (
                f"isolation-forest(n={model.n_estimators},psi={model.subsample_size})"
            )
        model = self.lof_model
        return model.is_outlier(row), f"lof(k={model.k})"

    # -- quality dimensions --------------------------------------------------

    def precision_inputs(self, obs: Observation) -> list[float]:
        """Values of nearby inlier entities (latest snapshot per neighbor).

        Neighbors without a resolvable quality assessment are excluded, as
        are neighbors whose latest assessment tags them as outliers.
        """
        neighbors = self.store.nearby_latest(
            obs.entity_type, obs.location, self.config.precision_radius_m,
            exclude_id=obs.id,
        )
        return [
            neighbor.value
            for neighbor, dqa in neighbors
            if dqa is not None and not dqa.outlier.is_outlier
        ]

    # -- the pipeline ---------------------------------------------------------

    def process_observation(self, obs: Observation) -> CurationResult:
        """Run losses, novelty, dimensions and tagging for one observation."""
        obs.validate()
        state = self._state(obs.source_sensor)
        if state.last_observed_at is not None and obs.observed_at <= state.last_observed_at:
            raise OrderingError(
                f"sensor {obs.source_sensor}: {obs.observed_at} not after "
                f"{state.last_observed_at}"
            )
        entity_id = observation_entity_id(self.config.entity_type, obs.source_sensor)
        obs = replace(obs, id=entity_id, entity_type=self.config.entity_type)

        pairs: list[tuple[Observation, DQAssessment]] = []
        for synthetic in self.loss_manager(obs):
            pair, _, _, _ = self._assess_and_store(synthetic, synthetic_origin=True)
            pairs.append(pair)
        pair, timings, fetched, neighbors = self._assess_and_store(obs, synthetic_origin=False)
        pairs.append(pair)
        return CurationResult(
            pairs=pairs,
            timings=timings,
            records_fetched=fetched,
            neighbors_fetched=neighbors,
        )

    def _assess_and_store(
        self, obs: Observation, synthetic_origin: bool
    ) -> tuple[tuple[Observation, DQAssessment], dict[str, PhaseTiming], int, int]:
        cfg = self.config
        t = obs.observed_at
        state = self._state(obs.source_sensor)
        dqa_id = assessment_entity_id(obs.source_sensor)
        timings: dict[str, PhaseTiming] = {}

        # novelty detection against the short-term forecast
        is_outlier, outlier_method = self._novelty(obs)

        # accuracy (omitted when no reference resolves)
        t0 = perf_counter()
        ref = (
            self.reference.reference_value(obs.entity_type, obs.location, t)
            if self.reference is not None
            else None
        )
        t1 = perf_counter()
        accuracy_prop = None
        if ref is not None:
            accuracy_prop = DQProperty(metrics.accuracy(obs.value, ref), t, obs.unit_code)
        t2 = perf_counter()
        timings["accuracy"] = PhaseTiming(t1 - t0, t2 - t1)

        # timeliness (Eq. 3 state update; seeded from the nominal rate)
        t0 = perf_counter()
        prev_dqa = self.store.latest(dqa_id)
        t1 = perf_counter()
        seeded = False
        if state.timeliness is None:
            mean = cfg.nominal_rate_seconds
            state.timeliness = metrics.TimelinessState(mean, t, cfg.alpha)
            seeded = True
        else:
            prev_mean = (
                prev_dqa.timeliness.value
                if isinstance(prev_dqa, DQAssessment)
                else state.timeliness.mean_timeliness
            )
            base = metrics.TimelinessState(
                prev_mean, state.timeliness.last_observed_at, cfg.alpha
            )
            state.timeliness, mean = metrics.timeliness_update(base, t)
        t2 = perf_counter()
        timings["timeliness"] = PhaseTiming(t1 - t0, t2 - t1)
        timeliness_prop = DQProperty(mean, t, SECONDS_UNIT)

        # completeness (missed measurements counted via synthetic tags)
        t0 = perf_counter()
        records = self.store.temporal(
            TemporalQuery(entity_id=dqa_id, last_n=cfg.completeness_last_n, as_of=t)
        )
        t1 = perf_counter()
        missed = sum(
            1 for r in records
            if isinstance(r.entity, DQAssessment) and r.entity.synthetic.is_synthetic
        )
        completeness_value = metrics.completeness(
            metrics.CompletenessInputs(
                cfg.completeness_window_seconds, mean, missed
            )
        )
        t2 = perf_counter()
        timings["completeness"] = PhaseTiming(t1 - t0, t2 - t1)
        completeness_prop = DQProperty(completeness_value, t, COMPLETENESS_UNIT)

        # precision (omitted without inlier neighbors)
        t0 = perf_counter()
        neighbors = self.store.nearby_latest(
            obs.entity_type, obs.location, cfg.precision_radius_m, exclude_id=obs.id
        )
        t1 = perf_counter()
        inlier_values = [
            neighbor.value
            for neighbor, dqa in neighbors
            if dqa is not None and not dqa.outlier.is_outlier
        ]
        precision_prop = None
        if inlier_values:
            precision_prop = DQProperty(
                metrics.precision(obs.value, inlier_values), t, obs.unit_code
            )
        t2 = perf_counter()
        timings["precision"] = PhaseTiming(t1 - t0, t2 - t1)

        # tagging and atomic persistence
        source = cfg.source + ("/timeliness-seeded" if seeded else "")
        dqa = DQAssessment(
            id=dqa_id,
            source=source,
            date_calculated=t,
            accuracy=accuracy_prop,
            completeness=completeness_prop,
            timeliness=timeliness_prop,
            precision=precision_prop,
            outlier=OutlierTag(is_outlier, outlier_method, t),
            synthetic=SyntheticTag(
                synthetic_origin,
                self.band.methodology if synthetic_origin else "",
                t,
            ),
        )
        linked = link_quality(obs, dqa)
        self.store.upsert_many([dqa, linked])
        state.last_observed_at = t
        return (linked, dqa), timings, len(records), len(neighbors)


def _feature_row(obs: Observation) -> list[float]:
    return feature_rows([(obs.observed_at, obs.value)])[0].tolist()


# -- stream I/O ----------------------------------------------------------

CSV_HEADER = ["sensor_id", "observed_at", "value", "unit", "lat", "lon"]


def read_observations_csv(path: str | Path, entity_type: str = "Temperature") -> list[Observation]:
    """Load an observation stream from ``sensor_id,observed_at,value,unit,lat,lon``."""
    observations = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(CSV_HEADER) - set(reader.fieldnames):
            raise InputError(f"{path}: expected header {','.join(CSV_HEADER)}")
        for row in reader:
            sensor = row["sensor_id"]
            observations.append(
                Observation(
                    id=observation_entity_id(entity_type, sensor),
                    entity_type=entity_type,
                    value=float(row["value"]),
                    unit_code=row["unit"],
                    observed_at=parse_timestamp(row["observed_at"]),
                    location=(float(row["lat"]), float(row["lon"])),
                    source_sensor=sensor,
                )
            )
    return observations


def write_pairs_jsonl(results: Iterable[CurationResult], path: str | Path) -> int:
    """Write emitted (observation, assessment) pairs as JSON lines."""
    count = 0
    with Path(path).open("wb") as fh:
        for result in results:
            for obs, dqa in result.pairs:
                fh.write(b'{"observation":' + serialize(obs) +
                         b',"assessment":' + serialize(dqa) + b"}\n")
                count += 1
    return count
