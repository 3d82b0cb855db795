"""Experiment driver: Monte Carlo timing runs, overhead and algorithm reports.

Latency assertions at desk scale are made on relative shape (stationarity,
turning points), never on absolute seconds: absolute numbers depend entirely
on the host.  Each simulation round starts from a clean store and replays
the same seeded stream; reported per-item times are medians across rounds so
occasional scheduler hiccups do not distort the series.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .anomaly import feature_rows, iforest_train, lof_scores, lof_train
from .datasets import (
    SANTANDER_BOX,
    DetectionFixture,
    SinusoidSignal,
    StaticDataset,
    generate_stream,
    load_static_dataset,
)
from .entities import (
    DQAssessment,
    DQProperty,
    Observation,
    OutlierTag,
    SyntheticTag,
    measure_size,
    serialize,
)
from .errors import DomainError, InputError
from .imputation import TimeSeriesPoint, impute_knn, interpolate_poly, mae, mape
from .metrics import overhead_percent
from .pipeline import Curator, PipelineConfig
from .preprocess import BoundingBox, aggregate_hourly, filter_geo, filter_nonsense
from .sarima import SarimaSpec, sarima_fit, sarima_forecast
from .store import TemporalStore

__all__ = [
    "SinusoidBand",
    "SignalReference",
    "DimensionSeries",
    "EvalReport",
    "simulate",
    "stationary_flatness",
    "overhead_report",
    "default_fixture_pair",
    "StaticEvalConfig",
    "DetectionMetrics",
    "ImputerMetrics",
    "ForecastMetrics",
    "StaticEvalReport",
    "static_flow_eval",
    "detection_eval",
    "train_models",
    "report_write",
]

UTC = timezone.utc

DIMENSIONS = ("accuracy", "completeness", "timeliness", "precision")


class SinusoidBand:
    """Expected band straight from the generating signal (deterministic)."""

    def __init__(self, signal: SinusoidSignal, sigma: float,
                 methodology: str = "sinusoid-band") -> None:
        self._signal = signal
        self._sigma = sigma
        self.methodology = methodology

    def expected(self, observed_at: datetime) -> tuple[float, float]:
        return self._signal.value(observed_at), self._sigma


class SignalReference:
    """Ground-truth provider returning the noiseless signal value."""

    def __init__(self, signal: SinusoidSignal) -> None:
        self._signal = signal

    def reference_value(self, phenomenon: str, location: tuple[float, float],
                        observed_at: datetime) -> float | None:
        return self._signal.value(observed_at)


@dataclass
class DimensionSeries:
    """Per-item medians across rounds plus stationary-phase statistics."""

    requesting_s: np.ndarray
    processing_s: np.ndarray
    total_s: np.ndarray
    stationary_mean_s: float
    stationary_std_s: float
    stationary_cv: float
    slope_per_item: float
    flatness_ok: bool


@dataclass
class EvalReport:
    n_sensors: int
    cadence_seconds: float
    per_sensor: int
    rounds: int
    seed: int
    stationary_fraction: float
    dimensions: dict[str, DimensionSeries]
    records_fetched: np.ndarray
    neighbors_fetched: np.ndarray
    values: np.ndarray
    overheads: dict[str, dict[str, float]]

    @property
    def n_items(self) -> int:
        return self.n_sensors * self.per_sensor

    def summary_dict(self) -> dict:
        return {
            "config": {
                "n_sensors": self.n_sensors,
                "cadence_seconds": self.cadence_seconds,
                "per_sensor": self.per_sensor,
                "rounds": self.rounds,
                "seed": self.seed,
                "stationary_fraction": self.stationary_fraction,
            },
            "dimensions": {
                name: {
                    "stationary_mean_s": d.stationary_mean_s,
                    "stationary_std_s": d.stationary_std_s,
                    "stationary_cv": d.stationary_cv,
                    "slope_per_item": d.slope_per_item,
                    "flatness_ok": d.flatness_ok,
                }
                for name, d in self.dimensions.items()
            },
            "records_fetched": [int(v) for v in self.records_fetched],
            "overheads": self.overheads,
        }


def stationary_flatness(
    total_s: np.ndarray, fraction: float = 0.5
) -> tuple[float, float, float, bool]:
    """(slope, mean, cv, ok) of the stationary phase of a per-item series.

    The series is flat when the fitted linear drift across the phase stays
    under 20% of the phase mean and the coefficient of variation is < 0.25.
    """
    n = total_s.size
    phase = total_s[n - int(n * fraction):]
    x = np.arange(phase.size, dtype=float)
    slope = float(np.polyfit(x, phase, 1)[0]) if phase.size > 1 else 0.0
    mean = float(phase.mean())
    cv = float(phase.std() / mean) if mean > 0 else 0.0
    ok = abs(slope) * phase.size < 0.2 * mean and cv < 0.25
    return slope, mean, cv, ok


def simulate(
    n_sensors: int = 100,
    cadence_seconds: float = 120.0,
    per_sensor: int = 100,
    rounds: int = 60,
    seed: int = 0,
    stationary_fraction: float = 0.5,
    noise_sigma: float = 0.3,
) -> EvalReport:
    """Monte Carlo latency run: clean-slate rounds over one seeded stream."""
    if min(n_sensors, per_sensor, rounds) < 1:
        raise DomainError("sensors, items per sensor and rounds must be >= 1")
    signal = SinusoidSignal()
    stream = generate_stream(
        n_sensors, cadence_seconds, per_sensor, seed,
        signal=signal, noise_sigma=noise_sigma,
    )
    n_items = len(stream)
    config = PipelineConfig(nominal_rate_seconds=cadence_seconds)
    requesting = {d: np.empty((rounds, n_items)) for d in DIMENSIONS}
    processing = {d: np.empty((rounds, n_items)) for d in DIMENSIONS}
    fetched = np.empty((rounds, n_items), dtype=int)
    neighbors = np.empty((rounds, n_items), dtype=int)

    for r in range(rounds):
        store = TemporalStore()
        curator = Curator(
            store, config,
            band=SinusoidBand(signal, noise_sigma),
            reference=SignalReference(signal),
        )
        for idx, obs in enumerate(stream):
            result = curator.process_observation(obs)
            for d in DIMENSIONS:
                timing = result.timings[d]
                requesting[d][r, idx] = timing.requesting_s
                processing[d][r, idx] = timing.processing_s
            fetched[r, idx] = result.records_fetched
            neighbors[r, idx] = result.neighbors_fetched

    dimensions = {}
    for d in DIMENSIONS:
        med_req = np.median(requesting[d], axis=0)
        med_proc = np.median(processing[d], axis=0)
        med_total = np.median(requesting[d] + processing[d], axis=0)
        slope, mean, cv, ok = stationary_flatness(med_total, stationary_fraction)
        dimensions[d] = DimensionSeries(
            requesting_s=med_req,
            processing_s=med_proc,
            total_s=med_total,
            stationary_mean_s=mean,
            stationary_std_s=cv * mean,
            stationary_cv=cv,
            slope_per_item=slope,
            flatness_ok=ok,
        )

    obs_fixture, dqa_fixture = default_fixture_pair()
    overheads = overhead_report(obs_fixture, dqa_fixture)
    return EvalReport(
        n_sensors=n_sensors,
        cadence_seconds=cadence_seconds,
        per_sensor=per_sensor,
        rounds=rounds,
        seed=seed,
        stationary_fraction=stationary_fraction,
        dimensions=dimensions,
        records_fetched=np.median(fetched, axis=0),
        neighbors_fetched=np.median(neighbors, axis=0),
        values=np.array([obs.value for obs in stream]),
        overheads=overheads,
    )


# -- serialized-size overhead -------------------------------------------------

def overhead_report(
    observation: Observation, assessment: DQAssessment
) -> dict[str, dict[str, float]]:
    """Per-dimension size overhead of the quality metadata.

    The raw baseline is the observation without its quality link; each
    dimension's extra bytes are what the property contributes to the
    serialized assessment.
    """
    raw_obs = replace(observation, has_quality=None)
    raw_bytes = measure_size(raw_obs)
    doc = json.loads(serialize(assessment))
    full = len(json.dumps(doc, separators=(",", ":"), ensure_ascii=False).encode("utf-8"))
    table: dict[str, dict[str, float]] = {}
    for name in DIMENSIONS:
        if name in doc:
            trimmed = {k: v for k, v in doc.items() if k != name}
            without = len(json.dumps(trimmed, separators=(",", ":"), ensure_ascii=False).encode("utf-8"))
            extra = full - without
        else:
            extra = 0
        table[name] = {
            "raw_bytes": float(raw_bytes),
            "extra_bytes": float(extra),
            "enriched_bytes": float(raw_bytes + extra),
            "overhead_percent": overhead_percent(raw_bytes + extra, raw_bytes),
        }
    return table


_FIXTURE_CONTEXT = (
    "https://raw.githubusercontent.com/smart-data-models/dataModel.DataQuality"
    "/master/context.jsonld"
)
_FIXTURE_SENSOR = (
    "SmartSantander:urban-observatory:environment:fixed-station:es-cant-santander-003001"
)


def default_fixture_pair() -> tuple[Observation, DQAssessment]:
    """Canonical linked entity pair used by size-overhead regression checks."""
    observed_at = datetime(2022, 6, 13, 10, 30, tzinfo=UTC)
    dqa_id = f"urn:ngsi-ld:DataQualityAssessment:{_FIXTURE_SENSOR}"
    observation = Observation(
        id=f"urn:ngsi-ld:Temperature:{_FIXTURE_SENSOR}",
        entity_type="Temperature",
        value=21.4729,
        unit_code="CEL",
        observed_at=observed_at,
        location=(43.4623478, -3.8047219),
        source_sensor=f"urn:ngsi-ld:Device:{_FIXTURE_SENSOR}",
        has_quality=dqa_id,
        context=_FIXTURE_CONTEXT,
    )
    assessment = DQAssessment(
        id=dqa_id,
        source="iot-dq-curator",
        date_calculated=observed_at,
        accuracy=DQProperty(0.53, observed_at, "CEL"),
        completeness=DQProperty(0.95, observed_at, "C62"),
        timeliness=DQProperty(121.4, observed_at, "SEC"),
        precision=DQProperty(0.31, observed_at, "CEL"),
        outlier=OutlierTag(False, "forecast-band(kappa=3)", observed_at),
        synthetic=SyntheticTag(False, "", observed_at),
    )
    return observation, assessment


# -- static flow ---------------------------------------------------------------

@dataclass(frozen=True)
class StaticEvalConfig:
    min_value: float = -10.0
    max_value: float = 45.0
    box: BoundingBox = SANTANDER_BOX
    n_estimators: int = 200
    subsample_size: int = 256
    contamination: float = 0.035
    lof_k: int = 70
    knn_k: int = 5
    poly_degree: int = 2
    poly_window: int = 6
    sarima_spec: SarimaSpec = SarimaSpec(0, 1, 1, 2, 1, 0, 24)
    forecast_horizon: int = 48
    seed: int = 0


@dataclass
class DetectionMetrics:
    flagged: int
    hits: int
    precision: float
    recall: float
    recall_global: float
    recall_local: float
    flagged_indices: tuple[int, ...]


@dataclass
class ImputerMetrics:
    mape: float
    mae: float
    n_targets: int


@dataclass
class ForecastMetrics:
    mape: float
    mae: float
    horizon: int


@dataclass
class StaticEvalReport:
    n_raw: int
    n_kept: int
    n_hourly: int
    detection: dict[str, DetectionMetrics]
    imputation: dict[str, ImputerMetrics]
    forecast: ForecastMetrics

    def to_dict(self) -> dict:
        return {
            "n_raw": self.n_raw,
            "n_kept": self.n_kept,
            "n_hourly": self.n_hourly,
            "detection": {
                name: {
                    "flagged": m.flagged,
                    "hits": m.hits,
                    "precision": m.precision,
                    "recall": m.recall,
                    "recall_global": m.recall_global,
                    "recall_local": m.recall_local,
                }
                for name, m in self.detection.items()
            },
            "imputation": {
                name: {"mape": m.mape, "mae": m.mae, "n_targets": m.n_targets}
                for name, m in self.imputation.items()
            },
            "forecast": {
                "mape": self.forecast.mape,
                "mae": self.forecast.mae,
                "horizon": self.forecast.horizon,
            },
        }


def _detection_metrics(
    flagged: np.ndarray,
    planted: set[int],
    planted_global: set[int],
    planted_local: set[int],
) -> DetectionMetrics:
    flagged_set = set(int(i) for i in np.nonzero(flagged)[0])
    hits = len(flagged_set & planted)
    return DetectionMetrics(
        flagged=len(flagged_set),
        hits=hits,
        precision=hits / len(flagged_set) if flagged_set else 0.0,
        recall=hits / len(planted) if planted else 0.0,
        recall_global=(
            len(flagged_set & planted_global) / len(planted_global)
            if planted_global else 0.0
        ),
        recall_local=(
            len(flagged_set & planted_local) / len(planted_local)
            if planted_local else 0.0
        ),
        flagged_indices=tuple(sorted(flagged_set)),
    )


def detection_eval(
    fixture: DetectionFixture, config: StaticEvalConfig | None = None
) -> dict[str, DetectionMetrics]:
    """Run both detectors on a planted fixture and score against the plants."""
    config = config or StaticEvalConfig()
    rows = feature_rows([(p.t, p.v) for p in fixture.points])
    planted = set(fixture.planted_indices)
    planted_global = set(fixture.global_indices)
    planted_local = set(fixture.local_indices)

    forest = iforest_train(
        rows,
        n_estimators=config.n_estimators,
        subsample_size=config.subsample_size,
        contamination=config.contamination,
        seed=config.seed,
    )
    forest_scores = np.array([forest.score(r) for r in rows])
    forest_flagged = forest_scores >= forest.threshold

    scores = lof_scores(rows, config.lof_k)
    threshold = float(np.quantile(scores, 1.0 - config.contamination, method="midpoint"))
    lof_flagged = scores >= threshold

    return {
        "iforest": _detection_metrics(forest_flagged, planted, planted_global, planted_local),
        "lof": _detection_metrics(lof_flagged, planted, planted_global, planted_local),
    }


def static_flow_eval(
    dataset: StaticDataset | str | Path, config: StaticEvalConfig | None = None
) -> StaticEvalReport:
    """Full static flow: clean, detect, remove, impute, extend; score each step."""
    if not isinstance(dataset, StaticDataset):
        dataset = load_static_dataset(dataset)
    config = config or StaticEvalConfig()

    kept, _ = filter_nonsense(dataset.observations, config.min_value, config.max_value)
    kept, _ = filter_geo(kept, config.box)
    hourly = aggregate_hourly(kept)

    index_of = {p.t: i for i, p in enumerate(hourly)}
    planted_global = {index_of[t] for t in dataset.global_hours if t in index_of}
    planted_local = {index_of[t] for t in dataset.local_hours if t in index_of}
    planted = planted_global | planted_local

    fixture = DetectionFixture(
        points=tuple(hourly),
        global_indices=tuple(sorted(planted_global)),
        local_indices=tuple(sorted(planted_local)),
    )
    detection = detection_eval(fixture, config)

    removed = set(detection["iforest"].flagged_indices) | set(detection["lof"].flagged_indices)
    cleaned = [p for i, p in enumerate(hourly) if i not in removed]

    # every hour of the truth grid that the cleaned series no longer covers
    have = {p.t for p in cleaned}
    targets = sorted(t for t in dataset.truth if t not in have)
    truth_values = [dataset.truth[t] for t in targets]
    poly_pred = interpolate_poly(cleaned, targets, config.poly_degree, config.poly_window)
    knn_pred = impute_knn(cleaned, targets, config.knn_k)
    imputation = {
        f"poly{config.poly_degree}": ImputerMetrics(
            mape(truth_values, poly_pred), mae(truth_values, poly_pred), len(targets)
        ),
        f"knn{config.knn_k}": ImputerMetrics(
            mape(truth_values, knn_pred), mae(truth_values, knn_pred), len(targets)
        ),
    }

    filled = sorted(
        cleaned + [TimeSeriesPoint(t, v) for t, v in zip(targets, poly_pred)],
        key=lambda p: p.t,
    )
    horizon = config.forecast_horizon
    train, held_out = filled[:-horizon], filled[-horizon:]
    model = sarima_fit(train, config.sarima_spec)
    forecast = sarima_forecast(model, horizon)
    truth_tail = [dataset.truth[p.t] for p in held_out]
    forecast_metrics = ForecastMetrics(
        mape=mape(truth_tail, forecast.values.tolist()),
        mae=mae(truth_tail, forecast.values.tolist()),
        horizon=horizon,
    )

    return StaticEvalReport(
        n_raw=len(dataset.observations),
        n_kept=len(kept),
        n_hourly=len(hourly),
        detection=detection,
        imputation=imputation,
        forecast=forecast_metrics,
    )


def train_models(
    dataset: StaticDataset | str | Path,
    out_dir: str | Path,
    config: StaticEvalConfig | None = None,
    novelty_lof_k: int = 20,
    training_days: int = 60,
) -> dict[str, Path]:
    """Static flow ending in saved models for the streaming pipeline.

    The forecast training series is truncated to the most recent
    ``training_days`` so only the daily period survives.
    """
    if not isinstance(dataset, StaticDataset):
        dataset = load_static_dataset(dataset)
    config = config or StaticEvalConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    kept, _ = filter_nonsense(dataset.observations, config.min_value, config.max_value)
    kept, _ = filter_geo(kept, config.box)
    hourly = aggregate_hourly(kept)
    rows = feature_rows([(p.t, p.v) for p in hourly])

    forest = iforest_train(
        rows,
        n_estimators=config.n_estimators,
        subsample_size=config.subsample_size,
        contamination=config.contamination,
        seed=config.seed,
    )
    lof_flagged = lof_scores(rows, min(config.lof_k, len(rows) - 1))
    lof_threshold = float(
        np.quantile(lof_flagged, 1.0 - config.contamination, method="midpoint")
    )
    removed = {
        i for i, row in enumerate(rows)
        if forest.score(row) >= forest.threshold or lof_flagged[i] >= lof_threshold
    }
    cleaned = [p for i, p in enumerate(hourly) if i not in removed]
    have = {p.t for p in cleaned}
    targets = sorted(t for t in dataset.truth if t not in have)
    poly_pred = interpolate_poly(cleaned, targets, config.poly_degree, config.poly_window)
    filled = sorted(
        cleaned + [TimeSeriesPoint(t, v) for t, v in zip(targets, poly_pred)],
        key=lambda p: p.t,
    )

    clean_rows = feature_rows([(p.t, p.v) for p in filled])
    novelty_forest = iforest_train(
        clean_rows,
        n_estimators=config.n_estimators,
        subsample_size=config.subsample_size,
        contamination=config.contamination,
        seed=config.seed,
    )
    novelty_lof = lof_train(clean_rows, k=novelty_lof_k, contamination=config.contamination)

    recent = filled[-training_days * 24:]
    sarima_model = sarima_fit(recent, config.sarima_spec)

    paths = {
        "iforest": out / "iforest.json",
        "lof": out / "lof.json",
        "sarima": out / "sarima.json",
    }
    novelty_forest.save(paths["iforest"])
    novelty_lof.save(paths["lof"])
    sarima_model.save(paths["sarima"])
    return paths


# -- report files ---------------------------------------------------------------

def report_write(report: EvalReport, out_dir: str | Path,
                 extra_metrics: dict | None = None) -> list[Path]:
    """One timing CSV per dimension plus a JSON summary."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create {out}: {exc}") from exc
    written = []
    for name in DIMENSIONS:
        series = report.dimensions[name]
        path = out / f"{name}.csv"
        lines = ["item_index,requesting_s,processing_s,total_s"]
        for i in range(series.total_s.size):
            lines.append(
                f"{i},{series.requesting_s[i]:.9f},"
                f"{series.processing_s[i]:.9f},{series.total_s[i]:.9f}"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)
    summary = report.summary_dict()
    if extra_metrics:
        summary["metrics"] = extra_metrics
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    written.append(summary_path)
    return written
