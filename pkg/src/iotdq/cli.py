"""Command-line entry points for the evaluation harness and the curator.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .anomaly import IForestModel, LofModel
from .datasets import load_static_dataset
from .entities import deserialize
from .errors import DQError, InputError
from .evaluation import (
    StaticEvalConfig,
    default_fixture_pair,
    overhead_report,
    report_write,
    simulate,
    static_flow_eval,
    train_models,
)
from .pipeline import (
    Curator,
    PipelineConfig,
    FileReferenceProvider,
    SarimaBand,
    load_config,
    read_observations_csv,
    write_pairs_jsonl,
)
from .sarima import SarimaModel
from .store import TemporalStore

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _cmd_simulate(args: argparse.Namespace) -> int:
    report = simulate(
        n_sensors=args.sensors,
        cadence_seconds=args.cadence,
        per_sensor=args.count,
        rounds=args.rounds,
        seed=args.seed,
    )
    written = report_write(report, args.out)
    for path in written:
        print(path)
    return EXIT_OK


def _build_curator(config: PipelineConfig, store: TemporalStore) -> Curator:
    band = None
    if config.sarima_model:
        band = SarimaBand(SarimaModel.load(config.sarima_model))
    reference = FileReferenceProvider(config.reference_file) if config.reference_file else None
    iforest_model = IForestModel.load(config.iforest_model) if config.iforest_model else None
    lof_model = LofModel.load(config.lof_model) if config.lof_model else None
    return Curator(
        store, config, band=band, reference=reference,
        iforest_model=iforest_model, lof_model=lof_model,
    )


def _cmd_replay(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    observations = read_observations_csv(args.input, entity_type=config.entity_type)
    curator = _build_curator(config, TemporalStore())
    results = [curator.process_observation(obs) for obs in observations]
    count = write_pairs_jsonl(results, args.out)
    print(f"{args.out}: {count} entity pairs")
    return EXIT_OK


def _cmd_overhead(args: argparse.Namespace) -> int:
    if args.fixture:
        doc = json.loads(Path(args.fixture).read_text(encoding="utf-8"))
        observation = deserialize(json.dumps(doc["observation"]))
        assessment = deserialize(json.dumps(doc["assessment"]))
    else:
        observation, assessment = default_fixture_pair()
    table = overhead_report(observation, assessment)
    text = json.dumps(table, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(args.out)
    else:
        print(text)
    return EXIT_OK


def _cmd_static_eval(args: argparse.Namespace) -> int:
    dataset = load_static_dataset(args.dataset)
    config = StaticEvalConfig(seed=args.seed)
    report = static_flow_eval(dataset, config)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        print(args.out)
    else:
        print(text)
    return EXIT_OK


def _cmd_train(args: argparse.Namespace) -> int:
    dataset = load_static_dataset(args.dataset)
    paths = train_models(dataset, args.out_models, StaticEvalConfig(seed=args.seed))
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iotdq",
        description="Data-quality assessment and curation for IoT observation streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo latency run on a synthetic stream")
    p.add_argument("--sensors", type=int, default=100)
    p.add_argument("--cadence", type=float, default=120.0, help="seconds between readings")
    p.add_argument("--count", type=int, default=100, help="readings per sensor")
    p.add_argument("--rounds", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="report directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("replay", help="run the curator over an observation CSV")
    p.add_argument("--input", required=True, help="CSV: sensor_id,observed_at,value,unit,lat,lon")
    p.add_argument("--config", required=True, help="key = value pipeline config file")
    p.add_argument("--out", required=True, help="JSON-lines output of emitted entity pairs")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("overhead", help="serialized-size overhead per quality property")
    p.add_argument("--fixture", help="JSON file with observation + assessment entities")
    p.add_argument("--out", help="write the JSON table here instead of stdout")
    p.set_defaults(func=_cmd_overhead)

    p = sub.add_parser("static-eval", help="evaluate the static flow on a labeled dataset")
    p.add_argument("--dataset", required=True, help="labeled dataset CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=_cmd_static_eval)

    p = sub.add_parser("train", help="train streaming models from a labeled dataset")
    p.add_argument("--dataset", required=True, help="labeled dataset CSV")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-models", required=True, help="directory for the model files")
    p.set_defaults(func=_cmd_train)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DQError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
