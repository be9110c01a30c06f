"""Command-line driver for the seven-step pipeline.

Exit codes: 0 success, 1 data/validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys

from chronoforge.errors import ChronoforgeError, ConfigError
from chronoforge.pipeline import (
    cmd_features,
    cmd_labels,
    cmd_predict,
    cmd_test,
    cmd_train,
    cmd_validate,
    parse_run_config,
)

EXIT_OK = 0
EXIT_DATA = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chronoforge",
        description="Time-aware predictive-modeling pipeline: labels, features, train, test, validate, predict.",
    )
    parser.add_argument("--config", "-c", required=True, help="path to the run configuration JSON")
    parser.add_argument("--output", "-o", help="override the output directory")
    parser.add_argument("--data-dir", help="override the entityset data directory")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker cap for parallel stages")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("labels", help="search training examples per data split")
    sub.add_parser("features", help="synthesize features and compute split matrices")
    sub.add_parser("train", help="run the model search and emit model + provenance")

    test = sub.add_parser("test", help="integration-test the deployment path on new data")
    test.add_argument("--new-data", help="directory of new entity CSVs")
    test.add_argument("--current-time", help="explicit current time for scoring")

    validate = sub.add_parser("validate", help="validate the model in production conditions")
    validate.add_argument("--new-data", help="directory of new entity CSVs to append first")

    predict = sub.add_parser("predict", help="score instances at a timestamp")
    predict.add_argument("--at", help="prediction timestamp")
    predict.add_argument("--new-data", help="directory of new entity CSVs to append first")
    predict.add_argument("--instances", help="comma-separated instance ids (default: all)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_run_config(
            args.config,
            output_override=args.output,
            data_dir_override=args.data_dir,
            seed_override=args.seed,
            default_output=os.environ.get("CHRONOFORGE_OUTPUT"),
        )
        if args.command == "labels":
            label_times = cmd_labels(config)
            for split_id, lt in label_times.items():
                print(f"labels[{split_id}]: {len(lt)} examples")
        elif args.command == "features":
            result = cmd_features(config)
            n = len(result["features"])
            rows = {sid: m.n_rows for sid, m in result["matrices"].items()}
            print(f"features: {n} definitions; rows per split: {rows}")
        elif args.command == "train":
            outcome = cmd_train(config, jobs=args.jobs)
            artifact = outcome.artifact
            winner = outcome.leaderboard.entries[0]
            print(
                f"train: winner {artifact.method_key} "
                f"(mean test cost {winner.mean_cost:.6g}, threshold {artifact.threshold:.6g}); "
                f"{len(outcome.leaderboard.entries)} configurations evaluated"
            )
        elif args.command == "test":
            report = cmd_test(config, new_data=args.new_data, current_time=args.current_time)
            for step in report.steps:
                line = f"test: {step['name']}: {step['status']}"
                if step.get("error"):
                    line += f" ({step['error']})"
                print(line)
            if not report.passed:
                return EXIT_DATA
            print(f"test: {len(report.predictions or [])} predictions")
        elif args.command == "validate":
            report = cmd_validate(config, new_data=args.new_data)
            print(
                f"validate: {report.evaluated}/{report.pairs} rows evaluated "
                f"({report.unlabelable} unlabelable), cost {report.cost}, "
                f"matches_training={report.matches_training}"
            )
        elif args.command == "predict":
            instances = args.instances.split(",") if args.instances else None
            predictions = cmd_predict(
                config, at=args.at, instances=instances, new_data=args.new_data
            )
            print(f"predict: {len(predictions)} predictions written")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChronoforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
