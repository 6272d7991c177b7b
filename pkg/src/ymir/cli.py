"""Command line entry points: ``ymir train|detect|eval|synth``.

Exit codes: 0 ok, 2 usage/config error, 3 data error, 4 numeric error.
The ``YMIR_SEED`` environment variable overrides the config seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .data import load_labels_csv, save_labels_csv, save_timeseries_csv
from .errors import ContractError, UsageError, YmirError
from .evaluation import best_range_f1
from .pipeline import (
    ArtifactBundle,
    PipelineConfig,
    detect_series,
    load_clean_timeseries,
    read_scores_csv,
    train_pipeline,
)
from .synth import SynthProfile, generate_synthetic


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ymir",
                                     description="ensemble time-series anomaly detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit detectors, normalizer, and classifier")
    p_train.add_argument("--data", required=True, help="training data CSV")
    p_train.add_argument("--labels", help="optional label CSV (sparse or full)")
    p_train.add_argument("--config", required=True, help="pipeline config JSON")
    p_train.add_argument("--out", required=True, help="artifact output directory")
    p_train.add_argument("--unsupervised-only", action="store_true",
                         help="skip classifier training")

    p_detect = sub.add_parser("detect", help="score a series against trained artifacts")
    p_detect.add_argument("--data", required=True)
    p_detect.add_argument("--model", required=True, help="artifact directory from train")
    p_detect.add_argument("--out", required=True, help="output directory")
    p_detect.add_argument("--mode", choices=("offline", "stream"), default="offline")
    p_detect.add_argument("--batch", type=int, default=100,
                          help="batch size for stream mode")

    p_eval = sub.add_parser("eval", help="best range F1 of a scores CSV against labels")
    p_eval.add_argument("--scores", required=True)
    p_eval.add_argument("--labels", required=True, help="full label CSV")
    p_eval.add_argument("--out", required=True, help="report JSON path")

    p_synth = sub.add_parser("synth", help="generate a labeled synthetic dataset")
    p_synth.add_argument("--profile", required=True, help="profile JSON")
    p_synth.add_argument("--out", required=True, help="output directory")
    return parser


def _seed_override(value: int) -> int:
    env = os.environ.get("YMIR_SEED")
    if env is None:
        return value
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"YMIR_SEED must be an integer, got {env!r}") from None


def _cmd_train(args) -> int:
    config = PipelineConfig.load(args.config)
    seed = _seed_override(config.seed)
    if seed != config.seed:
        config = PipelineConfig.from_dict({**config.to_dict(), "seed": seed})
    ts = load_clean_timeseries(args.data)
    labels = load_labels_csv(args.labels, ts) if args.labels else None
    outcome = train_pipeline(config, ts, labels,
                             with_classifier=not args.unsupervised_only)
    manifest = outcome.bundle.save(args.out)
    print(f"trained {len(outcome.bundle.detectors)} detectors "
          f"(mode={outcome.bundle.mode}, rho={outcome.bundle.rho:.4f})")
    print(f"manifest: {manifest}")
    return 0


def _cmd_detect(args) -> int:
    bundle = ArtifactBundle.load(args.model)
    ts = load_clean_timeseries(args.data)
    batch = None if args.mode == "offline" else args.batch
    table = detect_series(bundle, ts, batch_size=batch)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table.write_csv(out / "scores.csv")
    with open(out / "result.json", "w", encoding="utf-8") as fh:
        json.dump(table.result.to_dict(), fh, indent=1)
        fh.write("\n")
    print(f"scored {ts.length} rows, flagged {len(table.result.flagged)}")
    return 0


def _cmd_eval(args) -> int:
    table = read_scores_csv(args.scores)
    from .data import TimeSeriesSet

    ref = TimeSeriesSet(table.timestamps,
                        table.aggregate[:, None],
                        ("aggregate",))
    labels = load_labels_csv(args.labels, ref)
    if not labels.fully_labeled:
        raise ContractError("evaluation requires a label for every timestamp")
    column = "classifier" if table.classifier is not None else "aggregate"
    report = best_range_f1(table.column(column), labels)
    payload = {"column": column, **report.to_dict()}
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    print(f"best_f1={report.best_f1:.4f} threshold={report.threshold:.6f} "
          f"precision={report.precision:.4f} recall={report.recall:.4f} ({column})")
    return 0


def _cmd_synth(args) -> int:
    with open(args.profile, "r", encoding="utf-8") as fh:
        profile = SynthProfile.from_dict(json.load(fh))
    env = os.environ.get("YMIR_SEED")
    if env is not None:
        profile = SynthProfile.from_dict({**profile.to_dict(), "seed": _seed_override(profile.seed)})
    ts, labels, events = generate_synthetic(profile)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_timeseries_csv(out / "data.csv", ts)
    save_labels_csv(out / "labels.csv", labels)
    with open(out / "events.json", "w", encoding="utf-8") as fh:
        json.dump([e.to_dict() for e in events], fh, indent=1)
        fh.write("\n")
    print(f"wrote {ts.length} rows, {len(events)} events to {out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except json.JSONDecodeError as exc:
        print(f"error: bad JSON: {exc}", file=sys.stderr)
        return 2
    except YmirError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
