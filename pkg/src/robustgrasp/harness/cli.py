"""Command line entry point.

Exit codes: 0 on success, 1 for configuration or usage errors, 2 when a
computation fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..corruption import CorruptionPlan
from ..errors import ConfigError, RobustGraspError
from ..model import PredictorParams, evaluate, train
from .data import Dataset
from .experiment import (
    ExperimentConfig,
    apply_plan,
    corrupt_labels,
    generate_data,
    make_train_config,
    run_experiment,
)
from .grasp_corpus import GraspCorpusParams, gen_grasp_synthetic
from .report import emit_report, parse_report, rows_from_flat

LOSS_NAMES = {
    "ce": "ce",
    "pseudo": "pseudo",
    "smoothed-missing": "smoothed_missing",
    "sce": "sce",
    "smoothed-noisy": "smoothed_noisy",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(parser):
    parser.add_argument("--config", type=Path,
                        help="experiment config JSON; omitted keys take the documented defaults")
    parser.add_argument("--seed", type=int, default=0, help="u64 seed (default 0)")
    parser.add_argument("--out", type=Path, help="output path (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="report format (default csv)")
    parser.add_argument("--loss", choices=sorted(LOSS_NAMES),
                        help="loss for `train` (default ce)")
    parser.add_argument("--kappa1", type=float, help="fraction of labels removed (MCAR)")
    parser.add_argument("--kappa2", type=float, help="fraction of labels corrupted by noise")
    parser.add_argument("--epsilon", type=float,
                        help="multiplicative noise factor (grasp_synthetic task)")
    parser.add_argument("--gamma", type=float, help="confidence threshold (default 0.95)")
    parser.add_argument("--xi", type=float, help="self-target smoothing (default 0.9)")
    parser.add_argument("--delta", type=float, help="label smoothing for noisy loss (default 0.8)")
    parser.add_argument("--literal-paper-smoothing", action="store_true",
                        help="smooth the prediction rather than the label in the noisy loss")


def build_parser() -> argparse.ArgumentParser:
    defaults = json.dumps(ExperimentConfig().to_dict())
    parser = _Parser(
        prog="robustgrasp",
        description="Robust-loss experiments on synthetic data.",
        epilog=f"Default config: {defaults}",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-data", help="generate a seeded dataset")
    p.add_argument("--corpus", action="store_true",
                   help="write a grasp-candidate corpus for the composite losses instead")
    _common(p)

    p = sub.add_parser("corrupt", help="apply MCAR removal or label noise to a dataset")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--plan", type=Path, help="apply this serialized plan instead of drawing one")
    p.add_argument("--plan-out", type=Path, help="also write the plan here")
    _common(p)

    p = sub.add_parser("train", help="train a model on a (possibly corrupted) dataset")
    p.add_argument("--data", type=Path, required=True)
    _common(p)

    p = sub.add_parser("eval", help="test accuracy of trained parameters")
    p.add_argument("--params", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    _common(p)

    p = sub.add_parser("sweep", help="run a paired baseline/robust sweep")
    _common(p)

    p = sub.add_parser("report", help="convert a report between csv and json")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    _common(p)
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config.read_text(encoding="utf-8"))
    else:
        cfg = ExperimentConfig()
    corruption = dict(cfg.corruption)
    loss = dict(cfg.loss)
    if args.kappa1 is not None:
        corruption.update(kind="mcar", ratio=args.kappa1)
    if args.kappa2 is not None:
        if corruption["kind"] == "mcar":
            corruption["kind"] = "multiplicative" if cfg.task == "grasp_synthetic" else "label_flip"
        corruption["ratio"] = args.kappa2
    if args.epsilon is not None:
        corruption["factor"] = args.epsilon
    for name in ("gamma", "xi", "delta"):
        if getattr(args, name) is not None:
            loss[name] = getattr(args, name)
    if args.literal_paper_smoothing:
        loss["literal_paper_smoothing"] = True
    doc = cfg.to_dict()
    doc.update(corruption=corruption, loss=loss)
    return ExperimentConfig.from_dict(doc)


def _write(args, text: str):
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text, encoding="utf-8")


def _read_dataset(path: Path):
    doc = json.loads(path.read_text(encoding="utf-8"))
    angles = doc.get("train_angles")
    return doc, Dataset.from_dict(doc["dataset"]), None if angles is None else np.array(angles)


def cmd_gen_data(args, cfg):
    if args.corpus:
        corpus = gen_grasp_synthetic(GraspCorpusParams(), args.seed)
        doc = {
            "grasps": [g.to_dict() for g in corpus.grasps],
            "approach": corpus.approach.to_dict(),
            "approach_clean": corpus.approach_clean.to_dict(),
            "operation": corpus.operation.to_dict(),
            "operation_clean": corpus.operation_clean.to_dict(),
            "operation_noisy": corpus.operation_noisy.to_dict(),
        }
        _write(args, json.dumps(doc) + "\n")
        return
    data, angles = generate_data(cfg, args.seed)
    doc = {"task": cfg.task, "dataset": data.to_dict(),
           "train_angles": None if angles is None else angles.tolist()}
    _write(args, json.dumps(doc) + "\n")


def cmd_corrupt(args, cfg):
    doc, data, angles = _read_dataset(args.data)
    if args.plan is not None:
        plan = CorruptionPlan.from_json(args.plan.read_text(encoding="utf-8"))
        y = apply_plan(cfg, data, angles, plan)
    else:
        y, plan = corrupt_labels(cfg, data, angles, args.seed)
    if args.plan_out is not None:
        args.plan_out.write_text(plan.to_json() + "\n", encoding="utf-8")
    corrupted = Dataset(data.x_train, np.asarray(y, dtype=np.int64), data.x_test, data.y_test)
    doc = {"task": doc.get("task"), "dataset": corrupted.to_dict(),
           "train_angles": doc.get("train_angles"), "plan": json.loads(plan.to_json())}
    _write(args, json.dumps(doc) + "\n")


def cmd_train(args, cfg):
    _, data, _ = _read_dataset(args.data)
    mode = LOSS_NAMES[args.loss or "ce"]
    params, history = train((data.x_train, data.y_train), (data.x_test, data.y_test),
                            make_train_config(cfg, mode, args.seed))
    if args.out is None:
        sys.stdout.write(params.to_json() + "\n")
    else:
        args.out.write_text(params.to_json() + "\n", encoding="utf-8")
        last = history[-1] if history else {}
        sys.stderr.write(f"trained {mode}: {json.dumps(last)}\n")


def cmd_eval(args, cfg):
    params = PredictorParams.from_json(args.params.read_text(encoding="utf-8"))
    _, data, _ = _read_dataset(args.data)
    acc = evaluate(params, data.x_test, data.y_test)
    _write(args, json.dumps({"accuracy": acc}) + "\n")


def cmd_sweep(args, cfg):
    _write(args, emit_report(run_experiment(cfg), args.format))


def cmd_report(args, cfg):
    text = args.infile.read_text(encoding="utf-8")
    in_format = "json" if text.lstrip().startswith("[") else "csv"
    _write(args, emit_report(rows_from_flat(parse_report(text, in_format)), args.format))


COMMANDS = {
    "gen-data": cmd_gen_data,
    "corrupt": cmd_corrupt,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"robustgrasp: error: {exc}", file=sys.stderr)
        return 1
    except (RobustGraspError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"robustgrasp: config error: {exc}", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"robustgrasp: config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"robustgrasp: {exc}", file=sys.stderr)
        return 1
    except (RobustGraspError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"robustgrasp: runtime failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
