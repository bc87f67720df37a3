"""Command-line front end: one subcommand per pipeline stage.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
Diagnostics go to stderr; files are the only machine-readable output
(`inspect`, whose job is to print, writes its dump to stdout).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional

from .errors import DataError, NumericError, UsageError
from .ingest import (DatasetContainer, DatasetKind, LabelMap, Schema,
                     apply_transforms, parse_csv, preprocess)
from .metrics import confusion_to_csv, report_to_json
from .pipeline import (EXPERIMENT_ARMS, RunConfig, evaluate, run_experiment,
                       train)
from .serialize import (describe, load_checkpoint, load_dataset,
                        save_checkpoint, save_dataset)
from .smote import parse_policy, smote_oversample

RUN_DIR_ENV = "FLOWNIDS_RUN_DIR"


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of calling sys.exit, so main() owns
    the exit-code contract."""

    def error(self, message):
        raise UsageError(message)


def _add_dataset_flags(p: argparse.ArgumentParser):
    p.add_argument("--dataset", choices=["kdd99", "cicids2017", "generic"],
                   required=True, help="input CSV flavor")
    p.add_argument("--input", action="append", required=True,
                   metavar="CSV", help="raw CSV file (repeatable)")
    p.add_argument("--label-map", metavar="FILE",
                   help="key=value attack-name map (default: bundled map "
                        "for kdd99/cicids2017, identity for generic)")
    p.add_argument("--label-column", default="label",
                   help="label column name for generic datasets "
                        "(default: %(default)s)")
    p.add_argument("--test-fraction", type=float, default=None,
                   help="held-out fraction (default: 0.2)")


def _add_train_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--hidden", type=int, default=None, dest="hidden_dim",
                   help="LSTM hidden units (default: 64)")
    g.add_argument("--seq-len", type=int, default=None,
                   help="timesteps each record is reshaped into (default: 4)")
    g.add_argument("--dropout", type=float, default=None, dest="dropout_rate",
                   help="dropout rate on the final hidden state (default: 0.2)")
    g = p.add_argument_group("loss")
    g.add_argument("--loss", choices=["ce", "focal"], default=None,
                   help="plain cross-entropy or focal (default: focal)")
    g.add_argument("--gamma", type=float, default=None,
                   help="focusing exponent (default: 2.0)")
    g.add_argument("--alpha", default=None,
                   help="class weights: uniform, inverse_frequency, or "
                        "explicit:<comma list> (default: inverse_frequency)")
    g = p.add_argument_group("oversampling")
    g.add_argument("--smote", action="store_true", default=None,
                   help="oversample minority classes before training")
    g.add_argument("--smote-k", type=int, default=None,
                   help="SMOTE neighbor count (default: 5)")
    g.add_argument("--smote-policy", default=None,
                   help="match_majority, ratio:<r>, or explicit:<counts> "
                        "(default: match_majority)")
    g = p.add_argument_group("optimizer")
    g.add_argument("--lr", type=float, default=None,
                   help="Adam learning rate (default: 1e-3)")
    g.add_argument("--beta1", type=float, default=None,
                   help="Adam first-moment decay (default: 0.9)")
    g.add_argument("--beta2", type=float, default=None,
                   help="Adam second-moment decay (default: 0.999)")
    g.add_argument("--eps", type=float, default=None,
                   help="Adam epsilon (default: 1e-8)")
    g.add_argument("--clip-norm", type=float, default=None,
                   help="global gradient-norm cap, 0 disables (default: 5.0)")
    g = p.add_argument_group("loop")
    g.add_argument("--batch-size", type=int, default=None,
                   help="mini-batch size (default: 1024)")
    g.add_argument("--epochs", type=int, default=None,
                   help="training epochs (default: 30)")
    g.add_argument("--seed", type=int, default=None,
                   help="master RNG seed (default: 0)")
    g.add_argument("--no-shuffle", action="store_false", default=None,
                   dest="shuffle", help="keep epoch order fixed")
    p.add_argument("--config", metavar="FILE",
                   help="key=value run config; CLI flags override it")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="flownids",
        description="Flow-record intrusion detection: preprocessing, SMOTE, "
                    "LSTM training with focal loss, and per-class evaluation.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND",
                                parser_class=_Parser)

    p = sub.add_parser("preprocess",
                       help="parse/clean/encode raw CSVs into a container")
    _add_dataset_flags(p)
    p.add_argument("--out", required=True, metavar="FILE",
                   help="output container (training split)")
    p.add_argument("--test-out", metavar="FILE",
                   help="output container for the held-out split")
    p.add_argument("--seed", type=int, default=0, help="split seed")
    p.add_argument("--apply-from", metavar="CONTAINER",
                   help="reuse the transforms fitted in an existing "
                        "container instead of fitting (no split)")

    p = sub.add_parser("smote",
                       help="oversample minority classes in a container")
    p.add_argument("--data", required=True, metavar="CONTAINER")
    p.add_argument("--out", required=True, metavar="FILE")
    p.add_argument("--smote-k", type=int, default=5,
                   help="neighbor count (default: %(default)s)")
    p.add_argument("--smote-policy", default="match_majority",
                   help="match_majority, ratio:<r>, or explicit:<counts>")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train",
                       help="train the classifier on a container")
    p.add_argument("--data", required=True, metavar="CONTAINER")
    p.add_argument("--valid-data", metavar="CONTAINER",
                   help="held-out container for per-epoch curves")
    p.add_argument("--out-dir", metavar="DIR",
                   help=f"run directory (default: ${RUN_DIR_ENV} or ./run)")
    _add_train_flags(p)

    p = sub.add_parser("evaluate",
                       help="score a container with a checkpoint")
    p.add_argument("--model", required=True, metavar="CHECKPOINT")
    p.add_argument("--data", required=True, metavar="CONTAINER")
    p.add_argument("--out-dir", metavar="DIR",
                   help=f"output directory (default: ${RUN_DIR_ENV} or ./run)")

    p = sub.add_parser("experiment",
                       help="run the oversampling/loss ablation grid")
    _add_dataset_flags(p)
    p.add_argument("--arms", default=",".join(EXPERIMENT_ARMS),
                   help="comma list from: " + ", ".join(EXPERIMENT_ARMS))
    p.add_argument("--out-dir", metavar="DIR",
                   help=f"run directory (default: ${RUN_DIR_ENV} or ./run)")
    _add_train_flags(p)

    p = sub.add_parser("inspect",
                       help="print the structure of a container/checkpoint")
    p.add_argument("path", metavar="FILE")

    return parser


def _out_dir(ns) -> Path:
    chosen = getattr(ns, "out_dir", None) or os.environ.get(RUN_DIR_ENV) \
        or "run"
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _schema_for(ns) -> Schema:
    if ns.dataset == "kdd99":
        return Schema.kdd99()
    if ns.dataset == "cicids2017":
        return Schema.cicids2017()
    return Schema.generic(label_column=ns.label_column)


def _label_map_for(ns, schema: Schema, paths) -> LabelMap:
    if ns.label_map:
        return LabelMap.load(ns.label_map)
    if schema.dataset_kind is not DatasetKind.GENERIC:
        return LabelMap.bundled(schema.dataset_kind)
    # generic without a map: every distinct label is its own class
    labels: List[str] = []
    for p in paths:
        labels.extend(parse_csv(p, schema).labels)
    return LabelMap.identity(labels)


def _build_run_config(ns) -> RunConfig:
    cfg = RunConfig.from_file(ns.config) if getattr(ns, "config", None) \
        else RunConfig()
    overrides = {}
    for name in ("seq_len", "hidden_dim", "dropout_rate", "loss", "gamma",
                 "alpha", "smote", "smote_k", "smote_policy", "lr", "beta1",
                 "beta2", "eps", "clip_norm", "batch_size", "epochs", "seed",
                 "shuffle", "test_fraction"):
        if hasattr(ns, name):
            overrides[name] = getattr(ns, name)
    return cfg.merged(overrides, source="command line")


def _cmd_preprocess(ns) -> int:
    schema = _schema_for(ns)
    if ns.apply_from:
        donor = load_dataset(ns.apply_from)
        if ns.label_map:
            label_map = LabelMap.load(ns.label_map)
        elif schema.dataset_kind is not DatasetKind.GENERIC:
            label_map = LabelMap.bundled(schema.dataset_kind)
        else:
            label_map = LabelMap.identity(list(donor.table.class_names))
        if tuple(label_map.class_names) != tuple(donor.table.class_names):
            raise DataError(
                "label map classes do not match the donor container's"
            )
        container, summary = apply_transforms(
            ns.input, schema, label_map, donor.vocab, donor.standardizer)
        save_dataset(container, ns.out)
        print(json.dumps(summary, indent=2), file=sys.stderr)
        return 0

    label_map = _label_map_for(ns, schema, ns.input)
    fraction = ns.test_fraction if ns.test_fraction is not None else 0.2
    train_c, test_c, summary = preprocess(ns.input, schema, label_map,
                                          test_fraction=fraction,
                                          seed=ns.seed)
    save_dataset(train_c, ns.out)
    if ns.test_out:
        save_dataset(test_c, ns.test_out)
    print(json.dumps(summary, indent=2), file=sys.stderr)
    return 0


def _cmd_smote(ns) -> int:
    container = load_dataset(ns.data)
    cfg = parse_policy(ns.smote_policy, k=ns.smote_k, seed=ns.seed)
    before = container.table.histogram().tolist()
    table, report = smote_oversample(container.table, cfg)
    save_dataset(DatasetContainer(table, container.feature_names,
                                  container.standardizer, container.vocab),
                 ns.out)
    print(json.dumps({
        "histogram_before": before,
        "histogram_after": table.histogram().tolist(),
        "synthetic_rows": len(report),
    }, indent=2), file=sys.stderr)
    return 0


def _cmd_train(ns) -> int:
    cfg = _build_run_config(ns)
    container = load_dataset(ns.data)
    table = container.table
    if cfg.smote:
        smote_cfg = parse_policy(cfg.smote_policy, k=cfg.smote_k,
                                 seed=cfg.seed)
        table, _ = smote_oversample(table, smote_cfg)
    valid_table = load_dataset(ns.valid_data).table if ns.valid_data else None
    out = _out_dir(ns)
    ckpt, history = train(cfg, table, valid_table=valid_table,
                          standardizer=container.standardizer)
    save_checkpoint(ckpt, out / "checkpoint.bin")
    (out / "history.csv").write_text(history.to_csv(), encoding="utf-8")
    lines = [f"{k} = {v}" for k, v in sorted(cfg.to_dict().items())]
    (out / "run_config.txt").write_text("\n".join(lines) + "\n",
                                        encoding="utf-8")
    print(f"final training loss {history.loss[-1]:.6f}, "
          f"accuracy {history.accuracy[-1]:.4f}", file=sys.stderr)
    print(f"checkpoint written to {out / 'checkpoint.bin'}", file=sys.stderr)
    return 0


def _cmd_evaluate(ns) -> int:
    ckpt = load_checkpoint(ns.model)
    container = load_dataset(ns.data)
    report, cm = evaluate(ckpt, container.table)
    out = _out_dir(ns)
    (out / "metrics.json").write_text(report_to_json(report) + "\n",
                                      encoding="utf-8")
    (out / "confusion.csv").write_text(confusion_to_csv(cm), encoding="utf-8")
    print(f"overall accuracy {report.overall_accuracy:.4f}, "
          f"macro F1 {report.macro_f1:.4f}", file=sys.stderr)
    return 0


def _cmd_experiment(ns) -> int:
    cfg = _build_run_config(ns)
    schema = _schema_for(ns)
    label_map = _label_map_for(ns, schema, ns.input)
    arms = tuple(a.strip() for a in ns.arms.split(",") if a.strip())
    out = _out_dir(ns)
    result = run_experiment(cfg, schema, label_map, ns.input, out, arms=arms)
    for arm, metrics in result["metrics"].items():
        print(f"{arm}: overall accuracy "
              f"{metrics['overall_accuracy']:.4f}", file=sys.stderr)
    print(f"reports written under {out}", file=sys.stderr)
    return 0


def _cmd_inspect(ns) -> int:
    print(json.dumps(describe(ns.path), indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "preprocess": _cmd_preprocess,
    "smote": _cmd_smote,
    "train": _cmd_train,
    "evaluate": _cmd_evaluate,
    "experiment": _cmd_experiment,
    "inspect": _cmd_inspect,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_help(sys.stderr)
            return 1
        return _COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
