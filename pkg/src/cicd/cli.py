"""Command-line surface: train, eval, explain, gen, and report.

Machine outputs are JSON/JSONL; human-readable summaries go to stdout. Exit
codes: 2 config error, 3 data error, 4 checkpoint mismatch.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ModelConfig, load_config, config_from_dict
from .data import RESERVED_TOKENS, Vocab, load_jsonl, save_jsonl
from .errors import (CheckpointMismatch, CicdError, ConfigError, EmptyCorpus,
                     EmptyDataset, MissingField, ParseError, UnknownLabel,
                     UnknownLabelName)
from .explain import explain_instance
from .metrics import evaluate
from .model import DualViewModel
from .params import build_params, load_checkpoint, save_checkpoint
from .synthetic import gen_synthetic, params_from_dict, save_gold
from .train import split_dev, train_model

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CHECKPOINT = 4

DATA_ERRORS = (ParseError, MissingField, UnknownLabelName, UnknownLabel,
               EmptyCorpus, EmptyDataset, FileNotFoundError)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("CICD_THREADS", "1")))
    except ValueError:
        return 1


def _resolve_config(args) -> ModelConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if args.config is not None:
        return load_config(args.config, preset=args.preset, overrides=overrides)
    if args.preset is not None:
        return config_from_dict({}, preset=args.preset, overrides=overrides)
    raise ConfigError("either --config or --preset is required")


def _load_model(checkpoint_path: str) -> DualViewModel:
    cfg, state, tokens = load_checkpoint(checkpoint_path)
    cfg.validate()
    if tokens[:3] != RESERVED_TOKENS:
        raise CheckpointMismatch(
            f"{checkpoint_path}: vocabulary section lacks the reserved tokens")
    vocab = Vocab(tokens[3:], min_freq=cfg.min_freq)
    params = build_params(cfg, np.random.default_rng(cfg.seed))
    params.load_state_dict(state)
    return DualViewModel(cfg, params, vocab)


def cmd_train(args) -> int:
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        corpus = load_jsonl(args.data, cfg.label_table())
        if args.dev is not None:
            train_set = corpus
            dev_set = load_jsonl(args.dev, cfg.label_table())
        else:
            train_set, dev_set = split_dev(corpus, cfg)
        if not train_set or not dev_set:
            raise EmptyDataset("train/dev split left an empty side")
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = out_dir / "trace.jsonl"
    trace_fh = trace_path.open("w", encoding="utf-8")

    def stream_row(row: dict) -> None:
        trace_fh.write(json.dumps(row, sort_keys=True) + "\n")
        trace_fh.flush()
        print(f"epoch {row['epoch']:3d}  loss {row['mean_loss']:.4f}  "
              f"ce {row['mean_cross_entropy']:.4f}  "
              f"kl {row['mean_inconsistency']:.4f}  "
              f"dev micF1 {row['dev_micro_f1']:.4f}")

    try:
        result = train_model(train_set, dev_set, cfg, on_epoch=stream_row)
    finally:
        trace_fh.close()

    vocab_tokens = result.model.vocab.id_to_token
    final_cfg = result.model.cfg
    best_params = build_params(final_cfg, np.random.default_rng(final_cfg.seed))
    best_params.load_state_dict(result.best_state)
    save_checkpoint(out_dir / "best.ckpt", final_cfg, best_params, vocab_tokens)
    save_checkpoint(out_dir / "final.ckpt", final_cfg, result.model.params, vocab_tokens)
    (out_dir / "config.json").write_text(
        json.dumps(final_cfg.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"best dev micF1 {result.best_dev_micro_f1:.4f} at epoch {result.best_epoch}")
    print(f"wrote {out_dir}/best.ckpt, final.ckpt, trace.jsonl, config.json")
    return 0


def cmd_eval(args) -> int:
    try:
        model = _load_model(args.checkpoint)
    except (CheckpointMismatch, ConfigError, FileNotFoundError) as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    try:
        instances = load_jsonl(args.data, model.cfg.label_table())
        if not instances:
            raise EmptyDataset(f"{args.data}: no instances")
        from .data import encode_batch
        batch = encode_batch(instances, model.vocab, model.cfg)
        report = evaluate(model, batch, workers=_workers())
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    out_path = Path(args.out) if args.out else Path("metrics.json")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"micF1 {report['micro_f1']:.4f}  macF1 {report['macro_f1']:.4f}  "
          f"n {report['n']}")
    for row in report["per_class"]:
        print(f"  {row['label']:>12}  P {row['precision']:.4f}  "
              f"R {row['recall']:.4f}  F1 {row['f1']:.4f}  n {row['support']}")
    print(f"wrote {out_path}")
    return 0


def cmd_explain(args) -> int:
    try:
        model = _load_model(args.checkpoint)
    except (CheckpointMismatch, ConfigError, FileNotFoundError) as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    try:
        instances = load_jsonl(args.data, model.cfg.label_table())
        if not instances:
            raise EmptyDataset(f"{args.data}: no instances")
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    workers = _workers()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            dumps = list(pool.map(lambda inst: explain_instance(model, inst), instances))
    else:
        dumps = [explain_instance(model, inst) for inst in instances]

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with out_path.open("w", encoding="utf-8") as fh:
        for dump in dumps:
            fh.write(json.dumps(dump, sort_keys=True) + "\n")
    print(f"wrote {len(dumps)} explanation dumps to {out_path}")
    return 0


def cmd_gen(args) -> int:
    try:
        raw = json.loads(Path(args.params).read_text()) if args.params else {}
        if args.seed is not None:
            raw["seed"] = args.seed
        params = params_from_dict(raw)
    except (ConfigError, json.JSONDecodeError, FileNotFoundError) as exc:
        print(f"params error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    corpus, gold = gen_synthetic(params)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    save_jsonl(corpus, out_path, params.label_names())
    gold_path = out_path.with_name(out_path.stem + ".gold.jsonl")
    save_gold(gold, gold_path)
    print(f"wrote {len(corpus)} instances to {out_path} (gold: {gold_path})")
    return 0


def cmd_report(args) -> int:
    from . import report as report_mod
    run_dir = Path(args.run_dir) if args.run_dir else None
    out_dir = Path(args.out)
    try:
        written = report_mod.render_report(
            run_dir=run_dir,
            trace=Path(args.trace) if args.trace else None,
            metrics=Path(args.metrics) if args.metrics else None,
            explain=Path(args.explain) if args.explain else None,
            out_dir=out_dir)
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    if not written:
        print("report error: nothing to render (no trace/metrics/explain inputs found)",
              file=sys.stderr)
        return EXIT_DATA
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cicd",
        description="Dual-view claim verification: train, evaluate, explain, "
                    "generate synthetic corpora, and render reports.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write checkpoints")
    p_train.add_argument("--config", help="JSON config file")
    p_train.add_argument("--preset", choices=["snopes2", "politifact3", "fever3", "synthetic"])
    p_train.add_argument("--data", required=True, help="training corpus JSONL")
    p_train.add_argument("--dev", help="dev corpus JSONL (default: seeded holdout split)")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--seed", type=int)
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", help="metrics JSON path (default metrics.json)")
    p_eval.set_defaults(fn=cmd_eval)

    p_explain = sub.add_parser("explain", help="dump per-instance evidence diagnostics")
    p_explain.add_argument("--checkpoint", required=True)
    p_explain.add_argument("--data", required=True)
    p_explain.add_argument("--out", required=True, help="explanation JSONL path")
    p_explain.set_defaults(fn=cmd_explain)

    p_gen = sub.add_parser("gen", help="generate a synthetic planted-evidence corpus")
    p_gen.add_argument("--params", help="synthetic params JSON file (defaults apply)")
    p_gen.add_argument("--out", required=True, help="corpus JSONL path")
    p_gen.add_argument("--seed", type=int)
    p_gen.set_defaults(fn=cmd_gen)

    p_report = sub.add_parser("report", help="render figures and CSV summaries")
    p_report.add_argument("--run-dir", help="training output directory (trace.jsonl, ...)")
    p_report.add_argument("--trace", help="trace JSONL path")
    p_report.add_argument("--metrics", help="metrics JSON path")
    p_report.add_argument("--explain", help="explanation JSONL path")
    p_report.add_argument("--out", required=True, help="output directory for figures")
    p_report.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckpointMismatch as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except CicdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
