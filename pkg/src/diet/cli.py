"""Command-line entry points: ``diet run | sweep | probe | report``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from types import SimpleNamespace

from .config import config_hash, from_flat_dict, load_train_config
from .data import load_dataset
from .errors import DietError
from .harness import (
    correlation_report,
    load_checkpoint,
    read_metrics,
    run_config,
    sweep,
)
from .probe import ProbeConfig, extract_features, fit_probe, top1_accuracy


def _add_common(parser: argparse.ArgumentParser, seed: bool = False) -> None:
    if seed:
        parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out-dir", type=Path, default=None, help="artifact output directory")
    parser.add_argument(
        "--format", choices=("csv", "jsonl"), default="jsonl", help="metrics file format"
    )


def _cmd_run(args) -> int:
    cfg = load_train_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    artifact = run_config(cfg, out_dir=args.out_dir, metrics_format=args.format)
    last = artifact.metrics[-1]
    print(
        json.dumps(
            {
                "config_hash": config_hash(cfg),
                "mode": cfg.mode,
                "epochs": last.epoch,
                "final_train_loss": artifact.final_train_loss,
                "final_probe_top1": artifact.final_probe_top1,
                "label_reads_outside_probe": artifact.label_reads_outside_probe,
                "out_dir": str(args.out_dir) if args.out_dir else None,
            }
        )
    )
    return 0


def _cmd_sweep(args) -> int:
    with open(args.grid, encoding="utf-8") as fh:
        grid_spec = json.load(fh)
    if not isinstance(grid_spec, list):
        print("grid file must be a JSON array of flat config objects", file=sys.stderr)
        return 2
    grid = [from_flat_dict(entry) for entry in grid_spec]
    if args.seed is not None:
        grid = [replace(cfg, seed=args.seed) for cfg in grid]
    entries = sweep(grid, workers=args.workers, out_dir=args.out_dir, metrics_format=args.format)
    failures = 0
    for i, entry in enumerate(entries):
        if entry.error is not None:
            failures += 1
            print(json.dumps({"run": i, "error": entry.error}))
        else:
            print(
                json.dumps(
                    {
                        "run": i,
                        "config_hash": config_hash(entry.config),
                        "final_train_loss": entry.artifact.final_train_loss,
                        "final_probe_top1": entry.artifact.final_probe_top1,
                    }
                )
            )
    return 1 if failures else 0


def _cmd_probe(args) -> int:
    state = load_checkpoint(args.checkpoint)
    train_ds = load_dataset(args.data)
    probe_cfg = ProbeConfig(l2_penalty=args.l2, epochs=args.epochs, lr=args.lr)
    feats = extract_features(state.encoder, train_ds)
    n_classes = train_ds.n_classes
    eval_name = str(args.data)
    if args.eval_data is not None:
        eval_ds = load_dataset(args.eval_data)
        n_classes = max(n_classes, eval_ds.n_classes)
        eval_name = str(args.eval_data)
    model = fit_probe(feats, train_ds.true_labels, probe_cfg, n_classes=n_classes)
    if args.eval_data is not None:
        eval_feats = extract_features(state.encoder, eval_ds)
        top1 = top1_accuracy(model, eval_feats, eval_ds.true_labels)
    else:
        top1 = top1_accuracy(model, feats, train_ds.true_labels)
    result = {"checkpoint": str(args.checkpoint), "eval_data": eval_name, "top1": top1}
    print(json.dumps(result))
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "probe.json").write_text(json.dumps(result) + "\n", encoding="utf-8")
    return 0


def _cmd_report(args) -> int:
    runs = []
    for config_path in sorted(Path(args.runs).glob("*/config.json")):
        run_dir = config_path.parent
        metrics_path = next(
            (run_dir / f"metrics.{ext}" for ext in ("jsonl", "csv") if (run_dir / f"metrics.{ext}").exists()),
            None,
        )
        if metrics_path is None:
            continue
        runs.append(
            SimpleNamespace(
                config=load_train_config(config_path), metrics=read_metrics(metrics_path)
            )
        )
    report = correlation_report(runs)
    for group in report.groups:
        print(
            json.dumps(
                {
                    "label_smoothing": group.label_smoothing,
                    "n_runs": group.n_runs,
                    "spearman_rho": group.rho,
                }
            )
        )
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        if args.format == "csv":
            lines = ["final_train_loss,final_probe_top1,label_smoothing"]
            lines += [f"{p[0]},{p[1]},{p[2]}" for p in report.points]
            (args.out_dir / "points.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        else:
            with open(args.out_dir / "points.jsonl", "w", encoding="utf-8") as fh:
                for loss, acc, alpha in report.points:
                    fh.write(
                        json.dumps(
                            {
                                "final_train_loss": loss,
                                "final_probe_top1": acc,
                                "label_smoothing": alpha,
                            }
                        )
                        + "\n"
                    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diet",
        description="Index-as-target representation learning experiments on synthetic data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one configuration")
    p_run.add_argument("--config", type=Path, required=True, help="flat JSON config file")
    _add_common(p_run, seed=True)
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a grid of configurations")
    p_sweep.add_argument("--grid", type=Path, required=True, help="JSON array of flat configs")
    p_sweep.add_argument("--workers", type=int, default=1)
    _add_common(p_sweep, seed=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_probe = sub.add_parser("probe", help="linear-probe a checkpointed encoder")
    p_probe.add_argument("--checkpoint", type=Path, required=True)
    p_probe.add_argument("--data", type=Path, required=True, help="DIETDS1 dataset file")
    p_probe.add_argument("--eval-data", type=Path, default=None)
    p_probe.add_argument("--l2", type=float, default=ProbeConfig().l2_penalty)
    p_probe.add_argument("--epochs", type=int, default=ProbeConfig().epochs)
    p_probe.add_argument("--lr", type=float, default=ProbeConfig().lr)
    _add_common(p_probe)
    p_probe.set_defaults(func=_cmd_probe)

    p_report = sub.add_parser("report", help="loss-vs-accuracy correlation over run artifacts")
    p_report.add_argument("--runs", type=Path, required=True, help="directory of run subdirs")
    _add_common(p_report)
    p_report.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except DietError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
