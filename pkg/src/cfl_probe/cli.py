"""Command-line interface.

Subcommands:
  gen          build an annotated dataset for one of the stack languages
  scan-prep    build the shift-reduce-annotated command dataset
  train        oracle-train one model (optionally the two-phase protocol)
  eval         metrics for a checkpoint on a dataset split
  grid         train/evaluate every (family, mode, loss mode, seed) cell
  dump-hidden  per-step hidden states with oracle stack labels, as CSV
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import datagen, harness, models, pda, scan


def build_machine(language: str, k: int, m: int, blocks: int) -> pda.PdaSpec:
    if language == "dyck":
        return pda.build_dyck(k, m)
    if language == "anbn":
        return pda.build_anbn(m)
    if language == "parity":
        return pda.build_parity()
    if language == "wcwr":
        return pda.build_wcwr(k, m, blocks)
    raise ValueError(f"unknown language {language!r}")


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------


def cmd_gen(args) -> int:
    spec = build_machine(args.language, args.k, args.m, args.blocks)
    max_len = args.max_len or datagen.default_max_len(
        args.language, args.k, args.m, args.blocks)
    config = datagen.GenConfig(n_train=args.n_train, n_test=args.n_test,
                               max_len=max_len, seed=args.seed,
                               exhaustive=args.exhaustive)
    train, test = datagen.build_dataset(spec, config)
    datagen.write_dataset(args.out, train, test)
    print(f"wrote {len(train.records)} train / {len(test.records)} test "
          f"records for {spec.name} to {args.out}")
    return 0


def cmd_scan_prep(args) -> int:
    n = None if args.full else args.n_commands
    train, test = scan.build_scan_dataset(split_seed=args.seed, n_commands=n)
    datagen.write_dataset(args.out, train, test)
    print(f"wrote {len(train.records)} train / {len(test.records)} test "
          f"commands to {args.out}")
    return 0


def _model_config(spec, args) -> models.ModelConfig:
    return models.ModelConfig.for_machine(
        spec, args.family, args.mode, alpha=args.alpha, layers=args.layers,
        residual=not args.no_residual)


def cmd_train(args) -> int:
    spec, meta, train_recs, test_recs = datagen.load_dataset(args.data)
    mcfg = _model_config(spec, args)
    tcfg = harness.TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                               lr=args.lr, seed=args.seed,
                               loss_mode=args.loss_mode)
    params, _, history = harness.train_oracle(mcfg, train_recs, tcfg)
    if args.ckpt:
        models.save_checkpoint(args.ckpt, params, mcfg)
    if args.metrics_csv:
        harness.write_history_csv(args.metrics_csv, history)
    report = {"epochs_run": len(history),
              "final_train_loss": history[-1]["loss"],
              "test": harness.evaluate(params, mcfg, test_recs)}
    if args.two_phase:
        report["two_phase"] = {
            k: v for k, v in harness.train_two_phase(
                mcfg, train_recs, test_recs, tcfg, params).items()
            if not k.endswith("history")}
    print(json.dumps(report, indent=2))
    return 0


def cmd_eval(args) -> int:
    spec, meta, train_recs, test_recs = datagen.load_dataset(args.data)
    params, mcfg = models.load_checkpoint(args.ckpt)
    records = train_recs if args.split == "train" else test_recs
    print(json.dumps(harness.evaluate(params, mcfg, records), indent=2))
    return 0


def cmd_grid(args) -> int:
    spec, meta, train_recs, test_recs = datagen.load_dataset(args.data)
    return harness.run_experiment_grid(
        spec, meta, train_recs, test_recs, args.out,
        families=args.families, modes=args.modes,
        loss_modes=args.loss_modes, seeds=args.seeds, epochs=args.epochs,
        batch_size=args.batch_size, lr=args.lr, alpha=args.alpha,
        layers=args.layers)


def cmd_dump_hidden(args) -> int:
    spec, meta, train_recs, test_recs = datagen.load_dataset(args.data)
    params, mcfg = models.load_checkpoint(args.ckpt)
    records = train_recs if args.split == "train" else test_recs
    positives = [r for r in records if r.label == "positive"][: args.limit]
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence", "step", "symbol", "state", "stack"]
                        + [f"h{i}" for i in range(mcfg.width)])
        for si, rec in enumerate(positives):
            out = models.predict(params, mcfg, rec.sequence)
            for t, sym in enumerate(rec.sequence):
                stack_label = "|".join(spec.stack_symbols[s]
                                       for s in rec.trace.stacks[t])
                writer.writerow(
                    [si, t, spec.alphabet[sym], int(rec.trace.states[t]),
                     stack_label] + [repr(v) for v in out["hidden"][t]])
    print(f"wrote hidden states for {len(positives)} sequences to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--family", required=True, choices=models.FAMILIES)
    p.add_argument("--mode", required=True, choices=models.MODES)
    p.add_argument("--alpha", type=int, default=1)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--no-residual", action="store_true",
                   help="drop the residual connections, keep the layer norms")


def _add_train_args(p: argparse.ArgumentParser):
    p.add_argument("--loss-mode", default="fixed",
                   choices=("fixed", "learnable"))
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--seed", type=int, default=0)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfl-probe",
        description="bounded-stack language oracles, datasets, and probes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate an annotated dataset")
    p.add_argument("--language", required=True,
                   choices=("dyck", "anbn", "parity", "wcwr"))
    p.add_argument("--k", type=int, default=2, help="alphabet/bracket kinds")
    p.add_argument("--m", type=int, default=3, help="stack bound")
    p.add_argument("--blocks", type=int, default=1,
                   help="number of w c w^r blocks")
    p.add_argument("--n-train", type=int, default=5000)
    p.add_argument("--n-test", type=int, default=5000)
    p.add_argument("--max-len", type=int, default=0,
                   help="0 picks the per-language default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--exhaustive", action="store_true",
                   help="enumerate the language instead of sampling")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen)

    p = sub.add_parser("scan-prep", help="generate the command dataset")
    p.add_argument("--n-commands", type=int, default=20000)
    p.add_argument("--full", action="store_true",
                   help="annotate the whole finite language (millions)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_scan_prep)

    p = sub.add_parser("train", help="oracle-train one model")
    p.add_argument("--data", required=True)
    _add_model_args(p)
    _add_train_args(p)
    p.add_argument("--two-phase", action="store_true",
                   help="also run the classifier-only comparison")
    p.add_argument("--ckpt", default="")
    p.add_argument("--metrics-csv", default="")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("grid", help="run the experiment grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--families", nargs="+", default=list(harness.GRID_FAMILIES),
                   choices=models.FAMILIES)
    p.add_argument("--modes", nargs="+", default=list(harness.GRID_MODES),
                   choices=models.MODES)
    p.add_argument("--loss-modes", nargs="+",
                   default=list(harness.GRID_LOSS_MODES),
                   choices=("fixed", "learnable"))
    p.add_argument("--seeds", nargs="+", type=int, default=[0])
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--alpha", type=int, default=1)
    p.add_argument("--layers", type=int, default=1)
    p.set_defaults(fn=cmd_grid)

    p = sub.add_parser("dump-hidden",
                       help="write per-step hidden states to CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--limit", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dump_hidden)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
