"""Sampling, corruption, and serialization of annotated PDA datasets.

Positives come from a mask-guided random walk (uniform over valid symbols,
stopping with probability P_STOP at accepting configurations); corrupted
counterparts apply 1..MAX_EDITS random edits and keep resampling until the
machine rejects. Every record carries the full oracle trace.

Files: one JSON record per line (train.jsonl / test.jsonl) plus meta.json
with the machine, generation config, and counts. Identical (spec, config)
pairs produce byte-identical files; each record owns an rng stream derived
from (seed, split, index, arm), so output does not depend on generation
order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import pda
from .pda import OracleTrace, PdaSpec, ReachabilityOracle

P_STOP = 0.25
MAX_EDITS = 3
LENGTH_WINDOW = 3
RETRY_BUDGET = 200

EDIT_OPS = ("substitute", "insert", "delete", "swap", "truncate")


@dataclass
class GenConfig:
    n_train: int = 50_000
    n_test: int = 50_000
    max_len: int = 20
    seed: int = 0
    exhaustive: bool = False

    def __post_init__(self):
        assert self.n_train > 0 and self.n_test > 0
        assert self.max_len >= 2


@dataclass
class DatasetRecord:
    sequence: list[int]
    trace: OracleTrace
    label: str  # "positive" | "corrupted"
    corruption_ops: list


@dataclass
class Dataset:
    meta: dict
    records: list[DatasetRecord]


def default_max_len(language: str, k: int = 0, m: int = 1, n: int = 1) -> int:
    if language == "dyck":
        return 2 * m + 10
    if language == "anbn":
        return 2 * m
    if language == "parity":
        return 20
    if language == "wcwr":
        return n * (2 * m + 1)
    raise ValueError(f"no default max_len for {language!r}")


def stable_hash64(tokens: list[str]) -> int:
    h = hashlib.sha256(" ".join(tokens).encode()).digest()
    return int.from_bytes(h[:8], "little")


# ---------------------------------------------------------------------------
# sampling + corruption
# ---------------------------------------------------------------------------


def sample_accepted(spec: PdaSpec, max_len: int, rng: np.random.Generator,
                    oracle: ReachabilityOracle | None = None) -> list[int]:
    """One accepted sequence of length in [1, max_len]."""
    if oracle is None:
        oracle = ReachabilityOracle(spec)
    for _ in range(RETRY_BUDGET):
        config = pda.initial_config(spec)
        seq: list[int] = []
        while True:
            accepting = pda.is_accepting(spec, config) and len(seq) >= 1
            if accepting and rng.random() < P_STOP:
                return seq
            mask = pda.valid_next_symbols(spec, config, max_len, oracle)
            choices = np.flatnonzero(mask)
            if len(choices) == 0:
                if accepting:
                    return seq  # budget exhausted at an accepting configuration
                break  # dead walk; should not happen with budget-aware masks
            x = int(choices[rng.integers(len(choices))])
            config = pda.step(spec, config, x)
            seq.append(x)
    raise RuntimeError(f"sample_accepted: retry budget exhausted for {spec.name}")


def corrupt(spec: PdaSpec, positive: list[int], rng: np.random.Generator,
            max_len: int) -> tuple[list[int], list]:
    """Edit the sequence until the machine rejects it.

    Applies 1..MAX_EDITS edits per attempt; the result stays within
    LENGTH_WINDOW of the source length, non-empty, and within max_len.
    """
    n_sym = len(spec.alphabet)
    len0 = len(positive)
    lo = max(1, len0 - LENGTH_WINDOW)
    hi = min(max_len, len0 + LENGTH_WINDOW)
    for _ in range(RETRY_BUDGET):
        seq = list(positive)
        ops: list = []
        for _ in range(int(rng.integers(1, MAX_EDITS + 1))):
            allowed = ["substitute"]
            if len(seq) < hi:
                allowed.append("insert")
            if len(seq) > lo:
                allowed.append("delete")
                allowed.append("truncate")
            if len(seq) >= 2:
                allowed.append("swap")
            op = allowed[int(rng.integers(len(allowed)))]
            if op == "substitute":
                i = int(rng.integers(len(seq)))
                new = int(rng.integers(n_sym - 1))
                if new >= seq[i]:
                    new += 1  # uniform over the other symbols
                seq[i] = new
                ops.append(["substitute", i, new])
            elif op == "insert":
                i = int(rng.integers(len(seq) + 1))
                sym = int(rng.integers(n_sym))
                seq.insert(i, sym)
                ops.append(["insert", i, sym])
            elif op == "delete":
                i = int(rng.integers(len(seq)))
                del seq[i]
                ops.append(["delete", i])
            elif op == "swap":
                i = int(rng.integers(len(seq) - 1))
                seq[i], seq[i + 1] = seq[i + 1], seq[i]
                ops.append(["swap", i])
            else:  # truncate
                new_len = int(rng.integers(lo, len(seq)))
                seq = seq[:new_len]
                ops.append(["truncate", new_len])
        if not pda.accepts(spec, seq):
            return seq, ops
    raise RuntimeError(f"corrupt: retry budget exhausted for {spec.name}")


# ---------------------------------------------------------------------------
# dataset assembly
# ---------------------------------------------------------------------------


def _annotate(spec: PdaSpec, seq: list[int], label: str, ops: list,
              max_len: int, oracle: ReachabilityOracle) -> DatasetRecord:
    trace = pda.run(spec, seq, max_len=max_len, oracle=oracle)
    if label == "positive":
        assert trace.accepted, (spec.name, seq)
    else:
        assert not trace.accepted, (spec.name, seq)
    return DatasetRecord(sequence=seq, trace=trace, label=label, corruption_ops=ops)


def _split_records(spec: PdaSpec, positives: list[list[int]], split_tag: int,
                   seed: int, max_len: int, oracle: ReachabilityOracle) -> list[DatasetRecord]:
    records = []
    for idx, pos in enumerate(positives):
        rng_c = np.random.default_rng((seed, split_tag, idx, 1))
        neg, ops = corrupt(spec, pos, rng_c, max_len)
        records.append(_annotate(spec, pos, "positive", [], max_len, oracle))
        records.append(_annotate(spec, neg, "corrupted", ops, max_len, oracle))
    return records


def build_dataset(spec: PdaSpec, config: GenConfig) -> tuple[Dataset, Dataset]:
    """(train, test) with equal positive/corrupted counts per split.

    Exhaustive mode enumerates every accepted string up to max_len and splits
    them by the low bit of a stable hash; requested counts are ignored and the
    actual counts land in the metadata.
    """
    oracle = ReachabilityOracle(spec)
    full_size = None
    if config.exhaustive:
        all_pos = pda.enumerate_accepted(spec, config.max_len)
        full_size = len(all_pos)
        train_pos = [s for s in all_pos if stable_hash64(spec.decode(s)) % 2 == 0]
        test_pos = [s for s in all_pos if stable_hash64(spec.decode(s)) % 2 == 1]
    else:
        train_pos = [
            sample_accepted(spec, config.max_len, np.random.default_rng((config.seed, 0, i, 0)), oracle)
            for i in range(config.n_train)
        ]
        test_pos = [
            sample_accepted(spec, config.max_len, np.random.default_rng((config.seed, 1, i, 0)), oracle)
            for i in range(config.n_test)
        ]

    train_records = _split_records(spec, train_pos, 0, config.seed, config.max_len, oracle)
    test_records = _split_records(spec, test_pos, 1, config.seed, config.max_len, oracle)

    meta = {
        "format": "cfl-dataset/1",
        "language": spec.name,
        "spec": json.loads(spec.to_json()),
        "spec_digest": spec.digest(),
        "gen": {
            **asdict(config),
            "p_stop": P_STOP,
            "max_edits": MAX_EDITS,
            "length_window": LENGTH_WINDOW,
            "policy": "edit-corruption/1",
        },
        "n_states": spec.n_states,
        "n_alphabet": len(spec.alphabet),
        "n_stack_symbols": len(spec.stack_symbols),
        "m": spec.m,
        "counts": {
            "train_positive": len(train_pos),
            "train_corrupted": len(train_pos),
            "test_positive": len(test_pos),
            "test_corrupted": len(test_pos),
        },
    }
    if full_size is not None:
        meta["full_language_size"] = full_size
    return Dataset(meta, train_records), Dataset(meta, test_records)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def record_to_json(rec: DatasetRecord) -> str:
    t = rec.trace
    d = {
        "sequence": rec.sequence,
        "label": rec.label,
        "corruption_ops": rec.corruption_ops,
        "accepted": t.accepted,
        "states": t.states.tolist(),
        "stacks": t.stacks.tolist(),
        "lm_mask": ["".join("1" if b else "0" for b in row) for row in t.lm_masks],
    }
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def record_from_json(line: str, m: int, n_alphabet: int) -> DatasetRecord:
    d = json.loads(line)
    tau = len(d["states"])
    trace = OracleTrace(
        symbols=np.asarray(d["sequence"][:tau], dtype=np.int64),
        states=np.asarray(d["states"], dtype=np.int64),
        stacks=np.asarray(d["stacks"], dtype=np.int64).reshape(tau, m),
        lm_masks=np.asarray(
            [[c == "1" for c in row] for row in d["lm_mask"]], dtype=bool
        ).reshape(tau, n_alphabet),
        accepted=d["accepted"],
    )
    return DatasetRecord(
        sequence=d["sequence"], trace=trace, label=d["label"],
        corruption_ops=d["corruption_ops"],
    )


def write_dataset(out_dir: str | Path, train: Dataset, test: Dataset) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "meta.json").write_text(json.dumps(train.meta, indent=2, sort_keys=True) + "\n")
    for name, ds in (("train", train), ("test", test)):
        with open(out / f"{name}.jsonl", "w") as f:
            for rec in ds.records:
                f.write(record_to_json(rec) + "\n")


def load_dataset(in_dir: str | Path) -> tuple[PdaSpec, dict, list[DatasetRecord], list[DatasetRecord]]:
    src = Path(in_dir)
    meta = json.loads((src / "meta.json").read_text())
    spec = PdaSpec.from_json(json.dumps(meta["spec"]))
    m, n_sigma = meta["m"], meta["n_alphabet"]
    splits = []
    for name in ("train", "test"):
        with open(src / f"{name}.jsonl") as f:
            splits.append([record_from_json(line, m, n_sigma) for line in f])
    return spec, meta, splits[0], splits[1]
