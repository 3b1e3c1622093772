"""Training and evaluation harness.

Oracle training minimizes the three-term loss

    L = L_symbol + L_state + L_stack                               (fixed)

over positive records: next-symbol cross-entropy (final step excluded),
per-step state cross-entropy, and per-step stack cross-entropy averaged
over the m stack positions with the empty marker as an ordinary class.
The learnable variant reweights the terms by trainable precisions,

    L = sum_i L_i / sigma_i^2 + 2 log(sigma_1 sigma_2 sigma_3),

parameterized through log sigma_i (all zero at init, where it coincides
with the fixed form). An accept/reject classifier is co-trained with
binary cross-entropy at weight 1 on positives and corrupted negatives.

Batches group records of equal length (up to 32 per batch). Randomness is
split into named streams derived from the run seed: (seed, 0) initializes
parameters, (seed, 1, epoch) shuffles, and (seed, 3) drives dropout, so a
given seed reproduces training exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, asdict, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import models
from .autodiff import Tensor
from .datagen import DatasetRecord

LOSS_PART_KEYS = ("loss_symbol", "loss_state", "loss_stack", "loss_cls")


class TrainingDiverged(RuntimeError):
    """Raised when a non-finite loss appears; carries the diagnostics."""


# ---------------------------------------------------------------------------
# loss weighting
# ---------------------------------------------------------------------------


def make_loss_weights(mode: str) -> dict[str, Tensor]:
    """Extra trainable parameters for the loss, keyed for the optimizer."""
    if mode == "fixed":
        return {}
    if mode == "learnable":
        return {"loss.log_sigma": Tensor(np.zeros(3), requires_grad=True)}
    raise ValueError(f"unknown loss mode {mode!r}")


def combine_losses(parts, loss_params: dict[str, Tensor]) -> Tensor:
    """Combine (L_symbol, L_state, L_stack) into the training objective."""
    if "loss.log_sigma" not in loss_params:
        return ad.add(ad.add(parts[0], parts[1]), parts[2])
    log_sigma = loss_params["loss.log_sigma"]
    vec = ad.concat([ad.reshape(p, (1,)) for p in parts])
    weights = ad.exp(ad.scale(log_sigma, -2.0))
    return ad.add(ad.sum_all(ad.mul(weights, vec)),
                  ad.scale(ad.sum_all(log_sigma), 2.0))


# ---------------------------------------------------------------------------
# batch assembly
# ---------------------------------------------------------------------------


@dataclass
class Batch:
    """Equal-length records flattened into aligned target arrays. Oracle
    targets of corrupted records are dummies carrying zero row weight."""

    ids: np.ndarray       # [B, tau] input ids
    labels: np.ndarray    # [B] 1.0 positive / 0.0 corrupted
    state_t: np.ndarray   # [B, tau]
    stack_t: np.ndarray   # [B, tau, m]
    next_t: np.ndarray    # [B, tau] next symbol (dummy at the final step)
    symbol_w: np.ndarray  # [B*tau] row weights for the symbol loss
    oracle_w: np.ndarray  # [B*tau] row weights for state/stack losses

    def __len__(self):
        return self.ids.shape[0]


def make_batch(records: list[DatasetRecord], m: int) -> Batch:
    bsz = len(records)
    tau = len(records[0].sequence)
    ids = np.zeros((bsz, tau), dtype=np.int64)
    labels = np.zeros(bsz)
    state_t = np.zeros((bsz, tau), dtype=np.int64)
    stack_t = np.zeros((bsz, tau, m), dtype=np.int64)
    next_t = np.zeros((bsz, tau), dtype=np.int64)
    symbol_w = np.zeros((bsz, tau))
    oracle_w = np.zeros((bsz, tau))
    for b, rec in enumerate(records):
        if len(rec.sequence) != tau:
            raise ValueError(
                f"make_batch: lengths {tau} vs {len(rec.sequence)}")
        ids[b] = rec.sequence
        if rec.label != "positive":
            continue
        labels[b] = 1.0
        state_t[b] = rec.trace.states
        stack_t[b] = rec.trace.stacks
        next_t[b, : tau - 1] = rec.sequence[1:]
        symbol_w[b, : tau - 1] = 1.0
        oracle_w[b] = 1.0
    return Batch(ids, labels, state_t, stack_t, next_t,
                 symbol_w.reshape(-1), oracle_w.reshape(-1))


def epoch_batches(records: list[DatasetRecord], batch_size: int,
                  rng: np.random.Generator) -> list[list[DatasetRecord]]:
    """Shuffle, group by length, chunk, then shuffle the chunk order."""
    order = rng.permutation(len(records))
    by_len: dict[int, list[DatasetRecord]] = {}
    for i in order:
        by_len.setdefault(len(records[i].sequence), []).append(records[i])
    chunks = []
    for length in sorted(by_len):
        bucket = by_len[length]
        for i in range(0, len(bucket), batch_size):
            chunks.append(bucket[i: i + batch_size])
    return [chunks[i] for i in rng.permutation(len(chunks))]


# ---------------------------------------------------------------------------
# loss computation
# ---------------------------------------------------------------------------


def _zero() -> Tensor:
    return Tensor(0.0)


def oracle_loss(params: dict[str, Tensor], mcfg: models.ModelConfig,
                batch: Batch, loss_params: dict[str, Tensor],
                train: bool = False,
                drop_rng: np.random.Generator | None = None,
                objective: str = "oracle"):
    """Total loss for one batch plus a dict of its float components.

    objective "oracle" trains the three oracle heads (positives only) with
    the classifier co-trained at weight 1; "classifier" trains with the
    classification term alone.
    """
    bsz, tau = batch.ids.shape
    h = models.forward_hidden(params, mcfg, batch.ids, train=train,
                              rng=drop_rng)
    logit = models.classify_logit(params, mcfg, h)
    l_cls = ad.binary_cross_entropy(logit, batch.labels)
    parts = {"loss_cls": l_cls.item()}

    if objective == "classifier":
        parts.update(loss_symbol=0.0, loss_state=0.0, loss_stack=0.0,
                     loss=l_cls.item())
        return l_cls, parts

    flat = ad.reshape(h, (bsz * tau, mcfg.width))
    symbol, state, stacks = models.head_logits(params, mcfg, flat)
    l_sym = (ad.cross_entropy(symbol, batch.next_t.reshape(-1), batch.symbol_w)
             if batch.symbol_w.any() else _zero())
    if batch.oracle_w.any():
        l_state = ad.cross_entropy(state, batch.state_t.reshape(-1),
                                   batch.oracle_w)
        per_pos = [ad.cross_entropy(stacks[j], batch.stack_t[:, :, j].reshape(-1),
                                    batch.oracle_w) for j in range(mcfg.m)]
        acc = per_pos[0]
        for p in per_pos[1:]:
            acc = ad.add(acc, p)
        l_stack = ad.scale(acc, 1.0 / mcfg.m)
    else:
        l_state, l_stack = _zero(), _zero()

    total = ad.add(combine_losses((l_sym, l_state, l_stack), loss_params),
                   l_cls)
    parts.update(loss_symbol=l_sym.item(), loss_state=l_state.item(),
                 loss_stack=l_stack.item(), loss=total.item())
    return total, parts


def equation_loss_tensor(params, mcfg, batch, loss_params) -> Tensor:
    """The oracle objective alone (no classifier term) as a graph node."""
    bsz, tau = batch.ids.shape
    h = models.forward_hidden(params, mcfg, batch.ids)
    flat = ad.reshape(h, (bsz * tau, mcfg.width))
    symbol, state, stacks = models.head_logits(params, mcfg, flat)
    l_sym = (ad.cross_entropy(symbol, batch.next_t.reshape(-1), batch.symbol_w)
             if batch.symbol_w.any() else _zero())
    l_state = ad.cross_entropy(state, batch.state_t.reshape(-1), batch.oracle_w)
    per_pos = [ad.cross_entropy(stacks[j], batch.stack_t[:, :, j].reshape(-1),
                                batch.oracle_w) for j in range(mcfg.m)]
    acc = per_pos[0]
    for p in per_pos[1:]:
        acc = ad.add(acc, p)
    l_stack = ad.scale(acc, 1.0 / mcfg.m)
    return combine_losses((l_sym, l_state, l_stack), loss_params)


def equation_loss(params, mcfg, batch, loss_params) -> float:
    return equation_loss_tensor(params, mcfg, batch, loss_params).item()


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 0.001
    seed: int = 0
    loss_mode: str = "fixed"  # "fixed" | "learnable"
    early_stop_delta: float = 1e-4
    early_stop_patience: int = 10


def train_oracle(mcfg: models.ModelConfig, records: list[DatasetRecord],
                 tcfg: TrainConfig, params: dict[str, Tensor] | None = None,
                 objective: str = "oracle"):
    """Train on the given records; returns (params, loss_params, history).

    history holds one dict per epoch with the mean loss components. Raises
    TrainingDiverged on a non-finite loss.
    """
    if params is None:
        params = models.init_params(mcfg, np.random.default_rng((tcfg.seed, 0)))
    loss_params = make_loss_weights(tcfg.loss_mode if objective == "oracle"
                                    else "fixed")
    opt = ad.Adam({**params, **loss_params}, lr=tcfg.lr)
    drop_rng = np.random.default_rng((tcfg.seed, 3))

    history: list[dict] = []
    best = np.inf
    stale = 0
    for epoch in range(tcfg.epochs):
        erng = np.random.default_rng((tcfg.seed, 1, epoch))
        sums = dict.fromkeys(("loss",) + LOSS_PART_KEYS, 0.0)
        seen = 0
        for i, chunk in enumerate(epoch_batches(records, tcfg.batch_size, erng)):
            batch = make_batch(chunk, mcfg.m)
            with ad.Tape() as tape:
                loss, parts = oracle_loss(params, mcfg, batch, loss_params,
                                          train=True, drop_rng=drop_rng,
                                          objective=objective)
            if not np.isfinite(parts["loss"]):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch} batch {i}: {parts}")
            ad.backward(tape, loss)
            opt.step()
            for k in sums:
                sums[k] += parts[k] * len(batch)
            seen += len(batch)
        row = {"epoch": epoch, **{k: sums[k] / seen for k in sums}}
        if "loss.log_sigma" in loss_params:
            for i, v in enumerate(np.exp(loss_params["loss.log_sigma"].data)):
                row[f"sigma_{i}"] = float(v)
        history.append(row)
        if best - row["loss"] > tcfg.early_stop_delta:
            best = row["loss"]
            stale = 0
        else:
            stale += 1
            if stale >= tcfg.early_stop_patience:
                break
    return params, loss_params, history


def clone_params(params: dict[str, Tensor]) -> dict[str, Tensor]:
    return {k: Tensor(v.data.copy(), requires_grad=True)
            for k, v in params.items()}


def train_two_phase(mcfg: models.ModelConfig, train_records, test_records,
                    tcfg: TrainConfig,
                    oracle_params: dict[str, Tensor]) -> dict:
    """Classifier-only training from scratch (phase 0) and from the
    oracle-trained parameters (phase 1, everything still trainable);
    reports test-split classification accuracy for both."""
    p0, _, h0 = train_oracle(mcfg, train_records, tcfg, objective="classifier")
    m0 = evaluate(p0, mcfg, test_records)
    p1, _, h1 = train_oracle(mcfg, train_records, tcfg,
                             params=clone_params(oracle_params),
                             objective="classifier")
    m1 = evaluate(p1, mcfg, test_records)
    return {
        "phase0_acc": m0["classification_acc"],
        "phase1_acc": m1["classification_acc"],
        "phase0_history": h0,
        "phase1_history": h1,
    }


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate(params: dict[str, Tensor], mcfg: models.ModelConfig,
             records: list[DatasetRecord], batch_size: int = 64) -> dict:
    """Metrics over a split.

    classification_acc covers positives and corrupted records; the oracle
    metrics pool steps of positive records: lm_acc checks the predicted
    next symbol against the LM mask (final step excluded, like the symbol
    loss), state_acc and stack_acc are per-step argmax accuracies (stack
    averaged over the m positions; stack_acc_exact requires all m right),
    and perplexity exponentiates the pooled next-symbol cross-entropy.
    """
    cls_hits = cls_n = 0
    sym_ce_sum = 0.0
    lm_hits = lm_n = 0
    state_hits = state_n = 0
    stack_hits = stack_n = 0
    exact_hits = exact_n = 0

    by_len: dict[int, list[DatasetRecord]] = {}
    for rec in records:
        by_len.setdefault(len(rec.sequence), []).append(rec)

    for length in sorted(by_len):
        bucket = by_len[length]
        for i in range(0, len(bucket), batch_size):
            chunk = bucket[i: i + batch_size]
            batch = make_batch(chunk, mcfg.m)
            bsz, tau = batch.ids.shape
            h = models.forward_hidden(params, mcfg, batch.ids)
            logit = models.classify_logit(params, mcfg, h)
            predicted_pos = logit.data > 0.0  # sigmoid(z) > 0.5  <=>  z > 0
            cls_hits += int((predicted_pos == (batch.labels > 0.5)).sum())
            cls_n += bsz

            flat = ad.reshape(h, (bsz * tau, mcfg.width))
            symbol, state, stacks = models.head_logits(params, mcfg, flat)
            sym_pred = symbol.data.argmax(axis=-1).reshape(bsz, tau)
            state_pred = state.data.argmax(axis=-1).reshape(bsz, tau)
            stack_pred = np.stack(
                [s.data.argmax(axis=-1).reshape(bsz, tau) for s in stacks],
                axis=2)

            z = symbol.data - symbol.data.max(axis=-1, keepdims=True)
            lse = np.log(np.exp(z).sum(axis=-1))
            nll = (lse - z[np.arange(bsz * tau), batch.next_t.reshape(-1)])
            sym_ce_sum += float(nll @ batch.symbol_w)

            for b, rec in enumerate(chunk):
                if rec.label != "positive":
                    continue
                masks = rec.trace.lm_masks
                for t in range(tau - 1):
                    lm_hits += int(masks[t, sym_pred[b, t]])
                lm_n += tau - 1
                state_hits += int((state_pred[b] == rec.trace.states).sum())
                state_n += tau
                good = stack_pred[b] == rec.trace.stacks
                stack_hits += int(good.sum())
                stack_n += tau * mcfg.m
                exact_hits += int(good.all(axis=1).sum())
                exact_n += tau

    sym_steps = lm_n  # one symbol prediction per non-final positive step
    return {
        "classification_acc": cls_hits / cls_n if cls_n else float("nan"),
        "lm_acc": lm_hits / lm_n if lm_n else float("nan"),
        "state_acc": state_hits / state_n if state_n else float("nan"),
        "stack_acc": stack_hits / stack_n if stack_n else float("nan"),
        "stack_acc_exact": exact_hits / exact_n if exact_n else float("nan"),
        "perplexity": float(np.exp(sym_ce_sum / sym_steps)) if sym_steps else float("nan"),
    }


METRIC_KEYS = ("classification_acc", "lm_acc", "state_acc", "stack_acc",
               "stack_acc_exact", "perplexity")


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------


def write_history_csv(path, history: list[dict]) -> None:
    """Per-epoch training metrics. Deliberately stripped of anything
    timing-related so identical seeds yield identical files."""
    keys = sorted({k for row in history for k in row})
    keys = ["epoch"] + [k for k in keys if k != "epoch"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for row in history:
            writer.writerow({k: repr(row[k]) if isinstance(row[k], float)
                             else row[k] for k in keys})


# ---------------------------------------------------------------------------
# experiment grid
# ---------------------------------------------------------------------------

GRID_FAMILIES = ("lstm", "transformer_encoder", "transformer_decoder")
GRID_MODES = ("forced", "latent")
GRID_LOSS_MODES = ("fixed", "learnable")


def _cell_digest(spec_digest: str, cell: dict) -> str:
    blob = json.dumps({"data": spec_digest, **cell}, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def run_experiment_grid(spec, meta: dict, train_records, test_records,
                        out_dir, families=GRID_FAMILIES, modes=GRID_MODES,
                        loss_modes=GRID_LOSS_MODES, seeds=(0,),
                        epochs: int = 50, batch_size: int = 32,
                        lr: float = 0.001, alpha: int = 1,
                        layers: int = 1, log=print) -> int:
    """Train and evaluate every (family, mode, loss_mode, seed) cell.

    Each finished cell is written to out_dir/cells/<digest>.json, so a rerun
    resumes: cells whose file already reports success are skipped. A failed
    cell is recorded and the grid moves on. The summary lands in
    out_dir/grid.csv (family-major row order, wall-clock included); the
    return value is 0 only if every cell succeeded.
    """
    out = Path(out_dir)
    (out / "cells").mkdir(parents=True, exist_ok=True)
    rows = []
    all_ok = True
    for family in families:
        for mode in modes:
            for loss_mode in loss_modes:
                for seed in seeds:
                    cell = {"family": family, "mode": mode,
                            "loss_mode": loss_mode, "seed": seed,
                            "epochs": epochs, "batch_size": batch_size,
                            "lr": lr, "alpha": alpha, "layers": layers}
                    digest = _cell_digest(meta["spec_digest"], cell)
                    cell_path = out / "cells" / f"{digest}.json"
                    if cell_path.exists():
                        result = json.loads(cell_path.read_text())
                        if result["status"] == "success":
                            log(f"[grid] {digest} {family}/{mode}/{loss_mode}"
                                f"/seed{seed}: cached")
                            rows.append(result)
                            continue
                    result = {**cell, "digest": digest}
                    started = time.monotonic()
                    try:
                        mcfg = models.ModelConfig.for_machine(
                            spec, family, mode, alpha=alpha, layers=layers)
                        tcfg = TrainConfig(epochs=epochs, batch_size=batch_size,
                                           lr=lr, seed=seed, loss_mode=loss_mode)
                        params, _, history = train_oracle(mcfg, train_records,
                                                          tcfg)
                        metrics = evaluate(params, mcfg, test_records)
                        result.update(status="success",
                                      epochs_run=len(history), **metrics)
                    except Exception as exc:  # noqa: BLE001 - cell isolation
                        result.update(status="failed", error=f"{exc}")
                        all_ok = False
                    result["wall_clock_s"] = round(time.monotonic() - started, 3)
                    cell_path.write_text(json.dumps(result, indent=2) + "\n")
                    log(f"[grid] {digest} {family}/{mode}/{loss_mode}"
                        f"/seed{seed}: {result['status']}"
                        f" ({result['wall_clock_s']}s)")
                    rows.append(result)

    fieldnames = (["family", "mode", "loss_mode", "seed", "status",
                   "wall_clock_s", "epochs_run"] + list(METRIC_KEYS)
                  + ["error"])
    with open(out / "grid.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return 0 if all_ok else 1
