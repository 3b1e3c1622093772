"""Acceptance gate: ten end-to-end checks, one printed verdict line each.

Every test records a `[criterion NN] PASS/FAIL - <numbers>` line in VERDICTS;
the conftest terminal-summary hook prints the collected lines after the run,
outside pytest's capture, so the verdicts can be read off any run. The
assertions carry the same numbers, so a FAIL line always comes with a
failing test. Criteria that carry a runtime budget assert it too.

The membership predicates and prefix tables used by criteria 1 and 2 are
written here directly from the language definitions; they share no code with
the machine simulator they check.
"""

from __future__ import annotations

import itertools
import json
import statistics
import sys
import time
from collections import deque

import numpy as np
import pytest

from cfl_probe import autodiff as ad
from cfl_probe import cli, datagen, harness, models, pda, scan

# Budgets for the comparative-training criteria (6 and 7). One budget is
# shared by every run inside a criterion; only family/mode/seed vary.
C6_N_TRAIN = 2_000
C6_N_TEST = 500
C6_EPOCHS = 60
C6_SEEDS = (0, 1, 2)

C7_N_COMMANDS = 4_000
C7_EPOCHS = 100
C7_SEED = 0


VERDICTS: list[str] = []


def _verdict(num: int, ok: bool, detail: str) -> None:
    line = f"[criterion {num:02d}] {'PASS' if ok else 'FAIL'} - {detail}"
    VERDICTS.append(line)
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


# ---------------------------------------------------------------------------
# criteria 1 and 2: machine membership and LM masks vs. independent predicates
# ---------------------------------------------------------------------------

# (machine, enumeration length bound, membership predicate)
def _dyck_member(seq, kinds: int, depth_bound: int) -> bool:
    """Balanced brackets of `kinds` types, nesting depth <= depth_bound.

    Bracket ids follow the builder's convention: 2i opens pair i, 2i+1
    closes it.
    """
    open_kinds: list[int] = []
    for x in seq:
        kind, closing = divmod(x, 2)
        if closing:
            if not open_kinds or open_kinds[-1] != kind:
                return False
            open_kinds.pop()
        else:
            open_kinds.append(kind)
            if len(open_kinds) > depth_bound:
                return False
    return not open_kinds


def _anbn_member(seq, count_bound: int) -> bool:
    """a^n b^n with 1 <= n <= count_bound (ids: a=0, b=1)."""
    n = len(seq) // 2
    return (len(seq) == 2 * n and 1 <= n <= count_bound
            and list(seq) == [0] * n + [1] * n)


def _parity_member(seq) -> bool:
    """Even number of 0s (the empty string qualifies)."""
    return sum(1 for x in seq if x == 0) % 2 == 0


def _wcwr_member(seq, letters: int, half_bound: int) -> bool:
    """w c w^r with w over `letters` letter ids, |w| <= half_bound; the
    midpoint marker c has id `letters`."""
    mid = len(seq) // 2
    if len(seq) != 2 * mid + 1 or seq[mid] != letters or mid > half_bound:
        return False
    w = list(seq[:mid])
    if any(x >= letters for x in w):
        return False
    return list(seq[mid + 1:]) == w[::-1]


def _membership_suites():
    return {
        "dyck-2-3": (pda.build_dyck(2, 3), 8,
                     lambda s: _dyck_member(s, 2, 3)),
        "anbn-4": (pda.build_anbn(4), 10,
                   lambda s: _anbn_member(s, 4)),
        "parity": (pda.build_parity(), 10, _parity_member),
        "wcwr-2-2": (pda.build_wcwr(2, 2), 7,
                     lambda s: _wcwr_member(s, 2, 2)),
    }


@pytest.fixture(scope="module")
def enumerations():
    """Exhaustive agreement counts plus the predicate-accepted sets, reused
    by the mask criterion."""
    out = {}
    t0 = time.time()
    for name, (spec, bound, member) in _membership_suites().items():
        accepted = set()
        n_strings = n_agree = 0
        for length in range(bound + 1):
            for seq in itertools.product(range(len(spec.alphabet)),
                                         repeat=length):
                want = member(seq)
                got = pda.accepts(spec, seq)
                n_strings += 1
                n_agree += got == want
                if want:
                    accepted.add(seq)
        out[name] = {"spec": spec, "bound": bound, "accepted": accepted,
                     "n_strings": n_strings, "n_agree": n_agree}
    out["elapsed"] = time.time() - t0
    return out


def test_criterion_01_membership_equivalence(enumerations):
    suites = [v for k, v in enumerations.items() if k != "elapsed"]
    total = sum(s["n_strings"] for s in suites)
    agree = sum(s["n_agree"] for s in suites)
    elapsed = enumerations["elapsed"]
    _verdict(1, agree == total and elapsed < 30.0,
             f"accepts() vs closed-form predicates: {agree}/{total} strings "
             f"agree over 4 machines in {elapsed:.1f}s (budget 30s)")


def test_criterion_02_lm_mask_exactness(enumerations):
    checked = mismatches = 0
    t0 = time.time()
    for name, entry in enumerations.items():
        if name == "elapsed":
            continue
        spec, bound = entry["spec"], entry["bound"]
        # Every prefix of every predicate-accepted string, including the
        # strings themselves and the empty prefix.
        prefixes = set()
        for s in entry["accepted"]:
            for i in range(len(s) + 1):
                prefixes.add(s[:i])
        oracle = pda.ReachabilityOracle(spec)
        queue = deque([(pda.initial_config(spec), ())])
        while queue:
            config, p = queue.popleft()
            want = np.array([(p + (x,)) in prefixes
                             for x in range(len(spec.alphabet))], dtype=bool)
            got = pda.valid_next_symbols(spec, config, bound, oracle)
            checked += 1
            mismatches += int((got != want).any())
            if len(p) < bound:
                for x in range(len(spec.alphabet)):
                    try:
                        nxt = pda.step(spec, config, x)
                    except (pda.NoRule, pda.StackOverflow,
                            pda.StackUnderflow):
                        # A prefix the machine cannot run must not extend to
                        # any accepted string.
                        mismatches += int((p + (x,)) in prefixes)
                        continue
                    queue.append((nxt, p + (x,)))
    _verdict(2, mismatches == 0,
             f"masks at {checked} reachable prefixes match exhaustive "
             f"completion search, {mismatches} mismatches "
             f"({time.time() - t0:.1f}s)")


# ---------------------------------------------------------------------------
# criterion 3: shift-reduce worked example and full-language closure
# ---------------------------------------------------------------------------


def _live(row: list[str]) -> list[str]:
    return [s for s in row if s != "eps"]


def test_criterion_03_shift_reduce_parses():
    tr = scan.shift_reduce_parse("jump left and turn opposite left".split())
    want_padded = ["jump", "left", "and", "<reduce>", "<reduce>",
                   "turn", "opposite", "left", "<reduce>"]
    ok_pad = tr.padded == want_padded
    ok_step6 = _live(tr.stacks[5]) == ["CP", "D"]
    ok_final = _live(tr.stacks[-1]) == ["C"]

    t0 = time.time()
    n = bad = 0
    for cmd in scan.iter_commands():
        t = scan.shift_reduce_parse(cmd)
        n += 1
        if _live(t.stacks[-1]) != ["C"]:
            bad += 1
    elapsed = time.time() - t0
    _verdict(3, ok_pad and ok_step6 and ok_final and bad == 0,
             f"worked example padded/step6/final = "
             f"{ok_pad}/{ok_step6}/{ok_final}; {n - bad}/{n} commands "
             f"close to [C] ({elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# criterion 4: finite-difference fidelity of every op and the model graphs
# ---------------------------------------------------------------------------


def _t(rng, *shape, lo=0.2):
    """Random tensor with coordinates kept away from 0 (relu kink safety)."""
    x = rng.normal(size=shape)
    x = np.where(np.abs(x) < lo, lo * np.sign(x) + (x == 0) * lo, x)
    return ad.Tensor(x)


def _op_cases(rng):
    """(name, fn, tensors) triples covering every differentiable op."""
    cases = []

    def case(name, tensors, fn):
        cases.append((name, fn, tensors))

    a = _t(rng, 3, 4)
    b = _t(rng, 4, 5)
    case("matmul", {"a": a, "b": b},
         lambda: ad.sum_all(ad.matmul(a, b)))
    ab = _t(rng, 2, 3, 4)
    bb = _t(rng, 4, 5)
    case("matmul_batched", {"a": ab, "b": bb},
         lambda: ad.sum_all(ad.matmul(ab, bb)))
    c = _t(rng, 3, 4)
    case("add", {"a": a, "c": c}, lambda: ad.sum_all(ad.add(a, c)))
    bias = _t(rng, 4)
    w = _t(rng, 2, 5, 4)
    case("add_bias_broadcast", {"w": w, "bias": bias},
         lambda: ad.sum_all(ad.add(w, bias)))
    case("sub", {"a": a, "c": c}, lambda: ad.sum_all(ad.sub(a, c)))
    case("mul", {"a": a, "c": c}, lambda: ad.sum_all(ad.mul(a, c)))
    case("scale", {"a": a}, lambda: ad.sum_all(ad.scale(a, -1.7)))
    case("sum_all", {"a": a}, lambda: ad.sum_all(a))
    case("mean_all", {"a": a}, lambda: ad.mean_all(a))
    s = _t(rng, 3, 4)
    case("sigmoid", {"s": s}, lambda: ad.sum_all(ad.sigmoid(s)))
    case("tanh", {"s": s}, lambda: ad.sum_all(ad.tanh(s)))
    case("relu", {"s": s}, lambda: ad.sum_all(ad.relu(s)))
    case("exp", {"s": s}, lambda: ad.sum_all(ad.exp(s)))
    sm_in = _t(rng, 3, 5)
    sm_mix = rng.normal(size=(3, 5))  # constant; makes the grad nontrivial
    case("softmax", {"x": sm_in},
         lambda: ad.sum_all(ad.mul(ad.softmax(sm_in),
                                   ad.Tensor(sm_mix.copy()))))
    p1 = _t(rng, 2, 3)
    p2 = _t(rng, 2, 4)
    case("concat", {"p1": p1, "p2": p2},
         lambda: ad.sum_all(ad.concat([p1, p2], axis=-1)))
    sp = _t(rng, 2, 7)
    sp_mix = rng.normal(size=(2, 3))
    case("split", {"sp": sp},
         lambda: ad.sum_all(ad.mul(ad.split(sp, [3, 4], axis=-1)[0],
                                   ad.Tensor(sp_mix.copy()))))
    resh_mix = rng.normal(size=(4, 3))
    case("reshape", {"a": a},
         lambda: ad.sum_all(ad.mul(ad.reshape(a, (4, 3)),
                                   ad.Tensor(resh_mix.copy()))))
    case("transpose", {"a": a},
         lambda: ad.sum_all(ad.mul(ad.transpose(a, (1, 0)),
                                   ad.Tensor(resh_mix.copy()))))
    table = _t(rng, 6, 4)
    ids = np.array([[0, 2, 5], [2, 2, 1]])
    emb_mix = rng.normal(size=(2, 3, 4))
    case("embedding_lookup", {"table": table},
         lambda: ad.sum_all(ad.mul(ad.embedding_lookup(table, ids),
                                   ad.Tensor(emb_mix.copy()))))
    dr = _t(rng, 4, 5)
    case("dropout", {"dr": dr},
         lambda: ad.sum_all(ad.dropout(dr, 0.3,
                                       np.random.default_rng(77), True)))
    mf = _t(rng, 3, 4)
    mask = rng.random((3, 4)) < 0.4
    case("masked_fill", {"mf": mf},
         lambda: ad.sum_all(ad.masked_fill(mf, mask, -2.0)))
    ln_x = _t(rng, 3, 6)
    ln_g = _t(rng, 6)
    ln_b = _t(rng, 6)
    ln_mix = rng.normal(size=(3, 6))
    case("layer_norm", {"x": ln_x, "g": ln_g, "b": ln_b},
         lambda: ad.sum_all(ad.mul(ad.layer_norm(ln_x, ln_g, ln_b),
                                   ad.Tensor(ln_mix.copy()))))
    ce_x = _t(rng, 5, 4)
    ce_y = np.array([0, 3, 1, 1, 2])
    case("cross_entropy", {"x": ce_x},
         lambda: ad.cross_entropy(ce_x, ce_y))
    ce_w = np.array([0.0, 2.0, 1.0, 0.5, 0.0])
    case("cross_entropy_weighted", {"x": ce_x},
         lambda: ad.cross_entropy(ce_x, ce_y, ce_w))
    bce_x = _t(rng, 6)
    bce_y = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 1.0])
    case("binary_cross_entropy", {"x": bce_x},
         lambda: ad.binary_cross_entropy(bce_x, bce_y))
    return cases


def _same_length_batch(spec, mcfg, n_records=6, max_len=8, seed=0):
    """A small single-length batch for graph-level checks."""
    cfg = datagen.GenConfig(n_train=64, n_test=8, max_len=max_len, seed=seed)
    train, _ = datagen.build_dataset(spec, cfg)
    by_len = {}
    for rec in train.records:
        by_len.setdefault(len(rec.trace), []).append(rec)
    best = max(by_len.values(), key=len)
    return harness.make_batch(best[:n_records], mcfg.m)


def test_criterion_04_gradient_fidelity():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    worst_ops = {}
    for name, fn, tensors in _op_cases(rng):
        spt = max(1, -(-10 // len(tensors)))  # >= 10 coordinates per op
        worst_ops[name] = ad.fd_check(fn, tensors, rng,
                                      samples_per_tensor=spt)
    spec = pda.build_dyck(2, 2)
    worst_models = {}
    for family in ("lstm", "transformer_decoder"):
        for mode in ("forced", "latent"):
            mcfg = models.ModelConfig.for_machine(spec, family=family,
                                                  mode=mode)
            params = models.init_params(mcfg, np.random.default_rng(3))
            batch = _same_length_batch(spec, mcfg)
            fn = lambda: harness.equation_loss_tensor(params, mcfg, batch, {})
            worst_models[f"{family}/{mode}"] = ad.fd_check(
                fn, params, rng, samples_per_tensor=1)
    elapsed = time.time() - t0
    worst = max(max(worst_ops.values()), max(worst_models.values()))
    ok = worst < 1e-4 and elapsed < 300.0
    _verdict(4, ok,
             f"{len(worst_ops)} ops and {len(worst_models)} model graphs, "
             f"worst FD relative error {worst:.2e} (tol 1e-4) "
             f"in {elapsed:.0f}s (budget 300s)")


# ---------------------------------------------------------------------------
# criterion 5: training smoke on Dyck-(2,3)
# ---------------------------------------------------------------------------


def test_criterion_05_training_smoke():
    t0 = time.time()
    spec = pda.build_dyck(2, 3)
    cfg = datagen.GenConfig(n_train=10_000, n_test=2_000,
                            max_len=datagen.default_max_len("dyck", 2, 3),
                            seed=11)
    train, test = datagen.build_dataset(spec, cfg)
    n_pos = sum(r.label == "positive" for r in train.records)
    states, stacks = [], []
    for seed in (0, 1, 2):
        mcfg = models.ModelConfig.for_machine(spec, family="lstm",
                                              mode="forced")
        tcfg = harness.TrainConfig(epochs=50, seed=seed)
        params, _, _ = harness.train_oracle(mcfg, train.records, tcfg)
        m = harness.evaluate(params, mcfg, test.records)
        states.append(m["state_acc"])
        stacks.append(m["stack_acc"])
    med_state = statistics.median(states)
    med_stack = statistics.median(stacks)
    elapsed = time.time() - t0
    ok = med_state >= 0.90 and med_stack >= 0.85 and elapsed < 1800.0
    _verdict(5, ok,
             f"forced single-layer lstm on {n_pos} positives: median over 3 "
             f"seeds state_acc={med_state:.3f} (>=0.90) "
             f"stack_acc={med_stack:.3f} (>=0.85) in {elapsed:.0f}s "
             f"(budget 1800s)")


# ---------------------------------------------------------------------------
# criterion 6: decomposition-gap direction on Dyck-(3,5)
#
# Known directional failure (LSTM clause). Under joint optimization of the
# shared objective, latent stack heads match or beat forced segment routing
# for the LSTM at every budget probed (width 1x-4x, depth 1-4, 500-2000
# records, 20-250 epochs, max_len 20-40), so the expected forced-over-latent
# margin never materializes. The check encodes the expected direction at a
# fixed, documented budget and is left failing rather than retuned.
# ---------------------------------------------------------------------------


def _median_stack_acc(family, mode, train_records, test_records):
    spec = pda.build_dyck(3, 5)
    accs = []
    for seed in C6_SEEDS:
        mcfg = models.ModelConfig.for_machine(spec, family=family, mode=mode)
        tcfg = harness.TrainConfig(epochs=C6_EPOCHS, seed=seed)
        params, _, _ = harness.train_oracle(mcfg, train_records, tcfg)
        accs.append(harness.evaluate(params, mcfg,
                                     test_records)["stack_acc"])
    return statistics.median(accs)


def test_criterion_06_decomposition_gap_direction():
    t0 = time.time()
    spec = pda.build_dyck(3, 5)
    cfg = datagen.GenConfig(n_train=C6_N_TRAIN, n_test=C6_N_TEST,
                            max_len=datagen.default_max_len("dyck", 3, 5),
                            seed=0)
    train, test = datagen.build_dataset(spec, cfg)
    med = {}
    for family in ("lstm", "transformer_decoder"):
        for mode in ("forced", "latent"):
            med[family, mode] = _median_stack_acc(family, mode,
                                                  train.records, test.records)
    lstm_gap_ok = med["lstm", "latent"] <= med["lstm", "forced"] - 0.10
    dec_ok = (med["transformer_decoder", "latent"]
              >= med["transformer_decoder", "forced"] - 0.05)
    elapsed = time.time() - t0
    _verdict(6, lstm_gap_ok and dec_ok,
             f"median stack_acc lstm forced={med['lstm', 'forced']:.3f} "
             f"latent={med['lstm', 'latent']:.3f} (need latent <= forced-0.10"
             f": {lstm_gap_ok}); decoder "
             f"forced={med['transformer_decoder', 'forced']:.3f} "
             f"latent={med['transformer_decoder', 'latent']:.3f} "
             f"(need latent >= forced-0.05: {dec_ok}); "
             f"budget {C6_N_TRAIN} records x {C6_EPOCHS} epochs, "
             f"{elapsed:.0f}s")


# ---------------------------------------------------------------------------
# criterion 7: directional checks on the command-parsing dataset
#
# Known directional failure (forced-over-latent gap clause): at matched
# budgets the two LSTM modes converge to the same parsing accuracy here
# (see the criterion 6 note), so the required 0.20 margin does not appear.
# The perplexity-ordering and encoder clauses hold.
# ---------------------------------------------------------------------------


def test_criterion_07_command_parsing_directional():
    t0 = time.time()
    train, test = scan.build_scan_dataset(split_seed=0,
                                          n_commands=C7_N_COMMANDS)
    spec = pda.PdaSpec.from_json(json.dumps(train.meta["spec"]))
    results = {}
    for family, mode in (("lstm", "forced"), ("lstm", "latent"),
                         ("transformer_encoder", "forced"),
                         ("transformer_decoder", "forced")):
        mcfg = models.ModelConfig.for_machine(spec, family=family, mode=mode)
        tcfg = harness.TrainConfig(epochs=C7_EPOCHS, seed=C7_SEED)
        params, _, _ = harness.train_oracle(mcfg, train.records, tcfg)
        results[family, mode] = harness.evaluate(params, mcfg, test.records)
    ppl_lstm = results["lstm", "forced"]["perplexity"]
    ppl_enc = results["transformer_encoder", "forced"]["perplexity"]
    ppl_dec = results["transformer_decoder", "forced"]["perplexity"]
    parse_f = results["lstm", "forced"]["stack_acc"]
    parse_l = results["lstm", "latent"]["stack_acc"]
    parse_enc = results["transformer_encoder", "forced"]["stack_acc"]
    ppl_order_ok = ppl_enc < ppl_dec and ppl_enc < ppl_lstm
    gap_ok = parse_f - parse_l >= 0.20
    enc_ok = parse_enc >= 0.95
    soft = abs(ppl_lstm - 2.71) <= 0.3 and abs(ppl_dec - 2.71) <= 0.3
    elapsed = time.time() - t0
    _verdict(7, ppl_order_ok and gap_ok and enc_ok,
             f"ppl enc={ppl_enc:.3f} < dec={ppl_dec:.3f}, lstm={ppl_lstm:.3f}"
             f" ({ppl_order_ok}); lstm parsing forced={parse_f:.3f} vs "
             f"latent={parse_l:.3f} (gap >= 0.20: {gap_ok}); encoder "
             f"parsing {parse_enc:.3f} (>= 0.95: {enc_ok}); soft ppl "
             f"within 2.71 +/- 0.3: {soft}; {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# criterion 8: the no-stack machine trains to constant empty-stack output
# ---------------------------------------------------------------------------


def test_criterion_08_parity_constants():
    t0 = time.time()
    spec = pda.build_parity()
    cfg = datagen.GenConfig(n_train=400, n_test=200, max_len=10, seed=5)
    train, test = datagen.build_dataset(spec, cfg)
    all_eps = all((rec.trace.stacks == spec.eps_id).all()
                  for rec in train.records + test.records)
    accs = []
    for family, mode in (("lstm", "forced"), ("transformer_decoder",
                                              "latent")):
        mcfg = models.ModelConfig.for_machine(spec, family=family, mode=mode)
        params, _, _ = harness.train_oracle(
            mcfg, train.records, harness.TrainConfig(epochs=40, seed=0))
        accs.append(harness.evaluate(params, mcfg,
                                     test.records)["stack_acc"])
    ok = all_eps and all(a == 1.0 for a in accs)
    _verdict(8, ok,
             f"dataset stacks all empty-symbol: {all_eps}; trained stack_acc "
             f"= {accs} (exactly 1.0 each) in {time.time() - t0:.0f}s")


# ---------------------------------------------------------------------------
# criterion 9: loss-form identities
# ---------------------------------------------------------------------------


def test_criterion_09_loss_identities():
    spec = pda.build_dyck(2, 3)
    cfg = datagen.GenConfig(n_train=64, n_test=8, max_len=10, seed=1)
    train, _ = datagen.build_dataset(spec, cfg)
    by_len = {}
    for rec in train.records:
        by_len.setdefault(len(rec.trace), []).append(rec)
    records = max(by_len.values(), key=len)
    mcfg = models.ModelConfig.for_machine(spec, family="lstm", mode="forced")
    params = models.init_params(mcfg, np.random.default_rng(9))
    batch = harness.make_batch(records, mcfg.m)

    eq5 = harness.equation_loss(params, mcfg, batch,
                                harness.make_loss_weights("fixed"))
    eq6_unit = harness.equation_loss(params, mcfg, batch,
                                     harness.make_loss_weights("learnable"))
    _, parts = harness.oracle_loss(params, mcfg, batch, {})
    resum = parts["loss_symbol"] + parts["loss_state"] + parts["loss_stack"]
    d_unit = abs(eq6_unit - eq5)
    d_add = abs(eq5 - resum)
    ok = d_unit <= 1e-12 and d_add <= 1e-12
    _verdict(9, ok,
             f"|learnable(sigma=1) - fixed| = {d_unit:.2e}, "
             f"|fixed - (symbol+state+stack)| = {d_add:.2e} (tol 1e-12)")


# ---------------------------------------------------------------------------
# criterion 10: bit-level determinism of gen and train
# ---------------------------------------------------------------------------


def test_criterion_10_determinism(tmp_path):
    gen_args = ["gen", "--language", "dyck", "--k", "2", "--m", "3",
                "--n-train", "64", "--n-test", "32", "--max-len", "10",
                "--seed", "3"]
    for d in ("g1", "g2"):
        assert cli.main(gen_args + ["--out", str(tmp_path / d)]) == 0
    files_same = all(
        (tmp_path / "g1" / f).read_bytes() == (tmp_path / "g2" / f).read_bytes()
        for f in ("meta.json", "train.jsonl", "test.jsonl"))

    train_args = ["train", "--data", str(tmp_path / "g1"), "--family",
                  "lstm", "--mode", "forced", "--epochs", "3",
                  "--seed", "7"]
    for name in ("h1.csv", "h2.csv"):
        assert cli.main(train_args
                        + ["--metrics-csv", str(tmp_path / name)]) == 0
    csv_same = ((tmp_path / "h1.csv").read_bytes()
                == (tmp_path / "h2.csv").read_bytes())
    _verdict(10, files_same and csv_same,
             f"regenerated dataset files byte-identical: {files_same}; "
             f"retrained metrics CSV identical: {csv_same}")
