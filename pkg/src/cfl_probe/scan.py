"""SCAN linguistic commands: generation, shift-reduce annotation, and the
equivalent single-state machine.

Grammar (start symbol C):

    C  := CP S | CP V | S
    CP := S and | S after
    S  := V | V twice | V thrice
    V  := VP D | VP left | VP right | D
    VP := D opposite | D around
    D  := U | U left | U right
    U  := walk | look | run | jump | turn

Parsing is bottom-up with one token of lookahead. Reductions that consume a
terminal (binds like D := U left or CP := S and) fire on the terminal itself;
stack-only closures (V := D, S := V, C := S, and the two-symbol segments
V := VP D, C := CP V, C := CP S) are materialized as <reduce> tokens. A verb
pushes U when the next token is left/right and D otherwise (the D := U closure
is fused into the shift, which is what makes the process deterministic).

Token/action alignment: terminals stay in text order; a terminal whose bind
needs k closures is emitted first and followed by k <reduce> tokens, while the
actions run closure_1..closure_k and then the bind. Each token is therefore
paired with exactly one action and one post-action stack.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import datagen, pda
from .datagen import Dataset, DatasetRecord
from .pda import END, PdaSpec, TransitionRule

TERMINALS = (
    "walk", "look", "run", "jump", "turn",
    "left", "right", "opposite", "around", "twice", "thrice", "and", "after",
    "<reduce>",
)
NONTERMINALS = ("C", "CP", "S", "V", "VP", "D", "U")
STACK_SYMBOLS = NONTERMINALS + ("I", "eps")

TOK = {t: i for i, t in enumerate(TERMINALS)}
NT = {t: i for i, t in enumerate(STACK_SYMBOLS)}
REDUCE = TOK["<reduce>"]
_C, _CP, _S, _V, _VP, _D, _U = (NT[x] for x in NONTERMINALS)
_I, _EPS = NT["I"], NT["eps"]

U_WORD_IDS = frozenset(TOK[w] for w in ("walk", "look", "run", "jump", "turn"))
LR_IDS = frozenset((TOK["left"], TOK["right"]))
CONJ_IDS = frozenset((TOK["and"], TOK["after"]))

SCAN_M = 3  # maximum parse-stack depth, reached at e.g. [CP, VP, U]


class ParseError(Exception):
    def __init__(self, pos: int, msg: str):
        super().__init__(f"position {pos}: {msg}")
        self.pos = pos


@dataclass
class ParseTrace:
    command: list[str]  # raw terminals
    padded: list[str]  # terminals plus <reduce> tokens
    stacks: list[list[str]]  # stack after each padded token, eps-padded to m
    transitions: list[str]  # applied rule per padded token
    roles: list[str]  # continuation class after each token, see trace_masks

    def depths(self) -> list[int]:
        return [sum(1 for s in row if s != "eps") for row in self.stacks]


# ---------------------------------------------------------------------------
# command generation (the language is finite; commands are random-accessible
# through the product structure C = CP x S  ∪  S)
# ---------------------------------------------------------------------------


def _phrase_tables() -> tuple[list[tuple[str, ...]], ...]:
    u = [(w,) for w in ("walk", "look", "run", "jump", "turn")]
    d = u + [t + ("left",) for t in u] + [t + ("right",) for t in u]
    vp = [t + ("opposite",) for t in d] + [t + ("around",) for t in d]
    v = [a + b for a in vp for b in d] + [t + ("left",) for t in vp] \
        + [t + ("right",) for t in vp] + d
    s = [t for t in v] + [t + ("twice",) for t in v] + [t + ("thrice",) for t in v]
    cp = [t + ("and",) for t in s] + [t + ("after",) for t in s]
    return u, d, vp, v, s, cp


_U_T, _D_T, _VP_T, _V_T, _S_T, _CP_T = _phrase_tables()


def total_commands() -> int:
    return len(_CP_T) * len(_S_T) + len(_S_T)


def command_at(i: int) -> tuple[str, ...]:
    """i-th command in derivation order (CP x S block first, then bare S)."""
    n_pair = len(_CP_T) * len(_S_T)
    if i < n_pair:
        return _CP_T[i // len(_S_T)] + _S_T[i % len(_S_T)]
    return _S_T[i - n_pair]


def iter_commands():
    """All distinct commands, derivation order (not sorted)."""
    for cp in _CP_T:
        for s in _S_T:
            yield cp + s
    yield from _S_T


def generate_commands() -> list[tuple[str, ...]]:
    """Materialized, sorted, duplicate-free command list.

    The full language is ~5M strings; call iter_commands + command_at for
    streaming access instead when order does not matter.
    """
    out = sorted(iter_commands())
    return out


# ---------------------------------------------------------------------------
# shift-reduce annotator
# ---------------------------------------------------------------------------

# (terminal, stack top) -> pushed nonterminal, with an optional guard on the
# symbol below the top (None = any). All binds pop exactly the top.
_BINDS: dict[tuple[int, int], tuple[int, frozenset[int] | None]] = {
    (TOK["left"], _U): (_D, None),
    (TOK["right"], _U): (_D, None),
    (TOK["left"], _VP): (_V, None),
    (TOK["right"], _VP): (_V, None),
    (TOK["opposite"], _D): (_VP, frozenset((_I, _CP))),
    (TOK["around"], _D): (_VP, frozenset((_I, _CP))),
    (TOK["twice"], _V): (_S, None),
    (TOK["thrice"], _V): (_S, None),
    (TOK["and"], _S): (_CP, frozenset((_I,))),
    (TOK["after"], _S): (_CP, frozenset((_I,))),
}

_NT_NAME = {v: k for k, v in NT.items()}


def _closure(top: int, below: int, at_eof: bool) -> tuple[int, int] | None:
    """Stack-only reduction at (top, below): (pops, pushed) or None."""
    if top == _D:
        return (2, _V) if below == _VP else (1, _V)
    if top == _V:
        if below == _CP:
            return (2, _C) if at_eof else None
        return (1, _S)
    if top == _S:
        if below == _CP:
            return (2, _C) if at_eof else None
        return (1, _C) if at_eof else None
    return None


def _can_consume(y: int, stack: list[int]) -> bool:
    top = stack[-1] if stack else _I
    below = stack[-2] if len(stack) >= 2 else _I
    hit = _BINDS.get((y, top))
    if hit is not None:
        push, guard = hit
        return guard is None or below in guard
    return y in U_WORD_IDS and top in (_I, _CP, _VP)


def shift_reduce_parse(command) -> ParseTrace:
    """Deterministic bottom-up parse of a raw command; raises ParseError."""
    raw = list(command)
    toks: list[int] = []
    for pos, w in enumerate(raw):
        if w not in TOK or w == "<reduce>":
            raise ParseError(pos, f"unknown terminal {w!r}")
        toks.append(TOK[w])
    if not toks:
        raise ParseError(0, "empty command")

    stack: list[int] = []
    padded: list[str] = []
    stacks: list[list[str]] = []
    rules: list[str] = []
    roles: list[str] = []

    def run_closure(pos: int, at_eof: bool) -> str:
        top = stack[-1] if stack else _I
        below = stack[-2] if len(stack) >= 2 else _I
        cl = _closure(top, below, at_eof)
        if cl is None:
            raise ParseError(pos, f"no action with stack top {_NT_NAME[top]}")
        pops, push = cl
        name = f"{_NT_NAME[push]} := " + " ".join(_NT_NAME[s] for s in stack[-pops:])
        del stack[len(stack) - pops:]
        stack.append(push)
        return name

    for pos, y in enumerate(toks):
        la = toks[pos + 1] if pos + 1 < len(toks) else None
        # (rule, stack after that rule) per action of this step
        steps: list[tuple[str, list[int]]] = []
        while not _can_consume(y, stack):
            name = run_closure(pos, at_eof=False)
            steps.append((name, stack.copy()))
            if len(steps) > 4:
                raise ParseError(pos, "runaway closure chain")
        top = stack[-1] if stack else _I
        if (y, top) in _BINDS:
            push, _ = _BINDS[(y, top)]
            act = f"{_NT_NAME[push]} := {_NT_NAME[top]} {raw[pos]}"
            stack.pop()
            stack.append(push)
        else:  # shift; the D := U closure is fused when no left/right follows
            if len(stack) >= SCAN_M:
                raise ParseError(pos, "stack bound exceeded")
            sym = _U if la in LR_IDS else _D
            act = f"shift {_NT_NAME[sym]} ({raw[pos]})"
            stack.append(sym)
        steps.append((act, stack.copy()))
        # token order: terminal first, one <reduce> per preceding closure;
        # each token pairs with one action and that action's result stack.
        # While closures of the chain are still owed, the only legal next
        # token is <reduce>; once the terminal's own action lands we are back
        # at a free choice point.
        texts = [raw[pos]] + ["<reduce>"] * (len(steps) - 1)
        for j, (text, (rule, shot)) in enumerate(zip(texts, steps)):
            padded.append(text)
            stacks.append(_pad_names(shot))
            rules.append(rule)
            roles.append("chain" if j < len(steps) - 1 else "boundary")

    while stack != [_C]:
        name = run_closure(len(toks), at_eof=True)
        padded.append("<reduce>")
        stacks.append(_pad_names(stack))
        rules.append(name)
        roles.append("eof")

    return ParseTrace(command=raw, padded=padded, stacks=stacks,
                      transitions=rules, roles=roles)


def _pad_names(stack: list[int]) -> list[str]:
    return [_NT_NAME[s] for s in stack] + ["eps"] * (SCAN_M - len(stack))


# ---------------------------------------------------------------------------
# the single-state machine over padded sequences
# ---------------------------------------------------------------------------

_ALL_TOKENS = frozenset(range(len(TERMINALS)))
_NOT_LR = frozenset(_ALL_TOKENS - LR_IDS) | frozenset((END,))
_AT_END = frozenset((END,))


def scan_pda() -> PdaSpec:
    """One-state bounded machine equivalent to the shift-reduce annotator.

    Stack-only closures appear as rules consuming <reduce>; a closure that
    immediately precedes a terminal's bind is keyed on that terminal instead
    (the terminal arrives while the closure is still pending). Lookahead
    resolves the two genuine conflicts: shifts fuse D := U unless left/right
    follows, and end-of-input decides whether V/S close the whole command.
    """
    r: list[TransitionRule] = []

    def add(inp, top, push, pops, below=None, la=None):
        r.append(TransitionRule(
            from_state=0, input=inp, stack_top=top, to_state=0, push=push,
            below=below, pops=pops, lookahead=la))

    for u in sorted(U_WORD_IDS):
        for top in (_I, _CP, _VP):
            add(u, top, _U, 0, la=LR_IDS)
            add(u, top, _D, 0, la=_NOT_LR)

    for y in ("left", "right"):
        add(TOK[y], _U, _D, 1)
        add(TOK[y], _VP, _V, 1)
    for y in ("opposite", "around"):
        for below in (_I, _CP):
            add(TOK[y], _D, _VP, 1, below=below)
    for y in ("twice", "thrice"):
        add(TOK[y], _V, _S, 1)
        for below in (_I, _CP):  # pending V := D closure
            add(TOK[y], _D, _V, 1, below=below)
        add(TOK[y], _D, _V, 2, below=_VP)  # pending V := VP D
    for y in ("and", "after"):
        add(TOK[y], _S, _CP, 1, below=_I)
        add(TOK[y], _D, _V, 1, below=_I)
        add(TOK[y], _D, _V, 2, below=_VP)
        add(TOK[y], _V, _S, 1, below=_I)

    for below in (_I, _CP):
        add(REDUCE, _D, _V, 1, below=below)
    add(REDUCE, _D, _V, 2, below=_VP)
    add(REDUCE, _V, _S, 1, below=_I)
    add(REDUCE, _V, _C, 2, below=_CP, la=_AT_END)
    add(REDUCE, _V, _S, 1, below=_CP, la=_ALL_TOKENS)
    add(REDUCE, _S, _C, 1, below=_I, la=_AT_END)
    add(REDUCE, _S, _CP, 1, below=_I, la=_ALL_TOKENS)
    add(REDUCE, _S, _C, 2, below=_CP)

    return PdaSpec(
        name="scan",
        n_states=1,
        alphabet=TERMINALS,
        stack_symbols=STACK_SYMBOLS,
        rules=tuple(r),
        q0=0,
        bottom_id=_I,
        eps_id=_EPS,
        accepting=frozenset((0,)),
        m=SCAN_M,
        accept_stack=(_C,),
    )


def _rule_base(spec: PdaSpec) -> dict[tuple[int, int], np.ndarray]:
    """(top, below) -> tokens with a matching transition under some lookahead."""
    base: dict[tuple[int, int], np.ndarray] = {}
    for top in range(len(STACK_SYMBOLS)):
        for below in range(len(STACK_SYMBOLS)):
            vec = np.zeros(len(TERMINALS), dtype=bool)
            for rule in spec.rules:
                if rule.stack_top != top:
                    continue
                if rule.below is not None and rule.below != below:
                    continue
                vec[rule.input] = True
            base[(top, below)] = vec
    return base


_BASE_CACHE: dict[tuple[int, int], np.ndarray] | None = None


def trace_masks(parse: ParseTrace) -> np.ndarray:
    """Valid-next-token mask after each step of an annotated sequence.

    A token is valid after a prefix iff the padding of some command extends
    the prefix with it. Three continuation classes:

      chain     closures of the current terminal are still owed, so the next
                token can only be <reduce>;
      eof       inside the end-of-input closure cascade: <reduce> until the
                stack is [C], then nothing;
      boundary  free choice: any terminal with a matching transition under
                some lookahead, plus <reduce> when the command may end here
                (= a <reduce> transition matches). Two corrections make this
                exact: after a verb the machine has already used lookahead to
                pick U or D, but the prefix alone leaves both open, so the
                mask is taken at the D variant plus left/right (always legal
                on a fresh verb); and and/after are struck whenever a CP is
                already on the stack, since a command derives at most one
                conjunction.
    """
    global _BASE_CACHE
    if _BASE_CACHE is None:
        _BASE_CACHE = _rule_base(scan_pda())
    base = _BASE_CACHE
    out = np.zeros((len(parse.padded), len(TERMINALS)), dtype=bool)
    for t, (tok, row, role) in enumerate(zip(parse.padded, parse.stacks, parse.roles)):
        st = [NT[s] for s in row if s != "eps"]
        if role == "chain":
            out[t, REDUCE] = True
            continue
        if role == "eof":
            if st != [_C]:
                out[t, REDUCE] = True
            continue
        below = st[-2] if len(st) >= 2 else _I
        if TOK[tok] in U_WORD_IDS:  # post-shift: undo the revealed U/D choice
            vec = base[(_D, below)].copy()
            for x in LR_IDS:
                vec[x] = True
        else:
            top = st[-1] if st else _I
            vec = base[(top, below)].copy()
        if _CP in st:
            for x in CONJ_IDS:
                vec[x] = False
        out[t] = vec
    return out


# ---------------------------------------------------------------------------
# dataset assembly
# ---------------------------------------------------------------------------


def _trace_record(spec: PdaSpec, words: tuple[str, ...]) -> DatasetRecord:
    parse = shift_reduce_parse(words)
    seq = [TOK[t] for t in parse.padded]
    placeholder = np.zeros(len(TERMINALS), dtype=bool)
    trace = pda.run(spec, seq, masker=lambda cfg: placeholder)
    if not trace.accepted:
        raise AssertionError(f"machine rejects annotated command {words!r}")
    want = [[NT[s] for s in st] for st in parse.stacks]
    if want != trace.stacks.tolist():
        raise AssertionError(f"stack mismatch replaying {words!r}")
    trace.lm_masks = trace_masks(parse)
    return DatasetRecord(sequence=seq, trace=trace, label="positive",
                         corruption_ops=[])


def build_scan_dataset(split_seed: int = 0,
                       n_commands: int | None = None) -> tuple[Dataset, Dataset]:
    """Annotate commands and split them 50/50 by stable hash of the text.

    n_commands=None materializes the whole finite language; an integer draws
    that many distinct commands uniformly without replacement (random access
    through the derivation index, nothing else materialized). The split
    hashes the raw command text, so it is independent of n_commands: growing
    the sample never moves a command across the split.
    """
    total = total_commands()
    if n_commands is None:
        n_commands = total
    if n_commands <= 0:
        raise ValueError("n_commands must be positive")
    n_commands = min(n_commands, total)
    if n_commands == total:
        idx = np.arange(total, dtype=np.int64)
    else:
        rng = np.random.default_rng((split_seed, 99))
        idx = np.sort(rng.choice(total, size=n_commands, replace=False))

    spec = scan_pda()
    train: list[DatasetRecord] = []
    test: list[DatasetRecord] = []
    for i in idx.tolist():
        words = command_at(i)
        rec = _trace_record(spec, words)
        side = train if datagen.stable_hash64(list(words)) % 2 == 0 else test
        side.append(rec)

    max_len = max(len(r.sequence) for r in train + test)
    meta = {
        "format": "cfl-dataset/1",
        "language": "scan",
        "spec": json.loads(spec.to_json()),
        "spec_digest": spec.digest(),
        "gen": {
            "n_commands": n_commands,
            "seed": split_seed,
            "split": "stable-hash-parity",
            "policy": "uniform-without-replacement/1",
        },
        "full_language_size": total,
        "max_len": max_len,
        "n_states": spec.n_states,
        "n_alphabet": len(spec.alphabet),
        "n_stack_symbols": len(spec.stack_symbols),
        "m": spec.m,
        "counts": {
            "train_positive": len(train),
            "train_corrupted": 0,
            "test_positive": len(test),
            "test_corrupted": 0,
        },
    }
    return Dataset(meta=meta, records=train), Dataset(meta=meta, records=test)
