"""Bounded deterministic pushdown automata with full execution traces.

A machine is a tuple <Q, Sigma, S, delta, q0, I, F> plus a stack bound m.
The stack always holds the bottom marker I below at most m working symbols;
configurations here store the working symbols only (I is implicit).

Traces record, for every consumed symbol, the state and the epsilon-padded
stack *after* that symbol (and after any eager epsilon-input rules have been
applied to quiescence), plus a language-model mask: the set of symbols that
could validly come next and still lead to an accepted string within a given
length budget.
"""

from __future__ import annotations

import json
import hashlib
from collections import deque
from dataclasses import dataclass, field

import numpy as np

# Sentinel for "end of input" inside rule lookahead sets.
END = -1


class NoRule(Exception):
    """No transition matches (state, input, stack top)."""


class StackOverflow(Exception):
    """A push would exceed the stack bound m."""


class StackUnderflow(Exception):
    """A pop was attempted on an empty working stack."""


@dataclass(frozen=True)
class Symbol:
    """An alphabet entry: a dense id plus its display string."""

    id: int
    text: str


@dataclass(frozen=True)
class TransitionRule:
    """One transition of the machine.

    stack_top semantics follow the classical convention: None means "do not
    pop, match any top"; otherwise the named symbol must be on top and is
    popped (I may be named; popping I and pushing I back is expressed as a
    guard with pops=0).

    The three optional fields exist for grammars whose reductions inspect a
    two-symbol stack segment or one token of lookahead (the shift-reduce
    machine needs both); ordinary machines leave them at their defaults.

      below:     required symbol directly under the top (None = don't care).
      pops:      how many working symbols the rule removes. None means the
                 classical default: 0 if stack_top is None, else 1.
      lookahead: set of input ids (END for end-of-sequence) the *next* symbol
                 must belong to for the rule to fire. None = any.
    """

    from_state: int
    input: int | None  # None = epsilon-input rule
    stack_top: int | None
    to_state: int
    push: int | None
    below: int | None = None
    pops: int | None = None
    lookahead: frozenset[int] | None = None

    def effective_pops(self, bottom_id: int) -> int:
        if self.pops is not None:
            return self.pops
        if self.stack_top is None or self.stack_top == bottom_id:
            return 0
        return 1


@dataclass(frozen=True)
class PdaSpec:
    """A bounded deterministic PDA.

    alphabet is Sigma; stack_symbols is S with the bottom marker I at index
    bottom_id and the empty symbol at eps_id (canonical builders use
    S = Sigma + [I, eps], so both sit at the end of the table).
    accept_stack is the working-stack content required at acceptance
    (empty tuple = the stack must have shrunk back to [I]).
    """

    name: str
    n_states: int
    alphabet: tuple[str, ...]
    stack_symbols: tuple[str, ...]
    rules: tuple[TransitionRule, ...]
    q0: int
    bottom_id: int
    eps_id: int
    accepting: frozenset[int]
    m: int
    accept_stack: tuple[int, ...] = ()

    def __post_init__(self):
        assert 0 <= self.q0 < self.n_states
        assert all(0 <= q < self.n_states for q in self.accepting)
        assert self.m >= 1
        assert self.bottom_id != self.eps_id
        texts = list(self.alphabet) + [
            t for i, t in enumerate(self.stack_symbols) if i in (self.bottom_id, self.eps_id)
        ]
        assert len(set(self.stack_symbols)) == len(self.stack_symbols), "duplicate stack symbol"
        assert len(set(self.alphabet)) == len(self.alphabet), "duplicate input symbol"
        del texts

    # -- symbol table helpers -------------------------------------------------

    def symbol_id(self, text: str) -> int:
        return self.alphabet.index(text)

    def stack_id(self, text: str) -> int:
        return self.stack_symbols.index(text)

    def decode(self, ids) -> list[str]:
        return [self.alphabet[i] for i in ids]

    def encode(self, texts) -> list[int]:
        return [self.alphabet.index(t) for t in texts]

    @property
    def uses_lookahead(self) -> bool:
        return any(r.lookahead is not None for r in self.rules)

    # -- serialization --------------------------------------------------------

    def to_json(self) -> str:
        d = {
            "format": "pda-spec/1",
            "name": self.name,
            "n_states": self.n_states,
            "alphabet": list(self.alphabet),
            "stack_symbols": list(self.stack_symbols),
            "q0": self.q0,
            "bottom_id": self.bottom_id,
            "eps_id": self.eps_id,
            "accepting": sorted(self.accepting),
            "m": self.m,
            "accept_stack": list(self.accept_stack),
            "rules": [
                {
                    "from_state": r.from_state,
                    "input": r.input,
                    "stack_top": r.stack_top,
                    "to_state": r.to_state,
                    "push": r.push,
                    "below": r.below,
                    "pops": r.pops,
                    "lookahead": sorted(r.lookahead) if r.lookahead is not None else None,
                }
                for r in self.rules
            ],
        }
        return json.dumps(d, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "PdaSpec":
        d = json.loads(text)
        if d.get("format") != "pda-spec/1":
            raise ValueError(f"unknown spec format: {d.get('format')!r}")
        rules = tuple(
            TransitionRule(
                from_state=r["from_state"],
                input=r["input"],
                stack_top=r["stack_top"],
                to_state=r["to_state"],
                push=r["push"],
                below=r["below"],
                pops=r["pops"],
                lookahead=frozenset(r["lookahead"]) if r["lookahead"] is not None else None,
            )
            for r in d["rules"]
        )
        return PdaSpec(
            name=d["name"],
            n_states=d["n_states"],
            alphabet=tuple(d["alphabet"]),
            stack_symbols=tuple(d["stack_symbols"]),
            rules=rules,
            q0=d["q0"],
            bottom_id=d["bottom_id"],
            eps_id=d["eps_id"],
            accepting=frozenset(d["accepting"]),
            m=d["m"],
            accept_stack=tuple(d["accept_stack"]),
        )

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


@dataclass
class PdaConfiguration:
    """Execution snapshot: state, working stack (bottom-to-top, I excluded),
    and how many input symbols have been consumed."""

    state: int
    stack: tuple[int, ...] = ()
    consumed: int = 0

    def key(self) -> tuple:
        return (self.state, self.stack)


@dataclass
class OracleTrace:
    """Per-step annotation of a run.

    states[t] and stacks[t] describe the configuration after consuming
    symbols[t]; stacks rows are padded with the empty symbol to exactly m
    entries. lm_masks[t] marks the inputs that can extend the prefix
    symbols[:t+1] to an accepted string within the length budget.
    """

    symbols: np.ndarray  # [tau] int
    states: np.ndarray  # [tau] int
    stacks: np.ndarray  # [tau, m] int (stack-symbol ids, eps above the top)
    lm_masks: np.ndarray  # [tau, |Sigma|] bool
    accepted: bool

    def __len__(self) -> int:
        return len(self.symbols)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


def _match(spec: PdaSpec, rule: TransitionRule, state: int, inp: int | None,
           stack: tuple[int, ...], la: int | None) -> bool:
    if rule.from_state != state or rule.input != inp:
        return False
    top = stack[-1] if stack else spec.bottom_id
    if rule.stack_top is not None and rule.stack_top != top:
        return False
    if rule.below is not None:
        under = stack[-2] if len(stack) >= 2 else spec.bottom_id
        if rule.below != under:
            return False
    if rule.lookahead is not None:
        if la is None:
            # Lookahead unknown (caller did not supply one): treat as no match
            # so that masks can probe each lookahead value explicitly.
            return False
        if la not in rule.lookahead:
            return False
    return True


def _find_rule(spec: PdaSpec, state: int, inp: int | None,
               stack: tuple[int, ...], la: int | None) -> TransitionRule | None:
    hit = None
    for rule in spec.rules:
        if _match(spec, rule, state, inp, stack, la):
            if hit is not None:
                raise AssertionError(
                    f"nondeterministic spec {spec.name}: two rules match "
                    f"state={state} input={inp} stack={stack}"
                )
            hit = rule
    return hit


def _apply(spec: PdaSpec, config: PdaConfiguration, rule: TransitionRule) -> PdaConfiguration:
    stack = list(config.stack)
    pops = rule.effective_pops(spec.bottom_id)
    if pops > len(stack):
        raise StackUnderflow(f"rule pops {pops} from working stack of depth {len(stack)}")
    if pops:
        del stack[len(stack) - pops:]
    if rule.push is not None and rule.push != spec.bottom_id:
        if len(stack) >= spec.m:
            raise StackOverflow(f"push beyond stack bound m={spec.m}")
        stack.append(rule.push)
    return PdaConfiguration(state=rule.to_state, stack=tuple(stack), consumed=config.consumed)


def _quiesce(spec: PdaSpec, config: PdaConfiguration) -> PdaConfiguration:
    """Apply enabled epsilon-input rules greedily to a fixed point."""
    for _ in range(4 * (spec.m + spec.n_states) + 8):
        rule = _find_rule(spec, config.state, None, config.stack, la=None)
        if rule is None:
            return config
        config = _apply(spec, config, rule)
    raise AssertionError(f"epsilon rules of {spec.name} do not quiesce")


def initial_config(spec: PdaSpec) -> PdaConfiguration:
    return _quiesce(spec, PdaConfiguration(state=spec.q0))


def step(spec: PdaSpec, config: PdaConfiguration, inp: int,
         lookahead: int | None = None) -> PdaConfiguration:
    """Consume one input symbol, then apply epsilon rules to quiescence.

    lookahead is the id of the symbol after `inp` (END at end of sequence);
    it only matters for specs whose rules carry lookahead sets.
    """
    if not (0 <= inp < len(spec.alphabet)):
        raise ValueError(f"input id {inp} outside alphabet of {spec.name}")
    rule = _find_rule(spec, config.state, inp, config.stack, lookahead)
    if rule is None:
        raise NoRule(
            f"{spec.name}: no rule for state={config.state} "
            f"input={spec.alphabet[inp]!r} stack={config.stack}"
        )
    nxt = _apply(spec, config, rule)
    nxt.consumed = config.consumed + 1
    return _quiesce(spec, nxt)


def is_accepting(spec: PdaSpec, config: PdaConfiguration) -> bool:
    return config.state in spec.accepting and config.stack == spec.accept_stack


def _pad_stack(spec: PdaSpec, stack: tuple[int, ...]) -> list[int]:
    return list(stack) + [spec.eps_id] * (spec.m - len(stack))


# ---------------------------------------------------------------------------
# reachability oracle: minimal completion lengths for LM masks
# ---------------------------------------------------------------------------


class ReachabilityOracle:
    """Minimal number of further input symbols needed to reach acceptance.

    Built once per spec by (1) forward-closing the configuration set from the
    initial configuration under all single-symbol steps and (2) a backward BFS
    from the accepting configurations. Works for specs without lookahead rules
    (the four canonical machines); the shift-reduce machine has its own masker.
    """

    INF = 1 << 30

    def __init__(self, spec: PdaSpec):
        if spec.uses_lookahead:
            raise ValueError("reachability oracle requires a lookahead-free spec")
        self.spec = spec
        start = initial_config(spec)
        configs = {start.key()}
        frontier = deque([start])
        edges_rev: dict[tuple, list[tuple]] = {}
        while frontier:
            cfg = frontier.popleft()
            for x in range(len(spec.alphabet)):
                try:
                    nxt = step(spec, cfg, x)
                except (NoRule, StackOverflow, StackUnderflow):
                    continue
                edges_rev.setdefault(nxt.key(), []).append(cfg.key())
                if nxt.key() not in configs:
                    configs.add(nxt.key())
                    frontier.append(nxt)
        dist = {}
        queue = deque()
        for key in configs:
            state, stack = key
            if state in spec.accepting and stack == spec.accept_stack:
                dist[key] = 0
                queue.append(key)
        while queue:
            key = queue.popleft()
            for prev in edges_rev.get(key, ()):
                if prev not in dist:
                    dist[prev] = dist[key] + 1
                    queue.append(prev)
        self._dist = dist

    def min_steps(self, config: PdaConfiguration) -> int:
        return self._dist.get(config.key(), self.INF)


def valid_next_symbols(spec: PdaSpec, config: PdaConfiguration, max_len: int,
                       oracle: ReachabilityOracle | None = None) -> np.ndarray:
    """Boolean vector over Sigma: which inputs can extend the current prefix
    to an accepted sequence of total length <= max_len."""
    if oracle is None:
        oracle = ReachabilityOracle(spec)
    mask = np.zeros(len(spec.alphabet), dtype=bool)
    remaining = max_len - config.consumed - 1
    if remaining < 0:
        return mask
    for x in range(len(spec.alphabet)):
        try:
            nxt = step(spec, config, x)
        except (NoRule, StackOverflow, StackUnderflow):
            continue
        if oracle.min_steps(nxt) <= remaining:
            mask[x] = True
    return mask


# ---------------------------------------------------------------------------
# running full sequences
# ---------------------------------------------------------------------------


def run(spec: PdaSpec, sequence, max_len: int | None = None,
        masker=None, oracle: ReachabilityOracle | None = None) -> OracleTrace:
    """Execute the machine over a sequence of input ids and build the trace.

    A failing step (no rule / stack bound) truncates the trace there and marks
    the whole sequence rejected; running past the end without reaching the
    accepting configuration also rejects, with a full-length trace.

    masker(config) -> bool vector may be supplied for machines whose masks are
    not budget-driven; otherwise masks come from the reachability oracle with
    budget max_len (default: the sequence's own length).
    """
    seq = list(sequence)
    if max_len is None:
        max_len = len(seq)
    if masker is None:
        if oracle is None:
            oracle = ReachabilityOracle(spec)
        masker = lambda cfg: valid_next_symbols(spec, cfg, max_len, oracle)

    config = initial_config(spec)
    states, stacks, masks = [], [], []
    ok = True
    for t, x in enumerate(seq):
        la = seq[t + 1] if t + 1 < len(seq) else END
        try:
            config = step(spec, config, x, lookahead=la)
        except (NoRule, StackOverflow, StackUnderflow):
            ok = False
            seq = seq[:t]
            break
        states.append(config.state)
        stacks.append(_pad_stack(spec, config.stack))
        masks.append(masker(config))
    accepted = ok and is_accepting(spec, config)
    tau = len(seq)
    return OracleTrace(
        symbols=np.asarray(seq[:tau], dtype=np.int64),
        states=np.asarray(states, dtype=np.int64),
        stacks=np.asarray(stacks, dtype=np.int64).reshape(tau, spec.m),
        lm_masks=np.asarray(masks, dtype=bool).reshape(tau, len(spec.alphabet)),
        accepted=bool(accepted),
    )


def accepts(spec: PdaSpec, sequence, oracle: ReachabilityOracle | None = None) -> bool:
    """Pure membership: does the machine accept the sequence?"""
    seq = list(sequence)
    config = initial_config(spec)
    for t, x in enumerate(seq):
        la = seq[t + 1] if t + 1 < len(seq) else END
        try:
            config = step(spec, config, x, lookahead=la)
        except (NoRule, StackOverflow, StackUnderflow):
            return False
    return is_accepting(spec, config)


def enumerate_accepted(spec: PdaSpec, max_len: int, budget: int = 2_000_000) -> list[list[int]]:
    """All accepted sequences of length <= max_len, shortest first and
    lexicographic within a length.

    Depth-first over the configuration tree, so the budget bounds the number
    of explored prefixes rather than |Sigma|^max_len.
    """
    out: list[list[int]] = []
    explored = 0

    def walk(config: PdaConfiguration, prefix: list[int]):
        nonlocal explored
        explored += 1
        if explored > budget:
            raise RuntimeError(f"enumeration budget {budget} exceeded")
        if prefix and is_accepting(spec, config):
            out.append(list(prefix))  # the empty sequence is never emitted
        if len(prefix) == max_len:
            return
        for x in range(len(spec.alphabet)):
            # Lookahead-free specs only; SCAN enumeration lives in its module.
            try:
                nxt = step(spec, config, x)
            except (NoRule, StackOverflow, StackUnderflow):
                continue
            prefix.append(x)
            walk(nxt, prefix)
            prefix.pop()

    if spec.uses_lookahead:
        raise ValueError("enumerate_accepted requires a lookahead-free spec")
    walk(initial_config(spec), [])
    out.sort(key=lambda s: (len(s), s))
    return out


def check_deterministic(spec: PdaSpec, max_len: int) -> None:
    """Exhaustively verify that no reachable configuration within max_len has
    two matching rules for any input (or an epsilon rule competing with a
    consuming rule). Raises AssertionError on the first violation."""
    start = initial_config(spec)
    seen = {start.key()}
    frontier = deque([(start, 0)])
    las: list[int | None]
    if spec.uses_lookahead:
        las = list(range(len(spec.alphabet))) + [END]
    else:
        las = [None]
    while frontier:
        cfg, depth = frontier.popleft()
        eps_rule = _find_rule(spec, cfg.state, None, cfg.stack, la=None)
        for x in range(len(spec.alphabet)):
            matched_any = False
            for la in las:
                rule = _find_rule(spec, cfg.state, x, cfg.stack, la)  # raises if ambiguous
                if rule is None:
                    continue
                matched_any = True
                if depth < max_len:
                    try:
                        nxt = step(spec, cfg, x, lookahead=la)
                    except (StackOverflow, StackUnderflow):
                        continue
                    if nxt.key() not in seen:
                        seen.add(nxt.key())
                        frontier.append((nxt, depth + 1))
            if matched_any and eps_rule is not None:
                raise AssertionError(
                    f"{spec.name}: state={cfg.state} stack={cfg.stack} enables both an "
                    f"epsilon rule and a consuming rule for input {spec.alphabet[x]!r}"
                )


# ---------------------------------------------------------------------------
# canonical builders
# ---------------------------------------------------------------------------

_DYCK_PAIRS = [("(", ")"), ("[", "]"), ("{", "}"), ("<", ">")]


def _canonical_tables(alphabet: list[str]) -> tuple[tuple[str, ...], int, int]:
    """Stack table = Sigma + [I, eps] (canonical convention)."""
    stack_symbols = tuple(alphabet) + ("I", "eps")
    return stack_symbols, len(alphabet), len(alphabet) + 1


def build_dyck(k: int, m: int) -> PdaSpec:
    """Balanced brackets of k kinds, nesting depth bounded by m. One state."""
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1")
    if k <= len(_DYCK_PAIRS):
        pairs = _DYCK_PAIRS[:k]
    else:
        pairs = list(_DYCK_PAIRS) + [(f"o{i}", f"c{i}") for i in range(len(_DYCK_PAIRS), k)]
    alphabet = [t for pair in pairs for t in pair]
    stack_symbols, bottom, eps = _canonical_tables(alphabet)
    rules = []
    for i in range(k):
        op, cl = 2 * i, 2 * i + 1
        rules.append(TransitionRule(0, op, None, 0, op))  # push the open bracket
        rules.append(TransitionRule(0, cl, op, 0, None))  # pop on the matching close
    return PdaSpec(
        name=f"dyck-{k}-{m}",
        n_states=1,
        alphabet=tuple(alphabet),
        stack_symbols=stack_symbols,
        rules=tuple(rules),
        q0=0,
        bottom_id=bottom,
        eps_id=eps,
        accepting=frozenset({0}),
        m=m,
    )


def build_anbn(m: int) -> PdaSpec:
    """a^n b^n with n <= m. Two states: reading-a phase and reading-b phase."""
    if m < 1:
        raise ValueError("m must be >= 1")
    alphabet = ["a", "b"]
    stack_symbols, bottom, eps = _canonical_tables(alphabet)
    A, B = 0, 1
    QA, QB = 0, 1
    rules = (
        TransitionRule(QA, A, None, QA, A),  # count an 'a'
        TransitionRule(QA, B, A, QB, None),  # first 'b' starts the pop phase
        TransitionRule(QB, B, A, QB, None),
    )
    return PdaSpec(
        name=f"anbn-{m}",
        n_states=2,
        alphabet=tuple(alphabet),
        stack_symbols=stack_symbols,
        rules=rules,
        q0=QA,
        bottom_id=bottom,
        eps_id=eps,
        accepting=frozenset({QB}),
        m=m,
    )


def build_parity() -> PdaSpec:
    """Strings over {0,1} with an even number of 0s; no stack operation."""
    alphabet = ["0", "1"]
    stack_symbols, bottom, eps = _canonical_tables(alphabet)
    EVEN, ODD = 0, 1
    Z, O = 0, 1
    rules = (
        TransitionRule(EVEN, Z, None, ODD, None),
        TransitionRule(ODD, Z, None, EVEN, None),
        TransitionRule(EVEN, O, None, EVEN, None),
        TransitionRule(ODD, O, None, ODD, None),
    )
    return PdaSpec(
        name="parity",
        n_states=2,
        alphabet=tuple(alphabet),
        stack_symbols=stack_symbols,
        rules=rules,
        q0=EVEN,
        bottom_id=bottom,
        eps_id=eps,
        accepting=frozenset({EVEN}),
        m=1,
    )


def build_wcwr(k: int, m: int, n: int = 1) -> PdaSpec:
    """(w c w^r)^n over a k-letter alphabet, |w| <= m per block.

    States 2b (push phase of block b) and 2b+1 (pop phase); the first symbol
    of block b+1 is consumed by a rule guarded on the bare stack (top = I),
    so no epsilon-input transitions are needed.
    """
    if k < 1 or m < 1 or n < 1:
        raise ValueError("k, m, n must be >= 1")
    letters = [chr(ord("a") + i) for i in range(k)] if k <= 25 else [f"w{i}" for i in range(k)]
    alphabet = letters + ["c"]
    stack_symbols, bottom, eps = _canonical_tables(alphabet)
    C = k  # id of the midpoint marker
    rules = []
    for b in range(n):
        push_q, pop_q = 2 * b, 2 * b + 1
        for x in range(k):
            rules.append(TransitionRule(push_q, x, None, push_q, x))
            rules.append(TransitionRule(pop_q, x, x, pop_q, None))
        rules.append(TransitionRule(push_q, C, None, pop_q, None))  # midpoint (w may be empty)
        if b + 1 < n:
            nxt = 2 * (b + 1)
            for x in range(k):
                rules.append(TransitionRule(pop_q, x, bottom, nxt, x, pops=0))
            rules.append(TransitionRule(pop_q, C, bottom, nxt + 1, None, pops=0))
    return PdaSpec(
        name=f"wcwr-{k}-{m}-{n}",
        n_states=2 * n,
        alphabet=tuple(alphabet),
        stack_symbols=stack_symbols,
        rules=tuple(rules),
        q0=0,
        bottom_id=bottom,
        eps_id=eps,
        accepting=frozenset({2 * n - 1}),
        m=m,
    )


BUILDERS = {
    "dyck": build_dyck,
    "anbn": build_anbn,
    "parity": build_parity,
    "wcwr": build_wcwr,
}
