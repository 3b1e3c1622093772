"""Toy-scale sequence models with oracle read-out heads.

Two families share one interface: a unidirectional LSTM and a small
Transformer (encoder or causal decoder). The hidden width is
d = alpha * (|Q| + m * |S|), matching the layout of one machine
configuration: the first alpha*|Q| columns form the state segment and the
next m blocks of alpha*|S| columns form one segment per stack position.

Read-out heads are 2-layer MLPs (sigmoid hidden layer of twice the input
width, linear output). In forced mode the state head reads only the state
segment and a single shared stack head reads each stack segment in turn;
in latent mode every head reads the full hidden vector and the m stack
heads are independent. The next-symbol head and the accept/reject
classifier always read the full hidden vector in both modes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, asdict, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

FAMILIES = ("lstm", "transformer_encoder", "transformer_decoder")
MODES = ("forced", "latent")


@dataclass(frozen=True)
class ModelConfig:
    family: str
    mode: str
    n_states: int
    n_alphabet: int
    n_stack_classes: int  # stack symbols incl. the bottom marker and eps
    m: int
    alpha: int = 1
    layers: int = 1
    heads: int = 8
    ffn_filter: int = 32
    dropout: float = 0.1
    residual: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.alpha < 1 or self.layers < 1:
            raise ValueError("alpha and layers must be >= 1")

    # -- derived dimensions -------------------------------------------------

    @property
    def embed_dim(self) -> int:
        return 2 * self.n_alphabet

    @property
    def layout_dim(self) -> int:
        """Width of the segment layout: alpha * (|Q| + m|S|)."""
        return self.alpha * (self.n_states + self.m * self.n_stack_classes)

    @property
    def width(self) -> int:
        """Actual hidden width; transformers pad up so heads divide it."""
        d = self.layout_dim
        if self.family == "lstm":
            return d
        return -(-d // self.heads) * self.heads

    @property
    def is_transformer(self) -> bool:
        return self.family != "lstm"

    @property
    def causal(self) -> bool:
        return self.family != "transformer_encoder"

    def segment_sizes(self) -> list[int]:
        """Column split of the hidden vector: state segment, m stack
        segments, then any padding columns outside the layout."""
        sizes = [self.alpha * self.n_states] + [self.alpha * self.n_stack_classes] * self.m
        pad = self.width - self.layout_dim
        if pad:
            sizes.append(pad)
        return sizes

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(**obj)

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def for_machine(cls, spec, family: str, mode: str, **kw) -> "ModelConfig":
        return cls(family=family, mode=mode, n_states=spec.n_states,
                   n_alphabet=len(spec.alphabet),
                   n_stack_classes=len(spec.stack_symbols), m=spec.m, **kw)


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _mlp_params(params: dict, prefix: str, rng, d_in: int, d_out: int):
    hidden = 2 * d_in
    params[f"{prefix}.w1"] = _uniform(rng, d_in, (d_in, hidden))
    params[f"{prefix}.b1"] = _uniform(rng, d_in, hidden)
    params[f"{prefix}.w2"] = _uniform(rng, hidden, (hidden, d_out))
    params[f"{prefix}.b2"] = _uniform(rng, hidden, d_out)


def init_params(config: ModelConfig, rng: np.random.Generator) -> dict[str, Tensor]:
    """All weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)); the
    normalization affines start as the identity."""
    p: dict[str, Tensor] = {}
    e, w = config.embed_dim, config.width
    p["embed"] = _uniform(rng, config.n_alphabet, (config.n_alphabet, e))

    if config.family == "lstm":
        for l in range(config.layers):
            d_in = e if l == 0 else w
            p[f"lstm{l}.w"] = _uniform(rng, d_in + w, (d_in + w, 4 * w))
            p[f"lstm{l}.b"] = _uniform(rng, d_in + w, 4 * w)
    else:
        p["proj.w"] = _uniform(rng, e, (e, w))
        p["proj.b"] = _uniform(rng, e, w)
        for l in range(config.layers):
            for name in ("wq", "wk", "wv", "wo"):
                p[f"t{l}.{name}"] = _uniform(rng, w, (w, w))
            for name in ("bq", "bk", "bv", "bo"):
                p[f"t{l}.{name}"] = _uniform(rng, w, w)
            p[f"t{l}.ffn.w1"] = _uniform(rng, w, (w, config.ffn_filter))
            p[f"t{l}.ffn.b1"] = _uniform(rng, w, config.ffn_filter)
            p[f"t{l}.ffn.w2"] = _uniform(rng, config.ffn_filter,
                                         (config.ffn_filter, w))
            p[f"t{l}.ffn.b2"] = _uniform(rng, config.ffn_filter, w)
            for ln in ("ln1", "ln2"):
                p[f"t{l}.{ln}.g"] = Tensor(np.ones(w), requires_grad=True)
                p[f"t{l}.{ln}.b"] = Tensor(np.zeros(w), requires_grad=True)

    _mlp_params(p, "head.symbol", rng, w, config.n_alphabet)
    _mlp_params(p, "head.cls", rng, w, 1)
    if config.mode == "forced":
        sq = config.alpha * config.n_states
        ss = config.alpha * config.n_stack_classes
        _mlp_params(p, "head.state", rng, sq, config.n_states)
        _mlp_params(p, "head.stack", rng, ss, config.n_stack_classes)
    else:
        _mlp_params(p, "head.state", rng, w, config.n_states)
        for j in range(config.m):
            _mlp_params(p, f"head.stack{j}", rng, w, config.n_stack_classes)
    return p


def _mlp(p: dict, prefix: str, x: Tensor) -> Tensor:
    h = ad.sigmoid(ad.add(ad.matmul(x, p[f"{prefix}.w1"]), p[f"{prefix}.b1"]))
    return ad.add(ad.matmul(h, p[f"{prefix}.w2"]), p[f"{prefix}.b2"])


# ---------------------------------------------------------------------------
# LSTM forward
# ---------------------------------------------------------------------------


def lstm_forward(p: dict, config: ModelConfig, batch: np.ndarray) -> Tensor:
    """Run the (possibly stacked) LSTM over a [B, tau] id matrix; returns
    hidden states [B, tau, width]. Gate order inside the fused weight is
    input, forget, candidate, output; h_0 = c_0 = 0."""
    bsz, tau = batch.shape
    w = config.width
    zeros = Tensor(np.zeros((bsz, w)))
    xs = [ad.embedding_lookup(p["embed"], batch[:, t]) for t in range(tau)]
    for l in range(config.layers):
        h, c = zeros, zeros
        hs = []
        for t in range(tau):
            z = ad.add(ad.matmul(ad.concat([xs[t], h]), p[f"lstm{l}.w"]),
                       p[f"lstm{l}.b"])
            gi, gf, gg, go = ad.split(z, [w, w, w, w])
            i, f, g, o = (ad.sigmoid(gi), ad.sigmoid(gf),
                          ad.tanh(gg), ad.sigmoid(go))
            c = ad.add(ad.mul(f, c), ad.mul(i, g))
            h = ad.mul(o, ad.tanh(c))
            hs.append(h)
        xs = hs
    return ad.concat([ad.reshape(h, (bsz, 1, w)) for h in xs], axis=1)


# ---------------------------------------------------------------------------
# Transformer forward
# ---------------------------------------------------------------------------

_PE_CACHE: dict[tuple[int, int], np.ndarray] = {}


def sinusoidal_positions(tau: int, width: int) -> np.ndarray:
    """p[t, 2j] = sin(t / 10000^(2j/width)), p[t, 2j+1] = cos(same)."""
    if width % 2:
        raise ValueError(f"positional encoding needs an even width, got {width}")
    key = (tau, width)
    if key not in _PE_CACHE:
        pos = np.arange(tau, dtype=np.float64)[:, None]
        j2 = np.arange(0, width, 2, dtype=np.float64)
        angle = pos / np.power(10000.0, j2 / width)
        pe = np.zeros((tau, width))
        pe[:, 0::2] = np.sin(angle)
        pe[:, 1::2] = np.cos(angle)
        _PE_CACHE[key] = pe
    return _PE_CACHE[key]


def transformer_forward(p: dict, config: ModelConfig, batch: np.ndarray,
                        train: bool = False,
                        rng: np.random.Generator | None = None,
                        causal: bool | None = None) -> Tensor:
    """Post-norm Transformer over a [B, tau] id matrix; returns [B, tau,
    width]. causal=None takes the family default (decoder masks, encoder
    does not)."""
    bsz, tau = batch.shape
    w, heads = config.width, config.heads
    r = w // heads
    if causal is None:
        causal = config.causal
    if train and rng is None:
        raise ValueError("training forward pass needs a dropout rng")

    x = ad.embedding_lookup(p["embed"], batch)  # [B, tau, e]
    y = ad.add(ad.add(ad.matmul(x, p["proj.w"]), p["proj.b"]),
               Tensor(sinusoidal_positions(tau, w)))
    y = ad.dropout(y, config.dropout, rng, train)

    mask = None
    if causal:
        mask = np.triu(np.ones((tau, tau), dtype=bool), k=1)

    for l in range(config.layers):
        q = ad.add(ad.matmul(y, p[f"t{l}.wq"]), p[f"t{l}.bq"])
        k = ad.add(ad.matmul(y, p[f"t{l}.wk"]), p[f"t{l}.bk"])
        v = ad.add(ad.matmul(y, p[f"t{l}.wv"]), p[f"t{l}.bv"])
        # [B, tau, w] -> [B, heads, tau, r]
        def to_heads(z):
            return ad.transpose(ad.reshape(z, (bsz, tau, heads, r)),
                                (0, 2, 1, 3))
        qh, kh, vh = to_heads(q), to_heads(k), to_heads(v)
        scores = ad.scale(ad.matmul(qh, ad.transpose(kh, (0, 1, 3, 2))),
                          1.0 / np.sqrt(r))
        if mask is not None:
            scores = ad.masked_fill(scores, mask, -np.inf)
        att = ad.matmul(ad.softmax(scores), vh)  # [B, heads, tau, r]
        att = ad.reshape(ad.transpose(att, (0, 2, 1, 3)), (bsz, tau, w))
        att = ad.add(ad.matmul(att, p[f"t{l}.wo"]), p[f"t{l}.bo"])
        att = ad.dropout(att, config.dropout, rng, train)
        if config.residual:
            att = ad.add(att, y)
        y = ad.layer_norm(att, p[f"t{l}.ln1.g"], p[f"t{l}.ln1.b"])

        f = ad.relu(ad.add(ad.matmul(y, p[f"t{l}.ffn.w1"]), p[f"t{l}.ffn.b1"]))
        f = ad.add(ad.matmul(f, p[f"t{l}.ffn.w2"]), p[f"t{l}.ffn.b2"])
        f = ad.dropout(f, config.dropout, rng, train)
        if config.residual:
            f = ad.add(f, y)
        y = ad.layer_norm(f, p[f"t{l}.ln2.g"], p[f"t{l}.ln2.b"])
    return y


def forward_hidden(p: dict, config: ModelConfig, batch: np.ndarray,
                   train: bool = False,
                   rng: np.random.Generator | None = None,
                   causal: bool | None = None) -> Tensor:
    if config.family == "lstm":
        return lstm_forward(p, config, batch)
    return transformer_forward(p, config, batch, train=train, rng=rng,
                               causal=causal)


# ---------------------------------------------------------------------------
# read-out heads
# ---------------------------------------------------------------------------


def head_logits(p: dict, config: ModelConfig, h: Tensor):
    """Apply symbol, state, and stack heads to flattened hidden rows
    [N, width]. Returns (symbol [N, |Sigma|], state [N, |Q|],
    stacks: list of m tensors [N, |S|])."""
    symbol = _mlp(p, "head.symbol", h)
    if config.mode == "forced":
        parts = ad.split(h, config.segment_sizes())
        state = _mlp(p, "head.state", parts[0])
        stacks = [_mlp(p, "head.stack", parts[1 + j]) for j in range(config.m)]
    else:
        state = _mlp(p, "head.state", h)
        stacks = [_mlp(p, f"head.stack{j}", h) for j in range(config.m)]
    return symbol, state, stacks


def take_last_step(h: Tensor, tau: int) -> Tensor:
    """[B, tau, w] -> [B, w] at the final step."""
    bsz, _, w = h.data.shape
    if tau == 1:
        return ad.reshape(h, (bsz, w))
    _, last = ad.split(h, [tau - 1, 1], axis=1)
    return ad.reshape(last, (bsz, w))


def classify_logit(p: dict, config: ModelConfig, h: Tensor) -> Tensor:
    """Accept/reject logit from the final-step hidden state; h is
    [B, tau, width]. Returns [B]."""
    last = take_last_step(h, h.data.shape[1])
    return ad.reshape(_mlp(p, "head.cls", last), (h.data.shape[0],))


def predict(p: dict, config: ModelConfig, sequence) -> dict:
    """Evaluation-mode per-step outputs for one sequence (numpy arrays)."""
    batch = np.asarray(sequence, dtype=np.int64)[None, :]
    tau = batch.shape[1]
    h = forward_hidden(p, config, batch)
    flat = ad.reshape(h, (tau, config.width))
    symbol, state, stacks = head_logits(p, config, flat)
    logit = classify_logit(p, config, h)
    return {
        "hidden": flat.data,
        "symbol_logits": symbol.data,
        "state_logits": state.data,
        "stack_logits": np.stack([s.data for s in stacks], axis=1),
        "accept_prob": float(1.0 / (1.0 + np.exp(-logit.data[0]))),
    }


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path, params: dict[str, Tensor], config: ModelConfig):
    """Header line of JSON (format tag, config, shape table), then the
    parameter arrays as raw little-endian float64 in header order."""
    names = sorted(params)
    header = {
        "format": "model-checkpoint/1",
        "config": config.to_json(),
        "config_digest": config.digest(),
        "params": [{"name": n, "shape": list(params[n].data.shape)} for n in names],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for n in names:
            fh.write(params[n].data.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, Tensor], ModelConfig]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != "model-checkpoint/1":
            raise ValueError(f"not a model checkpoint: {path}")
        config = ModelConfig.from_json(header["config"])
        if header["config_digest"] != config.digest():
            raise ValueError("checkpoint config digest mismatch")
        params = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * n)
            if len(raw) != 8 * n:
                raise ValueError(f"truncated checkpoint at {entry['name']}")
            arr = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
            params[entry["name"]] = Tensor(arr, requires_grad=True)
        if fh.read(1):
            raise ValueError("trailing bytes after checkpoint payload")
    return params, config
