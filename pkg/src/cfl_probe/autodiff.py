"""Minimal reverse-mode automatic differentiation on dense float64 arrays.

A Tape is opened as a context manager around the forward computation; ops
record themselves when a tape is active and an argument requires gradients.
backward() walks the tape once in reverse. Without an active tape ops run
plain numpy forward math, which is the evaluation path.

Design constraints kept deliberately tight: double precision everywhere,
no broadcasting beyond the bias patterns actually used, deterministic
reduction order, and shape errors that name both offending shapes.
"""

from __future__ import annotations

import numpy as np

# ---------------------------------------------------------------------------
# tensor and tape
# ---------------------------------------------------------------------------


class Tensor:
    """A dense float64 array plus an optional gradient accumulator."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


_ACTIVE: list["Tape"] = []


class Tape:
    """Ordered record of operations; consumed exactly once by backward()."""

    def __init__(self):
        self.nodes: list[tuple[Tensor, tuple[Tensor, ...], object]] = []
        self._spent = False

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        assert _ACTIVE and _ACTIVE[-1] is self
        _ACTIVE.pop()
        return False


def _out(data, parents: tuple[Tensor, ...], backward) -> Tensor:
    """Make a result tensor; record the node when recording applies."""
    needs = any(p.requires_grad for p in parents)
    t = Tensor(data)
    t.requires_grad = needs  # grad array left lazy for intermediates
    if needs and _ACTIVE:
        _ACTIVE[-1].nodes.append((t, parents, backward))
    return t


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate grads of everything loss depends on through the tape."""
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    if tape._spent:
        raise RuntimeError("tape already consumed by a backward pass")
    tape._spent = True
    loss.grad = np.ones_like(loss.data)
    for out, parents, fn in reversed(tape.nodes):
        if out.grad is None:
            continue
        for p, g in zip(parents, fn(out.grad)):
            if g is None:
                continue
            if p.grad is None:
                p.grad = np.zeros_like(p.data)
            p.grad += g


def _check_same_shape(op: str, a: Tensor, b: Tensor):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


# ---------------------------------------------------------------------------
# arithmetic ops
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[-1] != b.data.shape[-2 if b.data.ndim > 1 else 0]:
        raise ValueError(
            f"matmul: inner dims differ {a.data.shape} vs {b.data.shape}")
    y = a.data @ b.data

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        # batched matmul against unbatched operand: fold the batch axes back
        while ga.ndim > a.data.ndim:
            ga = ga.sum(axis=0)
        while gb.ndim > b.data.ndim:
            gb = gb.sum(axis=0)
        return ga, gb

    return _out(y, (a, b), back)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; b may be a bias broadcast over leading axes of a."""
    if a.data.shape != b.data.shape:
        if a.data.shape[a.data.ndim - b.data.ndim:] != b.data.shape:
            raise ValueError(
                f"add: shape mismatch {a.data.shape} vs {b.data.shape}")
    y = a.data + b.data

    def back(g):
        gb = g
        while gb.ndim > b.data.ndim:
            gb = gb.sum(axis=0)
        return g, gb

    return _out(y, (a, b), back)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("sub", a, b)
    return _out(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape("mul", a, b)
    return _out(a.data * b.data, (a, b),
                lambda g: (g * b.data, g * a.data))


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return _out(a.data * s, (a,), lambda g: (g * s,))


def sum_all(a: Tensor) -> Tensor:
    return _out(a.data.sum(), (a,),
                lambda g: (np.full_like(a.data, float(g)),))


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    return _out(a.data.mean(), (a,),
                lambda g: (np.full_like(a.data, float(g) / n),))


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------


def sigmoid(a: Tensor) -> Tensor:
    y = np.empty_like(a.data)
    pos = a.data >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    ex = np.exp(a.data[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _out(y, (a,), lambda g: (g * y * (1.0 - y),))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return _out(y, (a,), lambda g: (g * (1.0 - y * y),))


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)
    return _out(y, (a,), lambda g: (g * (a.data > 0),))


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    return _out(y, (a,), lambda g: (g * y,))


def softmax(a: Tensor) -> Tensor:
    """Softmax over the last axis."""
    z = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)

    def back(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return ((g - dot) * y,)

    return _out(y, (a,), back)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------


def concat(parts: list[Tensor], axis: int = -1) -> Tensor:
    y = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]

    def back(g):
        return tuple(np.split(g, np.cumsum(sizes)[:-1], axis=axis))

    return _out(y, tuple(parts), back)


def split(a: Tensor, sizes: list[int], axis: int = -1) -> list[Tensor]:
    if sum(sizes) != a.data.shape[axis]:
        raise ValueError(
            f"split: sizes {sizes} do not cover axis of shape {a.data.shape}")
    bounds = np.cumsum(sizes)[:-1]
    pieces = np.split(a.data, bounds, axis=axis)
    outs = []
    for i, piece in enumerate(pieces):
        def back(g, i=i):
            full = np.zeros_like(a.data)
            sl = [slice(None)] * a.data.ndim
            start = int(bounds[i - 1]) if i > 0 else 0
            sl[axis] = slice(start, start + sizes[i])
            full[tuple(sl)] = g
            return (full,)
        outs.append(_out(piece, (a,), back))
    return outs


def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    return _out(a.data.reshape(shape), (a,),
                lambda g: (g.reshape(a.data.shape),))


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _out(a.data.transpose(axes), (a,),
                lambda g: (g.transpose(inv),))


# ---------------------------------------------------------------------------
# structured ops
# ---------------------------------------------------------------------------


def embedding_lookup(table: Tensor, ids) -> Tensor:
    ids = np.asarray(ids, dtype=np.int64)
    y = table.data[ids]

    def back(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _out(y, (table,), back)


def dropout(a: Tensor, rate: float, rng: np.random.Generator,
            train: bool) -> Tensor:
    """Inverted dropout: scales kept units by 1/(1-rate) at train time so the
    evaluation path is the identity."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate {rate} outside [0, 1)")
    if not train or rate == 0.0:
        return a
    keep = (rng.random(a.data.shape) >= rate) / (1.0 - rate)
    return _out(a.data * keep, (a,), lambda g: (g * keep,))


def masked_fill(a: Tensor, mask, value: float) -> Tensor:
    mask = np.asarray(mask, dtype=bool)
    y = np.where(mask, value, a.data)
    return _out(y, (a,), lambda g: (np.where(mask, 0.0, g),))


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor,
               eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = a.data.mean(axis=-1, keepdims=True)
    xc = a.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gain.data + bias.data
    n = a.data.shape[-1]

    def back(g):
        ggain = (g * xhat).reshape(-1, n).sum(axis=0)
        gbias = g.reshape(-1, n).sum(axis=0)
        gx_hat = g * gain.data
        gx = inv * (gx_hat
                    - gx_hat.mean(axis=-1, keepdims=True)
                    - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        return gx, ggain, gbias

    return _out(y, (a, gain, bias), back)


def cross_entropy(logits: Tensor, targets, weights=None) -> Tensor:
    """Mean cross-entropy of rows of logits against integer class targets.

    weights, when given, reweight rows; the result is the weighted mean.
    Fused log-softmax keeps the backward a single softmax-minus-onehot.
    """
    t = np.asarray(targets, dtype=np.int64)
    if logits.data.ndim != 2 or t.shape != (logits.data.shape[0],):
        raise ValueError(
            f"cross_entropy: logits {logits.data.shape} vs targets {t.shape}")
    n, v = logits.data.shape
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1))
    nll = lse - z[np.arange(n), t]
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=np.float64)
        w = w / w.sum()
    y = float(nll @ w)

    def back(g):
        sm = np.exp(z - lse[:, None])
        sm[np.arange(n), t] -= 1.0
        return (float(g) * sm * w[:, None],)

    return _out(y, (logits,), back)


def binary_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean BCE of sigmoid(logits) against {0,1} targets, computed on the
    logit scale for stability."""
    t = np.asarray(targets, dtype=np.float64)
    z = logits.data
    if z.shape != t.shape:
        raise ValueError(f"bce: logits {z.shape} vs targets {t.shape}")
    n = z.size
    loss = float((np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))).sum() / n)

    def back(g):
        p = np.empty_like(z)
        pos = z >= 0
        p[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        p[~pos] = ez / (1.0 + ez)
        return (float(g) * (p - t) / n,)

    return _out(loss, (logits,), back)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


class Adam:
    """Standard Adam with bias correction; zeroes grads after each step."""

    def __init__(self, params: dict[str, Tensor], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.data -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)
        self.zero_grad()

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------


def fd_check(fn, tensors: dict[str, Tensor], rng: np.random.Generator,
             h: float = 1e-5, samples_per_tensor: int = 6) -> float:
    """Compare analytic gradients of fn() against central differences.

    fn must rebuild the graph from the current tensor values and return the
    scalar loss Tensor. Returns the worst relative error
    |a - n| / max(1, |a|, |n|) over sampled coordinates.
    """
    for t in tensors.values():
        t.requires_grad = True
        t.grad = np.zeros_like(t.data)
    with Tape() as tape:
        loss = fn()
    backward(tape, loss)
    analytic = {k: (np.array(t.grad) if t.grad is not None
                    else np.zeros_like(t.data)) for k, t in tensors.items()}

    worst = 0.0
    for k, t in tensors.items():
        flat = t.data.reshape(-1)
        n_coords = min(samples_per_tensor, flat.size)
        coords = rng.choice(flat.size, size=n_coords, replace=False)
        for c in coords:
            keep = flat[c]
            flat[c] = keep + h
            up = fn().item()
            flat[c] = keep - h
            down = fn().item()
            flat[c] = keep
            numeric = (up - down) / (2.0 * h)
            a = analytic[k].reshape(-1)[c]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst
