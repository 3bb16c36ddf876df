"""Dense tensors with reverse-mode automatic differentiation.

A thin tape over numpy arrays: every op returns a new :class:`Tensor` and,
when gradients are enabled and any input requires them, records a backward
closure.  :func:`backward` walks the tape once in reverse-topological order
and accumulates ``d loss / d tensor`` into every reachable ``requires_grad``
tensor (the caller zeroes grads between steps).  Forward data is never
mutated by the backward pass.

32-bit floats are the training default; gradient checking runs the same ops
in 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_grad_enabled = True


class no_grad:
    """Context manager that disables tape recording (inference decoding)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


@dataclass
class Parameter:
    """Named learnable tensor; names are unique within a model."""

    name: str
    tensor: Tensor
    init_spec: str = "glorot_uniform"


def _result(data, parents, backward_fn):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_same_dtype(*tensors):
    dtypes = {t.data.dtype for t in tensors}
    if len(dtypes) > 1:
        raise TypeError(f"mixed tensor dtypes: {sorted(d.name for d in dtypes)}")


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss.

    Each tape node is visited exactly once; gradients are accumulated into
    ``.grad`` slots, so a second call without zeroing doubles them.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar tensor, got shape {loss.data.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not require grad; nothing to backpropagate")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    flowing: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = flowing.pop(id(node), None)
        if g is None:
            continue
        if node.grad is None:
            node.grad = np.array(g, dtype=node.data.dtype, copy=True)
        else:
            node.grad += g
        if node._backward is None:
            continue
        for parent, pg in node._backward(g):
            key = id(parent)
            if key in flowing:
                flowing[key] = flowing[key] + pg
            else:
                flowing[key] = pg


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading batch dimensions broadcast."""
    _check_same_dtype(a, b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ValueError(f"matmul needs >= 2-d tensors, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def bwd(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)))
        if b.requires_grad:
            pairs.append((b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)))
        return pairs

    return _result(out_data, (a, b), bwd)


def transpose(a: Tensor, axis1: int = -2, axis2: int = -1) -> Tensor:
    out_data = np.swapaxes(a.data, axis1, axis2)

    def bwd(g):
        return [(a, np.swapaxes(g, axis1, axis2))]

    return _result(out_data, (a,), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    out_data = a.data + b.data

    def bwd(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a, _unbroadcast(g, a.data.shape)))
        if b.requires_grad:
            pairs.append((b, _unbroadcast(g, b.data.shape)))
        return pairs

    return _result(out_data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    out_data = a.data - b.data

    def bwd(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a, _unbroadcast(g, a.data.shape)))
        if b.requires_grad:
            pairs.append((b, _unbroadcast(-g, b.data.shape)))
        return pairs

    return _result(out_data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product (shapes must broadcast)."""
    _check_same_dtype(a, b)
    out_data = a.data * b.data

    def bwd(g):
        pairs = []
        if a.requires_grad:
            pairs.append((a, _unbroadcast(g * b.data, a.data.shape)))
        if b.requires_grad:
            pairs.append((b, _unbroadcast(g * a.data, b.data.shape)))
        return pairs

    return _result(out_data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out_data = a.data * np.array(c, dtype=a.data.dtype)

    def bwd(g):
        return [(a, g * np.array(c, dtype=a.data.dtype))]

    return _result(out_data, (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    d = a.data
    out_data = np.empty_like(d)
    pos = d >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    out_data[~pos] = ex / (1.0 + ex)

    def bwd(g):
        return [(a, g * out_data * (1.0 - out_data))]

    return _result(out_data, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bwd(g):
        return [(a, g * (1.0 - out_data * out_data))]

    return _result(out_data, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def bwd(g):
        return [(a, g * (a.data > 0))]

    return _result(out_data, (a,), bwd)


def softmax_rows(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Row-stochastic softmax over the last axis.

    ``mask`` marks valid positions (True = keep); masked scores are pinned to
    -1e9 before the stabilized softmax and the corresponding outputs are
    exactly zero.  A fully masked row is an error.
    """
    d = a.data
    if d.shape[-1] < 1:
        raise ValueError("softmax needs at least one column")
    if mask is not None:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), d.shape)
        if (~m).all(axis=-1).any():
            raise ValueError("softmax row is fully masked")
        scores = np.where(m, d, np.array(-1e9, dtype=d.dtype))
    else:
        m = None
        scores = d
    shifted = scores - scores.max(axis=-1, keepdims=True)
    ex = np.exp(shifted)
    out_data = ex / ex.sum(axis=-1, keepdims=True)
    if m is not None:
        out_data = out_data * m

    def bwd(g):
        inner = (g * out_data).sum(axis=-1, keepdims=True)
        return [(a, out_data * (g - inner))]

    return _result(out_data, (a,), bwd)


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    _check_same_dtype(a, gain, bias)
    d = a.data
    n = d.shape[-1]
    mu = d.mean(axis=-1, keepdims=True)
    xc = d - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.array(eps, dtype=d.dtype))
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def bwd(g):
        pairs = []
        if a.requires_grad:
            dxhat = g * gain.data
            term = dxhat - dxhat.mean(axis=-1, keepdims=True) - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
            pairs.append((a, inv * term))
        reduce_axes = tuple(range(g.ndim - 1))
        if gain.requires_grad:
            pairs.append((gain, _unbroadcast((g * xhat).sum(axis=reduce_axes), gain.data.shape)))
        if bias.requires_grad:
            pairs.append((bias, _unbroadcast(g.sum(axis=reduce_axes), bias.data.shape)))
        return pairs

    return _result(out_data, (a, gain, bias), bwd)


def concat(tensors: list[Tensor], axis: int = -1) -> Tensor:
    _check_same_dtype(*tensors)
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        pairs = []
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis if axis >= 0 else g.ndim + axis] = slice(start, stop)
                pairs.append((t, g[tuple(idx)]))
        return pairs

    return _result(out_data, tuple(tensors), bwd)


def concat_last_dim(a: Tensor, b: Tensor) -> Tensor:
    return concat([a, b], axis=-1)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    nd = a.data.ndim
    ax = axis if axis >= 0 else nd + axis
    idx = [slice(None)] * nd
    idx[ax] = slice(start, stop)
    out_data = a.data[tuple(idx)]

    def bwd(g):
        full = np.zeros_like(a.data)
        full[tuple(idx)] = g
        return [(a, full)]

    return _result(out_data, (a,), bwd)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    """Gather rows of a (V, d) table; output shape is ids.shape + (d,)."""
    ids = np.asarray(ids, dtype=np.int64)
    v = table.data.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= v):
        raise ValueError(f"embedding id out of range [0, {v})")
    out_data = table.data[ids]

    def bwd(g):
        dt = np.zeros_like(table.data)
        np.add.at(dt, ids.ravel(), g.reshape(-1, table.data.shape[1]))
        return [(table, dt)]

    return _result(out_data, (table,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    out_data = a.data.reshape(shape)

    def bwd(g):
        return [(a, g.reshape(a.data.shape))]

    return _result(out_data, (a,), bwd)


def broadcast_to(a: Tensor, shape) -> Tensor:
    out_data = np.broadcast_to(a.data, shape)

    def bwd(g):
        return [(a, _unbroadcast(g, a.data.shape))]

    return _result(out_data, (a,), bwd)


def sum_all(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def bwd(g):
        return [(a, np.broadcast_to(g, a.data.shape))]

    return _result(out_data, (a,), bwd)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out_data = np.asarray(a.data.mean(), dtype=a.data.dtype)

    def bwd(g):
        return [(a, np.broadcast_to(g / n, a.data.shape))]

    return _result(out_data, (a,), bwd)


def nll_loss(logits: Tensor, targets, pad_mask=None) -> Tensor:
    """Mean negative log likelihood with a fused stable log-softmax.

    ``logits`` is (T, V) or (B, T, V); ``targets`` holds token ids of shape
    logits.shape[:-1].  ``pad_mask`` (same shape as targets, truthy = counted)
    excludes PAD steps.  The loss is the per-sequence mean over counted steps,
    then the mean over the batch; a sequence with every step masked is an
    error.
    """
    d = logits.data
    targets = np.asarray(targets, dtype=np.int64)
    if targets.shape != d.shape[:-1]:
        raise ValueError(f"targets shape {targets.shape} does not match logits {d.shape}")
    v = d.shape[-1]
    if targets.size and (targets.min() < 0 or targets.max() >= v):
        raise ValueError(f"target id out of range [0, {v})")
    if pad_mask is None:
        m = np.ones(targets.shape, dtype=d.dtype)
    else:
        m = np.asarray(pad_mask).astype(d.dtype)
    steps = m.sum(axis=-1)
    if np.any(steps == 0):
        raise ValueError("nll_loss: a sequence has all positions masked")

    mx = d.max(axis=-1, keepdims=True)
    shifted = d - mx
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True)) + mx
    log_probs = d - lse
    picked = np.take_along_axis(log_probs, targets[..., None], axis=-1)[..., 0]
    per_seq = -(picked * m).sum(axis=-1) / steps
    out_data = np.asarray(per_seq.mean(), dtype=d.dtype)

    n_seq = int(np.prod(per_seq.shape)) if per_seq.shape else 1

    def bwd(g):
        softmax = np.exp(log_probs)
        onehot = np.zeros_like(d)
        np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
        weight = (m / steps[..., None])[..., None] / n_seq
        return [(logits, g * weight * (softmax - onehot))]

    return _result(out_data, (logits,), bwd)


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None = None, mask: np.ndarray | None = None) -> Tensor:
    """Inverted dropout; identity when rate is 0.

    Pass ``mask`` (precomputed keep mask) to replay a fixed pattern, e.g. for
    gradient checking.
    """
    if rate <= 0.0:
        return a
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mask is None:
        if rng is None:
            raise ValueError("dropout needs an rng or an explicit mask")
        mask = rng.random(a.data.shape) >= rate
    keep = mask.astype(a.data.dtype) / np.array(1.0 - rate, dtype=a.data.dtype)
    out_data = a.data * keep

    def bwd(g):
        return [(a, g * keep)]

    return _result(out_data, (a,), bwd)


# ---------------------------------------------------------------------------
# parameter initialization


def glorot_limit(shape) -> float:
    fan_in, fan_out = shape[0], shape[-1]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


class ParamStore:
    """Ordered registry of uniquely named parameters for one model."""

    def __init__(self, rng: np.random.Generator, dtype=np.float32):
        self.rng = rng
        self.dtype = np.dtype(dtype)
        self._params: dict[str, Parameter] = {}

    def _register(self, name: str, data: np.ndarray, init_spec: str) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(data.astype(self.dtype), requires_grad=True)
        self._params[name] = Parameter(name=name, tensor=t, init_spec=init_spec)
        return t

    def glorot(self, name: str, shape) -> Tensor:
        lim = glorot_limit(shape)
        return self._register(name, self.rng.uniform(-lim, lim, size=shape), "glorot_uniform")

    def zeros(self, name: str, shape) -> Tensor:
        return self._register(name, np.zeros(shape), "zeros")

    def ones(self, name: str, shape) -> Tensor:
        return self._register(name, np.ones(shape), "ones")

    def lstm_bias(self, name: str, hidden: int) -> Tensor:
        # gate order i, f, g, o; forget gate biased +1 for stable tiny-data runs
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0
        return self._register(name, b, "zeros+forget1")

    def parameters(self) -> list[Parameter]:
        return list(self._params.values())

    def tensors(self) -> list[Tensor]:
        return [p.tensor for p in self._params.values()]

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name].tensor

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self) -> list[str]:
        return list(self._params.keys())
