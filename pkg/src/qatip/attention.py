"""Scaled dot-product and multi-head attention, plus sequence-mask helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import ParamStore, Tensor


def length_mask(lengths, width: int) -> np.ndarray:
    """(B, width) bool mask, True where the position is a real token."""
    lengths = np.asarray(lengths, dtype=np.int64)
    return np.arange(width)[None, :] < lengths[:, None]


def causal_mask(n: int) -> np.ndarray:
    """(n, n) bool mask; row t may attend to columns <= t."""
    return np.tril(np.ones((n, n), dtype=bool))


def sinusoidal_positions(max_len: int, dim: int, dtype=np.float32) -> np.ndarray:
    """Fixed position encodings: interleaved sin/cos over geometric wavelengths."""
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    idx = np.arange(0, dim, 2, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, idx / dim)
    pe = np.zeros((max_len, dim), dtype=np.float64)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : dim // 2])
    return pe.astype(dtype)


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None):
    """softmax(q kT / sqrt(d_k)) v with optional validity mask on key positions.

    q is (..., A, d_k), k is (..., N, d_k), v is (..., N, d_v); mask broadcasts
    to (..., A, N) with True marking attendable entries.  Returns (context,
    weights); masked weights are exactly zero.
    """
    d_k = q.shape[-1]
    scores = T.scale(T.matmul(q, T.transpose(k)), 1.0 / np.sqrt(d_k))
    weights = T.softmax_rows(scores, mask=mask)
    context = T.matmul(weights, v)
    return context, weights


@dataclass
class MultiHeadConfig:
    model_dim: int = 512
    num_heads: int = 8

    def __post_init__(self):
        if self.model_dim % self.num_heads != 0:
            raise ValueError(f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.num_heads


@dataclass
class MultiHeadParams:
    """Packed projections; columns [i*head_dim:(i+1)*head_dim] belong to head i."""

    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    num_heads: int


def init_multi_head(store: ParamStore, prefix: str, cfg: MultiHeadConfig) -> MultiHeadParams:
    d = cfg.model_dim
    return MultiHeadParams(
        wq=store.glorot(f"{prefix}.wq", (d, d)),
        wk=store.glorot(f"{prefix}.wk", (d, d)),
        wv=store.glorot(f"{prefix}.wv", (d, d)),
        wo=store.glorot(f"{prefix}.wo", (d, d)),
        num_heads=cfg.num_heads,
    )


def _split_heads(x: Tensor, num_heads: int) -> Tensor:
    # (B, N, d) -> (B, h, N, d/h)
    b, n, d = x.shape
    return T.transpose(T.reshape(x, (b, n, num_heads, d // num_heads)), 1, 2)


def _merge_heads(x: Tensor) -> Tensor:
    # (B, h, N, d/h) -> (B, N, d)
    b, h, n, hd = x.shape
    return T.reshape(T.transpose(x, 1, 2), (b, n, h * hd))


def multi_head(params: MultiHeadParams, query: Tensor, keys: Tensor, values: Tensor,
               mask: np.ndarray | None = None):
    """Multi-head attention over batched (B, len, d) inputs.

    mask broadcasts to (B, A, N) over query/key positions and applies
    identically to every head.  Returns (output (B, A, d), weights
    (B, h, A, N)).
    """
    h = params.num_heads
    q = _split_heads(T.matmul(query, params.wq), h)
    k = _split_heads(T.matmul(keys, params.wk), h)
    v = _split_heads(T.matmul(values, params.wv), h)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        while mask.ndim < 3:
            mask = mask[None]
        mask = mask[:, None, :, :]  # shared across heads
    context, weights = scaled_dot_attention(q, k, v, mask=mask)
    out = T.matmul(_merge_heads(context), params.wo)
    return out, weights
