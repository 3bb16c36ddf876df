"""Transformer tip generator with query-aware encoder/decoder variants.

The review stream is always contextualized by one self-attention block
(H_r).  A review-aligned query summary (H_q) is produced by attending review
positions over query tokens.  Variants wire the two together:

  vanilla: stack over H_r, decoder reads the stack output; query unused
  qa_enc:  stack over [H_q; H_r] W_enc
  qa_dec:  stack over H_r, decoder cross-attends to [H_q; memory] W_dec
  both:    both fusions active

Decoding positions see a causal self-attention mask; PAD positions are
masked out of every attention softmax, so padding never shifts a logit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .attention import (
    MultiHeadConfig,
    causal_mask,
    init_multi_head,
    length_mask,
    multi_head,
    sinusoidal_positions,
)
from .tensor import ParamStore, Tensor

VARIANTS = ("vanilla", "qa_enc", "qa_dec", "both")


@dataclass
class TransformerConfig:
    vocab_size: int
    model_dim: int = 512
    num_heads: int = 8
    num_layers: int = 6
    ffn_dim: int = 0  # 0 selects the 4*model_dim convention
    dropout: float = 0.1
    variant: str = "both"
    max_len: int = 512
    query_block_depth: int = 1
    share_query_block: bool = True
    tie_output: bool = True

    def __post_init__(self):
        if self.ffn_dim == 0:
            self.ffn_dim = 4 * self.model_dim
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.ffn_dim < self.model_dim:
            raise ValueError("ffn_dim must be >= model_dim")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        MultiHeadConfig(self.model_dim, self.num_heads)  # divisibility check


def fuse(h_a: Tensor, h_b: Tensor, w: Tensor) -> Tensor:
    """[h_a; h_b] W : feature-wise concat then projection back to d."""
    if h_a.shape[:-1] != h_b.shape[:-1]:
        raise ValueError(f"fuse row mismatch: {h_a.shape} vs {h_b.shape}")
    return T.matmul(T.concat_last_dim(h_a, h_b), w)


class _Block:
    """One attention + feed-forward post-norm block."""

    def __init__(self, store: ParamStore, prefix: str, cfg: "TransformerConfig"):
        d, f = cfg.model_dim, cfg.ffn_dim
        self.mh = init_multi_head(store, f"{prefix}.attn", MultiHeadConfig(d, cfg.num_heads))
        self.ln1_g = store.ones(f"{prefix}.ln1.gain", (d,))
        self.ln1_b = store.zeros(f"{prefix}.ln1.bias", (d,))
        self.w1 = store.glorot(f"{prefix}.ffn.w1", (d, f))
        self.b1 = store.zeros(f"{prefix}.ffn.b1", (f,))
        self.w2 = store.glorot(f"{prefix}.ffn.w2", (f, d))
        self.b2 = store.zeros(f"{prefix}.ffn.b2", (d,))
        self.ln2_g = store.ones(f"{prefix}.ln2.gain", (d,))
        self.ln2_b = store.zeros(f"{prefix}.ln2.bias", (d,))


class _DecoderLayer(_Block):
    def __init__(self, store: ParamStore, prefix: str, cfg: "TransformerConfig"):
        super().__init__(store, prefix, cfg)
        d = cfg.model_dim
        self.cross = init_multi_head(store, f"{prefix}.cross", MultiHeadConfig(d, cfg.num_heads))
        self.ln3_g = store.ones(f"{prefix}.ln3.gain", (d,))
        self.ln3_b = store.zeros(f"{prefix}.ln3.bias", (d,))


class QaTransformerModel:
    family = "transformer"

    def __init__(self, config: TransformerConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self._drop_rng = np.random.default_rng(seed + 1)
        store = ParamStore(rng, dtype=dtype)
        cfg = config
        d = cfg.model_dim

        self.emb = store.glorot("emb", (cfg.vocab_size, d))
        self.pe = Tensor(sinusoidal_positions(cfg.max_len, d, dtype=self.dtype))

        self._needs_query = cfg.variant != "vanilla"
        self.query_blocks: list[_Block] = []
        self.query_blocks_dec: list[_Block] = []
        if self._needs_query:
            self.query_blocks = [_Block(store, f"qblock.{i}", cfg) for i in range(cfg.query_block_depth)]
            if not cfg.share_query_block and cfg.variant in ("qa_dec", "both"):
                self.query_blocks_dec = [
                    _Block(store, f"qblock_dec.{i}", cfg) for i in range(cfg.query_block_depth)
                ]

        self.review_block = _Block(store, "review_block", cfg)
        self.enc_layers = [_Block(store, f"enc.{i}", cfg) for i in range(cfg.num_layers)]
        self.dec_layers = [_DecoderLayer(store, f"dec.{i}", cfg) for i in range(cfg.num_layers)]

        self.w_enc = store.glorot("fuse.w_enc", (2 * d, d)) if cfg.variant in ("qa_enc", "both") else None
        self.w_dec = store.glorot("fuse.w_dec", (2 * d, d)) if cfg.variant in ("qa_dec", "both") else None
        self.w_out = None if cfg.tie_output else store.glorot("w_out", (cfg.vocab_size, d))
        self.params = store

    def config_dict(self) -> dict:
        out = asdict(self.config)
        out["family"] = self.family
        return out

    # ----- building blocks

    def _dropout(self, x: Tensor, train: bool) -> Tensor:
        if train and self.config.dropout > 0.0:
            return T.dropout(x, self.config.dropout, rng=self._drop_rng)
        return x

    def _embed(self, ids: np.ndarray, train: bool) -> Tensor:
        n = ids.shape[1]
        if n > self.config.max_len:
            raise ValueError(f"sequence length {n} exceeds position table {self.config.max_len}")
        scaled = T.scale(T.embedding_lookup(self.emb, ids), np.sqrt(self.config.model_dim))
        x = T.add(scaled, T.slice_axis(self.pe, 0, 0, n))
        return self._dropout(x, train)

    def _sublayer(self, x: Tensor, out: Tensor, gain: Tensor, bias: Tensor, train: bool) -> Tensor:
        return T.layer_norm(T.add(x, self._dropout(out, train)), gain, bias)

    def _ffn(self, blk: _Block, x: Tensor) -> Tensor:
        hidden = T.relu(T.add(T.matmul(x, blk.w1), blk.b1))
        return T.add(T.matmul(hidden, blk.w2), blk.b2)

    def _run_block(self, blk: _Block, x: Tensor, kv: Tensor, mask, train: bool) -> Tensor:
        attn, _ = multi_head(blk.mh, x, kv, kv, mask=mask)
        x = self._sublayer(x, attn, blk.ln1_g, blk.ln1_b, train)
        return self._sublayer(x, self._ffn(blk, x), blk.ln2_g, blk.ln2_b, train)

    # ----- encoder side

    @staticmethod
    def _nonempty(ids: np.ndarray, lengths: np.ndarray):
        """Zero-width or all-PAD rows fall back to a single PAD position."""
        ids = np.asarray(ids, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        if ids.shape[1] == 0:
            ids = np.zeros((ids.shape[0], 1), dtype=np.int64)
        mask = length_mask(lengths, ids.shape[1])
        empty = ~mask.any(axis=1)
        if empty.any():
            mask = mask.copy()
            mask[empty, 0] = True
        return ids, mask

    def _query_summary(self, blocks: list[_Block], e_r: Tensor, e_q: Tensor,
                       query_mask: np.ndarray, train: bool) -> Tensor:
        """Review-aligned query representation: review rows attend over query tokens."""
        h = e_r
        kv_mask = query_mask[:, None, :]  # every review row sees real query tokens
        for blk in blocks:
            h = self._run_block(blk, h, e_q, kv_mask, train)
        return h

    def encode(self, review_ids, review_lengths, query_ids, query_lengths, train: bool = False):
        """Returns (memory, review_mask, h_q_for_decoder or None)."""
        cfg = self.config
        review_ids = np.asarray(review_ids, dtype=np.int64)
        review_mask = length_mask(review_lengths, review_ids.shape[1])
        if not review_mask.any(axis=1).all():
            raise ValueError("empty review in batch")

        e_r = self._embed(review_ids, train)
        h_r = self._run_block(self.review_block, e_r, e_r, review_mask[:, None, :], train)

        h_q = None
        if self._needs_query:
            q_ids, q_mask = self._nonempty(query_ids, query_lengths)
            e_q = self._embed(q_ids, train)
            h_q = self._query_summary(self.query_blocks, e_r, e_q, q_mask, train)

        if cfg.variant in ("qa_enc", "both"):
            memory = fuse(h_q, h_r, self.w_enc)
        else:
            memory = h_r
        for blk in self.enc_layers:
            memory = self._run_block(blk, memory, memory, review_mask[:, None, :], train)

        h_q_dec = None
        if cfg.variant in ("qa_dec", "both"):
            if self.query_blocks_dec:
                q_ids, q_mask = self._nonempty(query_ids, query_lengths)
                e_q = self._embed(q_ids, train)
                h_q_dec = self._query_summary(self.query_blocks_dec, e_r, e_q, q_mask, train)
            else:
                h_q_dec = h_q
        return memory, review_mask, h_q_dec

    def decoder_memory(self, memory: Tensor, h_q_dec: Tensor | None) -> Tensor:
        if self.config.variant in ("qa_dec", "both"):
            return fuse(h_q_dec, memory, self.w_dec)
        return memory

    # ----- decoder side

    def decode_logits(self, kv: Tensor, review_mask: np.ndarray, tip_input: np.ndarray,
                      train: bool = False) -> Tensor:
        tip_input = np.asarray(tip_input, dtype=np.int64)
        m = tip_input.shape[1]
        x = self._embed(tip_input, train)
        self_mask = causal_mask(m)[None]
        cross_mask = review_mask[:, None, :]
        for blk in self.dec_layers:
            attn, _ = multi_head(blk.mh, x, x, x, mask=self_mask)
            x = self._sublayer(x, attn, blk.ln1_g, blk.ln1_b, train)
            cross, _ = multi_head(blk.cross, x, kv, kv, mask=cross_mask)
            x = self._sublayer(x, cross, blk.ln3_g, blk.ln3_b, train)
            x = self._sublayer(x, self._ffn(blk, x), blk.ln2_g, blk.ln2_b, train)
        proj = self.emb if self.w_out is None else self.w_out
        return T.matmul(x, T.transpose(proj))

    def forward(self, batch, train: bool = False) -> Tensor:
        memory, review_mask, h_q_dec = self.encode(
            batch.review, batch.review_lengths, batch.query, batch.query_lengths, train)
        kv = self.decoder_memory(memory, h_q_dec)
        return self.decode_logits(kv, review_mask, batch.tip_input, train)

    def forward_loss(self, batch, train: bool = True) -> Tensor:
        logits = self.forward(batch, train=train)
        mask = length_mask(batch.tip_lengths, batch.tip_target.shape[1])
        return T.nll_loss(logits, batch.tip_target, pad_mask=mask)

    # ----- decoding protocol

    def prepare(self, review_ids, query_ids) -> dict:
        review = np.asarray([list(review_ids)], dtype=np.int64)
        query = np.asarray([list(query_ids)], dtype=np.int64)
        with T.no_grad():
            memory, review_mask, h_q_dec = self.encode(
                review, np.array([review.shape[1]]), query, np.array([query.shape[1]]), train=False)
            kv = self.decoder_memory(memory, h_q_dec)
        return {"kv": kv, "review_mask": review_mask}

    def step_logits(self, ctx: dict, prefix_ids) -> np.ndarray:
        tip = np.asarray([list(prefix_ids)], dtype=np.int64)
        with T.no_grad():
            logits = self.decode_logits(ctx["kv"], ctx["review_mask"], tip, train=False)
        return logits.data[0, -1].astype(np.float64)
