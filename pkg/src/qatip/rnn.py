"""BiLSTM tip generator with selective gating and query-aware attention.

Encoder: one bidirectional LSTM over the review (and one over the query when
a variant needs it).  Per-step states H_t = [fwd_t; bwd_t] are 2d wide; the
sequence summary is [fwd_last; bwd_first].  PAD steps carry exactly zero
states.

Variants:
  vanilla: no gate, no query term in attention; the query encoder is not
           even allocated, so query invariance is structural
  qa_enc:  selective gate g_t = sigmoid(W_r [H_t; h_r] + W_q h_q + b_g),
           H~_t = g_t * H_t
  qa_dec:  attention scores get the extra W_q h_q term
  both:    gate and attention term together

Decoder: unidirectional LSTM (hidden 2d) over [prev embedding; context],
attention recomputed each step from the previous state; logits are
W_v . state.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .attention import length_mask
from .tensor import ParamStore, Tensor

VARIANTS = ("vanilla", "qa_enc", "qa_dec", "both")


@dataclass
class RnnConfig:
    vocab_size: int
    emb_dim: int = 128
    hidden_dim: int = 256  # per direction; encoder states and decoder are 2x this
    variant: str = "both"
    dropout: float = 0.0

    def __post_init__(self):
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")


class LstmCell:
    """Packed-gate LSTM cell; gate order i, f, g, o with forget bias +1."""

    def __init__(self, store: ParamStore, prefix: str, in_dim: int, hidden: int):
        self.w_x = store.glorot(f"{prefix}.w_x", (in_dim, 4 * hidden))
        self.w_h = store.glorot(f"{prefix}.w_h", (hidden, 4 * hidden))
        self.b = store.lstm_bias(f"{prefix}.b", hidden)
        self.hidden = hidden

    def step(self, x: Tensor, h: Tensor, c: Tensor):
        d = self.hidden
        pre = T.add(T.add(T.matmul(x, self.w_x), T.matmul(h, self.w_h)), self.b)
        i = T.sigmoid(T.slice_axis(pre, -1, 0, d))
        f = T.sigmoid(T.slice_axis(pre, -1, d, 2 * d))
        g = T.tanh(T.slice_axis(pre, -1, 2 * d, 3 * d))
        o = T.sigmoid(T.slice_axis(pre, -1, 3 * d, 4 * d))
        c_new = T.add(T.mul(f, c), T.mul(i, g))
        h_new = T.mul(o, T.tanh(c_new))
        return h_new, c_new


def _scan(cell: LstmCell, emb: Tensor, step_masks: list[Tensor], reverse: bool) -> list[Tensor]:
    """Run a masked LSTM over time; returns per-step hidden states (B, d)."""
    b, n, e = emb.shape
    dtype = emb.dtype
    h = Tensor(np.zeros((b, cell.hidden), dtype=dtype))
    c = Tensor(np.zeros((b, cell.hidden), dtype=dtype))
    states: list = [None] * n
    order = range(n - 1, -1, -1) if reverse else range(n)
    for t in order:
        x_t = T.reshape(T.slice_axis(emb, 1, t, t + 1), (b, e))
        h_new, c_new = cell.step(x_t, h, c)
        h = T.mul(h_new, step_masks[t])  # PAD steps stay exactly zero
        c = T.mul(c_new, step_masks[t])
        states[t] = h
    return states


def bilstm_encode(fwd: LstmCell, bwd: LstmCell, emb: Tensor, lengths):
    """(H, summary): per-step [fwd_t; bwd_t] plus [fwd_last; bwd_first]."""
    lengths = np.asarray(lengths, dtype=np.int64)
    if (lengths < 1).any():
        raise ValueError("zero-length sequence in bilstm_encode")
    b, n, _ = emb.shape
    if lengths.max() > n:
        raise ValueError("length exceeds sequence width")
    mask = length_mask(lengths, n)
    step_masks = [Tensor(mask[:, t : t + 1].astype(emb.dtype)) for t in range(n)]
    f_states = _scan(fwd, emb, step_masks, reverse=False)
    b_states = _scan(bwd, emb, step_masks, reverse=True)

    rows = [T.reshape(T.concat_last_dim(f_states[t], b_states[t]), (b, 1, 2 * fwd.hidden)) for t in range(n)]
    h_seq = rows[0] if n == 1 else T.concat(rows, axis=1)

    # pick fwd state at the last real step via a one-hot time selector
    select = np.zeros((b, 1, n), dtype=emb.dtype)
    select[np.arange(b), 0, lengths - 1] = 1.0
    fwd_stack = T.concat([T.reshape(s, (b, 1, fwd.hidden)) for s in f_states], axis=1) if n > 1 \
        else T.reshape(f_states[0], (b, 1, fwd.hidden))
    fwd_last = T.reshape(T.matmul(Tensor(select), fwd_stack), (b, fwd.hidden))
    summary = T.concat_last_dim(fwd_last, b_states[0])
    return h_seq, summary


def selective_gate(h_seq: Tensor, h_r: Tensor, h_q: Tensor,
                   w_r: Tensor, w_q_gate: Tensor, b_g: Tensor):
    """g_t = sigmoid(W_r [H_t; h_r] + W_q h_q + b_g); returns (g * H, g)."""
    b, n, width = h_seq.shape
    h_r_rows = T.broadcast_to(T.reshape(h_r, (b, 1, width)), (b, n, width))
    stacked = T.concat_last_dim(h_seq, h_r_rows)
    pre = T.matmul(stacked, T.transpose(w_r))
    query_term = T.reshape(T.matmul(h_q, T.transpose(w_q_gate)), (b, 1, width))
    gate = T.sigmoid(T.add(T.add(pre, query_term), b_g))
    return T.mul(gate, h_seq), gate


def qa_attention(h_tilde: Tensor, state: Tensor, h_q: Tensor | None,
                 w_c: Tensor, w_q_attn: Tensor | None, b_c: Tensor, v: Tensor,
                 mask: np.ndarray):
    """Additive attention over review states, optionally query-conditioned.

    c_i = W_c [H~_i; s_t] (+ W_q h_q) + b_c; a = softmax(v^T tanh(c));
    returns (context (B, 2d), weights (B, N)).
    """
    b, n, width = h_tilde.shape
    d_a = v.shape[0]
    state_rows = T.broadcast_to(T.reshape(state, (b, 1, width)), (b, n, width))
    c = T.add(T.matmul(T.concat_last_dim(h_tilde, state_rows), T.transpose(w_c)), b_c)
    if h_q is not None:
        c = T.add(c, T.reshape(T.matmul(h_q, T.transpose(w_q_attn)), (b, 1, d_a)))
    scores = T.transpose(T.matmul(T.tanh(c), T.reshape(v, (d_a, 1))), 1, 2)  # (B, 1, N)
    weights = T.softmax_rows(scores, mask=mask[:, None, :])
    context = T.reshape(T.matmul(weights, h_tilde), (b, width))
    return context, T.reshape(weights, (b, n))


class QaRnnModel:
    family = "rnn"

    def __init__(self, config: RnnConfig, seed: int = 0, dtype=np.float32):
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self._drop_rng = np.random.default_rng(seed + 1)
        store = ParamStore(rng, dtype=dtype)
        cfg = config
        d, e = cfg.hidden_dim, cfg.emb_dim
        width = 2 * d  # encoder state / decoder hidden / attention dim

        self.emb = store.glorot("emb", (cfg.vocab_size, e))
        self.review_fwd = LstmCell(store, "review.fwd", e, d)
        self.review_bwd = LstmCell(store, "review.bwd", e, d)

        self._use_gate = cfg.variant in ("qa_enc", "both")
        self._use_query_attn = cfg.variant in ("qa_dec", "both")
        if cfg.variant != "vanilla":
            self.query_fwd = LstmCell(store, "query.fwd", e, d)
            self.query_bwd = LstmCell(store, "query.bwd", e, d)
        if self._use_gate:
            self.w_r = store.glorot("gate.w_r", (width, 2 * width))
            self.w_q_gate = store.glorot("gate.w_q", (width, width))
            self.b_g = store.zeros("gate.b", (width,))
        self.w_c = store.glorot("attn.w_c", (width, 2 * width))
        if self._use_query_attn:
            self.w_q_attn = store.glorot("attn.w_q", (width, width))
        self.b_c = store.zeros("attn.b_c", (width,))
        self.v = store.glorot("attn.v", (width, 1))  # used as a vector
        self.w_init = store.glorot("dec.w_init", (width, width))
        self.b_init = store.zeros("dec.b_init", (width,))
        self.decoder = LstmCell(store, "dec.cell", e + width, width)
        self.w_v = store.glorot("w_v", (cfg.vocab_size, width))
        self.params = store

    def config_dict(self) -> dict:
        out = asdict(self.config)
        out["family"] = self.family
        return out

    # ----- encoder side

    def _embed(self, ids: np.ndarray, train: bool) -> Tensor:
        x = T.embedding_lookup(self.emb, np.asarray(ids, dtype=np.int64))
        if train and self.config.dropout > 0.0:
            x = T.dropout(x, self.config.dropout, rng=self._drop_rng)
        return x

    @staticmethod
    def _nonempty(ids, lengths):
        ids = np.asarray(ids, dtype=np.int64)
        lengths = np.asarray(lengths, dtype=np.int64)
        if ids.shape[1] == 0:
            ids = np.zeros((ids.shape[0], 1), dtype=np.int64)
        return ids, np.maximum(lengths, 1)  # all-PAD rows read the PAD embedding

    def encode(self, review_ids, review_lengths, query_ids, query_lengths, train: bool = False):
        """Returns (H~ (B,N,2d), review_mask, h_q or None, s0, c0)."""
        review_ids = np.asarray(review_ids, dtype=np.int64)
        review_lengths = np.asarray(review_lengths, dtype=np.int64)
        h_seq, h_r = bilstm_encode(self.review_fwd, self.review_bwd,
                                   self._embed(review_ids, train), review_lengths)
        h_q = None
        if self.config.variant != "vanilla":
            q_ids, q_len = self._nonempty(query_ids, query_lengths)
            _, h_q = bilstm_encode(self.query_fwd, self.query_bwd,
                                   self._embed(q_ids, train), q_len)
        if self._use_gate:
            h_tilde, _ = selective_gate(h_seq, h_r, h_q, self.w_r, self.w_q_gate, self.b_g)
        else:
            h_tilde = h_seq

        b, n, width = h_tilde.shape
        # decoder start: affine+tanh of the gated summary [fwd_last; bwd_first]
        select = np.zeros((b, 1, n), dtype=self.dtype)
        select[np.arange(b), 0, review_lengths - 1] = 1.0
        at_last = T.reshape(T.matmul(Tensor(select), h_tilde), (b, width))
        at_first = T.reshape(T.slice_axis(h_tilde, 1, 0, 1), (b, width))
        gated_summary = T.concat_last_dim(
            T.slice_axis(at_last, -1, 0, width // 2),
            T.slice_axis(at_first, -1, width // 2, width),
        )
        s0 = T.tanh(T.add(T.matmul(gated_summary, self.w_init), self.b_init))
        c0 = Tensor(np.zeros((b, width), dtype=self.dtype))
        mask = length_mask(review_lengths, n)
        return h_tilde, mask, h_q, s0, c0

    # ----- decoder side

    def _attend(self, h_tilde, state, h_q, mask):
        return qa_attention(
            h_tilde, state, h_q if self._use_query_attn else None,
            self.w_c, self.w_q_attn if self._use_query_attn else None,
            self.b_c, T.reshape(self.v, (self.v.shape[0],)), mask)

    def decode_logits(self, h_tilde, mask, h_q, s0, c0, tip_input, train: bool = False) -> Tensor:
        tip_input = np.asarray(tip_input, dtype=np.int64)
        b, m = tip_input.shape
        emb = self._embed(tip_input, train)
        s, c = s0, c0
        rows = []
        for t in range(m):
            context, _ = self._attend(h_tilde, s, h_q, mask)
            x_t = T.concat_last_dim(T.reshape(T.slice_axis(emb, 1, t, t + 1), (b, emb.shape[-1])), context)
            s, c = self.decoder.step(x_t, s, c)
            logits_t = T.matmul(s, T.transpose(self.w_v))
            rows.append(T.reshape(logits_t, (b, 1, self.config.vocab_size)))
        return rows[0] if m == 1 else T.concat(rows, axis=1)

    def forward(self, batch, train: bool = False) -> Tensor:
        h_tilde, mask, h_q, s0, c0 = self.encode(
            batch.review, batch.review_lengths, batch.query, batch.query_lengths, train)
        return self.decode_logits(h_tilde, mask, h_q, s0, c0, batch.tip_input, train)

    def forward_loss(self, batch, train: bool = True) -> Tensor:
        logits = self.forward(batch, train=train)
        tip_mask = length_mask(batch.tip_lengths, batch.tip_target.shape[1])
        return T.nll_loss(logits, batch.tip_target, pad_mask=tip_mask)

    # ----- decoding protocol

    def prepare(self, review_ids, query_ids) -> dict:
        review = np.asarray([list(review_ids)], dtype=np.int64)
        query = np.asarray([list(query_ids)], dtype=np.int64)
        with T.no_grad():
            h_tilde, mask, h_q, s0, c0 = self.encode(
                review, np.array([review.shape[1]]), query, np.array([query.shape[1]]), train=False)
        return {"h_tilde": h_tilde, "mask": mask, "h_q": h_q, "s0": s0, "c0": c0}

    def step_logits(self, ctx: dict, prefix_ids) -> np.ndarray:
        with T.no_grad():
            logits = self.decode_logits(ctx["h_tilde"], ctx["mask"], ctx["h_q"],
                                        ctx["s0"], ctx["c0"], np.asarray([list(prefix_ids)]))
        return logits.data[0, -1].astype(np.float64)
