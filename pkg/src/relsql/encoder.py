"""Joint question/schema encoder with relation-aware self-attention.

Pipeline per instance: embed question words and run them through a BiLSTM
(per-position states); embed each column/table label word sequence (type
word first for columns) through a shared label BiLSTM (final states); stack
columns, tables, then question words into one node sequence; apply N
self-attention layers in which every pairwise score and value carries a
learned embedding of the pair's relation label; finally produce
column-to-question and table-to-question alignment matrices from the last
layer's states.

Attention layers follow the post-norm transformer layout but concatenated
heads feed the residual directly (no output projection), and each layer
owns its relation embedding tables. The relation labels enter either as one
embedding per composite label or as a concatenation of sub-embeddings for
the structural, name-match, and value-match features (the default).
"""

import math
from dataclasses import dataclass

import numpy as np

from .nn import ParameterStore, Rng, Tensor, get_default_dtype, glorot, normal_init, ops
from .nn import tensor as tz
from .relations import RelationFeatures, RelationVocab

__all__ = [
    "EncoderConfig",
    "paper_encoder_config",
    "EncoderInputs",
    "EncodedInstance",
    "build_encoder_params",
    "encode",
]


@dataclass(frozen=True)
class EncoderConfig:
    """Defaults are the desk-scale preset; paper_encoder_config() is full size."""

    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 256
    word_emb: int = 64
    lstm_hidden: int = 32  # per direction
    dropout: float = 0.1
    recurrent_dropout: float = 0.2
    rel_mode: str = "concat"  # or "composite"

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if 2 * self.lstm_hidden != self.d_model:
            raise ValueError(
                f"2*lstm_hidden must equal d_model, got {2 * self.lstm_hidden} vs {self.d_model}"
            )
        if self.rel_mode not in ("concat", "composite"):
            raise ValueError(f"unknown rel_mode {self.rel_mode!r}")
        if self.rel_mode == "concat" and self.head_dim < 4:
            raise ValueError("concat mode needs head_dim >= 4")

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def concat_widths(self) -> tuple[int, int, int]:
        """(structural, match, value) sub-embedding widths summing to head_dim."""
        w_match = self.head_dim // 4
        w_value = self.head_dim // 4
        return self.head_dim - w_match - w_value, w_match, w_value


def paper_encoder_config() -> EncoderConfig:
    return EncoderConfig(
        d_model=256,
        n_heads=8,
        n_layers=8,
        d_ff=1024,
        word_emb=300,
        lstm_hidden=128,
    )


@dataclass
class EncoderInputs:
    """Integer features for one (question, schema) pair.

    label_ids rows cover columns then tables; -1 pads to the longest label.
    """

    q_ids: np.ndarray  # (Q,) word ids
    label_ids: np.ndarray  # (C+T, L) word ids, -1 padded
    n_columns: int
    n_tables: int
    feats: RelationFeatures

    @property
    def label_mask(self) -> np.ndarray:
        return self.label_ids >= 0


@dataclass
class EncodedInstance:
    columns: Tensor  # (C, d)
    tables: Tensor  # (T, d)
    words: Tensor  # (Q, d)
    align_col: Tensor  # (Q, C), each row a distribution over columns
    align_tab: Tensor  # (Q, T)


# -- parameters -------------------------------------------------------------


def _add_lstm(store, gen, prefix, in_dim, hidden):
    for d in ("fwd", "bwd"):
        store.add(f"{prefix}/{d}/w_x", glorot(gen, in_dim, 4 * hidden))
        store.add(f"{prefix}/{d}/w_h", glorot(gen, hidden, 4 * hidden))
        b = np.zeros(4 * hidden)
        b[hidden : 2 * hidden] = 1.0  # forget-gate bias
        store.add(f"{prefix}/{d}/b", b)


def build_encoder_params(
    store: ParameterStore,
    cfg: EncoderConfig,
    vocab_size: int,
    rel_vocab: RelationVocab,
    rng: Rng,
) -> None:
    gen = rng.child("encoder-init").generator()
    d, h = cfg.d_model, cfg.lstm_hidden
    store.add("embed/word", normal_init(gen, (vocab_size, cfg.word_emb), 0.1))
    _add_lstm(store, gen, "q_lstm", cfg.word_emb, h)
    _add_lstm(store, gen, "label_lstm", cfg.word_emb, h)
    n_comp, n_base = len(rel_vocab), rel_vocab.n_base
    for i in range(cfg.n_layers):
        p = f"enc/layer{i}"
        store.add(f"{p}/attn_wq", glorot(gen, d, d))
        store.add(f"{p}/attn_wk", glorot(gen, d, d))
        store.add(f"{p}/attn_wv", glorot(gen, d, d))
        if cfg.rel_mode == "composite":
            store.add(f"{p}/rel_k", normal_init(gen, (n_comp, cfg.head_dim), 0.1))
            store.add(f"{p}/rel_v", normal_init(gen, (n_comp, cfg.head_dim), 0.1))
        else:
            wb, wm, wv = cfg.concat_widths
            for side in ("rel_k", "rel_v"):
                store.add(f"{p}/{side}_base", normal_init(gen, (n_base, wb), 0.1))
                store.add(f"{p}/{side}_match", normal_init(gen, (3, wm), 0.1))
                store.add(f"{p}/{side}_value", normal_init(gen, (2, wv), 0.1))
        store.add(f"{p}/ln1/gain", np.ones(d))
        store.add(f"{p}/ln1/bias", np.zeros(d))
        store.add(f"{p}/ff/w1", glorot(gen, d, cfg.d_ff))
        store.add(f"{p}/ff/b1", np.zeros(cfg.d_ff))
        store.add(f"{p}/ff/w2", glorot(gen, cfg.d_ff, d))
        store.add(f"{p}/ff/b2", np.zeros(d))
        store.add(f"{p}/ln2/gain", np.ones(d))
        store.add(f"{p}/ln2/bias", np.zeros(d))
    for side in ("col", "tab"):
        store.add(f"align/{side}/wq", glorot(gen, d, d))
        store.add(f"align/{side}/wk", glorot(gen, d, d))
        store.add(f"align/{side}/rel", normal_init(gen, (n_comp, d), 0.1))


# -- BiLSTM -----------------------------------------------------------------


def _recurrent_mask(gen, rate, shape, train):
    if not train or rate == 0.0:
        return None
    keep = 1.0 - rate
    return Tensor((gen.random(shape) < keep).astype(get_default_dtype()) / keep)


def _scan_lstm(store, prefix, emb, mask, hidden, rmask, reverse):
    """One direction over (B, L, E); returns the list of (B, hidden) states."""
    B, L = mask.shape
    w_x = store[f"{prefix}/w_x"]
    w_h = store[f"{prefix}/w_h"]
    b = store[f"{prefix}/b"]
    h = tz.zeros((B, hidden))
    c = tz.zeros((B, hidden))
    states = [None] * L
    order = range(L - 1, -1, -1) if reverse else range(L)
    for t in order:
        x_t = emb[:, t, :]
        h_in = h * rmask if rmask is not None else h
        h_new, c_new = ops.lstm_cell(x_t, h_in, c, w_x, w_h, b)
        m = Tensor(mask[:, t : t + 1].astype(float))
        keep = Tensor(1.0 - mask[:, t : t + 1].astype(float))
        h = h_new * m + h * keep
        c = c_new * m + c * keep
        states[t] = h
    return states, h


def _bilstm(store, prefix, emb, mask, hidden, rdrop, gen, train, per_step):
    B = mask.shape[0]
    rmask_f = _recurrent_mask(gen, rdrop, (B, hidden), train)
    rmask_b = _recurrent_mask(gen, rdrop, (B, hidden), train)
    states_f, final_f = _scan_lstm(store, f"{prefix}/fwd", emb, mask, hidden, rmask_f, False)
    states_b, final_b = _scan_lstm(store, f"{prefix}/bwd", emb, mask, hidden, rmask_b, True)
    if per_step:
        L = mask.shape[1]
        steps = [tz.concat([states_f[t], states_b[t]], axis=1) for t in range(L)]
        return tz.stack(steps, axis=1)  # (B, L, 2h)
    return tz.concat([final_f, final_b], axis=1)  # (B, 2h)


# -- relation embedding gather ----------------------------------------------


def _relation_tensor(store, cfg, feats: RelationFeatures, prefix, side):
    if cfg.rel_mode == "composite":
        return ops.embedding(store[f"{prefix}/{side}"], feats.composite)
    parts = [
        ops.embedding(store[f"{prefix}/{side}_base"], feats.base),
        ops.masked_embed(store[f"{prefix}/{side}_match"], feats.match),
        ops.masked_embed(store[f"{prefix}/{side}_value"], feats.value),
    ]
    return tz.concat(parts, axis=2)


# -- attention layer --------------------------------------------------------


def _split_heads(x, n, H, dh):
    return tz.transpose(tz.reshape(x, (n, H, dh)), (1, 0, 2))


def _rat_layer(store, cfg, x, rel_k, rel_v, gen, train, prefix):
    n = x.shape[0]
    H, dh = cfg.n_heads, cfg.head_dim
    q = _split_heads(x @ store[f"{prefix}/attn_wq"], n, H, dh)
    k = _split_heads(x @ store[f"{prefix}/attn_wk"], n, H, dh)
    v = _split_heads(x @ store[f"{prefix}/attn_wv"], n, H, dh)
    scores = (tz.matmul(q, tz.transpose(k, (0, 2, 1))) + ops.rel_score_bias(q, rel_k)) * (
        1.0 / math.sqrt(dh)
    )
    attn = ops.softmax(scores, axis=-1)
    attn = ops.dropout(attn, cfg.dropout, gen, train)
    z = tz.matmul(attn, v) + ops.rel_value_mix(attn, rel_v)
    z = tz.reshape(tz.transpose(z, (1, 0, 2)), (n, cfg.d_model))
    y1 = ops.layer_norm(x + z, store[f"{prefix}/ln1/gain"], store[f"{prefix}/ln1/bias"])
    ff = ops.linear(
        ops.relu(ops.linear(y1, store[f"{prefix}/ff/w1"], store[f"{prefix}/ff/b1"])),
        store[f"{prefix}/ff/w2"],
        store[f"{prefix}/ff/b2"],
    )
    ff = ops.dropout(ff, cfg.dropout, gen, train)
    return ops.layer_norm(
        y1 + ff, store[f"{prefix}/ln2/gain"], store[f"{prefix}/ln2/bias"]
    )


def _alignment(store, side, words, nodes, ids):
    """(Q, M): each question word's distribution over the schema nodes.

    Queries come from words, keys from nodes plus a relation embedding of
    the (word, node) pair; softmax normalizes over nodes.
    """
    d = words.shape[1]
    q = words @ store[f"align/{side}/wq"]  # (Q, d)
    k = nodes @ store[f"align/{side}/wk"]  # (M, d)
    rel = ops.embedding(store[f"align/{side}/rel"], ids)  # (Q, M, d)
    Q = words.shape[0]
    logits = tz.matmul(q, tz.transpose(k)) + tz.reshape(
        ops.rel_score_bias(tz.reshape(q, (1, Q, d)), rel), (Q, ids.shape[1])
    )
    return ops.softmax(logits * (1.0 / math.sqrt(d)), axis=-1)


# -- top level --------------------------------------------------------------


def encode(
    store: ParameterStore,
    cfg: EncoderConfig,
    inputs: EncoderInputs,
    rng: Rng,
    train: bool = False,
) -> EncodedInstance:
    C, T = inputs.n_columns, inputs.n_tables
    Q = len(inputs.q_ids)
    enc_rng = rng.child("encoder")

    label_emb = ops.masked_embed(store["embed/word"], inputs.label_ids)
    labels = _bilstm(
        store,
        "label_lstm",
        label_emb,
        inputs.label_mask,
        cfg.lstm_hidden,
        cfg.recurrent_dropout,
        enc_rng.child("labels").generator(),
        train,
        per_step=False,
    )  # (C+T, d)

    q_emb = ops.embedding(store["embed/word"], inputs.q_ids[None, :])
    words = _bilstm(
        store,
        "q_lstm",
        q_emb,
        np.ones((1, Q), dtype=bool),
        cfg.lstm_hidden,
        cfg.recurrent_dropout,
        enc_rng.child("question").generator(),
        train,
        per_step=True,
    )  # (1, Q, d)
    words = tz.reshape(words, (Q, cfg.d_model))

    x = tz.concat([labels, words], axis=0)  # (C+T+Q, d)
    for i in range(cfg.n_layers):
        prefix = f"enc/layer{i}"
        rel_k = _relation_tensor(store, cfg, inputs.feats, prefix, "rel_k")
        rel_v = _relation_tensor(store, cfg, inputs.feats, prefix, "rel_v")
        x = _rat_layer(
            store,
            cfg,
            x,
            rel_k,
            rel_v,
            enc_rng.child(f"layer{i}").generator(),
            train,
            prefix,
        )

    cols = x[0:C, :]
    tabs = x[C : C + T, :]
    wrds = x[C + T :, :]
    off = C + T
    align_col = _alignment(store, "col", wrds, cols, inputs.feats.composite[off:, 0:C])
    align_tab = _alignment(store, "tab", wrds, tabs, inputs.feats.composite[off:, C : C + T])
    return EncodedInstance(
        columns=cols, tables=tabs, words=wrds, align_col=align_col, align_tab=align_tab
    )
