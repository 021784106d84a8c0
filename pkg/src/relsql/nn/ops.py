"""Neural-net ops: normalization, attention pieces, embeddings, LSTM cell.

Everything here composes the primitives in tensor.py but several ops get a
fused forward/backward (relation-biased attention, embedding lookup) because
they dominate the training profile.
"""

import numpy as np

from .tensor import (
    ShapeError,
    Tensor,
    _record,
    _wrap,
    get_default_dtype,
    matmul,
    mul,
    relu,
    sigmoid,
    tanh,
)

__all__ = [
    "softmax",
    "log_softmax",
    "masked_softmax",
    "masked_log_softmax",
    "layer_norm",
    "linear",
    "relu",
    "dropout",
    "embedding",
    "masked_embed",
    "rel_score_bias",
    "rel_value_mix",
    "lstm_cell",
]


def softmax(x, axis=-1) -> Tensor:
    x = _wrap(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = Tensor(e / e.sum(axis=axis, keepdims=True))

    def backward(g):
        if x.requires_grad:
            s = out.data
            x._accum_grad(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return _record("softmax", out, (x,), backward)


def log_softmax(x, axis=-1) -> Tensor:
    x = _wrap(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = Tensor(shifted - lse)

    def backward(g):
        if x.requires_grad:
            s = np.exp(out.data)
            x._accum_grad(g - s * g.sum(axis=axis, keepdims=True))

    return _record("log_softmax", out, (x,), backward)


_NEG = -1e30  # additive mask value; finite so masked rows stay NaN-free


def masked_softmax(x, mask, axis=-1) -> Tensor:
    """Softmax over entries where mask is True; masked entries are exactly 0.

    A row with no True entry yields all zeros rather than NaN.
    """
    x = _wrap(x)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.data.shape:
        mask = np.broadcast_to(mask, x.data.shape)
    masked = np.where(mask, x.data, _NEG)
    shifted = masked - masked.max(axis=axis, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    denom = e.sum(axis=axis, keepdims=True)
    out = Tensor(np.divide(e, denom, out=np.zeros_like(e), where=denom > 0))

    def backward(g):
        if x.requires_grad:
            s = out.data
            x._accum_grad(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return _record("masked_softmax", out, (x,), backward)


def masked_log_softmax(x, mask, axis=-1) -> Tensor:
    """Log-softmax restricted to mask; masked entries come back very negative."""
    x = _wrap(x)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.data.shape:
        mask = np.broadcast_to(mask, x.data.shape)
    masked = np.where(mask, x.data, _NEG)
    shifted = masked - masked.max(axis=axis, keepdims=True)
    lse = np.log(np.where(mask, np.exp(shifted), 0.0).sum(axis=axis, keepdims=True))
    out = Tensor(np.where(mask, shifted - lse, _NEG))

    def backward(g):
        if x.requires_grad:
            s = np.where(mask, np.exp(out.data), 0.0)
            gm = np.where(mask, g, 0.0)
            x._accum_grad(gm - s * gm.sum(axis=axis, keepdims=True))

    return _record("masked_log_softmax", out, (x,), backward)


def layer_norm(x, gain, bias, eps=1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    x, gain, bias = _wrap(x), _wrap(gain), _wrap(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat * gain.data + bias.data)
    n = x.data.shape[-1]

    def backward(g):
        if gain.requires_grad:
            gain._accum_grad((g * xhat).reshape(-1, n).sum(axis=0))
        if bias.requires_grad:
            bias._accum_grad(g.reshape(-1, n).sum(axis=0))
        if x.requires_grad:
            gx = g * gain.data
            sum_gx = gx.sum(axis=-1, keepdims=True)
            sum_gx_xhat = (gx * xhat).sum(axis=-1, keepdims=True)
            x._accum_grad(inv * (gx - (sum_gx + xhat * sum_gx_xhat) / n))

    return _record("layer_norm", out, (x, gain, bias), backward)


def linear(x, w, b=None) -> Tensor:
    out = matmul(x, w)
    if b is not None:
        out = out + b
    return out


def dropout(x, rate, rng, train) -> Tensor:
    """Inverted dropout; identity (same tensor) when not training or rate==0."""
    if not train or rate == 0.0:
        return x
    x = _wrap(x)
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(get_default_dtype()) / keep
    return mul(x, Tensor(mask))


def embedding(table, ids) -> Tensor:
    """Rows of `table` at integer `ids` (any shape); scatter-add backward."""
    table = _wrap(table)
    ids = np.asarray(ids, dtype=np.int64)
    out = Tensor(table.data[ids])

    def backward(g):
        if table.requires_grad:
            buf = np.zeros_like(table.data)
            np.add.at(buf, ids, g)
            table._accum_grad(buf)

    return _record("embedding", out, (table,), backward)


def masked_embed(table, ids) -> Tensor:
    """Like embedding() but ids < 0 produce a zero row and get no gradient."""
    table = _wrap(table)
    ids = np.asarray(ids, dtype=np.int64)
    valid = ids >= 0
    safe = np.where(valid, ids, 0)
    data = table.data[safe]
    data[~valid] = 0.0
    out = Tensor(data)

    def backward(g):
        if table.requires_grad:
            buf = np.zeros_like(table.data)
            np.add.at(buf, safe[valid], g[valid])
            table._accum_grad(buf)

    return _record("masked_embed", out, (table,), backward)


def rel_score_bias(q, rel) -> Tensor:
    """Per-pair additive attention score q_i . rel_ij.

    q: (H, n, dh) head-split queries; rel: (n, m, dh) pairwise key vectors.
    Returns (H, n, m).
    """
    q, rel = _wrap(q), _wrap(rel)
    if q.data.shape[-1] != rel.data.shape[-1] or q.data.shape[1] != rel.data.shape[0]:
        raise ShapeError("rel_score_bias", q.shape, rel.shape)
    out = Tensor(np.einsum("hid,ijd->hij", q.data, rel.data, optimize=True))

    def backward(g):
        if q.requires_grad:
            q._accum_grad(np.einsum("hij,ijd->hid", g, rel.data, optimize=True))
        if rel.requires_grad:
            rel._accum_grad(np.einsum("hij,hid->ijd", g, q.data, optimize=True))

    return _record("rel_score_bias", out, (q, rel), backward)


def rel_value_mix(attn, rel) -> Tensor:
    """Attention-weighted sum of pairwise value vectors.

    attn: (H, n, m) weights; rel: (n, m, dh). Returns (H, n, dh).
    """
    attn, rel = _wrap(attn), _wrap(rel)
    if attn.data.shape[1:] != rel.data.shape[:2]:
        raise ShapeError("rel_value_mix", attn.shape, rel.shape)
    out = Tensor(np.einsum("hij,ijd->hid", attn.data, rel.data, optimize=True))

    def backward(g):
        if attn.requires_grad:
            attn._accum_grad(np.einsum("hid,ijd->hij", g, rel.data, optimize=True))
        if rel.requires_grad:
            rel._accum_grad(np.einsum("hij,hid->ijd", attn.data, g, optimize=True))

    return _record("rel_value_mix", out, (attn, rel), backward)


def lstm_cell(x, h, c, w_x, w_h, b):
    """One LSTM step. x:(B,in), h,c:(B,hidden); returns (h', c').

    Gate order in the fused weight matrices is input, forget, cell, output.
    """
    hidden = h.shape[-1]
    z = matmul(x, w_x) + matmul(h, w_h) + b
    i = sigmoid(z[:, 0 * hidden : 1 * hidden])
    f = sigmoid(z[:, 1 * hidden : 2 * hidden])
    g = tanh(z[:, 2 * hidden : 3 * hidden])
    o = sigmoid(z[:, 3 * hidden : 4 * hidden])
    c2 = f * c + i * g
    h2 = o * tanh(c2)
    return h2, c2
