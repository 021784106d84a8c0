"""Grammar-directed tree decoder over encoded question/schema states.

Generation is a pre-order walk of the target tree: a frontier stack holds
the node kinds still to expand, each tagged with the step that created it.
One LSTM step per action consumes the previous action embedding, an
attention read over the question words, the parent step's hidden state and
action embedding, and an embedding of the frontier kind. Interior kinds
choose a production through a two-layer MLP masked to the legal
alternatives (illegal ones get exactly zero probability); column and table
leaves are chosen by pointing at question words and pushing that
distribution through the encoder's word-to-column (or word-to-table)
alignment, which makes schema elements reachable even when no question
word names them directly.

The same step primitive drives teacher forcing (NLL of a gold action
sequence), greedy and beam search, and forced replay for the oracle
ablations.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .encoder import EncodedInstance
from .grammar import (
    APPLY,
    ROOT_KIND,
    SELECT_COLUMN,
    SELECT_TABLE,
    TERMINALS,
    Action,
    Grammar,
    GrammarError,
    delinearize,
)
from .nn import ParameterStore, Rng, Tensor, get_default_dtype, glorot, normal_init, ops
from .nn import tensor as tz

__all__ = [
    "DecoderConfig",
    "paper_decoder_config",
    "build_decoder_params",
    "teacher_forced_nll",
    "decode",
    "DecodeResult",
]

_P_FLOOR = 1e-20  # keeps log() finite if a pointer mixture underflows


@dataclass(frozen=True)
class DecoderConfig:
    """Defaults are the desk-scale preset; paper_decoder_config() is full size."""

    action_emb: int = 32
    node_type_emb: int = 16
    hidden: int = 64
    n_heads: int = 4
    recurrent_dropout: float = 0.21
    step_limit: int = 200


def paper_decoder_config() -> DecoderConfig:
    return DecoderConfig(action_emb=128, node_type_emb=64, hidden=512, n_heads=8)


class _GrammarTables:
    """Kind numbering and per-kind legal-production masks."""

    def __init__(self, grammar: Grammar):
        self.grammar = grammar
        self.kinds = sorted(grammar.by_lhs) + list(TERMINALS)
        self.kind_id = {k: i for i, k in enumerate(self.kinds)}
        n = len(grammar.productions)
        self.legal = {
            kind: np.array([p.lhs == kind for p in grammar.productions], dtype=bool)
            for kind in grammar.by_lhs
        }
        self.n_prods = n


def n_decoder_kinds(grammar: Grammar) -> int:
    return len(grammar.by_lhs) + len(TERMINALS)


def build_decoder_params(
    store: ParameterStore,
    cfg: DecoderConfig,
    d_model: int,
    grammar: Grammar,
    rng: Rng,
) -> None:
    if d_model % cfg.n_heads:
        raise ValueError(f"d_model {d_model} not divisible by n_heads {cfg.n_heads}")
    gen = rng.child("decoder-init").generator()
    n_prods = len(grammar.productions)
    n_kinds = n_decoder_kinds(grammar)
    a, ne, hid = cfg.action_emb, cfg.node_type_emb, cfg.hidden

    store.add("dec/action_embed", normal_init(gen, (n_prods, a), 0.1))
    store.add("dec/node_type", normal_init(gen, (n_kinds, ne), 0.1))
    store.add("dec/col_action", glorot(gen, d_model, a))
    store.add("dec/tab_action", glorot(gen, d_model, a))
    store.add("dec/init_action", normal_init(gen, (1, a), 0.1))
    store.add("dec/root_parent_action", normal_init(gen, (1, a), 0.1))
    store.add("dec/root_parent_h", np.zeros((1, hid)))
    store.add("dec/h0", np.zeros((1, hid)))
    store.add("dec/m0", np.zeros((1, hid)))

    in_dim = a + d_model + hid + a + ne
    store.add("dec/lstm/w_x", glorot(gen, in_dim, 4 * hid))
    store.add("dec/lstm/w_h", glorot(gen, hid, 4 * hid))
    b = np.zeros(4 * hid)
    b[hid : 2 * hid] = 1.0  # forget-gate bias
    store.add("dec/lstm/b", b)

    store.add("dec/mha/wq", glorot(gen, hid, d_model))
    store.add("dec/mha/wk", glorot(gen, d_model, d_model))
    store.add("dec/mha/wv", glorot(gen, d_model, d_model))
    store.add("dec/mha/wo", glorot(gen, d_model, d_model))

    store.add("dec/rule/w1", glorot(gen, hid, hid))
    store.add("dec/rule/b1", np.zeros(hid))
    store.add("dec/rule/w2", glorot(gen, hid, n_prods))
    store.add("dec/rule/b2", np.zeros(n_prods))

    for side in ("col", "tab"):
        store.add(f"dec/ptr_{side}/wq", glorot(gen, hid, d_model))
        store.add(f"dec/ptr_{side}/wk", glorot(gen, d_model, d_model))


# -- per-example context -----------------------------------------------------


class _DecodeCtx:
    """Projections of the encoded instance that every step reuses."""

    def __init__(self, store, cfg, enc: EncodedInstance, tables, rmask):
        self.store = store
        self.cfg = cfg
        self.enc = enc
        self.gt = tables
        self.rmask = rmask
        d = enc.words.shape[1]
        if d % cfg.n_heads:
            raise ValueError(f"d_model {d} not divisible by n_heads {cfg.n_heads}")
        self.d_model = d
        self.dh = d // cfg.n_heads
        Q = enc.words.shape[0]
        k = enc.words @ store["dec/mha/wk"]
        v = enc.words @ store["dec/mha/wv"]
        self.mem_k = tz.transpose(tz.reshape(k, (Q, cfg.n_heads, self.dh)), (1, 0, 2))
        self.mem_v = tz.transpose(tz.reshape(v, (Q, cfg.n_heads, self.dh)), (1, 0, 2))
        self.ptr_keys = {
            "col": enc.words @ store["dec/ptr_col/wk"],
            "tab": enc.words @ store["dec/ptr_tab/wk"],
        }
        self.align = {"col": enc.align_col, "tab": enc.align_tab}
        self.content_act = {
            "col": enc.columns @ store["dec/col_action"],
            "tab": enc.tables @ store["dec/tab_action"],
        }

    def context(self, h):
        """(1, d_model) multi-head attention read keyed by the hidden state."""
        H, dh = self.cfg.n_heads, self.dh
        q = tz.transpose(tz.reshape(h @ self.store["dec/mha/wq"], (1, H, dh)), (1, 0, 2))
        scores = tz.matmul(q, tz.transpose(self.mem_k, (0, 2, 1))) * (1.0 / math.sqrt(dh))
        attn = ops.softmax(scores, axis=-1)
        z = tz.matmul(attn, self.mem_v)
        z = tz.reshape(tz.transpose(z, (1, 0, 2)), (1, self.d_model))
        return z @ self.store["dec/mha/wo"]

    def advance(self, h, m, prev_a, parent_h, parent_a, kind: str):
        s = self.store
        kid = self.gt.kind_id[kind]
        ntype = s["dec/node_type"][kid : kid + 1, :]
        x = tz.concat([prev_a, self.context(h), parent_h, parent_a, ntype], axis=1)
        h_in = h * self.rmask if self.rmask is not None else h
        return ops.lstm_cell(
            x, h_in, m, s["dec/lstm/w_x"], s["dec/lstm/w_h"], s["dec/lstm/b"]
        )

    def rule_logp(self, h, kind: str):
        """(1, n_prods) log-probabilities; illegal productions carry no mass."""
        s = self.store
        a = tz.tanh(ops.linear(h, s["dec/rule/w1"], s["dec/rule/b1"]))
        logits = ops.linear(a, s["dec/rule/w2"], s["dec/rule/b2"])
        return ops.masked_log_softmax(logits, self.gt.legal[kind][None, :])

    def pointer_logp(self, h, side: str):
        """(1, C) or (1, T): point at words, mix through the alignment."""
        q = h @ self.store[f"dec/ptr_{side}/wq"]
        scores = tz.matmul(q, tz.transpose(self.ptr_keys[side])) * (
            1.0 / math.sqrt(self.d_model)
        )
        lam = ops.softmax(scores, axis=-1)  # (1, Q)
        p = tz.matmul(lam, self.align[side])
        return tz.log(p + _P_FLOOR)

    def action_embedding(self, act: Action):
        if act.kind == APPLY:
            return self.store["dec/action_embed"][act.index : act.index + 1, :]
        side = "col" if act.kind == SELECT_COLUMN else "tab"
        return self.content_act[side][act.index : act.index + 1, :]


def _make_ctx(store, cfg, enc, grammar, rng, train):
    rmask = None
    if train and cfg.recurrent_dropout > 0.0:
        if rng is None:
            raise ValueError("training mode needs an rng for recurrent dropout")
        gen = rng.child("decoder").generator()
        keep = 1.0 - cfg.recurrent_dropout
        rmask = Tensor(
            (gen.random((1, cfg.hidden)) < keep).astype(get_default_dtype()) / keep
        )
    return _DecodeCtx(store, cfg, enc, _GrammarTables(grammar), rmask)


# -- teacher forcing ---------------------------------------------------------


def _expected_head(kind: str, act: Action, grammar: Grammar) -> None:
    if kind == "column":
        if act.kind != SELECT_COLUMN:
            raise GrammarError(f"frontier wants a column, got {act!r}")
    elif kind == "table":
        if act.kind != SELECT_TABLE:
            raise GrammarError(f"frontier wants a table, got {act!r}")
    else:
        if act.kind != APPLY:
            raise GrammarError(f"frontier wants a production for {kind!r}, got {act!r}")
        if grammar.productions[act.index].lhs != kind:
            raise GrammarError(
                f"production {grammar.productions[act.index]} cannot expand {kind!r}"
            )


def teacher_forced_nll(
    store: ParameterStore,
    cfg: DecoderConfig,
    enc: EncodedInstance,
    actions: list[Action],
    grammar: Grammar,
    rng: Rng | None = None,
    train: bool = False,
):
    """Negative log-likelihood of a gold action sequence.

    Returns (nll Tensor, stats) where stats counts per-step argmax hits for
    the action-accuracy metric.
    """
    ctx = _make_ctx(store, cfg, enc, grammar, rng, train)
    s = store
    h, m = s["dec/h0"], s["dec/m0"]
    prev_a = s["dec/init_action"]
    frontier: list[tuple[str, int | None]] = [(ROOT_KIND, None)]
    h_steps: list[Tensor] = []
    a_steps: list[Tensor] = []
    total = None
    n_correct = 0
    for t, act in enumerate(actions):
        if not frontier:
            raise GrammarError("actions continue after the tree closed")
        kind, pstep = frontier.pop()
        _expected_head(kind, act, grammar)
        parent_h = s["dec/root_parent_h"] if pstep is None else h_steps[pstep]
        parent_a = s["dec/root_parent_action"] if pstep is None else a_steps[pstep]
        h, m = ctx.advance(h, m, prev_a, parent_h, parent_a, kind)
        if kind == "column":
            lp = ctx.pointer_logp(h, "col")
        elif kind == "table":
            lp = ctx.pointer_logp(h, "tab")
        else:
            lp = ctx.rule_logp(h, kind)
            prod = grammar.productions[act.index]
            for child in reversed(prod.rhs):
                frontier.append((child, t))
        if act.index >= lp.shape[1]:
            raise GrammarError(f"action {act!r} out of range for width {lp.shape[1]}")
        chosen = lp[:, act.index : act.index + 1].sum()
        total = chosen if total is None else total + chosen
        if int(np.argmax(lp.data[0])) == act.index:
            n_correct += 1
        h_steps.append(h)
        a_steps.append(ctx.action_embedding(act))
        prev_a = a_steps[-1]
    if frontier:
        raise GrammarError("action sequence ended with an open frontier")
    stats = {"n_actions": len(actions), "n_correct": n_correct}
    return -total, stats


# -- search ------------------------------------------------------------------


@dataclass
class DecodeResult:
    actions: list[Action]
    finished: bool
    log_prob: float
    n_steps: int

    def ast(self, grammar: Grammar):
        if not self.finished:
            return None
        return delinearize(self.actions, grammar)


@dataclass
class _Hyp:
    frontier: list
    h: Tensor
    m: Tensor
    prev_a: Tensor
    h_steps: list = field(default_factory=list)
    a_steps: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_prob: float = 0.0


def _hyp_step_scores(ctx, grammar, hyp: _Hyp):
    """Advance the hypothesis state one step; return candidate log-probs."""
    s = ctx.store
    kind, pstep = hyp.frontier[-1]
    parent_h = s["dec/root_parent_h"] if pstep is None else hyp.h_steps[pstep]
    parent_a = s["dec/root_parent_action"] if pstep is None else hyp.a_steps[pstep]
    h, m = ctx.advance(hyp.h, hyp.m, hyp.prev_a, parent_h, parent_a, kind)
    if kind == "column":
        lp = ctx.pointer_logp(h, "col")
        mk = lambda i: Action(SELECT_COLUMN, i)
    elif kind == "table":
        lp = ctx.pointer_logp(h, "tab")
        mk = lambda i: Action(SELECT_TABLE, i)
    else:
        lp = ctx.rule_logp(h, kind)
        mk = lambda i: Action(APPLY, i)
    return h, m, lp.data[0], mk


def _apply_action(ctx, grammar, hyp: _Hyp, h, m, act: Action, logp: float) -> _Hyp:
    t = len(hyp.actions)
    frontier = hyp.frontier[:-1]
    if act.kind == APPLY:
        for child in reversed(grammar.productions[act.index].rhs):
            frontier.append((child, t))
    return _Hyp(
        frontier=frontier,
        h=h,
        m=m,
        prev_a=ctx.action_embedding(act),
        h_steps=hyp.h_steps + [h],
        a_steps=hyp.a_steps + [ctx.action_embedding(act)],
        actions=hyp.actions + [act],
        log_prob=hyp.log_prob + logp,
    )


def decode(
    store: ParameterStore,
    cfg: DecoderConfig,
    enc: EncodedInstance,
    grammar: Grammar,
    beam_size: int = 1,
    forced_rules: list[int] | None = None,
    forced_columns: list[int] | None = None,
    forced_tables: list[int] | None = None,
) -> DecodeResult:
    """Search for the best action sequence; beam_size 1 is greedy.

    forced_* override the model's choice positionally: the k-th interior
    step takes forced_rules[k], the k-th column leaf forced_columns[k], the
    k-th table leaf forced_tables[k]; past the end of a list the model's
    argmax decides. Forcing requires beam_size 1.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    forcing = any(x is not None for x in (forced_rules, forced_columns, forced_tables))
    if forcing and beam_size != 1:
        raise ValueError("forced replay only makes sense with beam_size 1")
    ctx = _make_ctx(store, cfg, enc, grammar, rng=None, train=False)
    s = store
    live = [
        _Hyp(
            frontier=[(ROOT_KIND, None)],
            h=s["dec/h0"],
            m=s["dec/m0"],
            prev_a=s["dec/init_action"],
        )
    ]
    done: list[_Hyp] = []
    counters = {"rule": 0, "col": 0, "tab": 0}
    n_steps = 0
    while live and n_steps < cfg.step_limit:
        n_steps += 1
        expansions = []
        for hyp in live:
            kind = hyp.frontier[-1][0]
            h, m, scores, mk = _hyp_step_scores(ctx, grammar, hyp)
            if forcing:
                idx = _forced_index(kind, counters, forced_rules, forced_columns, forced_tables)
                picks = [idx] if idx is not None else [int(np.argmax(scores))]
            else:
                k = min(beam_size, int(np.sum(scores > -1e29)))
                picks = np.argsort(-scores, kind="stable")[:k]
            for i in picks:
                expansions.append(
                    _apply_action(ctx, grammar, hyp, h, m, mk(int(i)), float(scores[int(i)]))
                )
        expansions.sort(key=lambda e: -e.log_prob)
        live = []
        for e in expansions:
            if not e.frontier:
                done.append(e)
            elif len(live) < beam_size:
                live.append(e)
        # extensions only lower log-probs, so nothing live can beat this
        if done and live and max(d.log_prob for d in done) >= live[0].log_prob:
            break
    if not done:
        best = max(live, key=lambda e: e.log_prob) if live else None
        return DecodeResult(
            actions=best.actions if best else [],
            finished=False,
            log_prob=best.log_prob if best else -math.inf,
            n_steps=n_steps,
        )
    best = max(done, key=lambda e: e.log_prob)
    return DecodeResult(
        actions=best.actions, finished=True, log_prob=best.log_prob, n_steps=n_steps
    )


def _forced_index(kind, counters, forced_rules, forced_columns, forced_tables):
    if kind == "column":
        seq, key = forced_columns, "col"
    elif kind == "table":
        seq, key = forced_tables, "tab"
    else:
        seq, key = forced_rules, "rule"
    i = counters[key]
    counters[key] += 1
    if seq is not None and i < len(seq):
        return seq[i]
    return None
