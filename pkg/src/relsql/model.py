"""End-to-end parser assembly: parameters, per-example loss, prediction."""

import hashlib
import json
from dataclasses import asdict, dataclass, field

from .data import Example, Vocab
from .decoder import (
    DecodeResult,
    DecoderConfig,
    build_decoder_params,
    decode,
    teacher_forced_nll,
)
from .encoder import EncodedInstance, EncoderConfig, build_encoder_params, encode
from .grammar import Grammar, load_default_grammar
from .nn import ParameterStore, Rng
from .nn import tensor as tz
from .relations import RelationVocab

__all__ = [
    "ModelConfig",
    "config_fingerprint",
    "align_loss",
    "SemanticParser",
]

_EVAL_RNG = Rng.from_seed(0)  # eval-mode forwards ignore the stream


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    align_weight: float = 1.0


def config_fingerprint(cfg: ModelConfig) -> str:
    """Stable digest used to refuse checkpoint/config mismatches."""
    blob = json.dumps(asdict(cfg), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def align_loss(align_col, align_tab, rel_cols, rel_tabs):
    """Penalty for gold schema elements no question word points at.

    For every column (table) the gold query mentions, take the single best
    word mass in its alignment column and charge -log of it; average per
    side and add the sides. A side without gold mentions is omitted; when
    both are empty the loss is None.
    """
    total = None
    for matrix, rel in ((align_col, rel_cols), (align_tab, rel_tabs)):
        if not rel:
            continue
        sub = matrix[:, sorted(rel)]
        best = tz.max_(sub, axis=0)
        term = -(tz.log(best).mean())
        total = term if total is None else total + term
    return total


class SemanticParser:
    """Config, vocabulary, grammar, and one parameter store, wired together."""

    def __init__(
        self,
        cfg: ModelConfig,
        vocab: Vocab,
        grammar: Grammar | None = None,
        seed: int = 0,
    ):
        self.cfg = cfg
        self.vocab = vocab
        self.grammar = grammar or load_default_grammar()
        self.seed = seed
        self.store = ParameterStore()
        init_rng = Rng.from_seed(seed)
        build_encoder_params(
            self.store, cfg.encoder, len(vocab), RelationVocab(), init_rng
        )
        build_decoder_params(
            self.store, cfg.decoder, cfg.encoder.d_model, self.grammar, init_rng
        )

    def encode_example(
        self, ex: Example, rng: Rng | None = None, train: bool = False
    ) -> EncodedInstance:
        return encode(self.store, self.cfg.encoder, ex.inputs, rng or _EVAL_RNG, train)

    def example_loss(self, ex: Example, rng: Rng | None = None, train: bool = True):
        """(loss Tensor, stats dict) for one gold-labeled example."""
        if ex.actions is None:
            raise ValueError("example has no gold actions to train on")
        enc = self.encode_example(ex, rng, train)
        nll, stats = teacher_forced_nll(
            self.store, self.cfg.decoder, enc, ex.actions, self.grammar, rng, train
        )
        al = align_loss(enc.align_col, enc.align_tab, ex.gold_columns, ex.gold_tables)
        if al is None or self.cfg.align_weight == 0.0:
            loss = nll
        else:
            loss = nll + self.cfg.align_weight * al
        stats = dict(stats)
        stats["nll"] = float(nll.data)
        stats["align"] = 0.0 if al is None else float(al.data)
        return loss, stats

    def predict(
        self,
        ex: Example,
        beam_size: int = 1,
        forced_rules=None,
        forced_columns=None,
        forced_tables=None,
    ) -> DecodeResult:
        enc = self.encode_example(ex)
        return decode(
            self.store,
            self.cfg.decoder,
            enc,
            self.grammar,
            beam_size=beam_size,
            forced_rules=forced_rules,
            forced_columns=forced_columns,
            forced_tables=forced_tables,
        )
