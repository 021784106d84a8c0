"""Dev-set scoring: canonical exact match, action accuracy, oracle modes.

Exact match compares predicted and gold trees after canonicalization, so
column order inside SELECT, join order, and literal placeholders do not
produce spurious mismatches. Action accuracy is teacher-forced: at every
gold prefix, did the model's argmax pick the gold action.

The oracle modes replay parts of the gold derivation through the decoder
to localize errors: "sketch" forces the interior rule choices and lets the
model pick schema items, "columns" does the opposite, "both" forces
everything and must reproduce the gold tree exactly.
"""

from dataclasses import dataclass

from .data import Dataset
from .decoder import decode, teacher_forced_nll
from .grammar import APPLY, SELECT_COLUMN, SELECT_TABLE, delinearize
from .sql_render import SqlAst, exact_match

__all__ = ["ORACLE_MODES", "EvalReport", "evaluate", "oracle_forcing", "oracle_sweep"]

ORACLE_MODES = ("none", "sketch", "columns", "both")


def oracle_forcing(actions, mode: str):
    """Split a gold action sequence into the forced streams decode() takes."""
    if mode not in ORACLE_MODES:
        raise ValueError(f"unknown oracle mode {mode!r}; expected one of {ORACLE_MODES}")
    if mode == "none" or actions is None:
        return None, None, None
    rules = [a.index for a in actions if a.kind == APPLY]
    cols = [a.index for a in actions if a.kind == SELECT_COLUMN]
    tabs = [a.index for a in actions if a.kind == SELECT_TABLE]
    if mode == "sketch":
        return rules, None, None
    if mode == "columns":
        return None, cols, tabs
    return rules, cols, tabs


@dataclass
class EvalReport:
    """Counts from one evaluation pass; ratios are derived properties."""

    oracle: str = "none"
    beam_size: int = 1
    n: int = 0
    n_finished: int = 0
    n_exact: int = 0
    n_actions: int = 0
    n_action_correct: int = 0
    n_unlabeled: int = 0

    @property
    def exact(self) -> float:
        return self.n_exact / self.n if self.n else 0.0

    @property
    def action_accuracy(self) -> float:
        return self.n_action_correct / self.n_actions if self.n_actions else 0.0

    def to_dict(self) -> dict:
        return {
            "oracle": self.oracle,
            "beam_size": self.beam_size,
            "n": self.n,
            "n_finished": self.n_finished,
            "n_exact": self.n_exact,
            "n_actions": self.n_actions,
            "n_action_correct": self.n_action_correct,
            "n_unlabeled": self.n_unlabeled,
            "exact": self.exact,
            "action_accuracy": self.action_accuracy,
        }

    def format_text(self) -> str:
        return (
            f"oracle={self.oracle} beam={self.beam_size} n={self.n} "
            f"exact={self.exact:.3f} ({self.n_exact}/{self.n}) "
            f"action_acc={self.action_accuracy:.3f} "
            f"({self.n_action_correct}/{self.n_actions}) "
            f"finished={self.n_finished}/{self.n}"
        )


def evaluate(model, dataset, beam_size: int = 1, oracle: str = "none") -> EvalReport:
    """Score every gold-labeled example; unlabeled ones are counted and skipped.

    Oracle modes use forced replay, which is greedy-only, so any beam_size
    is ignored for them.
    """
    examples = dataset.examples if isinstance(dataset, Dataset) else list(dataset)
    if oracle not in ORACLE_MODES:
        raise ValueError(f"unknown oracle mode {oracle!r}; expected one of {ORACLE_MODES}")
    bs = beam_size if oracle == "none" else 1
    rep = EvalReport(oracle=oracle, beam_size=bs)
    for ex in examples:
        if ex.actions is None:
            rep.n_unlabeled += 1
            continue
        rep.n += 1
        enc = model.encode_example(ex)
        _, stats = teacher_forced_nll(
            model.store, model.cfg.decoder, enc, ex.actions, model.grammar
        )
        rep.n_actions += stats["n_actions"]
        rep.n_action_correct += stats["n_correct"]
        fr, fc, ft = oracle_forcing(ex.actions, oracle)
        result = decode(
            model.store,
            model.cfg.decoder,
            enc,
            model.grammar,
            beam_size=bs,
            forced_rules=fr,
            forced_columns=fc,
            forced_tables=ft,
        )
        if not result.finished:
            continue
        rep.n_finished += 1
        pred = SqlAst(root=result.ast(model.grammar), schema_id=ex.schema_id)
        gold = SqlAst(
            root=delinearize(ex.actions, model.grammar), schema_id=ex.schema_id
        )
        if exact_match(pred, gold):
            rep.n_exact += 1
    return rep


def oracle_sweep(model, dataset, beam_size: int = 1) -> dict[str, EvalReport]:
    """One report per oracle mode, in ORACLE_MODES order."""
    return {m: evaluate(model, dataset, beam_size=beam_size, oracle=m) for m in ORACLE_MODES}
