"""Deterministic string and value linking between a question and a schema.

Name linking scans question n-grams (lengths 1..5) in normalized token
space: an n-gram that equals a column/table name's full word sequence is an
exact match; one that is an order-preserving subsequence of it (or a
contiguous substring, if configured) is a partial match. Every question
token inside a matching n-gram receives the link, and exact beats partial
per (token, node).

Value linking consults an inverted index from normalized cell-value words
to the columns whose data contain them.
"""

import json
from dataclasses import dataclass

import numpy as np

from .schema import Schema, Token, norm_token, tokenize

__all__ = [
    "MATCH_NONE",
    "MATCH_PARTIAL",
    "MATCH_EXACT",
    "LinkResult",
    "name_link",
    "ValueIndex",
    "value_link",
    "link_question",
    "MAX_NGRAM",
]

MATCH_NONE = 0
MATCH_PARTIAL = 1
MATCH_EXACT = 2

MAX_NGRAM = 5


@dataclass
class LinkResult:
    """Match level per (question token, schema node), plus value flags."""

    col_match: np.ndarray  # (Q, C) int8 in {0,1,2}
    tab_match: np.ndarray  # (Q, T) int8
    col_value: np.ndarray  # (Q, C) bool

    @property
    def n_words(self) -> int:
        return self.col_match.shape[0]


def _is_subsequence(needle, hay) -> bool:
    it = iter(hay)
    return all(any(w == h for h in it) for w in needle)


def _is_substring(needle, hay) -> bool:
    n, m = len(needle), len(hay)
    return any(tuple(hay[i : i + n]) == tuple(needle) for i in range(m - n + 1))


def name_link(
    q_norms: list[str],
    names: list[tuple[str, ...]],
    partial: str = "subsequence",
) -> np.ndarray:
    """(Q, len(names)) match-level matrix.

    partial: "subsequence" (default) or "substring" for the stricter
    contiguous variant.
    """
    if partial not in ("subsequence", "substring"):
        raise ValueError(f"unknown partial match mode: {partial}")
    part_fn = _is_subsequence if partial == "subsequence" else _is_substring
    Q = len(q_norms)
    out = np.zeros((Q, len(names)), dtype=np.int8)
    for start in range(Q):
        for n in range(1, MAX_NGRAM + 1):
            end = start + n
            if end > Q:
                break
            gram = tuple(q_norms[start:end])
            for node, words in enumerate(names):
                if gram == words:
                    out[start:end, node] = MATCH_EXACT
                elif len(gram) <= len(words) and part_fn(gram, words):
                    level = out[start:end, node]
                    np.maximum(level, MATCH_PARTIAL, out=level)
    return out


class ValueIndex:
    """Inverted map: normalized cell-value word -> ids of columns holding it."""

    def __init__(self, word_to_cols: dict[str, set] | None = None):
        self._map: dict[str, set] = word_to_cols or {}

    @classmethod
    def build(cls, values_by_col: dict[int, list]) -> "ValueIndex":
        """values_by_col: col_id -> iterable of raw cell values (any type)."""
        index: dict[str, set] = {}
        for col_id, cells in values_by_col.items():
            for cell in cells:
                if cell is None:
                    continue
                for tok in tokenize(str(cell)):
                    index.setdefault(tok.norm, set()).add(col_id)
        return cls(index)

    def lookup(self, word: str) -> frozenset:
        return frozenset(self._map.get(norm_token(word), ()))

    def __len__(self):
        return len(self._map)

    def to_json(self) -> str:
        return json.dumps(
            {w: sorted(cols) for w, cols in sorted(self._map.items())},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> "ValueIndex":
        raw = json.loads(text)
        return cls({w: set(cols) for w, cols in raw.items()})


def value_link(q_norms: list[str], index: ValueIndex, n_columns: int) -> np.ndarray:
    """(Q, C) bool: question word appears among the column's cell values."""
    out = np.zeros((len(q_norms), n_columns), dtype=bool)
    for qi, word in enumerate(q_norms):
        for col in index.lookup(word):
            if col < n_columns:
                out[qi, col] = True
    return out


def link_question(
    tokens: list[Token],
    schema: Schema,
    value_index: ValueIndex | None = None,
    partial: str = "subsequence",
) -> LinkResult:
    """Full linking for one question against one schema."""
    q_norms = [t.norm for t in tokens]
    col_names = [c.words for c in schema.columns]
    tab_names = [t.words for t in schema.tables]
    col_match = name_link(q_norms, col_names, partial=partial)
    tab_match = name_link(q_norms, tab_names, partial=partial)
    if value_index is None:
        col_value = np.zeros((len(q_norms), schema.n_columns), dtype=bool)
    else:
        col_value = value_link(q_norms, value_index, schema.n_columns)
    return LinkResult(col_match=col_match, tab_match=tab_match, col_value=col_value)
