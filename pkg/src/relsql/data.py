"""Corpus handling: vocabulary, schema loading, example preprocessing.

Schemas arrive in the common tables.json layout (db_id,
table_names_original, column_names_original with a leading ``*`` entry,
column_types, primary_keys, foreign_keys); the star column is dropped and
ids shift down by one. Examples are a JSON list of {question, db_id, sql}
objects; gold SQL outside the supported subset is skipped with a recorded
reason rather than failing the load. Table contents, used only for value
linking, live in one CSV per table under content/<db_id>/.
"""

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .encoder import EncoderInputs
from .grammar import (
    SELECT_COLUMN,
    SELECT_TABLE,
    Action,
    Grammar,
    linearize,
    load_default_grammar,
)
from .linking import ValueIndex, link_question
from .relations import RelationVocab, assemble_relation_ids
from .schema import (
    Column,
    ForeignKey,
    Schema,
    SchemaError,
    Table,
    canon_col_type,
    name_words,
    tokenize,
)
from .sql_parser import SqlParseError, parse_sql

__all__ = [
    "UNK",
    "Vocab",
    "schema_from_spider",
    "load_schemas",
    "load_table_values",
    "build_value_index",
    "Example",
    "preprocess",
    "Dataset",
    "load_dataset",
    "build_vocab",
]

UNK = "<unk>"
_REL_VOCAB = RelationVocab()

# ablation -> (use_schema_graph, use_linking) for relation assembly
ABLATIONS = {
    "full": (True, True),
    "no_linking": (True, False),
    "no_graph": (False, True),
}


class Vocab:
    """Word-to-id map; id 0 is the unknown-word bucket."""

    def __init__(self, words: list[str]):
        if not words or words[0] != UNK:
            raise ValueError(f"vocabulary must start with {UNK!r}")
        if len(set(words)) != len(words):
            raise ValueError("vocabulary contains duplicates")
        self._words = list(words)
        self._index = {w: i for i, w in enumerate(self._words)}

    @classmethod
    def build(cls, words, min_count: int = 1) -> "Vocab":
        """Frequency-then-alphabetical order makes the ids reproducible."""
        counts = Counter(words)
        counts.pop(UNK, None)
        kept = sorted(
            (w for w, c in counts.items() if c >= min_count),
            key=lambda w: (-counts[w], w),
        )
        return cls([UNK] + kept)

    def id(self, word: str) -> int:
        return self._index.get(word, 0)

    def encode(self, words) -> np.ndarray:
        return np.array([self.id(w) for w in words], dtype=np.int64)

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    @property
    def words(self) -> list[str]:
        return list(self._words)

    def to_json(self) -> str:
        return json.dumps(self._words, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str) -> "Vocab":
        return cls(json.loads(text))


# -- schemas -----------------------------------------------------------------


def schema_from_spider(entry: dict) -> Schema:
    """One tables.json entry to a validated Schema; raises SchemaError."""
    db_id = entry["db_id"]
    raw_cols = entry["column_names_original"]
    raw_types = entry["column_types"]
    if not raw_cols or raw_cols[0][1] != "*" or raw_cols[0][0] != -1:
        raise SchemaError(f"{db_id}: the first column entry must be the star")
    if len(raw_cols) != len(raw_types):
        raise SchemaError(f"{db_id}: column names and types disagree in length")
    pks = set(entry.get("primary_keys", []))
    columns = []
    for new_id, ((t_idx, name), raw_type) in enumerate(zip(raw_cols[1:], raw_types[1:])):
        if t_idx < 0:
            raise SchemaError(f"{db_id}: star column not in first position")
        columns.append(
            Column(
                col_id=new_id,
                table_id=t_idx,
                orig_name=name,
                words=name_words(name),
                col_type=canon_col_type(raw_type),
                is_primary=(new_id + 1) in pks,
            )
        )
    tables = [
        Table(
            table_id=i,
            orig_name=name,
            words=name_words(name),
            column_ids=tuple(c.col_id for c in columns if c.table_id == i),
        )
        for i, name in enumerate(entry["table_names_original"])
    ]
    fks = [ForeignKey(a - 1, b - 1) for a, b in entry.get("foreign_keys", [])]
    return Schema(db_id, tables, columns, fks)


def load_schemas(path) -> dict[str, Schema]:
    with open(path) as f:
        entries = json.load(f)
    out: dict[str, Schema] = {}
    for entry in entries:
        schema = schema_from_spider(entry)
        if schema.schema_id in out:
            raise SchemaError(f"duplicate schema id {schema.schema_id!r}")
        out[schema.schema_id] = schema
    return out


# -- table contents ----------------------------------------------------------


def load_table_values(content_root, schema: Schema) -> dict[int, list[str]]:
    """Cells per column from content/<schema_id>/<table>.csv files.

    Tables without a file simply contribute nothing; an unknown header name
    is an error since it usually means a generator/schema mismatch.
    """
    out: dict[int, list[str]] = {}
    root = Path(content_root) / schema.schema_id
    for tab in schema.tables:
        path = root / f"{tab.orig_name}.csv"
        if not path.exists():
            continue
        with path.open(newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                continue
            by_name = {schema.columns[c].orig_name.lower(): c for c in tab.column_ids}
            col_ids = []
            for h in header:
                cid = by_name.get(h.strip().lower())
                if cid is None:
                    raise SchemaError(
                        f"{schema.schema_id}/{tab.orig_name}: unknown column {h!r} in csv header"
                    )
                col_ids.append(cid)
            for row in reader:
                for cid, cell in zip(col_ids, row):
                    out.setdefault(cid, []).append(cell)
    return out


def build_value_index(content_root, schema: Schema) -> ValueIndex:
    return ValueIndex.build(load_table_values(content_root, schema))


# -- examples ----------------------------------------------------------------


@dataclass
class Example:
    question: str
    schema_id: str
    inputs: EncoderInputs
    sql: str | None = None
    actions: list[Action] | None = None
    gold_columns: frozenset = frozenset()
    gold_tables: frozenset = frozenset()

    @property
    def has_gold(self) -> bool:
        return self.actions is not None


def preprocess(
    question: str,
    schema: Schema,
    vocab: Vocab,
    value_index: ValueIndex | None = None,
    sql: str | None = None,
    grammar: Grammar | None = None,
    ablation: str = "full",
) -> Example:
    """Tokenize, link, featurize one question; parse gold SQL when given.

    Raises SqlParseError when the gold query falls outside the subset; the
    caller decides whether that skips the example or aborts. ablation picks
    which relation families reach the encoder (see ABLATIONS).
    """
    if ablation not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablation!r}; pick from {sorted(ABLATIONS)}")
    use_graph, use_linking = ABLATIONS[ablation]
    tokens = tokenize(question)
    if not tokens:
        raise ValueError("cannot preprocess an empty question")
    link = link_question(tokens, schema, value_index)
    feats = assemble_relation_ids(
        schema, link, _REL_VOCAB, use_schema_graph=use_graph, use_linking=use_linking
    )
    q_ids = vocab.encode([t.norm for t in tokens])
    rows = [vocab.encode(schema.column_label_words(c.col_id)) for c in schema.columns]
    rows += [vocab.encode(t.words) for t in schema.tables]
    width = max((len(r) for r in rows), default=1)
    label_ids = np.full((len(rows), max(width, 1)), -1, dtype=np.int64)
    for i, r in enumerate(rows):
        label_ids[i, : len(r)] = r
    inputs = EncoderInputs(
        q_ids=q_ids,
        label_ids=label_ids,
        n_columns=schema.n_columns,
        n_tables=schema.n_tables,
        feats=feats,
    )
    actions = None
    gold_cols: frozenset = frozenset()
    gold_tabs: frozenset = frozenset()
    if sql is not None:
        ast = parse_sql(sql, schema, grammar or load_default_grammar())
        actions = linearize(ast.root)
        gold_cols = frozenset(a.index for a in actions if a.kind == SELECT_COLUMN)
        gold_tabs = frozenset(a.index for a in actions if a.kind == SELECT_TABLE)
    return Example(
        question=question,
        schema_id=schema.schema_id,
        inputs=inputs,
        sql=sql,
        actions=actions,
        gold_columns=gold_cols,
        gold_tables=gold_tabs,
    )


@dataclass
class Dataset:
    examples: list[Example]
    skipped: list[tuple[int, str, str]] = field(default_factory=list)

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)

    def __len__(self):
        return len(self.examples)


def load_dataset(
    path,
    schemas: dict[str, Schema],
    vocab: Vocab,
    value_indexes: dict[str, ValueIndex] | None = None,
    grammar: Grammar | None = None,
    ablation: str = "full",
) -> Dataset:
    with open(path) as f:
        entries = json.load(f)
    grammar = grammar or load_default_grammar()
    examples: list[Example] = []
    skipped: list[tuple[int, str, str]] = []
    for i, e in enumerate(entries):
        question = e["question"]
        db_id = e["db_id"]
        sql = e.get("sql") or e.get("query")
        if db_id not in schemas:
            raise SchemaError(f"example {i} references unknown schema {db_id!r}")
        vi = value_indexes.get(db_id) if value_indexes else None
        try:
            examples.append(
                preprocess(question, schemas[db_id], vocab, vi, sql, grammar, ablation)
            )
        except SqlParseError as err:
            skipped.append((i, question, str(err)))
    return Dataset(examples=examples, skipped=skipped)


def build_vocab(example_paths, schemas: dict[str, Schema], min_count: int = 1) -> Vocab:
    """Question words plus every schema label word, deterministically ordered."""

    def words():
        for path in example_paths:
            with open(path) as f:
                for e in json.load(f):
                    for t in tokenize(e["question"]):
                        yield t.norm
        for sid in sorted(schemas):
            schema = schemas[sid]
            for c in schema.columns:
                yield from schema.column_label_words(c.col_id)
            for t in schema.tables:
                yield from t.words

    return Vocab.build(words(), min_count=min_count)
