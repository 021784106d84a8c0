"""Relational schema model and the shared text normalizer.

One tokenizer serves questions, schema names, and database cell values so
that string comparisons during linking all happen in the same normal form:
lowercased, camelCase/underscore split, light plural stripping, canonical
number rendering.
"""

import re
from dataclasses import dataclass, field

__all__ = [
    "SchemaError",
    "Token",
    "tokenize",
    "name_words",
    "norm_token",
    "canon_number",
    "Column",
    "Table",
    "ForeignKey",
    "Schema",
]


class SchemaError(ValueError):
    """Raised for structurally invalid schemas."""


# -- text normalization -----------------------------------------------------

_TOKEN_RE = re.compile(r"[A-Za-z]+|\d+\.\d+|\d+|[^\sA-Za-z\d]")
_CAMEL_RE = re.compile(r"(?<=[a-z\d])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")
_NUM_RE = re.compile(r"\d+(?:\.\d+)?")


@dataclass(frozen=True)
class Token:
    text: str  # lowercased surface form
    norm: str  # matching form (stemmed / canonical number)
    start: int  # char offset into the original string
    end: int


def canon_number(s: str) -> str:
    """Canonical rendering: no leading/trailing zero noise, '4.0' == '4'."""
    f = float(s)
    if f == int(f):
        return str(int(f))
    out = repr(f)
    return out


def _strip_plural(w: str) -> str:
    if len(w) > 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) > 4 and w.endswith(("ses", "xes", "ches", "shes")):
        return w[:-2]
    if len(w) > 3 and w.endswith("s") and not w.endswith(("ss", "us", "is")):
        return w[:-1]
    return w


def norm_token(text: str) -> str:
    text = text.lower()
    if _NUM_RE.fullmatch(text):
        return canon_number(text)
    if text.isalpha():
        return _strip_plural(text)
    return text


def tokenize(text: str) -> list[Token]:
    """Split free text into word / number / punctuation tokens with spans."""
    out = []
    for m in _TOKEN_RE.finditer(text):
        surface = m.group(0).lower()
        out.append(Token(surface, norm_token(surface), m.start(), m.end()))
    return out


def name_words(name: str) -> tuple[str, ...]:
    """Normalized word sequence of a schema identifier.

    Splits snake_case and camelCase, drops punctuation, stems each word.
    """
    spaced = _CAMEL_RE.sub(" ", name)
    spaced = re.sub(r"[_\-./]+", " ", spaced)
    words = []
    for m in _TOKEN_RE.finditer(spaced):
        tok = m.group(0).lower()
        if not tok.isalnum():
            continue
        words.append(norm_token(tok))
    return tuple(words)


# -- schema model -----------------------------------------------------------

_NUMBER_TYPES = {"number", "real", "integer", "int", "float", "double", "year", "decimal"}


def canon_col_type(raw: str) -> str:
    return "number" if raw.strip().lower() in _NUMBER_TYPES else "text"


@dataclass(frozen=True)
class Column:
    col_id: int
    table_id: int
    orig_name: str
    words: tuple[str, ...]
    col_type: str  # "number" | "text"
    is_primary: bool = False


@dataclass(frozen=True)
class Table:
    table_id: int
    orig_name: str
    words: tuple[str, ...]
    column_ids: tuple[int, ...]


@dataclass(frozen=True)
class ForeignKey:
    from_col: int  # referencing column
    to_col: int  # referenced column (a primary key)


@dataclass
class Schema:
    """Validated schema: every column owned by one table, FKs point at the
    primary key of a different table."""

    schema_id: str
    tables: list[Table]
    columns: list[Column]
    foreign_keys: list[ForeignKey] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def n_tables(self) -> int:
        return len(self.tables)

    def table_of(self, col_id: int) -> Table:
        return self.tables[self.columns[col_id].table_id]

    def fk_pairs(self) -> set:
        """(from_col, to_col) pairs."""
        return {(fk.from_col, fk.to_col) for fk in self.foreign_keys}

    def validate(self) -> None:
        for i, col in enumerate(self.columns):
            if col.col_id != i:
                raise SchemaError(f"{self.schema_id}: column ids must be dense, got {col.col_id} at {i}")
            if not (0 <= col.table_id < len(self.tables)):
                raise SchemaError(
                    f"{self.schema_id}: column {col.orig_name!r} references missing table {col.table_id}"
                )
        for t, tab in enumerate(self.tables):
            if tab.table_id != t:
                raise SchemaError(f"{self.schema_id}: table ids must be dense")
            seen = set()
            for c in tab.column_ids:
                if not (0 <= c < len(self.columns)) or self.columns[c].table_id != t:
                    raise SchemaError(
                        f"{self.schema_id}: table {tab.orig_name!r} lists column {c} it does not own"
                    )
                name = self.columns[c].orig_name.lower()
                if name in seen:
                    raise SchemaError(
                        f"{self.schema_id}: duplicate column {name!r} in table {tab.orig_name!r}"
                    )
                seen.add(name)
        # each column must appear in its table's list exactly once
        listed = [c for tab in self.tables for c in tab.column_ids]
        if sorted(listed) != list(range(len(self.columns))):
            raise SchemaError(f"{self.schema_id}: table column lists do not partition the columns")
        for fk in self.foreign_keys:
            for end in (fk.from_col, fk.to_col):
                if not (0 <= end < len(self.columns)):
                    raise SchemaError(f"{self.schema_id}: foreign key references missing column {end}")
            src, dst = self.columns[fk.from_col], self.columns[fk.to_col]
            if src.table_id == dst.table_id:
                raise SchemaError(
                    f"{self.schema_id}: foreign key {src.orig_name!r}->{dst.orig_name!r} stays inside one table"
                )
            if not dst.is_primary:
                raise SchemaError(
                    f"{self.schema_id}: foreign key target {dst.orig_name!r} is not a primary key"
                )

    def column_label_words(self, col_id: int) -> tuple[str, ...]:
        """Type word plus name words; what the column label encoder consumes."""
        col = self.columns[col_id]
        return (col.col_type,) + col.words
