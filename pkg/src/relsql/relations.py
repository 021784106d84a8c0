"""Pairwise relation labels between question words, columns, and tables.

Two layers:

* build_schema_graph emits the raw structural edge set between schema nodes
  (same-table, foreign-key, membership, key-of, plus table-level FK edges),
  each edge labeled literally by every predicate that holds for the pair.
* assemble_relation_ids collapses structure + string/value linking into one
  composite label id per ordered node pair, the form the encoder embeds.

Node order everywhere: columns first, then tables, then question words.
"""

from dataclasses import dataclass

import numpy as np

from .linking import LinkResult, MATCH_EXACT, MATCH_NONE, MATCH_PARTIAL
from .schema import Schema

__all__ = [
    "EdgeLabel",
    "build_schema_graph",
    "graph_to_json",
    "graph_to_dot",
    "clip_dist",
    "RelationVocab",
    "assemble_relation_ids",
    "QUESTION_DIST_CLIP",
]

QUESTION_DIST_CLIP = 2

# structural edge labels between schema nodes
EdgeLabel = str
SAME_TABLE = "same-table"
FK_COL_F = "foreign-key-col-f"
FK_COL_R = "foreign-key-col-r"
PK_F = "primary-key-f"
PK_R = "primary-key-r"
BELONGS_F = "belongs-to-f"
BELONGS_R = "belongs-to-r"
FK_TAB_F = "foreign-key-tab-f"
FK_TAB_R = "foreign-key-tab-r"
FK_TAB_B = "foreign-key-tab-b"
COL_IDENT = "column-identity"
TAB_IDENT = "table-identity"

_SCHEMA_EDGE_LABELS = [
    SAME_TABLE,
    FK_COL_F,
    FK_COL_R,
    PK_F,
    PK_R,
    BELONGS_F,
    BELONGS_R,
    FK_TAB_F,
    FK_TAB_R,
    FK_TAB_B,
    COL_IDENT,
    TAB_IDENT,
]


def clip_dist(delta: int, limit: int = QUESTION_DIST_CLIP) -> int:
    return max(-limit, min(limit, delta))


def build_schema_graph(schema: Schema) -> dict[tuple[int, int], set]:
    """All structural labels per ordered node pair.

    Node ids: columns keep their col_id, table t becomes n_columns + t.
    Every predicate that holds is emitted, so a pair can carry several
    labels (e.g. both directions of a mutual table FK plus the "both" label).
    """
    C = schema.n_columns
    edges: dict[tuple[int, int], set] = {}

    def add(i, j, label):
        edges.setdefault((i, j), set()).add(label)

    for col in schema.columns:
        add(col.col_id, col.col_id, COL_IDENT)
    for tab in schema.tables:
        add(C + tab.table_id, C + tab.table_id, TAB_IDENT)

    for tab in schema.tables:
        for a in tab.column_ids:
            for b in tab.column_ids:
                if a != b:
                    add(a, b, SAME_TABLE)

    for fk_from, fk_to in sorted(schema.fk_pairs()):
        add(fk_from, fk_to, FK_COL_F)
        add(fk_to, fk_from, FK_COL_R)

    for col in schema.columns:
        t_node = C + col.table_id
        if col.is_primary:
            add(col.col_id, t_node, PK_F)
            add(t_node, col.col_id, PK_R)
        else:
            add(col.col_id, t_node, BELONGS_F)
            add(t_node, col.col_id, BELONGS_R)

    # table-level FK edges: does any column of x reference any column of y
    refs = set()
    for fk_from, fk_to in schema.fk_pairs():
        refs.add((schema.columns[fk_from].table_id, schema.columns[fk_to].table_id))
    for x in range(schema.n_tables):
        for y in range(schema.n_tables):
            if x == y:
                continue
            fwd = (x, y) in refs
            rev = (y, x) in refs
            if fwd:
                add(C + x, C + y, FK_TAB_F)
            if rev:
                add(C + x, C + y, FK_TAB_R)
            if fwd and rev:
                add(C + x, C + y, FK_TAB_B)

    return edges


def graph_to_json(schema: Schema) -> dict:
    edges = build_schema_graph(schema)
    C = schema.n_columns

    def node_name(i):
        if i < C:
            col = schema.columns[i]
            return f"col:{schema.tables[col.table_id].orig_name}.{col.orig_name}"
        return f"tab:{schema.tables[i - C].orig_name}"

    return {
        "schema_id": schema.schema_id,
        "nodes": [node_name(i) for i in range(C + schema.n_tables)],
        "edges": [
            {"src": i, "dst": j, "labels": sorted(labels)}
            for (i, j), labels in sorted(edges.items())
        ],
    }


def graph_to_dot(schema: Schema) -> str:
    data = graph_to_json(schema)
    lines = [f'digraph "{schema.schema_id}" {{']
    for i, name in enumerate(data["nodes"]):
        shape = "box" if name.startswith("tab:") else "ellipse"
        lines.append(f'  n{i} [label="{name}", shape={shape}];')
    for e in data["edges"]:
        if e["src"] == e["dst"]:
            continue  # identity self-loops only add clutter
        lines.append(f'  n{e["src"]} -> n{e["dst"]} [label="{",".join(e["labels"])}"];')
    lines.append("}")
    return "\n".join(lines)


# -- composite label vocabulary ---------------------------------------------

_GENERIC = {"cc": "col-col", "ct": "col-tab", "tc": "tab-col", "tt": "tab-tab"}
_MATCH_NAMES = {MATCH_NONE: "none", MATCH_PARTIAL: "partial", MATCH_EXACT: "exact"}


class RelationVocab:
    """Stable integer ids for pairwise labels, in two parallel codings.

    Composite ids give every distinct label combination its own id (the
    one-embedding-per-label mode). Base ids drop the linking outcome and
    keep only the structural / positional / pair-class label; together with
    the 3-way match level and the binary value flag they form the factored
    coding used by the concatenated embedding mode.
    """

    def __init__(self, dist_clip: int = QUESTION_DIST_CLIP):
        self.dist_clip = dist_clip
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for name in _SCHEMA_EDGE_LABELS:
            self._add(name)
        for g in _GENERIC.values():
            self._add(g)
        for d in range(-dist_clip, dist_clip + 1):
            self._add(f"question-dist-{d}")
        for match in ("none", "partial", "exact"):
            for value in ("", "+value"):
                self._add(f"question-column-{match}{value}")
                self._add(f"column-question-{match}{value}")
        for match in ("none", "partial", "exact"):
            self._add(f"question-table-{match}")
            self._add(f"table-question-{match}")

        # factored coding: structural labels + dist + bare direction classes
        self._base_names = (
            list(_SCHEMA_EDGE_LABELS)
            + list(_GENERIC.values())
            + [f"question-dist-{d}" for d in range(-dist_clip, dist_clip + 1)]
            + ["question-column", "column-question", "question-table", "table-question"]
        )
        self._base_index = {n: i for i, n in enumerate(self._base_names)}

    def _add(self, name: str) -> int:
        self._index[name] = len(self._names)
        self._names.append(name)
        return self._index[name]

    def __len__(self):
        return len(self._names)

    @property
    def n_base(self) -> int:
        return len(self._base_names)

    def id(self, name: str) -> int:
        return self._index[name]

    def name(self, rel_id: int) -> str:
        return self._names[rel_id]

    def names(self) -> list[str]:
        return list(self._names)

    def base_id(self, name: str) -> int:
        return self._base_index[name]

    def base_names(self) -> list[str]:
        return list(self._base_names)

    def qq(self, delta: int) -> int:
        return self.id(f"question-dist-{clip_dist(delta, self.dist_clip)}")

    def qc(self, match: int, has_value: bool) -> int:
        return self.id(
            f"question-column-{_MATCH_NAMES[match]}{'+value' if has_value else ''}"
        )

    def cq(self, match: int, has_value: bool) -> int:
        return self.id(
            f"column-question-{_MATCH_NAMES[match]}{'+value' if has_value else ''}"
        )

    def qt(self, match: int) -> int:
        return self.id(f"question-table-{_MATCH_NAMES[match]}")

    def tq(self, match: int) -> int:
        return self.id(f"table-question-{_MATCH_NAMES[match]}")


# priority: most specific structural label wins within each pair class
_COL_COL_PRIORITY = [FK_COL_F, FK_COL_R, SAME_TABLE]
_COL_TAB_PRIORITY = [PK_F, BELONGS_F]
_TAB_COL_PRIORITY = [PK_R, BELONGS_R]
_TAB_TAB_PRIORITY = [FK_TAB_B, FK_TAB_F, FK_TAB_R]


@dataclass
class RelationFeatures:
    """Pairwise labels for one encoded instance, in both codings.

    composite: full label id per ordered pair (composite-id embedding mode)
    base:      structural/positional/pair-class id (concat mode, family 1)
    match:     name-link level 0/1/2, or -1 where not applicable (family 2)
    value:     value-link flag 0/1, or -1 where not applicable (family 3)
    """

    composite: np.ndarray  # (N, N) int16
    base: np.ndarray  # (N, N) int16
    match: np.ndarray  # (N, N) int8
    value: np.ndarray  # (N, N) int8

    @property
    def n(self) -> int:
        return self.composite.shape[0]


def assemble_relation_ids(
    schema: Schema,
    link: LinkResult,
    vocab: RelationVocab,
    *,
    use_schema_graph: bool = True,
    use_linking: bool = True,
) -> RelationFeatures:
    """Label every ordered (node, node) pair.

    Ablations: use_schema_graph=False degrades all structural edges to the
    generic pair-class labels (identities stay); use_linking=False forces
    every question/schema pair to the no-match, no-value label.
    """
    C, T = schema.n_columns, schema.n_tables
    Q = link.n_words
    N = C + T + Q
    comp = np.zeros((N, N), dtype=np.int16)
    base = np.zeros((N, N), dtype=np.int16)
    match = np.full((N, N), -1, dtype=np.int8)
    value = np.full((N, N), -1, dtype=np.int8)

    edges = build_schema_graph(schema) if use_schema_graph else {}

    def pick(labels, priority, fallback):
        if labels:
            for cand in priority:
                if cand in labels:
                    return cand
        return fallback

    for i in range(C + T):
        for j in range(C + T):
            if i == j:
                name = COL_IDENT if i < C else TAB_IDENT
            else:
                labels = edges.get((i, j), ())
                if i < C and j < C:
                    name = pick(labels, _COL_COL_PRIORITY, _GENERIC["cc"])
                elif i < C:
                    name = pick(labels, _COL_TAB_PRIORITY, _GENERIC["ct"])
                elif j < C:
                    name = pick(labels, _TAB_COL_PRIORITY, _GENERIC["tc"])
                else:
                    name = pick(labels, _TAB_TAB_PRIORITY, _GENERIC["tt"])
            comp[i, j] = vocab.id(name)
            base[i, j] = vocab.base_id(name)

    off = C + T
    for a in range(Q):
        for b in range(Q):
            dist_name = f"question-dist-{clip_dist(b - a, vocab.dist_clip)}"
            comp[off + a, off + b] = vocab.id(dist_name)
            base[off + a, off + b] = vocab.base_id(dist_name)

    if use_linking:
        cmatch, tmatch, cvalue = link.col_match, link.tab_match, link.col_value
    else:
        cmatch = np.zeros((Q, C), dtype=np.int8)
        tmatch = np.zeros((Q, T), dtype=np.int8)
        cvalue = np.zeros((Q, C), dtype=bool)

    for a in range(Q):
        qa = off + a
        for c in range(C):
            m, v = int(cmatch[a, c]), bool(cvalue[a, c])
            comp[qa, c] = vocab.qc(m, v)
            comp[c, qa] = vocab.cq(m, v)
            base[qa, c] = vocab.base_id("question-column")
            base[c, qa] = vocab.base_id("column-question")
            match[qa, c] = match[c, qa] = m
            value[qa, c] = value[c, qa] = int(v)
        for t in range(T):
            m = int(tmatch[a, t])
            comp[qa, C + t] = vocab.qt(m)
            comp[C + t, qa] = vocab.tq(m)
            base[qa, C + t] = vocab.base_id("question-table")
            base[C + t, qa] = vocab.base_id("table-question")
            match[qa, C + t] = match[C + t, qa] = m

    return RelationFeatures(composite=comp, base=base, match=match, value=value)
