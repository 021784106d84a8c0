"""Deterministic SQL text from grammar trees, plus canonical comparison.

Literals in the tree are placeholders, so rendering emits canonical stand-ins
(1 for numeric positions, 'value' for text) and LIMIT always renders as
LIMIT 1. Join conditions are not stored in the tree; they are re-derived
from the schema's foreign keys when exactly one key connects the joined
tables, otherwise the join renders bare.

exact_match compares canonical forms: AND/OR chains flatten to ordered-
insensitive sets, select items and grouped/joined table lists compare as
multisets, ORDER BY stays ordered.
"""

import re
from dataclasses import dataclass

from .grammar import AstNode, GrammarError
from .schema import Schema

__all__ = [
    "SqlAst",
    "render_sql",
    "canonicalize",
    "exact_match",
    "CMP_SYMBOLS",
    "AGG_NAMES",
]

CMP_SYMBOLS = {
    "Eq": "=",
    "Ne": "!=",
    "Lt": "<",
    "Gt": ">",
    "Le": "<=",
    "Ge": ">=",
    "Like": "LIKE",
}
AGG_NAMES = {"Count": "count", "Sum": "sum", "Avg": "avg", "Min": "min", "Max": "max"}

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z_0-9]*$")


@dataclass
class SqlAst:
    """A grammar tree bound to the schema its pointers index into."""

    root: AstNode
    schema_id: str


def _ident(name: str) -> str:
    return name if _IDENT_RE.match(name) else f'"{name}"'


class _Renderer:
    def __init__(self, schema: Schema):
        self.schema = schema

    def qual(self, col_id: int) -> str:
        col = self.schema.columns[col_id]
        table = self.schema.tables[col.table_id]
        return f"{_ident(table.orig_name)}.{_ident(col.orig_name)}"

    def placeholder(self, col_id: int) -> str:
        return "1" if self.schema.columns[col_id].col_type == "number" else "'value'"

    def query(self, node: AstNode) -> str:
        sel, frm, where, group, order, limit = node.children
        parts = [self.select(sel), self.from_clause(frm)]
        if where.prod.name == "Where":
            parts.append("WHERE " + self.cond(where.children[0]))
        if group.prod.name == "GroupBy":
            parts.append(self.group_by(group))
        if order.prod.name == "OrderBy":
            parts.append(self.order_by(order))
        if limit.prod.name == "Limit":
            parts.append("LIMIT 1")
        return " ".join(parts)

    def select(self, node: AstNode) -> str:
        distinct, items = node.children
        head = "SELECT DISTINCT" if distinct.prod.name == "Distinct" else "SELECT"
        rendered = ", ".join(self.sel_item(ch) for ch in items.children)
        return f"{head} {rendered}"

    def sel_item(self, node: AstNode) -> str:
        name = node.prod.name
        if name == "SelCol":
            return self.qual(node.children[0].ref)
        if name == "SelAggCol":
            agg, col = node.children
            return f"{AGG_NAMES[agg.prod.name]}({self.qual(col.ref)})"
        if name == "SelStar":
            return "*"
        return "count(*)"

    def from_clause(self, node: AstNode) -> str:
        tids = [ch.ref for ch in node.children[0].children]
        parts = [f"FROM {_ident(self.schema.tables[tids[0]].orig_name)}"]
        earlier = {tids[0]}
        for t in tids[1:]:
            join = f"JOIN {_ident(self.schema.tables[t].orig_name)}"
            links = [
                fk
                for fk in self.schema.foreign_keys
                if (
                    self.schema.columns[fk.from_col].table_id == t
                    and self.schema.columns[fk.to_col].table_id in earlier
                )
                or (
                    self.schema.columns[fk.to_col].table_id == t
                    and self.schema.columns[fk.from_col].table_id in earlier
                )
            ]
            if len(links) == 1:
                fk = links[0]
                join += f" ON {self.qual(fk.from_col)} = {self.qual(fk.to_col)}"
            parts.append(join)
            earlier.add(t)
        return " ".join(parts)

    # precedence: OR < AND < atom; parentheses preserve the parsed shape
    _PREC = {"Or": 1, "And": 2, "Pred": 3}

    def cond(self, node: AstNode) -> str:
        name = node.prod.name
        if name == "Pred":
            return self.predicate(node.children[0])
        left, right = node.children
        p = self._PREC[name]
        ls = self.cond(left)
        rs = self.cond(right)
        if self._PREC[left.prod.name] < p:
            ls = f"({ls})"
        if self._PREC[right.prod.name] <= p:
            rs = f"({rs})"
        return f"{ls} {name.upper()} {rs}"

    def predicate(self, node: AstNode) -> str:
        if node.prod.name == "Between":
            col = node.children[0].ref
            ph = self.placeholder(col)
            return f"{self.qual(col)} BETWEEN {ph} AND {ph}"
        op, col = node.children
        sym = CMP_SYMBOLS[op.prod.name]
        ph = "'value'" if op.prod.name == "Like" else self.placeholder(col.ref)
        return f"{self.qual(col.ref)} {sym} {ph}"

    def group_by(self, node: AstNode) -> str:
        cols, having = node.children
        out = "GROUP BY " + ", ".join(self.qual(ch.ref) for ch in cols.children)
        if having.prod.name == "Having":
            out += " HAVING " + self.hcond(having.children[0])
        return out

    def hcond(self, node: AstNode) -> str:
        if node.prod.name == "HavingCountStar":
            op = node.children[0]
            sym = CMP_SYMBOLS[op.prod.name]
            ph = "'value'" if op.prod.name == "Like" else "1"
            return f"count(*) {sym} {ph}"
        agg, col, op = node.children
        sym = CMP_SYMBOLS[op.prod.name]
        if op.prod.name == "Like":
            ph = "'value'"
        elif agg.prod.name == "Count":
            ph = "1"
        else:
            ph = self.placeholder(col.ref)
        return f"{AGG_NAMES[agg.prod.name]}({self.qual(col.ref)}) {sym} {ph}"

    def order_by(self, node: AstNode) -> str:
        keys = ", ".join(self.ord_key(ch) for ch in node.children[0].children)
        return f"ORDER BY {keys}"

    def ord_key(self, node: AstNode) -> str:
        name = node.prod.name
        if name == "ByCol":
            col, direction = node.children
            expr = self.qual(col.ref)
        elif name == "ByAggCol":
            agg, col, direction = node.children
            expr = f"{AGG_NAMES[agg.prod.name]}({self.qual(col.ref)})"
        else:
            (direction,) = node.children
            expr = "count(*)"
        return f"{expr} {'ASC' if direction.prod.name == 'Asc' else 'DESC'}"


def render_sql(ast: SqlAst | AstNode, schema: Schema) -> str:
    root = ast.root if isinstance(ast, SqlAst) else ast
    if isinstance(ast, SqlAst) and ast.schema_id != schema.schema_id:
        raise ValueError(
            f"tree is bound to schema {ast.schema_id!r}, not {schema.schema_id!r}"
        )
    if root.kind != "query":
        raise GrammarError(f"can only render complete queries, got {root.kind!r}")
    return _Renderer(schema).query(root)


# -- canonical comparison ---------------------------------------------------


def _canon_cond(node: AstNode):
    name = node.prod.name
    if name in ("And", "Or"):
        parts = []

        def flatten(n):
            if n.prod.name == name:
                flatten(n.children[0])
                flatten(n.children[1])
            else:
                parts.append(_canon_cond(n))

        flatten(node)
        return (name.lower(), tuple(sorted(parts, key=repr)))
    pred = node.children[0]
    if pred.prod.name == "Between":
        return ("between", pred.children[0].ref)
    op, col = pred.children
    return ("cmp", op.prod.name, col.ref)


def _canon_item(node: AstNode):
    name = node.prod.name
    if name == "SelCol":
        return ("col", node.children[0].ref)
    if name == "SelAggCol":
        return ("agg", node.children[0].prod.name, node.children[1].ref)
    if name == "SelStar":
        return ("star",)
    return ("countstar",)


def _canon_ord_key(node: AstNode):
    name = node.prod.name
    if name == "ByCol":
        col, direction = node.children
        expr = ("col", col.ref)
    elif name == "ByAggCol":
        agg, col, direction = node.children
        expr = ("agg", agg.prod.name, col.ref)
    else:
        (direction,) = node.children
        expr = ("countstar",)
    return (expr, direction.prod.name)


def canonicalize(root: AstNode):
    """Order-insensitive structural key; placeholder literals compare equal."""
    sel, frm, where, group, order, limit = root.children
    distinct, items = sel.children
    canon_sel = (
        distinct.prod.name == "Distinct",
        tuple(sorted((_canon_item(ch) for ch in items.children), key=repr)),
    )
    canon_from = tuple(sorted(ch.ref for ch in frm.children[0].children))
    canon_where = (
        _canon_cond(where.children[0]) if where.prod.name == "Where" else None
    )
    if group.prod.name == "GroupBy":
        cols, having = group.children
        if having.prod.name == "Having":
            h = having.children[0]
            if h.prod.name == "HavingCountStar":
                canon_h = ("hcountstar", h.children[0].prod.name)
            else:
                agg, col, op = h.children
                canon_h = ("hagg", agg.prod.name, col.ref, op.prod.name)
        else:
            canon_h = None
        canon_group = (tuple(sorted(ch.ref for ch in cols.children)), canon_h)
    else:
        canon_group = None
    canon_order = (
        tuple(_canon_ord_key(ch) for ch in order.children[0].children)
        if order.prod.name == "OrderBy"
        else None
    )
    return (
        canon_sel,
        canon_from,
        canon_where,
        canon_group,
        canon_order,
        limit.prod.name == "Limit",
    )


def exact_match(a: SqlAst, b: SqlAst) -> bool:
    """Canonical equality; refuses to compare trees bound to different schemas."""
    if a.schema_id != b.schema_id:
        raise ValueError(
            f"cannot compare queries from different schemas: {a.schema_id!r} vs {b.schema_id!r}"
        )
    return canonicalize(a.root) == canonicalize(b.root)
