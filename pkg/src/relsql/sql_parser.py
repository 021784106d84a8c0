"""Recursive-descent parser for the supported SQL subset.

Resolves table/column names (and AS aliases) against a schema, case-
insensitively, and produces the same tree shapes the grammar's sampler
emits. Literal values and LIMIT counts are accepted and discarded since the
tree stores placeholders. JOIN ... ON conditions are validated loosely and
dropped: rendering re-infers them from the schema's foreign keys.

Anything outside the subset (subqueries, set ops, IN/NOT, arithmetic,
more items than the grammar's arity caps) raises UnsupportedSyntax.
"""

import re

from .grammar import AstNode, Grammar, load_default_grammar
from .schema import Schema
from .sql_render import AGG_NAMES, CMP_SYMBOLS, SqlAst

__all__ = ["SqlParseError", "UnsupportedSyntax", "parse_sql"]


class SqlParseError(ValueError):
    pass


class UnsupportedSyntax(SqlParseError):
    """Valid-looking SQL that the subset grammar cannot represent."""


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<qident>"[^"]*"|`[^`]*`)
      | (?P<number>\d+\.\d+|\d+)
      | (?P<string>'(?:[^']|'')*')
      | (?P<sym><=|>=|!=|<>|=|<|>|\(|\)|,|\.|\*|;)
    )""",
    re.VERBOSE,
)

_KEYWORDS = {
    "select", "distinct", "from", "join", "inner", "left", "outer", "on", "as",
    "where", "and", "or", "between", "like", "group", "by", "having", "order",
    "asc", "desc", "limit", "union", "intersect", "except", "in", "not",
    "exists",
}

_SYM_TO_OP = {sym: name for name, sym in CMP_SYMBOLS.items() if name != "Like"}
_SYM_TO_OP["<>"] = "Ne"
_AGG_BY_NAME = {v: k for k, v in AGG_NAMES.items()}


class _Tokens:
    def __init__(self, text: str):
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN_RE.match(text, pos)
            if m is None or m.end() == pos:
                rest = text[pos:].strip()
                if not rest:
                    break
                raise SqlParseError(f"cannot tokenize SQL at: {rest[:30]!r}")
            pos = m.end()
            if m.group("ident"):
                word = m.group("ident")
                kind = "kw" if word.lower() in _KEYWORDS else "ident"
                self.toks.append((kind, word.lower() if kind == "kw" else word))
            elif m.group("qident"):
                self.toks.append(("ident", m.group("qident")[1:-1]))
            elif m.group("number"):
                self.toks.append(("number", m.group("number")))
            elif m.group("string"):
                self.toks.append(("string", m.group("string")))
            else:
                self.toks.append(("sym", m.group("sym")))
        self.pos = 0

    def peek(self, ahead=0):
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else ("eof", "")

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def at_kw(self, *words) -> bool:
        kind, val = self.peek()
        return kind == "kw" and val in words

    def take_kw(self, word) -> bool:
        if self.at_kw(word):
            self.pos += 1
            return True
        return False

    def expect_kw(self, word):
        if not self.take_kw(word):
            raise SqlParseError(f"expected {word.upper()}, got {self.peek()[1]!r}")

    def at_sym(self, *syms) -> bool:
        kind, val = self.peek()
        return kind == "sym" and val in syms

    def take_sym(self, sym) -> bool:
        if self.at_sym(sym):
            self.pos += 1
            return True
        return False

    def expect_sym(self, sym):
        if not self.take_sym(sym):
            raise SqlParseError(f"expected {sym!r}, got {self.peek()[1]!r}")


class _Parser:
    def __init__(self, text: str, schema: Schema, grammar: Grammar):
        self.t = _Tokens(text)
        self.schema = schema
        self.g = grammar
        self.from_tables: list[int] = []
        self.alias: dict[str, int] = {}
        self.table_by_name = {
            t.orig_name.lower(): t.table_id for t in schema.tables
        }

    def rule(self, name: str, *children) -> AstNode:
        prod = self.g.by_name[name]
        if len(children) != len(prod.rhs):
            raise SqlParseError(f"internal arity bug building {name}")
        return AstNode(prod.lhs, prod=prod, children=list(children))

    def col_leaf(self, col_id: int) -> AstNode:
        return AstNode("column", ref=col_id)

    def tab_leaf(self, tab_id: int) -> AstNode:
        return AstNode("table", ref=tab_id)

    # -- name resolution ----------------------------------------------------

    def resolve_table(self, name: str) -> int:
        low = name.lower()
        if low in self.alias:
            return self.alias[low]
        if low in self.table_by_name:
            return self.table_by_name[low]
        raise SqlParseError(f"unknown table {name!r} in schema {self.schema.schema_id!r}")

    def resolve_column(self, tname: str | None, cname: str) -> int:
        low = cname.lower()
        if tname is not None:
            tid = self.resolve_table(tname)
            for cid in self.schema.tables[tid].column_ids:
                if self.schema.columns[cid].orig_name.lower() == low:
                    return cid
            raise SqlParseError(
                f"table {tname!r} has no column {cname!r}"
            )
        in_from = [
            cid
            for tid in dict.fromkeys(self.from_tables)
            for cid in self.schema.tables[tid].column_ids
            if self.schema.columns[cid].orig_name.lower() == low
        ]
        if len(in_from) == 1:
            return in_from[0]
        if len(in_from) > 1:
            raise SqlParseError(f"ambiguous column {cname!r}; qualify it")
        anywhere = [
            c.col_id for c in self.schema.columns if c.orig_name.lower() == low
        ]
        if len(anywhere) == 1:
            return anywhere[0]
        if len(anywhere) > 1:
            raise SqlParseError(f"ambiguous column {cname!r}; qualify it")
        raise SqlParseError(
            f"unknown column {cname!r} in schema {self.schema.schema_id!r}"
        )

    def column_ref(self) -> int:
        kind, first = self.t.next()
        if kind != "ident":
            raise SqlParseError(f"expected a column name, got {first!r}")
        if self.t.take_sym("."):
            kind, second = self.t.next()
            if kind != "ident":
                raise SqlParseError(f"expected a column after {first!r}.")
            return self.resolve_column(first, second)
        return self.resolve_column(None, first)

    # -- grammar of the statement ------------------------------------------

    def parse(self) -> AstNode:
        self.t.expect_kw("select")
        distinct = self.rule("Distinct") if self.t.take_kw("distinct") else self.rule("All")
        items_at = self.t.pos  # select items resolve after FROM is known
        self.skip_select_items()
        frm = self.from_clause()
        end_at = self.t.pos
        self.t.pos = items_at
        items = self.sel_items()
        self.t.pos = end_at

        where = self.rule("NoWhere")
        if self.t.take_kw("where"):
            where = self.rule("Where", self.cond())
        group = self.rule("NoGroup")
        if self.t.take_kw("group"):
            self.t.expect_kw("by")
            group = self.group_by()
        elif self.t.at_kw("having"):
            raise UnsupportedSyntax("HAVING without GROUP BY is outside the subset")
        order = self.rule("NoOrder")
        if self.t.take_kw("order"):
            self.t.expect_kw("by")
            order = self.rule("OrderBy", self.order_keys())
        limit = self.rule("NoLimit")
        if self.t.take_kw("limit"):
            kind, val = self.t.next()
            if kind != "number":
                raise SqlParseError(f"expected a LIMIT count, got {val!r}")
            limit = self.rule("Limit")
        self.t.take_sym(";")
        kind, val = self.t.peek()
        if kind == "kw" and val in ("union", "intersect", "except"):
            raise UnsupportedSyntax(f"set operation {val.upper()} is outside the subset")
        if kind != "eof":
            raise SqlParseError(f"unexpected trailing input near {val!r}")
        sel = self.rule("Select", distinct, items)
        return self.rule(
            "Query", sel, frm, where, group, order, limit
        )

    def skip_select_items(self):
        depth = 0
        while True:
            kind, val = self.t.peek()
            if kind == "eof":
                raise SqlParseError("missing FROM clause")
            if kind == "kw" and val == "from" and depth == 0:
                return
            if kind == "sym" and val == "(":
                depth += 1
            if kind == "sym" and val == ")":
                depth -= 1
            self.t.pos += 1

    def sel_items(self) -> AstNode:
        items = [self.sel_item()]
        while self.t.take_sym(","):
            items.append(self.sel_item())
        if len(items) > 3:
            raise UnsupportedSyntax(
                f"{len(items)} select items; the subset allows at most 3"
            )
        name = ("OneItem", "TwoItems", "ThreeItems")[len(items) - 1]
        return self.rule(name, *items)

    def sel_item(self) -> AstNode:
        if self.t.take_sym("*"):
            return self.rule("SelStar")
        kind, val = self.t.peek()
        if kind == "ident" and val.lower() in _AGG_BY_NAME and self.t.peek(1) == ("sym", "("):
            self.t.next()
            self.t.expect_sym("(")
            if self.t.take_kw("distinct"):
                raise UnsupportedSyntax("DISTINCT inside an aggregate is outside the subset")
            agg_rule = _AGG_BY_NAME[val.lower()]
            if self.t.take_sym("*"):
                if agg_rule != "Count":
                    raise SqlParseError(f"{val}(*) is not valid SQL")
                self.t.expect_sym(")")
                return self.rule("SelCountStar")
            col = self.column_ref()
            self.t.expect_sym(")")
            return self.rule("SelAggCol", self.rule(agg_rule), self.col_leaf(col))
        if kind == "sym" and val == "(":
            raise UnsupportedSyntax("subquery or expression in SELECT is outside the subset")
        return self.rule("SelCol", self.col_leaf(self.column_ref()))

    def from_clause(self) -> AstNode:
        self.t.expect_kw("from")
        tids = [self.table_ref()]
        while True:
            if self.t.take_sym(","):
                tids.append(self.table_ref())
                continue
            took_join = False
            if self.t.take_kw("inner"):
                self.t.expect_kw("join")
                took_join = True
            elif self.t.take_kw("left"):
                raise UnsupportedSyntax("LEFT JOIN is outside the subset")
            elif self.t.take_kw("join"):
                took_join = True
            if not took_join:
                break
            tids.append(self.table_ref())
            if self.t.take_kw("on"):
                self.join_condition()
        if len(tids) > 3:
            raise UnsupportedSyntax(
                f"{len(tids)} tables in FROM; the subset allows at most 3"
            )
        name = ("OneTable", "TwoTables", "ThreeTables")[len(tids) - 1]
        return self.rule("From", self.rule(name, *[self.tab_leaf(t) for t in tids]))

    def table_ref(self) -> int:
        kind, val = self.t.next()
        if kind != "ident":
            if kind == "sym" and val == "(":
                raise UnsupportedSyntax("subquery in FROM is outside the subset")
            raise SqlParseError(f"expected a table name, got {val!r}")
        tid = self.resolve_table(val)
        alias = None
        if self.t.take_kw("as"):
            akind, alias = self.t.next()
            if akind != "ident":
                raise SqlParseError(f"expected an alias after AS, got {alias!r}")
        else:
            akind, aval = self.t.peek()
            if akind == "ident":  # bare alias: FROM owners o
                self.t.next()
                alias = aval
        if alias:
            self.alias[alias.lower()] = tid
        self.from_tables.append(tid)
        return tid

    def join_condition(self):
        """col = col [AND col = col ...], validated and thrown away."""
        while True:
            self.column_ref()
            self.t.expect_sym("=")
            self.column_ref()
            if not self.t.take_kw("and"):
                return

    # WHERE conditions: OR lowest, AND above it, atoms highest
    def cond(self) -> AstNode:
        node = self.and_expr()
        while self.t.take_kw("or"):
            node = self.rule("Or", node, self.and_expr())
        return node

    def and_expr(self) -> AstNode:
        node = self.atom()
        while self.t.take_kw("and"):
            node = self.rule("And", node, self.atom())
        return node

    def atom(self) -> AstNode:
        if self.t.take_sym("("):
            if self.t.at_kw("select"):
                raise UnsupportedSyntax("subquery in WHERE is outside the subset")
            node = self.cond()
            self.t.expect_sym(")")
            return node
        if self.t.at_kw("not", "exists"):
            raise UnsupportedSyntax(f"{self.t.peek()[1].upper()} is outside the subset")
        return self.rule("Pred", self.predicate())

    def predicate(self) -> AstNode:
        col = self.column_ref()
        if self.t.take_kw("between"):
            self.literal()
            self.t.expect_kw("and")
            self.literal()
            return self.rule("Between", self.col_leaf(col))
        if self.t.take_kw("like"):
            self.literal()
            return self.rule("Cmp", self.rule("Like"), self.col_leaf(col))
        if self.t.at_kw("in", "not"):
            raise UnsupportedSyntax("IN / NOT IN is outside the subset")
        kind, sym = self.t.next()
        if kind != "sym" or sym not in _SYM_TO_OP:
            raise SqlParseError(f"expected a comparison operator, got {sym!r}")
        self.literal()
        return self.rule("Cmp", self.rule(_SYM_TO_OP[sym]), self.col_leaf(col))

    def literal(self):
        kind, val = self.t.peek()
        if kind in ("number", "string"):
            self.t.next()
            return
        if kind == "sym" and val == "(":
            raise UnsupportedSyntax("subquery as a comparison value is outside the subset")
        if kind == "ident":
            raise UnsupportedSyntax(
                "column-to-column comparison outside a join is outside the subset"
            )
        raise SqlParseError(f"expected a literal value, got {val!r}")

    def group_by(self) -> AstNode:
        cols = [self.column_ref()]
        while self.t.take_sym(","):
            cols.append(self.column_ref())
        if len(cols) > 2:
            raise UnsupportedSyntax(
                f"{len(cols)} GROUP BY columns; the subset allows at most 2"
            )
        name = ("OneCol", "TwoCols")[len(cols) - 1]
        group_cols = self.rule(name, *[self.col_leaf(c) for c in cols])
        having = self.rule("NoHaving")
        if self.t.take_kw("having"):
            having = self.rule("Having", self.hcond())
        return self.rule("GroupBy", group_cols, having)

    def hcond(self) -> AstNode:
        kind, val = self.t.next()
        if kind != "ident" or val.lower() not in _AGG_BY_NAME:
            raise UnsupportedSyntax(
                "HAVING must compare a single aggregate in the subset"
            )
        agg_rule = _AGG_BY_NAME[val.lower()]
        self.t.expect_sym("(")
        star = self.t.take_sym("*")
        col = None
        if star:
            if agg_rule != "Count":
                raise SqlParseError(f"{val}(*) is not valid SQL")
        else:
            col = self.column_ref()
        self.t.expect_sym(")")
        kind, sym = self.t.next()
        if kind == "kw" and sym == "like":
            op_rule = "Like"
        elif kind == "sym" and sym in _SYM_TO_OP:
            op_rule = _SYM_TO_OP[sym]
        else:
            raise SqlParseError(f"expected a comparison operator, got {sym!r}")
        self.literal()
        if star:
            return self.rule("HavingCountStar", self.rule(op_rule))
        return self.rule(
            "HavingAggCol", self.rule(agg_rule), self.col_leaf(col), self.rule(op_rule)
        )

    def order_keys(self) -> AstNode:
        keys = [self.ord_key()]
        while self.t.take_sym(","):
            keys.append(self.ord_key())
        if len(keys) > 2:
            raise UnsupportedSyntax(
                f"{len(keys)} ORDER BY keys; the subset allows at most 2"
            )
        name = ("OneKey", "TwoKeys")[len(keys) - 1]
        return self.rule(name, *keys)

    def ord_key(self) -> AstNode:
        kind, val = self.t.peek()
        if kind == "ident" and val.lower() in _AGG_BY_NAME and self.t.peek(1) == ("sym", "("):
            self.t.next()
            self.t.expect_sym("(")
            agg_rule = _AGG_BY_NAME[val.lower()]
            if self.t.take_sym("*"):
                if agg_rule != "Count":
                    raise SqlParseError(f"{val}(*) is not valid SQL")
                self.t.expect_sym(")")
                return self.rule("ByCountStar", self.direction())
            col = self.column_ref()
            self.t.expect_sym(")")
            return self.rule(
                "ByAggCol", self.rule(agg_rule), self.col_leaf(col), self.direction()
            )
        col = self.column_ref()
        return self.rule("ByCol", self.col_leaf(col), self.direction())

    def direction(self) -> AstNode:
        if self.t.take_kw("desc"):
            return self.rule("Desc")
        self.t.take_kw("asc")
        return self.rule("Asc")


def parse_sql(text: str, schema: Schema, grammar: Grammar | None = None) -> SqlAst:
    """Parse one SELECT statement against a schema into a grammar tree."""
    grammar = grammar or load_default_grammar()
    root = _Parser(text, schema, grammar).parse()
    return SqlAst(root=root, schema_id=schema.schema_id)
