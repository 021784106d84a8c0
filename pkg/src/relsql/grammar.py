"""Typed production grammar for the supported SQL subset.

The grammar ships as data (the text below), one production per line in the
form ``kind := RuleName(child_kind ...)``; lines with the same left-hand
kind are alternatives. Two terminal kinds, ``column`` and ``table``, are
filled by pointer actions rather than productions.

Trees linearize to a pre-order action sequence (apply-rule at interior
nodes, select-column/select-table at leaves) and delinearize back; the
decoder consumes exactly this action alphabet.
"""

import hashlib
import re
from dataclasses import dataclass, field

__all__ = [
    "GRAMMAR_TEXT",
    "GrammarError",
    "Production",
    "Grammar",
    "AstNode",
    "Action",
    "APPLY",
    "SELECT_COLUMN",
    "SELECT_TABLE",
    "linearize",
    "delinearize",
    "sample_ast",
    "load_default_grammar",
]

GRAMMAR_TEXT = """\
# sql subset grammar, version 1
query := Query(select_clause from_clause where_opt group_opt order_opt limit_opt)
select_clause := Select(distinct_opt sel_items)
distinct_opt := All()
distinct_opt := Distinct()
sel_items := OneItem(sel_item)
sel_items := TwoItems(sel_item sel_item)
sel_items := ThreeItems(sel_item sel_item sel_item)
sel_item := SelCol(column)
sel_item := SelAggCol(agg column)
sel_item := SelStar()
sel_item := SelCountStar()
agg := Count()
agg := Sum()
agg := Avg()
agg := Min()
agg := Max()
from_clause := From(table_list)
table_list := OneTable(table)
table_list := TwoTables(table table)
table_list := ThreeTables(table table table)
where_opt := NoWhere()
where_opt := Where(cond)
cond := Pred(predicate)
cond := And(cond cond)
cond := Or(cond cond)
predicate := Cmp(cmp_op column)
predicate := Between(column)
cmp_op := Eq()
cmp_op := Ne()
cmp_op := Lt()
cmp_op := Gt()
cmp_op := Le()
cmp_op := Ge()
cmp_op := Like()
group_opt := NoGroup()
group_opt := GroupBy(group_cols having_opt)
group_cols := OneCol(column)
group_cols := TwoCols(column column)
having_opt := NoHaving()
having_opt := Having(hcond)
hcond := HavingAggCol(agg column cmp_op)
hcond := HavingCountStar(cmp_op)
order_opt := NoOrder()
order_opt := OrderBy(order_keys)
order_keys := OneKey(ord_key)
order_keys := TwoKeys(ord_key ord_key)
ord_key := ByCol(column direction)
ord_key := ByAggCol(agg column direction)
ord_key := ByCountStar(direction)
direction := Asc()
direction := Desc()
limit_opt := NoLimit()
limit_opt := Limit()
"""

TERMINALS = ("column", "table")
ROOT_KIND = "query"

APPLY = "apply"
SELECT_COLUMN = "select_column"
SELECT_TABLE = "select_table"


class GrammarError(ValueError):
    pass


@dataclass(frozen=True)
class Production:
    prod_id: int
    lhs: str
    name: str
    rhs: tuple[str, ...]

    def __str__(self):
        return f"{self.lhs} := {self.name}({' '.join(self.rhs)})"


@dataclass(frozen=True)
class Action:
    """One decoder step: expand a production or bind a schema pointer."""

    kind: str  # APPLY | SELECT_COLUMN | SELECT_TABLE
    index: int  # production id, column id, or table id

    def __repr__(self):
        return f"{self.kind}:{self.index}"


_LINE_RE = re.compile(r"^(\w+)\s*:=\s*(\w+)\(([^)]*)\)$")


class Grammar:
    def __init__(self, productions: list[Production], text: str):
        self.productions = productions
        self.text = text
        self.by_lhs: dict[str, list[Production]] = {}
        self.by_name: dict[str, Production] = {}
        for p in productions:
            self.by_lhs.setdefault(p.lhs, []).append(p)
            if p.name in self.by_name:
                raise GrammarError(f"duplicate rule name {p.name}")
            self.by_name[p.name] = p
        self._validate()
        self.min_depth = self._min_depths()

    @classmethod
    def parse(cls, text: str) -> "Grammar":
        productions = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            m = _LINE_RE.match(line)
            if m is None:
                raise GrammarError(f"unparseable production: {line!r}")
            lhs, name, rhs = m.group(1), m.group(2), tuple(m.group(3).split())
            productions.append(Production(len(productions), lhs, name, rhs))
        if not productions:
            raise GrammarError("empty grammar")
        return cls(productions, text)

    def _validate(self) -> None:
        kinds = set(self.by_lhs)
        for p in self.productions:
            for child in p.rhs:
                if child not in kinds and child not in TERMINALS:
                    raise GrammarError(f"{p}: unknown child kind {child!r}")
        if ROOT_KIND not in kinds:
            raise GrammarError(f"missing root kind {ROOT_KIND!r}")
        # reachability from the root
        seen = set()
        frontier = [ROOT_KIND]
        while frontier:
            k = frontier.pop()
            if k in seen or k in TERMINALS:
                continue
            seen.add(k)
            for p in self.by_lhs[k]:
                frontier.extend(p.rhs)
        unreachable = kinds - seen
        if unreachable:
            raise GrammarError(f"unreachable kinds: {sorted(unreachable)}")

    def _min_depths(self) -> dict[str, int]:
        """Smallest tree depth realizable per kind (terminals depth 1)."""
        INF = 10**9
        depth = {k: INF for k in self.by_lhs}
        for t in TERMINALS:
            depth[t] = 1
        changed = True
        while changed:
            changed = False
            for p in self.productions:
                cand = 1 + max((depth[c] for c in p.rhs), default=0)
                if cand < depth[p.lhs]:
                    depth[p.lhs] = cand
                    changed = True
        bad = [k for k, d in depth.items() if d >= INF]
        if bad:
            raise GrammarError(f"kinds with no finite derivation: {sorted(bad)}")
        return depth

    def version_hash(self) -> str:
        canon = "\n".join(str(p) for p in self.productions)
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def __len__(self):
        return len(self.productions)


_DEFAULT = None


def load_default_grammar() -> Grammar:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = Grammar.parse(GRAMMAR_TEXT)
    return _DEFAULT


@dataclass
class AstNode:
    """Interior node (prod set, ref None) or terminal leaf (prod None)."""

    kind: str
    prod: Production | None = None
    children: list = field(default_factory=list)
    ref: int | None = None  # column or table id at terminal leaves

    def walk(self):
        yield self
        for ch in self.children:
            yield from ch.walk()

    def size(self) -> int:
        return sum(1 for _ in self.walk())

    def __eq__(self, other):
        if not isinstance(other, AstNode):
            return NotImplemented
        return (
            self.kind == other.kind
            and (self.prod.prod_id if self.prod else None)
            == (other.prod.prod_id if other.prod else None)
            and self.ref == other.ref
            and self.children == other.children
        )


def linearize(ast: AstNode) -> list[Action]:
    """Pre-order action sequence for a complete tree."""
    out = []

    def visit(node: AstNode):
        if node.kind == "column":
            out.append(Action(SELECT_COLUMN, node.ref))
        elif node.kind == "table":
            out.append(Action(SELECT_TABLE, node.ref))
        else:
            if node.prod is None:
                raise GrammarError(f"interior node {node.kind} has no production")
            out.append(Action(APPLY, node.prod.prod_id))
            for ch in node.children:
                visit(ch)

    visit(ast)
    return out


def delinearize(actions, grammar: Grammar) -> AstNode:
    """Rebuild the tree from a pre-order action sequence; strict validation."""
    it = iter(actions)

    def build(kind: str) -> AstNode:
        try:
            act = next(it)
        except StopIteration:
            raise GrammarError(f"action sequence ended while expanding {kind!r}") from None
        if kind == "column":
            if act.kind != SELECT_COLUMN:
                raise GrammarError(f"expected a column pointer, got {act!r}")
            return AstNode("column", ref=act.index)
        if kind == "table":
            if act.kind != SELECT_TABLE:
                raise GrammarError(f"expected a table pointer, got {act!r}")
            return AstNode("table", ref=act.index)
        if act.kind != APPLY:
            raise GrammarError(f"expected a production for {kind!r}, got {act!r}")
        prod = grammar.productions[act.index]
        if prod.lhs != kind:
            raise GrammarError(f"production {prod} cannot expand {kind!r}")
        return AstNode(kind, prod=prod, children=[build(c) for c in prod.rhs])

    root = build(ROOT_KIND)
    leftover = sum(1 for _ in it)
    if leftover:
        raise GrammarError(f"{leftover} trailing actions after the tree closed")
    return root


def sample_ast(
    grammar: Grammar,
    gen,
    n_columns: int,
    n_tables: int,
    max_depth: int = 12,
) -> AstNode:
    """Random complete tree; production choice restricted to those that can
    still finish within the remaining depth budget."""

    def expand(kind: str, budget: int) -> AstNode:
        if kind == "column":
            return AstNode("column", ref=int(gen.integers(0, n_columns)))
        if kind == "table":
            return AstNode("table", ref=int(gen.integers(0, n_tables)))
        options = [
            p
            for p in grammar.by_lhs[kind]
            if 1 + max((grammar.min_depth[c] for c in p.rhs), default=0) <= budget
        ]
        if not options:
            raise GrammarError(f"no production of {kind!r} fits in depth {budget}")
        prod = options[int(gen.integers(0, len(options)))]
        return AstNode(
            kind, prod=prod, children=[expand(c, budget - 1) for c in prod.rhs]
        )

    if max_depth < grammar.min_depth[ROOT_KIND]:
        raise GrammarError(
            f"max_depth {max_depth} below the minimum {grammar.min_depth[ROOT_KIND]}"
        )
    return expand(ROOT_KIND, max_depth)
