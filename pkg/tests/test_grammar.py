"""Grammar loading, validation, linearization, and sampling tests."""

import numpy as np
import pytest

from relsql.grammar import (
    APPLY,
    SELECT_COLUMN,
    SELECT_TABLE,
    Action,
    Grammar,
    GrammarError,
    delinearize,
    linearize,
    load_default_grammar,
    sample_ast,
)


def tree_depth(node):
    if not node.children:
        return 1
    return 1 + max(tree_depth(c) for c in node.children)


# -- loading and validation -------------------------------------------------


def test_default_grammar_loads():
    g = load_default_grammar()
    assert len(g) == 53
    assert g.by_lhs["query"][0].name == "Query"
    assert g.min_depth["query"] == 4
    assert g.min_depth["direction"] == 1
    assert g.min_depth["cond"] == 3  # Pred -> Cmp -> leaf ops


def test_version_hash_stable_and_format_sensitive():
    g1 = load_default_grammar()
    g2 = Grammar.parse(g1.text + "\n# trailing comment\n")
    assert g1.version_hash() == g2.version_hash()  # comments don't count
    g3 = Grammar.parse(g1.text + "limit_opt := LimitTwo()\n")
    assert g1.version_hash() != g3.version_hash()


def test_unknown_child_kind_rejected():
    with pytest.raises(GrammarError, match="unknown child kind"):
        Grammar.parse("query := Query(nonsuch)\n")


def test_unreachable_kind_rejected():
    with pytest.raises(GrammarError, match="unreachable"):
        Grammar.parse("query := Query(column)\nlost := Lost()\n")


def test_nonterminating_kind_rejected():
    with pytest.raises(GrammarError, match="no finite derivation"):
        Grammar.parse("query := Query(loop)\nloop := Loop(loop)\n")


def test_duplicate_rule_name_rejected():
    with pytest.raises(GrammarError, match="duplicate rule name"):
        Grammar.parse("query := Q(a)\na := Q()\n")


def test_malformed_line_rejected():
    with pytest.raises(GrammarError, match="unparseable"):
        Grammar.parse("query = Query()\n")


# -- linearize / delinearize ------------------------------------------------


def minimal_query_actions(g):
    """Hand-built pre-order listing of the smallest query tree."""
    name = lambda n: g.by_name[n].prod_id
    return [
        Action(APPLY, name("Query")),
        Action(APPLY, name("Select")),
        Action(APPLY, name("All")),
        Action(APPLY, name("OneItem")),
        Action(APPLY, name("SelStar")),
        Action(APPLY, name("From")),
        Action(APPLY, name("OneTable")),
        Action(SELECT_TABLE, 0),
        Action(APPLY, name("NoWhere")),
        Action(APPLY, name("NoGroup")),
        Action(APPLY, name("NoOrder")),
        Action(APPLY, name("NoLimit")),
    ]


def test_delinearize_then_linearize_roundtrip():
    g = load_default_grammar()
    actions = minimal_query_actions(g)
    tree = delinearize(actions, g)
    assert tree.kind == "query"
    assert tree.size() == 12
    assert linearize(tree) == actions


def test_first_action_expands_root():
    g = load_default_grammar()
    gen = np.random.default_rng(3)
    t = sample_ast(g, gen, 5, 2)
    acts = linearize(t)
    assert acts[0].kind == APPLY
    assert g.productions[acts[0].index].lhs == "query"


def test_delinearize_rejects_wrong_production():
    g = load_default_grammar()
    actions = minimal_query_actions(g)
    actions[1] = Action(APPLY, g.by_name["NoWhere"].prod_id)  # wrong kind slot
    with pytest.raises(GrammarError, match="cannot expand"):
        delinearize(actions, g)


def test_delinearize_rejects_wrong_leaf_kind():
    g = load_default_grammar()
    actions = minimal_query_actions(g)
    actions[7] = Action(SELECT_COLUMN, 0)  # table slot fed a column pointer
    with pytest.raises(GrammarError, match="expected a table pointer"):
        delinearize(actions, g)


def test_delinearize_rejects_truncation_and_trailing():
    g = load_default_grammar()
    actions = minimal_query_actions(g)
    with pytest.raises(GrammarError, match="ended while expanding"):
        delinearize(actions[:-1], g)
    with pytest.raises(GrammarError, match="trailing actions"):
        delinearize(actions + [Action(SELECT_TABLE, 0)], g)


# -- sampling ---------------------------------------------------------------


def test_sampler_respects_depth_budget():
    g = load_default_grammar()
    gen = np.random.default_rng(0)
    for _ in range(200):
        t = sample_ast(g, gen, n_columns=6, n_tables=3, max_depth=7)
        assert tree_depth(t) <= 7
        for node in t.walk():
            if node.kind == "column":
                assert 0 <= node.ref < 6
            if node.kind == "table":
                assert 0 <= node.ref < 3


def test_sampler_minimum_depth_enforced():
    g = load_default_grammar()
    with pytest.raises(GrammarError, match="below the minimum"):
        sample_ast(g, np.random.default_rng(0), 3, 1, max_depth=3)


def test_sampler_deterministic_per_seed():
    g = load_default_grammar()
    a = [linearize(sample_ast(g, np.random.default_rng(7), 4, 2)) for _ in range(5)]
    b = [linearize(sample_ast(g, np.random.default_rng(7), 4, 2)) for _ in range(5)]
    assert a == b


def test_sampled_trees_roundtrip():
    g = load_default_grammar()
    gen = np.random.default_rng(11)
    for _ in range(300):
        t = sample_ast(g, gen, 5, 2, max_depth=int(gen.integers(4, 13)))
        assert delinearize(linearize(t), g) == t
