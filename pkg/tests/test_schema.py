"""Tokenizer and schema-validation tests."""

import pytest

from relsql.schema import (
    SchemaError,
    canon_number,
    name_words,
    norm_token,
    tokenize,
)
from fixtures import make_schema, pets_schema


# -- tokenizer --------------------------------------------------------------


def test_tokenize_words_numbers_punctuation():
    toks = tokenize("How many cats weigh 3.50 kg?")
    assert [t.text for t in toks] == ["how", "many", "cats", "weigh", "3.50", "kg", "?"]
    assert [t.norm for t in toks] == ["how", "many", "cat", "weigh", "3.5", "kg", "?"]


def test_tokenize_spans_slice_original():
    text = "List O'Brien's 2 dogs!"
    for tok in tokenize(text):
        assert text[tok.start : tok.end].lower() == tok.text


def test_name_words_snake_and_camel():
    assert name_words("owner_id") == ("owner", "id")
    assert name_words("petName") == ("pet", "name")
    assert name_words("HTTPResponseCode") == ("http", "response", "code")
    assert name_words("flight-number") == ("flight", "number")
    assert name_words("singer_names") == ("singer", "name")


def test_plural_stripping():
    assert norm_token("cats") == "cat"
    assert norm_token("cities") == "city"
    assert norm_token("buses") == "bus"
    assert norm_token("glass") == "glass"  # -ss kept
    assert norm_token("status") == "status"  # -us kept
    assert norm_token("analysis") == "analysis"  # -is kept
    assert norm_token("gas") == "gas"  # too short to strip


def test_canon_number():
    assert canon_number("007") == "7"
    assert canon_number("3.50") == "3.5"
    assert canon_number("4.0") == "4"
    assert canon_number("0.25") == "0.25"
    assert norm_token("3.50") == norm_token("3.5")


def test_number_and_word_share_norm_space():
    toks = tokenize("older than 4.0 years")
    assert toks[2].norm == "4"


# -- schema validation ------------------------------------------------------


def test_valid_schema_builds():
    s = pets_schema()
    assert s.n_columns == 7
    assert s.n_tables == 2
    assert s.table_of(4).orig_name == "pets"
    assert s.fk_pairs() == {(4, 0)}


def test_column_label_words_include_type():
    s = pets_schema()
    assert s.column_label_words(1) == ("text", "name")
    assert s.column_label_words(0) == ("number", "owner", "id")


def test_fk_to_non_primary_rejected():
    with pytest.raises(SchemaError, match="not a primary key"):
        make_schema(
            "bad",
            [
                ("a", [("x", "number", True), ("y", "number", False)]),
                ("b", [("z", "number", True), ("w", "number", False)]),
            ],
            fks=[((0, 1), (1, 1))],
        )


def test_fk_inside_one_table_rejected():
    with pytest.raises(SchemaError, match="inside one table"):
        make_schema(
            "bad",
            [("a", [("x", "number", True), ("y", "number", False)])],
            fks=[((0, 1), (0, 0))],
        )


def test_duplicate_column_name_in_table_rejected():
    with pytest.raises(SchemaError, match="duplicate column"):
        make_schema(
            "bad",
            [("a", [("x", "number", True), ("X", "number", False)])],
        )


def test_same_column_name_across_tables_allowed():
    s = make_schema(
        "ok",
        [
            ("a", [("id", "number", True), ("name", "text", False)]),
            ("b", [("id", "number", True), ("name", "text", False)]),
        ],
    )
    assert s.n_columns == 4
