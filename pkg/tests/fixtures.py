"""Hand-built schemas and small generators shared across test modules."""

import numpy as np

from relsql.schema import Column, ForeignKey, Schema, Table, name_words


def make_schema(schema_id, tables, fks=()):
    """tables: list of (table_name, [(col_name, type, is_primary), ...]).

    fks: list of ((table_idx, col_idx_in_table), (table_idx, col_idx_in_table)).
    """
    columns = []
    table_objs = []
    col_of = {}
    for t, (tname, cols) in enumerate(tables):
        ids = []
        for k, (cname, ctype, is_pk) in enumerate(cols):
            cid = len(columns)
            col_of[(t, k)] = cid
            columns.append(
                Column(cid, t, cname, name_words(cname), ctype, is_pk)
            )
            ids.append(cid)
        table_objs.append(Table(t, tname, name_words(tname), tuple(ids)))
    fk_objs = [ForeignKey(col_of[a], col_of[b]) for a, b in fks]
    return Schema(schema_id, table_objs, columns, fk_objs)


def pets_schema():
    """Two tables joined by one foreign key."""
    return make_schema(
        "pets",
        [
            ("owners", [("owner_id", "number", True), ("name", "text", False), ("age", "number", False)]),
            ("pets", [("pet_id", "number", True), ("owner_id", "number", False), ("pet_name", "text", False), ("weight", "number", False)]),
        ],
        fks=[((1, 1), (0, 0))],
    )


def airline_schema():
    """Four tables with a mutual FK pair (flights<->airports both ways)."""
    return make_schema(
        "airline",
        [
            ("airlines", [("airline_id", "number", True), ("airline_name", "text", False)]),
            ("airports", [("airport_code", "text", True), ("city", "text", False), ("main_flight", "number", False)]),
            ("flights", [("flight_id", "number", True), ("airline", "number", False), ("source_airport", "text", False)]),
            ("bookings", [("booking_id", "number", True), ("flight", "number", False)]),
        ],
        fks=[
            ((2, 1), (0, 0)),  # flights.airline -> airlines.airline_id
            ((2, 2), (1, 0)),  # flights.source_airport -> airports.airport_code
            ((1, 2), (2, 0)),  # airports.main_flight -> flights.flight_id (mutual pair)
            ((3, 1), (2, 0)),  # bookings.flight -> flights.flight_id
        ],
    )


def random_schema(gen: np.random.Generator, max_tables=4, max_cols=4):
    """Small random schema, valid by construction."""
    n_tables = int(gen.integers(1, max_tables + 1))
    words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"]
    tables = []
    for t in range(n_tables):
        n_cols = int(gen.integers(1, max_cols + 1))
        cols = []
        for c in range(n_cols):
            name = f"{words[int(gen.integers(0, len(words)))]}_{t}_{c}"
            ctype = "number" if gen.random() < 0.5 else "text"
            cols.append((name, ctype, c == 0))  # first column is the primary key
        tables.append((f"table_{words[t]}", cols))
    # random FKs: non-pk column -> pk of another table
    fks = []
    used = set()
    for t, (_, cols) in enumerate(tables):
        for c in range(1, len(cols)):
            if gen.random() < 0.4 and n_tables > 1:
                other = int(gen.integers(0, n_tables))
                if other != t and (t, c) not in used:
                    fks.append(((t, c), (other, 0)))
                    used.add((t, c))
    return make_schema(f"rand", tables, fks)
