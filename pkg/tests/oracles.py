"""Independent brute-force oracles shared by unit and acceptance tests.

Everything here is written from the definitions, separately from the library
implementations, so agreement is meaningful. Keep these naive: loops over
pairs, direct predicate checks, no reuse of library internals beyond the
plain data containers.
"""

import numpy as np

from relsql.schema import Schema


def brute_structural_labels(schema: Schema) -> dict:
    """(i, j) -> set of structural label names, derived pair by pair."""
    C = schema.n_columns
    T = schema.n_tables
    N = C + T
    fks = {(fk.from_col, fk.to_col) for fk in schema.foreign_keys}
    out = {}

    def table_refs(x, y):
        return any(
            schema.columns[a].table_id == x and schema.columns[b].table_id == y
            for (a, b) in fks
        )

    for i in range(N):
        for j in range(N):
            labels = set()
            i_col, j_col = i < C, j < C
            if i == j:
                labels.add("column-identity" if i_col else "table-identity")
            elif i_col and j_col:
                if schema.columns[i].table_id == schema.columns[j].table_id:
                    labels.add("same-table")
                if (i, j) in fks:
                    labels.add("foreign-key-col-f")
                if (j, i) in fks:
                    labels.add("foreign-key-col-r")
            elif i_col and not j_col:
                t = j - C
                if schema.columns[i].table_id == t:
                    if schema.columns[i].is_primary:
                        labels.add("primary-key-f")
                    else:
                        labels.add("belongs-to-f")
            elif not i_col and j_col:
                t = i - C
                if schema.columns[j].table_id == t:
                    if schema.columns[j].is_primary:
                        labels.add("primary-key-r")
                    else:
                        labels.add("belongs-to-r")
            else:
                x, y = i - C, j - C
                fwd, rev = table_refs(x, y), table_refs(y, x)
                if fwd:
                    labels.add("foreign-key-tab-f")
                if rev:
                    labels.add("foreign-key-tab-r")
                if fwd and rev:
                    labels.add("foreign-key-tab-b")
            if labels:
                out[(i, j)] = labels
    return out


def brute_name_match(q_norms, names, partial="subsequence", max_n=5):
    """(Q, nodes) match levels computed per (token, node) from scratch."""

    def subseq(a, b):
        pos = 0
        for w in a:
            while pos < len(b) and b[pos] != w:
                pos += 1
            if pos == len(b):
                return False
            pos += 1
        return True

    def substr(a, b):
        return any(b[k : k + len(a)] == list(a) for k in range(len(b) - len(a) + 1))

    part = subseq if partial == "subsequence" else substr
    Q = len(q_norms)
    out = np.zeros((Q, len(names)), dtype=np.int8)
    for node, words in enumerate(names):
        words = list(words)
        for qi in range(Q):
            best = 0
            # every window that contains position qi, lengths 1..max_n
            for start in range(max(0, qi - max_n + 1), qi + 1):
                for end in range(qi + 1, min(Q, start + max_n) + 1):
                    gram = list(q_norms[start:end])
                    if gram == words:
                        best = max(best, 2)
                    elif len(gram) <= len(words) and part(gram, words):
                        best = max(best, 1)
            out[qi, node] = best
    return out


def brute_value_flags(q_norms, values_by_col, n_columns, norm_fn, tokenize_fn):
    """(Q, C) bool flags recomputed by scanning every cell for every word."""
    Q = len(q_norms)
    out = np.zeros((Q, n_columns), dtype=bool)
    for qi, word in enumerate(q_norms):
        target = norm_fn(word)
        for col, cells in values_by_col.items():
            if col >= n_columns:
                continue
            hit = False
            for cell in cells:
                if cell is None:
                    continue
                for tok in tokenize_fn(str(cell)):
                    if tok.norm == target:
                        hit = True
                        break
                if hit:
                    break
            if hit:
                out[qi, col] = True
    return out
