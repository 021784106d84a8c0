"""Synthetic corpora: schemas with guessable names, templated questions, gold SQL.

Plain corpora (split_columns=False) pair two tables per schema, a primary
entity and a related entity holding a foreign key into it, and draw train
and dev from the same template set covering counts, aggregates, filters,
ordering, grouping across the join, and value-only references where the
question names a cell ("of alice") rather than any column. Entity nouns
are chosen so the tokenizer's plural stripping maps the question's plural
onto the schema word ("cities" and table "city" both normalize to "city");
the pool assert guards that.

split_columns corpora are built so each relation family is the only route
to part of the dev set. Schemas get three tables, each with a name column
and three numeric attributes. Attribute words occur exactly once in train
questions and once as a label, and the corpus pins vocab_min_count=3, so
every attribute word is out of vocabulary: within a table the attribute
columns are interchangeable except for the question/schema match edge, and
fitting train already requires following that edge. One attribute per
table never appears in train, and dev aggregates target it. Dev also asks
for the third table's name column; name questions are trained only on the
other two tables, and with three identically labeled name columns per
schema only table membership can route the pointer to the right one. A
further dev slice ("what is the X of <cell value>", filters, superlatives)
needs match and membership edges at once, and a small memorized slice
repeats train strings verbatim.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .nn import Rng
from .schema import norm_token

__all__ = [
    "SynthConfig",
    "Corpus",
    "generate",
    "write_corpus",
    "overfit_preset",
    "generalization_preset",
]

_ENTITIES = [
    "student", "teacher", "book", "author", "city", "team",
    "player", "product", "customer", "order", "employee", "department",
    "actor", "song", "visit", "hotel", "store", "album",
    "client", "flight", "doctor", "patient",
]
_ATTRS = [
    "age", "year", "price", "rating", "score", "weight",
    "height", "salary", "capacity", "budget", "length", "duration",
    "distance", "mileage", "rank", "size",
]
_PERSONS = [
    "alice", "bob", "carol", "david", "emma", "frank", "grace", "henry",
    "iris", "jack", "karen", "leo", "mona", "nina", "oscar", "paula",
    "quinn", "rosa", "sam", "tina", "ursula", "victor", "wanda", "yuri",
]

# attribute pool for split_columns schemas; nine words per schema, each used
# by exactly one column corpus-wide
_ATTRS_G = [
    "age", "year", "price", "rating", "score", "weight",
    "height", "salary", "capacity", "budget", "length", "duration",
    "distance", "mileage", "rank", "size", "torque", "volume",
    "depth", "width", "area", "speed", "grade", "level",
    "margin", "density", "radius", "mass", "power", "energy",
    "voltage", "tariff", "income", "tenure", "deficit", "surplus",
]


def _plural(word: str) -> str:
    if word.endswith("y"):
        return word[:-1] + "ies"
    return word + "s"


for _w in _ENTITIES:
    assert norm_token(_plural(_w)) == norm_token(_w), (
        f"entity {_w!r} does not survive plural stripping; pick another noun"
    )


@dataclass(frozen=True)
class SynthConfig:
    n_schemas: int = 3
    n_train: int = 50
    n_dev: int = 20
    rows_per_table: int = 12
    seed: int = 0
    split_columns: bool = False


def overfit_preset() -> SynthConfig:
    return SynthConfig(n_schemas=3, n_train=50, n_dev=20, seed=11)


def generalization_preset() -> SynthConfig:
    return SynthConfig(
        n_schemas=3, n_train=50, n_dev=30, seed=23, split_columns=True
    )


@dataclass
class _SchemaInfo:
    db_id: str
    e1: str
    e2: str
    attrs_e1: list  # four numeric attribute names on the primary table
    attr_e2: str
    persons: list  # name-column cells of the primary table


@dataclass
class Corpus:
    tables: list  # spider-layout schema entries
    train: list  # {"db_id", "question", "sql"}
    dev: list
    content: dict  # db_id -> {table_name: (header, rows)}
    infos: list
    # split_columns extras: per-dev-example bucket tag (attr/name/dual/seen)
    # and the word-frequency floor the corpus was engineered against
    dev_tags: list = None
    vocab_min_count: int = 1


def _make_schema(idx: int, gen, attrs: list) -> tuple[dict, _SchemaInfo, dict]:
    e1 = _ENTITIES[(2 * idx) % len(_ENTITIES)]
    e2 = _ENTITIES[(2 * idx + 1) % len(_ENTITIES)]
    attrs_e1, attr_e2 = attrs[:4], attrs[4]
    db_id = f"synth_{e1}_{e2}"

    cols = [[-1, "*"]]
    types = ["text"]
    cols += [[0, f"{e1}_id"], [0, "name"]] + [[0, a] for a in attrs_e1]
    types += ["number", "text"] + ["number"] * 4
    cols += [[1, f"{e2}_id"], [1, f"{e1}_id"], [1, "name"], [1, attr_e2]]
    types += ["number", "number", "text", "number"]
    entry = {
        "db_id": db_id,
        "table_names_original": [e1, e2],
        "column_names_original": cols,
        "column_types": types,
        "primary_keys": [1, 7],
        "foreign_keys": [[8, 1]],
    }

    n = min(len(_PERSONS), 20)
    persons1 = [_PERSONS[int(i)] for i in gen.choice(n, size=min(12, n), replace=False)]
    persons2 = [_PERSONS[int(i)] for i in gen.choice(n, size=min(12, n), replace=False)]
    rows1 = [
        [str(i + 1), persons1[i % len(persons1)]]
        + [str(int(gen.integers(18, 80))) for _ in attrs_e1]
        for i in range(12)
    ]
    rows2 = [
        [str(i + 1), str(int(gen.integers(1, 13))), persons2[i % len(persons2)],
         str(int(gen.integers(18, 80)))]
        for i in range(12)
    ]
    content = {
        e1: ([f"{e1}_id", "name"] + attrs_e1, rows1),
        e2: ([f"{e2}_id", f"{e1}_id", "name", attr_e2], rows2),
    }
    info = _SchemaInfo(
        db_id=db_id, e1=e1, e2=e2, attrs_e1=attrs_e1, attr_e2=attr_e2,
        persons=persons1,
    )
    return entry, info, content


# each template: (uses an e1 attribute?, builder(info, attr, gen) -> (question, sql))


def _t_count_e1(info, attr, gen):
    return (
        f"how many {_plural(info.e1)} are there",
        f"select count(*) from {info.e1}",
    )


def _t_avg(info, attr, gen):
    return (
        f"what is the average {attr} of all {_plural(info.e1)}",
        f"select avg({attr}) from {info.e1}",
    )


def _t_max(info, attr, gen):
    return (
        f"what is the highest {attr} of any {info.e1}",
        f"select max({attr}) from {info.e1}",
    )


def _t_list_names(info, attr, gen):
    return (
        f"list the names of all {_plural(info.e1)}",
        f"select name from {info.e1}",
    )


def _t_attr_of_named(info, attr, gen):
    v = info.persons[int(gen.integers(0, len(info.persons)))]
    return (
        f"what is the {attr} of the {info.e1} named {v}",
        f"select {attr} from {info.e1} where name = '{v}'",
    )


def _t_value_only(info, attr, gen):
    v = info.persons[int(gen.integers(0, len(info.persons)))]
    return (
        f"what is the {attr} of {v}",
        f"select {attr} from {info.e1} where name = '{v}'",
    )


def _t_cmp(info, attr, gen):
    n = int(gen.integers(20, 60))
    return (
        f"which {_plural(info.e1)} have {attr} greater than {n}",
        f"select name from {info.e1} where {attr} > {n}",
    )


def _t_top(info, attr, gen):
    return (
        f"which {info.e1} has the highest {attr}",
        f"select name from {info.e1} order by {attr} desc limit 1",
    )


def _t_group_count(info, attr, gen):
    j = f"{info.e2}.{info.e1}_id = {info.e1}.{info.e1}_id"
    return (
        f"how many {_plural(info.e2)} does each {info.e1} have",
        f"select {info.e1}.name, count(*) from {info.e1} join {info.e2} on {j} "
        f"group by {info.e1}.name",
    )


def _t_count_e2(info, attr, gen):
    return (
        f"how many {_plural(info.e2)} are there",
        f"select count(*) from {info.e2}",
    )


def _t_list_names_e2(info, attr, gen):
    return (
        f"list the names of all {_plural(info.e2)}",
        f"select name from {info.e2}",
    )


def _t_named_of_e2(info, attr, gen):
    return (
        f"what are the names of the {_plural(info.e2)}",
        f"select name from {info.e2}",
    )


_ATTR_TEMPLATES = [_t_avg, _t_max, _t_attr_of_named, _t_value_only, _t_cmp, _t_top]
_PLAIN_TEMPLATES = [
    _t_count_e1, _t_list_names, _t_group_count, _t_count_e2,
    _t_list_names_e2, _t_named_of_e2,
]
_ALL_TEMPLATES = _ATTR_TEMPLATES + _PLAIN_TEMPLATES


def _emit_examples(infos, gen, count, templates, attr_slice):
    out = []
    k = 0
    while len(out) < count:
        info = infos[k % len(infos)]
        tmpl = templates[(k // len(infos)) % len(templates)]
        k += 1
        allowed = info.attrs_e1[attr_slice]
        attr = allowed[int(gen.integers(0, len(allowed)))]
        question, sql = tmpl(info, attr, gen)
        out.append({"db_id": info.db_id, "question": question, "sql": sql})
    return out


# -- split_columns corpora ---------------------------------------------------


@dataclass
class _SchemaInfoG:
    """Three tables; attrs[k] = [trained, trained, held-out] words of table k."""

    db_id: str
    ents: list
    attrs: list
    pools: list  # name-column cells per table, disjoint within the schema

    def held(self, k: int) -> str:
        return self.attrs[k][2]


def _make_schema_g(idx: int, gen, attrs: list):
    ents = [_ENTITIES[(3 * idx + k) % len(_ENTITIES)] for k in range(3)]
    db_id = "synth_" + "_".join(ents)
    cols = [[-1, "*"]]
    types = ["text"]
    pks, fks = [], []
    for k, e in enumerate(ents):
        base = len(cols)
        pks.append(base)
        tab_cols = [[k, f"{e}_id"], [k, "name"]] + [[k, a] for a in attrs[k]]
        tab_types = ["number", "text", "number", "number", "number"]
        if k > 0:
            tab_cols.append([k, f"{ents[0]}_id"])
            tab_types.append("number")
            fks.append([base + 5, 1])
        cols += tab_cols
        types += tab_types
    entry = {
        "db_id": db_id,
        "table_names_original": ents,
        "column_names_original": cols,
        "column_types": types,
        "primary_keys": pks,
        "foreign_keys": fks,
    }

    shuffled = [_PERSONS[int(i)] for i in gen.permutation(len(_PERSONS))]
    pools = [shuffled[8 * k : 8 * k + 8] for k in range(3)]
    content = {}
    for k, e in enumerate(ents):
        header = [f"{e}_id", "name"] + attrs[k]
        rows = [
            [str(i + 1), pools[k][i % 8]]
            + [str(int(gen.integers(18, 80))) for _ in attrs[k]]
            for i in range(12)
        ]
        if k > 0:
            header.append(f"{ents[0]}_id")
            for row in rows:
                row.append(str(int(gen.integers(1, 13))))
        content[e] = (header, rows)
    info = _SchemaInfoG(db_id=db_id, ents=ents, attrs=attrs, pools=pools)
    return entry, info, content


def _g_count(info, k, attr, gen):
    e = info.ents[k]
    return (f"how many {_plural(e)} are there", f"select count(*) from {e}")


def _g_names(info, k, attr, gen):
    e = info.ents[k]
    return (f"list the names of all {_plural(e)}", f"select name from {e}")


def _g_names2(info, k, attr, gen):
    e = info.ents[k]
    return (f"what are the names of the {_plural(e)}", f"select name from {e}")


def _g_avg(info, k, attr, gen):
    e = info.ents[k]
    return (
        f"what is the average {attr} of all {_plural(e)}",
        f"select avg({attr}) from {e}",
    )


def _g_max(info, k, attr, gen):
    e = info.ents[k]
    return (
        f"what is the highest {attr} of any {e}",
        f"select max({attr}) from {e}",
    )


def _g_of_named(info, k, attr, gen):
    e = info.ents[k]
    v = info.pools[k][int(gen.integers(0, len(info.pools[k])))]
    return (
        f"what is the {attr} of the {e} named {v}",
        f"select {attr} from {e} where name = '{v}'",
    )


def _g_value_only(info, k, attr, gen):
    v = info.pools[k][int(gen.integers(0, len(info.pools[k])))]
    return (
        f"what is the {attr} of {v}",
        f"select {attr} from {info.ents[k]} where name = '{v}'",
    )


def _g_cmp(info, k, attr, gen):
    e = info.ents[k]
    n = int(gen.integers(20, 60))
    return (
        f"which {_plural(e)} have {attr} greater than {n}",
        f"select name from {e} where {attr} > {n}",
    )


def _g_top(info, k, attr, gen):
    e = info.ents[k]
    return (
        f"which {e} has the highest {attr}",
        f"select name from {e} order by {attr} desc limit 1",
    )


def _g_join(info, k, attr, gen):
    e0, e = info.ents[0], info.ents[k]
    j = f"{e}.{e0}_id = {e0}.{e0}_id"
    return (
        f"how many {_plural(e)} does each {e0} have",
        f"select {e0}.name, count(*) from {e0} join {e} on {j} "
        f"group by {e0}.name",
    )


_G_ATTR_FORMS = [_g_avg, _g_max, _g_of_named, _g_value_only, _g_cmp, _g_top]


def _split_train_slots(infos):
    """One question per trained attribute word, plus attr-free fillers.

    The per-attribute form rotates with the schema index so each of the six
    attribute forms is trained once per schema, on varying tables. Name
    questions skip the third table; its name column stays dev-only.
    """
    slots = []
    for s, info in enumerate(infos):
        for j in (0, 1):
            for k in (0, 1, 2):
                form = _G_ATTR_FORMS[(3 * j + k + s) % 6]
                slots.append((info, form, k, info.attrs[k][j]))
        for k in (0, 1):
            slots.append((info, _g_names, k, None))
            slots.append((info, _g_names2, k, None))
        for k in (0, 1, 2):
            slots.append((info, _g_count, k, None))
        slots.append((info, _g_join, 1 + s % 2, None))
    return slots


def _split_filler_slots(infos):
    slots = []
    for s, info in enumerate(infos):
        for k in (0, 1, 2):
            slots.append((info, _g_count, k, None))
        for k in (0, 1):
            slots.append((info, _g_names, k, None))
        slots.append((info, _g_join, 2 - s % 2, None))
    return slots


def _split_dev_slots(infos):
    """Tagged buckets: attr needs match edges, name needs membership edges,
    dual needs both, seen repeats a train string."""
    slots = []
    for s, info in enumerate(infos):
        held = [info.held(k) for k in range(3)]
        slots += [
            (info, _g_avg, s % 3, held[s % 3], "attr"),
            (info, _g_of_named, (s + 1) % 3, held[(s + 1) % 3], "attr"),
            (info, _g_names, 2, None, "name"),
            (info, _g_names, 2, None, "name"),
            (info, _g_names2, 2, None, "name"),
            (info, _g_names2, 2, None, "name"),
            (info, _g_value_only, (s + 2) % 3, held[(s + 2) % 3], "dual"),
            (info, _g_cmp, s % 3, held[s % 3], "dual"),
            (info, _g_top, (s + 1) % 3, held[(s + 1) % 3], "dual"),
            (info, _g_count, s % 3, None, "seen"),
        ]
    return slots


def _emit_slots(slots, gen, count):
    out = []
    for i in range(count):
        info, form, k, attr = slots[i % len(slots)][:4]
        question, sql = form(info, k, attr, gen)
        out.append({"db_id": info.db_id, "question": question, "sql": sql})
    return out


def _generate_split(cfg: SynthConfig, rng) -> Corpus:
    sgen = rng.child("schemas").generator()
    limit = min(len(_ENTITIES) // 3, len(_ATTRS_G) // 9)
    if cfg.n_schemas > limit:
        raise ValueError(f"at most {limit} schemas available")
    pool = [_ATTRS_G[int(i)] for i in sgen.permutation(len(_ATTRS_G))]
    tables, infos = [], []
    content = {}
    for i in range(cfg.n_schemas):
        chunk = pool[9 * i : 9 * i + 9]
        attrs = [chunk[3 * k : 3 * k + 3] for k in range(3)]
        entry, info, tab_content = _make_schema_g(i, sgen, attrs)
        tables.append(entry)
        infos.append(info)
        content[info.db_id] = tab_content

    base = _split_train_slots(infos)
    fillers = _split_filler_slots(infos)
    tgen = rng.child("train").generator()
    train = _emit_slots(base, tgen, min(cfg.n_train, len(base)))
    if cfg.n_train > len(base):
        train += _emit_slots(fillers, tgen, cfg.n_train - len(base))
    dev_slots = _split_dev_slots(infos)
    dev = _emit_slots(dev_slots, rng.child("dev").generator(), cfg.n_dev)
    tags = [dev_slots[i % len(dev_slots)][4] for i in range(cfg.n_dev)]
    return Corpus(
        tables=tables, train=train, dev=dev, content=content, infos=infos,
        dev_tags=tags, vocab_min_count=3,
    )


def generate(cfg: SynthConfig) -> Corpus:
    rng = Rng.from_seed(cfg.seed)
    if cfg.split_columns:
        return _generate_split(cfg, rng)
    sgen = rng.child("schemas").generator()
    limit = min(len(_ENTITIES) // 2, len(_ATTRS) // 5)
    if cfg.n_schemas > limit:
        raise ValueError(f"at most {limit} schemas available")
    # disjoint attribute slices keep dev target columns unseen corpus-wide
    pool = [_ATTRS[int(i)] for i in sgen.permutation(len(_ATTRS))]
    tables, infos = [], []
    content = {}
    for i in range(cfg.n_schemas):
        entry, info, tab_content = _make_schema(i, sgen, pool[5 * i : 5 * i + 5])
        tables.append(entry)
        infos.append(info)
        content[info.db_id] = tab_content

    train = _emit_examples(
        infos, rng.child("train").generator(), cfg.n_train, _ALL_TEMPLATES,
        slice(0, 4),
    )
    dev = _emit_examples(
        infos, rng.child("dev").generator(), cfg.n_dev, _ALL_TEMPLATES,
        slice(0, 4),
    )
    return Corpus(tables=tables, train=train, dev=dev, content=content, infos=infos)


def write_corpus(cfg: SynthConfig, out_dir) -> Corpus:
    """Write tables.json, train.json, dev.json, content/; byte-stable per cfg."""
    corpus = generate(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, obj in (
        ("tables.json", corpus.tables),
        ("train.json", corpus.train),
        ("dev.json", corpus.dev),
        ("meta.json", {"vocab_min_count": corpus.vocab_min_count}),
    ):
        with open(out / name, "w") as f:
            f.write(json.dumps(obj, indent=2, sort_keys=True))
            f.write("\n")
    for db_id, tabs in sorted(corpus.content.items()):
        db_dir = out / "content" / db_id
        db_dir.mkdir(parents=True, exist_ok=True)
        for tname, (header, rows) in sorted(tabs.items()):
            with open(db_dir / f"{tname}.csv", "w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
    return corpus
