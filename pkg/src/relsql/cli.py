"""Command-line front end: corpora, inspection, training, and scoring.

Commands operate on a corpus directory as written by gen-synthetic
(tables.json, train.json, dev.json, content/<db>/<table>.csv) and on
single-file .npz checkpoints that carry their own vocabulary and config.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .data import (
    ABLATIONS,
    build_value_index,
    build_vocab,
    load_dataset,
    load_schemas,
)
from .decoder import DecoderConfig
from .encoder import EncoderConfig, paper_encoder_config
from .evaluation import ORACLE_MODES, evaluate, oracle_sweep
from .grammar import load_default_grammar
from .linking import link_question
from .model import ModelConfig, SemanticParser
from .nn import Rng
from .nn.gradcheck import gradcheck
from .relations import build_schema_graph, graph_to_dot, graph_to_json
from .schema import tokenize
from .sql_render import render_sql
from .synthetic import (
    SynthConfig,
    generalization_preset,
    overfit_preset,
    write_corpus,
)
from .training import TrainConfig, load_checkpoint, train

_MATCH_NAMES = {1: "partial", 2: "exact"}


def _corpus_paths(data_dir: str):
    root = Path(data_dir)
    tables = root / "tables.json"
    if not tables.exists():
        raise FileNotFoundError(f"no tables.json under {root}")
    return root, tables


def _load_corpus(data_dir, vocab=None, grammar=None, ablation="full", splits=("train", "dev")):
    root, tables = _corpus_paths(data_dir)
    schemas = load_schemas(tables)
    grammar = grammar or load_default_grammar()
    if vocab is None:
        min_count = 1
        meta = root / "meta.json"
        if meta.exists():
            min_count = json.loads(meta.read_text()).get("vocab_min_count", 1)
        vocab = build_vocab([root / "train.json"], schemas, min_count=min_count)
    vi = {sid: build_value_index(root / "content", s) for sid, s in schemas.items()}
    sets = {}
    for split in splits:
        path = root / f"{split}.json"
        if path.exists():
            sets[split] = load_dataset(path, schemas, vocab, vi, grammar, ablation)
    return schemas, vocab, sets


# -- commands ----------------------------------------------------------------


def _cmd_gen_synthetic(args) -> int:
    if args.preset == "overfit":
        cfg = overfit_preset()
    elif args.preset == "generalization":
        cfg = generalization_preset()
    else:
        cfg = SynthConfig(
            n_schemas=args.schemas,
            n_train=args.train,
            n_dev=args.dev,
            seed=args.seed,
            split_columns=args.split_columns,
        )
    print("config: " + json.dumps(asdict(cfg), sort_keys=True))
    corpus = write_corpus(cfg, args.out)
    print(
        f"wrote {len(corpus.tables)} schemas, {len(corpus.train)} train, "
        f"{len(corpus.dev)} dev examples to {args.out}"
    )
    return 0


def _cmd_graph(args) -> int:
    _, tables = _corpus_paths(args.data)
    schemas = load_schemas(tables)
    if args.db not in schemas:
        raise KeyError(f"unknown db {args.db!r}; have {sorted(schemas)}")
    schema = schemas[args.db]
    if args.format == "json":
        print(json.dumps(graph_to_json(schema), indent=2, sort_keys=True))
    elif args.format == "dot":
        print(graph_to_dot(schema))
    else:
        names = {}
        for c in schema.columns:
            names[("col", c.col_id)] = f"col:{schema.tables[c.table_id].orig_name}.{c.orig_name}"
        for t in schema.tables:
            names[("tab", t.table_id)] = f"tab:{t.orig_name}"
        for (a, b), labels in sorted(build_schema_graph(schema).items()):
            n = schema.n_columns
            sa = names[("col", a)] if a < n else names[("tab", a - n)]
            sb = names[("col", b)] if b < n else names[("tab", b - n)]
            for lab in sorted(labels):
                print(f"{sa} -[{lab}]-> {sb}")
    return 0


def _cmd_link(args) -> int:
    _, tables = _corpus_paths(args.data)
    schemas = load_schemas(tables)
    if args.db not in schemas:
        raise KeyError(f"unknown db {args.db!r}; have {sorted(schemas)}")
    schema = schemas[args.db]
    vi = build_value_index(Path(args.data) / "content", schema)
    toks = tokenize(args.question)
    link = link_question(toks, schema, vi)
    for qi, tok in enumerate(toks):
        hits = []
        for ci in range(schema.n_columns):
            lvl = int(link.col_match[qi, ci])
            col = schema.columns[ci]
            label = f"{schema.tables[col.table_id].orig_name}.{col.orig_name}"
            if lvl:
                hits.append(f"col {label} ({_MATCH_NAMES[lvl]})")
            if link.col_value[qi, ci]:
                hits.append(f"col {label} (value)")
        for ti in range(schema.n_tables):
            lvl = int(link.tab_match[qi, ti])
            if lvl:
                hits.append(f"tab {schema.tables[ti].orig_name} ({_MATCH_NAMES[lvl]})")
        print(f"{tok.text:>15s}  {'; '.join(hits) if hits else '-'}")
    return 0


def _model_config(args) -> ModelConfig:
    if args.size == "paper":
        enc = paper_encoder_config()
        from .decoder import paper_decoder_config

        dec = paper_decoder_config()
    else:
        enc = EncoderConfig()
        dec = DecoderConfig()
    return ModelConfig(encoder=enc, decoder=dec, align_weight=args.align_weight)


def _cmd_train(args) -> int:
    grammar = load_default_grammar()
    schemas, vocab, sets = _load_corpus(args.data, grammar=grammar, ablation=args.ablation)
    if "train" not in sets:
        raise FileNotFoundError(f"no train.json under {args.data}")
    model = SemanticParser(_model_config(args), vocab, grammar, seed=args.seed)
    cfg = TrainConfig(
        batch_size=args.batch,
        max_steps=args.steps,
        warmup_steps=args.warmup,
        peak_lr=args.lr,
        eval_every=args.eval_every,
        seed=args.seed,
    )
    res = train(
        model,
        sets["train"],
        sets.get("dev"),
        cfg,
        run_dir=args.run_dir,
        checkpoint_extra={"ablation": args.ablation},
        log=print,
    )
    print(
        f"best step {res.best_step}: exact {res.best_exact:.3f}, "
        f"action acc {res.best_action_acc:.3f}"
    )
    if res.best_path:
        print(f"checkpoints in {args.run_dir}")
    return 0


def _load_model(args):
    model, _, meta = load_checkpoint(args.checkpoint)
    ablation = args.ablation or meta.get("extra", {}).get("ablation", "full")
    if ablation not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablation!r}")
    return model, meta, ablation


def _cmd_predict(args) -> int:
    model, _, ablation = _load_model(args)
    schemas, _, sets = _load_corpus(
        args.data, vocab=model.vocab, grammar=model.grammar, ablation=ablation,
        splits=(args.split,),
    )
    if args.split not in sets:
        raise FileNotFoundError(f"no {args.split}.json under {args.data}")
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for i, ex in enumerate(sets[args.split].examples):
            r = model.predict(ex, beam_size=args.beam)
            sql = None
            if r.finished:
                sql = render_sql(r.ast(model.grammar), schemas[ex.schema_id])
            row = {
                "index": i,
                "db_id": ex.schema_id,
                "question": ex.question,
                "sql": sql,
                "log_prob": r.log_prob if r.finished else None,
            }
            out.write(json.dumps(row, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_eval(args) -> int:
    model, _, ablation = _load_model(args)
    _, _, sets = _load_corpus(
        args.data, vocab=model.vocab, grammar=model.grammar, ablation=ablation,
        splits=(args.split,),
    )
    if args.split not in sets:
        raise FileNotFoundError(f"no {args.split}.json under {args.data}")
    rep = evaluate(model, sets[args.split], beam_size=args.beam, oracle=args.oracle)
    if args.json:
        print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    else:
        print(rep.format_text())
    return 0


def _cmd_oracle_eval(args) -> int:
    model, _, ablation = _load_model(args)
    _, _, sets = _load_corpus(
        args.data, vocab=model.vocab, grammar=model.grammar, ablation=ablation,
        splits=(args.split,),
    )
    if args.split not in sets:
        raise FileNotFoundError(f"no {args.split}.json under {args.data}")
    reports = oracle_sweep(model, sets[args.split], beam_size=args.beam)
    if args.json:
        print(json.dumps({m: r.to_dict() for m, r in reports.items()}, indent=2, sort_keys=True))
    else:
        for rep in reports.values():
            print(rep.format_text())
    return 0


def _cmd_gradcheck(args) -> int:
    """Analytic vs finite-difference gradients on a small end-to-end loss."""
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        write_corpus(SynthConfig(n_schemas=1, n_train=4, n_dev=1, seed=args.seed), tmp)
        grammar = load_default_grammar()
        schemas, vocab, sets = _load_corpus(tmp, grammar=grammar)
    cfg = ModelConfig(
        encoder=EncoderConfig(
            d_model=16, n_heads=2, n_layers=1, d_ff=32, word_emb=12, lstm_hidden=8
        ),
        decoder=DecoderConfig(action_emb=8, node_type_emb=6, hidden=12, n_heads=2),
    )
    model = SemanticParser(cfg, vocab, grammar, seed=args.seed)
    ex = sets["train"].examples[0]
    rng = Rng.from_seed(args.seed)
    gen = rng.child("pick").generator()
    names = sorted(model.store.names())
    picked = [names[int(i)] for i in gen.choice(len(names), size=10, replace=False)]

    def loss_fn():
        loss, _ = model.example_loss(ex, train=False)
        return loss

    res = gradcheck(
        loss_fn, [model.store[n] for n in picked], sample_per_tensor=4, rng=gen
    )
    status = "ok" if res.ok else "FAIL"
    print(f"gradcheck {status}: max rel err {res.max_rel_err:.3e} over {res.checked} coords")
    return 0 if res.ok else 1


# -- parser ------------------------------------------------------------------


def _add_data(g):
    # RELSQL_DATA supplies the corpus directory when --data is omitted
    env = os.environ.get("RELSQL_DATA")
    g.add_argument(
        "--data",
        default=env,
        required=env is None,
        help="corpus directory (default: $RELSQL_DATA)",
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relsql", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synthetic", help="write a synthetic corpus directory")
    g.add_argument("--out", required=True)
    g.add_argument("--preset", choices=["overfit", "generalization"])
    g.add_argument("--schemas", type=int, default=3)
    g.add_argument("--train", type=int, default=50)
    g.add_argument("--dev", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split-columns", action="store_true")
    g.set_defaults(fn=_cmd_gen_synthetic)

    g = sub.add_parser("graph", help="print the schema graph of one database")
    _add_data(g)
    g.add_argument("--db", required=True)
    g.add_argument("--format", choices=["text", "json", "dot"], default="text")
    g.set_defaults(fn=_cmd_graph)

    g = sub.add_parser("link", help="show question-to-schema links")
    _add_data(g)
    g.add_argument("--db", required=True)
    g.add_argument("--question", required=True)
    g.set_defaults(fn=_cmd_link)

    g = sub.add_parser("train", help="train a parser on a corpus directory")
    _add_data(g)
    g.add_argument("--run-dir", required=True)
    g.add_argument("--steps", type=int, default=1000)
    g.add_argument("--batch", type=int, default=8)
    g.add_argument("--warmup", type=int, default=100)
    g.add_argument("--lr", type=float, default=1e-3)
    g.add_argument("--eval-every", type=int, default=200)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--ablation", choices=sorted(ABLATIONS), default="full")
    g.add_argument("--align-weight", type=float, default=1.0)
    g.add_argument("--size", choices=["desk", "paper"], default="desk")
    g.set_defaults(fn=_cmd_train)

    g = sub.add_parser("predict", help="decode a split and print SQL per example")
    g.add_argument("--checkpoint", required=True)
    _add_data(g)
    g.add_argument("--split", default="dev")
    g.add_argument("--beam", type=int, default=1)
    g.add_argument("--ablation", choices=sorted(ABLATIONS))
    g.add_argument("--out")
    g.set_defaults(fn=_cmd_predict)

    g = sub.add_parser("eval", help="score a checkpoint on a split")
    g.add_argument("--checkpoint", required=True)
    _add_data(g)
    g.add_argument("--split", default="dev")
    g.add_argument("--beam", type=int, default=1)
    g.add_argument("--oracle", choices=list(ORACLE_MODES), default="none")
    g.add_argument("--ablation", choices=sorted(ABLATIONS))
    g.add_argument("--json", action="store_true")
    g.set_defaults(fn=_cmd_eval)

    g = sub.add_parser("oracle-eval", help="score all oracle modes on a split")
    g.add_argument("--checkpoint", required=True)
    _add_data(g)
    g.add_argument("--split", default="dev")
    g.add_argument("--beam", type=int, default=1)
    g.add_argument("--ablation", choices=sorted(ABLATIONS))
    g.add_argument("--json", action="store_true")
    g.set_defaults(fn=_cmd_oracle_eval)

    g = sub.add_parser("gradcheck", help="verify gradients on a tiny instance")
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(fn=_cmd_gradcheck)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (OSError, KeyError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
