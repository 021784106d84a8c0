import sys
import tempfile
from pathlib import Path

import numpy as np

from relsql.data import build_value_index, build_vocab, load_dataset, load_schemas
from relsql.decoder import DecoderConfig
from relsql.encoder import EncoderConfig
from relsql.grammar import delinearize, load_default_grammar
from relsql.model import ModelConfig, SemanticParser
from relsql.sql_render import SqlAst, exact_match, render_sql
from relsql.synthetic import generalization_preset, write_corpus
from relsql.training import TrainConfig, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 1500
aw = float(sys.argv[2]) if len(sys.argv) > 2 else 1.0

root = Path(tempfile.mkdtemp())
write_corpus(generalization_preset(), root)
schemas = load_schemas(root / "tables.json")
vocab = build_vocab([root / "train.json"], schemas)
vi = {sid: build_value_index(root / "content", s) for sid, s in schemas.items()}
grammar = load_default_grammar()
tr = load_dataset(root / "train.json", schemas, vocab, vi, grammar)
dv = load_dataset(root / "dev.json", schemas, vocab, vi, grammar)

cfg = ModelConfig(
    encoder=EncoderConfig(), decoder=DecoderConfig(), align_weight=aw
)
model = SemanticParser(cfg, vocab, grammar, seed=0)
tc = TrainConfig(batch_size=8, max_steps=steps, warmup_steps=100,
                 eval_every=max(200, steps // 5), seed=0)
train(model, tr, dv, tc, log=print)

n_attr_ok = n_attr = 0
shown = 0
for ex in dv.examples:
    if "names" in ex.question:
        continue
    n_attr += 1
    schema = schemas[ex.schema_id]
    r = model.predict(ex)
    gold = SqlAst(root=delinearize(ex.actions, grammar), schema_id=ex.schema_id)
    ok = False
    if r.finished:
        pred = SqlAst(root=r.ast(grammar), schema_id=ex.schema_id)
        ok = exact_match(pred, gold)
    n_attr_ok += ok
    if not ok and shown < 6:
        shown += 1
        print("\nQ:", ex.question)
        print(" gold:", render_sql(gold, schema))
        print(" pred:", render_sql(r.ast(grammar), schema) if r.finished else "<unfinished>")
        enc = model.encode_example(ex)
        # where does each question word's alignment point?
        toks = ex.question.split()
        L = enc.align_col.data
        names = [schema.columns[i].orig_name for i in range(schema.n_columns)]
        for qi in range(L.shape[0]):
            j = int(np.argmax(L[qi]))
            if L[qi, j] > 0.3:
                print(f"   word[{qi}] {toks[qi] if qi < len(toks) else '?':12s} -> {names[j]:12s} {L[qi,j]:.2f}")
print(f"\nattr exact: {n_attr_ok}/{n_attr}")
