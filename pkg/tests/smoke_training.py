import shutil
import tempfile
from pathlib import Path

import numpy as np

from relsql.data import ABLATIONS, build_vocab, load_dataset, load_schemas, load_table_values, build_value_index, preprocess
from relsql.decoder import DecoderConfig
from relsql.encoder import EncoderConfig
from relsql.evaluation import evaluate, oracle_sweep
from relsql.grammar import load_default_grammar
from relsql.model import ModelConfig, SemanticParser
from relsql.synthetic import SynthConfig, generate, write_corpus
from relsql.training import TrainConfig, load_checkpoint, save_checkpoint, train, lr_at, paper_train_config

root = Path(tempfile.mkdtemp())
corpus = write_corpus(SynthConfig(n_schemas=2, n_train=24, n_dev=8, seed=5), root)
schemas = load_schemas(root / "tables.json")
vocab = build_vocab([root / "train.json"], schemas)
grammar = load_default_grammar()
vi = {sid: build_value_index(root / "content", s) for sid, s in schemas.items()}
train_ds = load_dataset(root / "train.json", schemas, vocab, vi, grammar)
dev_ds = load_dataset(root / "dev.json", schemas, vocab, vi, grammar)
print("train", len(train_ds.examples), "skipped", train_ds.n_skipped)
print("dev", len(dev_ds.examples), "skipped", dev_ds.n_skipped)

# ablation variants change the relation tensor
sid0 = sorted(schemas)[0]
q = corpus.train[0]["question"]
sch = schemas[corpus.train[0]["db_id"]]
full = preprocess(q, sch, vocab, ablation="full")
nolink = preprocess(q, sch, vocab, ablation="no_linking")
nograph = preprocess(q, sch, vocab, ablation="no_graph")
print("full vs no_linking differ:", not np.array_equal(full.inputs.feats.composite, nolink.inputs.feats.composite))
print("full vs no_graph differ:", not np.array_equal(full.inputs.feats.composite, nograph.inputs.feats.composite))
assert set(ABLATIONS) == {"full", "no_linking", "no_graph"}

# lr schedule fixtures
pc = paper_train_config()
print("lr_at(1000)", lr_at(1000, pc), "lr_at(2000)", lr_at(2000, pc), "lr_at(max)", lr_at(pc.max_steps, pc))
assert abs(lr_at(1000, pc) - 3.7e-4) < 1e-12
assert abs(lr_at(2000, pc) - 7.4e-4) < 1e-12

cfg = ModelConfig(
    encoder=EncoderConfig(d_model=16, n_heads=2, n_layers=1, d_ff=32, word_emb=12, lstm_hidden=8),
    decoder=DecoderConfig(action_emb=8, node_type_emb=6, hidden=12, n_heads=2),
)
model = SemanticParser(cfg, vocab, grammar, seed=1)

tc = TrainConfig(batch_size=4, max_steps=12, warmup_steps=3, eval_every=6, log_every=3, seed=7)
run_dir = root / "run"
res = train(model, train_ds, dev_ds, tc, run_dir=run_dir, log=print)
print("history", [h["step"] for h in res.history], "final_loss", res.final_loss)
assert (run_dir / "metrics.jsonl").exists()
assert (run_dir / "last.npz").exists()

rep = evaluate(model, dev_ds)
print("eval", rep.format_text())
sweep = oracle_sweep(model, dev_ds)
for m, r in sweep.items():
    print(" ", r.format_text())
assert sweep["both"].exact == 1.0, "full forcing must reproduce gold"

# checkpoint round trip is bit exact
ck = root / "ck.npz"
save_checkpoint(ck, model, step=42)
m2, opt2, meta = load_checkpoint(ck, grammar)
for n, a in model.store.state_arrays().items():
    assert np.array_equal(a, m2.store.state_arrays()[n]), n
assert opt2 is None and meta["step"] == 42
print("checkpoint round trip ok")

# bit-exact resume: 8 straight steps == 4 steps, checkpoint, resume 4 more
def fresh():
    return SemanticParser(cfg, vocab, grammar, seed=1)

tc8 = TrainConfig(batch_size=4, max_steps=8, warmup_steps=3, eval_every=100, seed=7)
a = fresh()
train(a, train_ds, cfg=tc8, restore_best=False)

b = fresh()
from relsql.nn.optim import Adam
opt_b = Adam(b.store)
train(b, train_ds, cfg=tc8, stop_step=4, optimizer=opt_b, restore_best=False)
mid = root / "mid.npz"
save_checkpoint(mid, b, opt_b, step=4, train_cfg=tc8)
c, opt_c, meta_c = load_checkpoint(mid, grammar)
train(c, train_ds, cfg=tc8, start_step=meta_c["step"], optimizer=opt_c, restore_best=False)
worst = 0.0
for n, arr in a.store.state_arrays().items():
    d = float(np.max(np.abs(arr - c.store.state_arrays()[n])))
    worst = max(worst, d)
assert worst == 0.0, f"resume drift {worst}"
print("bit-exact resume ok")

shutil.rmtree(root)
print("ALL SMOKE OK")
