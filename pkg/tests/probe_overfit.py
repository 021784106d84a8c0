import sys
import tempfile
import time
from pathlib import Path

from relsql.data import build_value_index, build_vocab, load_dataset, load_schemas
from relsql.decoder import DecoderConfig
from relsql.encoder import EncoderConfig
from relsql.grammar import load_default_grammar
from relsql.model import ModelConfig, SemanticParser
from relsql.synthetic import overfit_preset, write_corpus
from relsql.training import TrainConfig, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 600
root = Path(tempfile.mkdtemp())
write_corpus(overfit_preset(), root)
schemas = load_schemas(root / "tables.json")
vocab = build_vocab([root / "train.json"], schemas)
grammar = load_default_grammar()
vi = {sid: build_value_index(root / "content", s) for sid, s in schemas.items()}
train_ds = load_dataset(root / "train.json", schemas, vocab, vi, grammar)
print("train", len(train_ds.examples), "skipped", train_ds.n_skipped, "vocab", len(vocab))

cfg = ModelConfig(encoder=EncoderConfig(), decoder=DecoderConfig())
model = SemanticParser(cfg, vocab, grammar, seed=0)
print("params", model.store.param_count())

tc = TrainConfig(batch_size=8, max_steps=steps, warmup_steps=100, eval_every=100, seed=0)
t0 = time.monotonic()
res = train(model, train_ds, cfg=tc, log=print)
dt = time.monotonic() - t0
print(f"done in {dt:.1f}s ({dt/steps*1000:.0f} ms/step) best_step={res.best_step} "
      f"best_exact={res.best_exact:.3f} best_action_acc={res.best_action_acc:.3f}")
