"""Schedule, loop determinism, checkpointing, and resume."""

import json

import numpy as np
import pytest

from relsql.data import build_value_index, build_vocab, load_dataset, load_schemas
from relsql.decoder import DecoderConfig
from relsql.encoder import EncoderConfig
from relsql.grammar import load_default_grammar
from relsql.model import ModelConfig, SemanticParser, config_fingerprint
from relsql.nn.optim import Adam
from relsql.synthetic import SynthConfig, write_corpus
from relsql.training import (
    TrainConfig,
    TrainingDiverged,
    load_checkpoint,
    lr_at,
    paper_train_config,
    save_checkpoint,
    train,
)

TINY_MODEL = ModelConfig(
    encoder=EncoderConfig(
        d_model=16, n_heads=2, n_layers=1, d_ff=32, word_emb=12, lstm_hidden=8
    ),
    decoder=DecoderConfig(action_emb=8, node_type_emb=6, hidden=12, n_heads=2),
)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("traincorpus")
    write_corpus(SynthConfig(n_schemas=2, n_train=12, n_dev=4, seed=5), root)
    schemas = load_schemas(root / "tables.json")
    vocab = build_vocab([root / "train.json"], schemas)
    vi = {sid: build_value_index(root / "content", s) for sid, s in schemas.items()}
    grammar = load_default_grammar()
    train_ds = load_dataset(root / "train.json", schemas, vocab, vi, grammar)
    dev_ds = load_dataset(root / "dev.json", schemas, vocab, vi, grammar)
    return vocab, grammar, train_ds, dev_ds


def fresh_model(corpus, seed=1):
    vocab, grammar, *_ = corpus
    return SemanticParser(TINY_MODEL, vocab, grammar, seed=seed)


# -- schedule ----------------------------------------------------------------


def test_lr_fixtures_on_reference_schedule():
    cfg = paper_train_config()
    assert cfg.max_steps == 40_000
    assert lr_at(1000, cfg) == pytest.approx(3.7e-4, abs=1e-12)
    assert lr_at(2000, cfg) == pytest.approx(7.4e-4, abs=1e-12)
    assert lr_at(cfg.max_steps, cfg) == 0.0
    assert lr_at(0, cfg) == 0.0


def test_lr_warms_up_then_anneals():
    cfg = TrainConfig(max_steps=100, warmup_steps=10, peak_lr=1e-3)
    ramp = [lr_at(s, cfg) for s in range(0, 11)]
    assert ramp == sorted(ramp) and ramp[-1] == pytest.approx(1e-3)
    tail = [lr_at(s, cfg) for s in range(10, 101)]
    assert all(a > b for a, b in zip(tail, tail[1:]))
    assert lr_at(55, cfg) == pytest.approx(1e-3 * (1 - 45 / 90) ** 0.5)
    assert lr_at(101, cfg) == 0.0


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(max_steps=10, warmup_steps=11)
    with pytest.raises(ValueError):
        TrainConfig(peak_lr=0.0)
    with pytest.raises(ValueError):
        TrainConfig(clip_norm=-1.0)


# -- loop --------------------------------------------------------------------


def test_train_runs_and_logs(corpus, tmp_path):
    *_, train_ds, dev_ds = corpus
    model = fresh_model(corpus)
    cfg = TrainConfig(
        batch_size=3, max_steps=6, warmup_steps=2, eval_every=3, log_every=2, seed=4
    )
    res = train(model, train_ds, dev_ds, cfg, run_dir=tmp_path / "run")
    assert res.steps == 6
    assert np.isfinite(res.final_loss)
    assert [h["step"] for h in res.history] == [3, 6]
    lines = (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()
    rows = [json.loads(ln) for ln in lines]
    assert any("eval" in r for r in rows)
    step_rows = [r for r in rows if "step" in r]
    assert step_rows and all(np.isfinite(r["loss"]) for r in step_rows)
    assert (tmp_path / "run" / "last.npz").exists()


def test_training_reduces_loss(corpus):
    *_, train_ds, _ = corpus
    model = fresh_model(corpus)
    ex = train_ds.examples[0]
    before = float(model.example_loss(ex, train=False)[0].data)
    cfg = TrainConfig(batch_size=4, max_steps=40, warmup_steps=5, eval_every=40, seed=0)
    train(model, train_ds, cfg=cfg, restore_best=False)
    after = float(model.example_loss(ex, train=False)[0].data)
    assert after < before


def test_loss_trace_is_bit_reproducible(corpus, tmp_path):
    *_, train_ds, _ = corpus
    cfg = TrainConfig(
        batch_size=3, max_steps=5, warmup_steps=2, eval_every=100, log_every=1, seed=9
    )

    def run(tag):
        model = fresh_model(corpus, seed=2)
        train(model, train_ds, cfg=cfg, run_dir=tmp_path / tag, restore_best=False)
        rows = [
            json.loads(ln)
            for ln in (tmp_path / tag / "metrics.jsonl").read_text().splitlines()
        ]
        return [r["loss"] for r in rows if "step" in r], model

    trace_a, model_a = run("a")
    trace_b, model_b = run("b")
    assert trace_a == trace_b and len(trace_a) == 5
    for name, arr in model_a.store.state_arrays().items():
        assert np.array_equal(arr, model_b.store.state_arrays()[name]), name


def test_divergence_aborts(corpus):
    *_, train_ds, _ = corpus
    model = fresh_model(corpus)
    model.store["embed/word"].data[:] = np.nan
    with pytest.raises(TrainingDiverged):
        train(model, train_ds, cfg=TrainConfig(max_steps=2, warmup_steps=1))


def test_train_requires_gold_examples(corpus):
    vocab, grammar, train_ds, _ = corpus
    model = fresh_model(corpus)
    import dataclasses

    stripped = [dataclasses.replace(ex, actions=None) for ex in train_ds.examples]
    with pytest.raises(ValueError):
        train(model, stripped, cfg=TrainConfig(max_steps=2, warmup_steps=1))


def test_stop_step_halts_early_without_changing_schedule(corpus):
    *_, train_ds, _ = corpus
    model = fresh_model(corpus)
    cfg = TrainConfig(batch_size=2, max_steps=50, warmup_steps=5, eval_every=100)
    res = train(model, train_ds, cfg=cfg, stop_step=3)
    assert res.steps == 3


# -- checkpoints -------------------------------------------------------------


def test_checkpoint_round_trip(corpus, tmp_path):
    vocab, grammar, train_ds, _ = corpus
    model = fresh_model(corpus)
    opt = Adam(model.store)
    train(model, train_ds, cfg=TrainConfig(batch_size=2, max_steps=3, warmup_steps=1),
          optimizer=opt, restore_best=False)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, model, opt, step=3, extra={"note": "x"})
    loaded, opt2, meta = load_checkpoint(path, grammar)
    assert meta["step"] == 3
    assert meta["fingerprint"] == config_fingerprint(model.cfg)
    assert meta["extra"] == {"note": "x"}
    for name, arr in model.store.state_arrays().items():
        assert np.array_equal(arr, loaded.store.state_arrays()[name]), name
    m, v, count = opt.state_arrays()
    m2, v2, count2 = opt2.state_arrays()
    assert count2 == count
    for name in m:
        assert np.array_equal(m[name], m2[name])
        assert np.array_equal(v[name], v2[name])
    assert loaded.vocab.words == vocab.words


def test_checkpoint_without_optimizer(corpus, tmp_path):
    _, grammar, *_ = corpus
    model = fresh_model(corpus)
    path = tmp_path / "bare.npz"
    save_checkpoint(path, model)
    loaded, opt, meta = load_checkpoint(path, grammar)
    assert opt is None and meta["step"] == 0


def test_checkpoint_refuses_grammar_mismatch(corpus, tmp_path):
    _, grammar, *_ = corpus
    model = fresh_model(corpus)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, model)
    with np.load(path, allow_pickle=False) as z:
        arrays = {k: z[k] for k in z.files}
    meta = json.loads(str(arrays["meta"][()]))
    meta["grammar_hash"] = "0" * 16
    arrays["meta"] = np.array(json.dumps(meta))
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    with pytest.raises(ValueError, match="grammar"):
        load_checkpoint(path, grammar)


def test_resume_is_bit_exact(corpus, tmp_path):
    *_, train_ds, _ = corpus
    cfg = TrainConfig(batch_size=3, max_steps=6, warmup_steps=2, eval_every=100, seed=3)

    straight = fresh_model(corpus, seed=0)
    train(straight, train_ds, cfg=cfg, restore_best=False)

    part = fresh_model(corpus, seed=0)
    opt = Adam(part.store)
    train(part, train_ds, cfg=cfg, stop_step=3, optimizer=opt, restore_best=False)
    mid = tmp_path / "mid.npz"
    save_checkpoint(mid, part, opt, step=3, train_cfg=cfg)

    resumed, opt2, meta = load_checkpoint(mid)
    train(resumed, train_ds, cfg=cfg, start_step=meta["step"], optimizer=opt2,
          restore_best=False)
    for name, arr in straight.store.state_arrays().items():
        assert np.array_equal(arr, resumed.store.state_arrays()[name]), name


def test_restore_best_matches_best_checkpoint(corpus, tmp_path):
    *_, train_ds, dev_ds = corpus
    model = fresh_model(corpus)
    cfg = TrainConfig(batch_size=3, max_steps=4, warmup_steps=1, eval_every=2, seed=6)
    res = train(model, train_ds, dev_ds, cfg, run_dir=tmp_path / "run")
    assert res.best_path is not None
    best, *_ = load_checkpoint(res.best_path)
    for name, arr in model.store.state_arrays().items():
        assert np.array_equal(arr, best.store.state_arrays()[name]), name
