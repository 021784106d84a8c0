"""Optimization loop: lr schedule, minibatching, clipping, checkpoints.

Every random choice (batch composition, dropout masks) is a pure function
of (seed, step), so a run resumed from a step-N checkpoint replays steps
N+1.. bit-identically to the uninterrupted run.
"""

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset, Vocab
from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .evaluation import evaluate
from .grammar import Grammar, load_default_grammar
from .model import ModelConfig, SemanticParser, config_fingerprint
from .nn.optim import Adam, clip_global_norm
from .nn.rng import Rng
from .nn.tensor import Tape

__all__ = [
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "lr_at",
    "paper_train_config",
    "train",
    "save_checkpoint",
    "load_checkpoint",
]

_CKPT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Loss went non-finite; the run aborts rather than keep optimizing noise."""


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    max_steps: int = 5000
    warmup_steps: int = 200
    peak_lr: float = 1e-3
    clip_norm: float = 5.0
    eval_every: int = 500
    log_every: int = 50
    eval_beam: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if not 1 <= self.warmup_steps <= self.max_steps:
            raise ValueError("warmup_steps must lie in [1, max_steps]")
        if self.peak_lr <= 0:
            raise ValueError("peak_lr must be positive")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")


def paper_train_config() -> TrainConfig:
    """Reference-scale schedule; far beyond what the synthetic corpora need."""
    return TrainConfig(
        batch_size=20, max_steps=40_000, warmup_steps=2_000, peak_lr=7.4e-4
    )


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear warmup to peak_lr, then (1 - progress)^0.5 decay to zero."""
    if step <= 0:
        return 0.0
    if step <= cfg.warmup_steps:
        return cfg.peak_lr * (step / cfg.warmup_steps)
    if step >= cfg.max_steps:
        return 0.0
    frac = (step - cfg.warmup_steps) / (cfg.max_steps - cfg.warmup_steps)
    return cfg.peak_lr * (1.0 - frac) ** 0.5


# -- checkpoints -------------------------------------------------------------


def save_checkpoint(path, model: SemanticParser, optimizer: Adam | None = None,
                    step: int = 0, train_cfg: TrainConfig | None = None,
                    extra: dict | None = None) -> None:
    """One .npz holding weights, optimizer state, and a JSON meta record."""
    arrays: dict[str, np.ndarray] = {
        f"param/{n}": a for n, a in model.store.state_arrays().items()
    }
    adam_steps = 0
    if optimizer is not None:
        m, v, adam_steps = optimizer.state_arrays()
        for n, a in m.items():
            arrays[f"adam_m/{n}"] = a
        for n, a in v.items():
            arrays[f"adam_v/{n}"] = a
    meta = {
        "version": _CKPT_VERSION,
        "step": int(step),
        "adam_steps": int(adam_steps),
        "model": asdict(model.cfg),
        "fingerprint": config_fingerprint(model.cfg),
        "grammar_hash": model.grammar.version_hash(),
        "vocab": model.vocab.to_json(),
        "model_seed": model.seed,
        "train": asdict(train_cfg) if train_cfg is not None else None,
        "extra": extra or {},
    }
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path, grammar: Grammar | None = None):
    """(model, optimizer-or-None, meta). Refuses grammar-mismatched files."""
    grammar = grammar or load_default_grammar()
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"][()]))
        params = {k[6:]: z[k] for k in z.files if k.startswith("param/")}
        adam_m = {k[7:]: z[k] for k in z.files if k.startswith("adam_m/")}
        adam_v = {k[7:]: z[k] for k in z.files if k.startswith("adam_v/")}
    if meta.get("version") != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
    if meta["grammar_hash"] != grammar.version_hash():
        raise ValueError(
            "checkpoint was built against a different grammar "
            f"({meta['grammar_hash']} != {grammar.version_hash()}); refusing to load"
        )
    mc = meta["model"]
    cfg = ModelConfig(
        encoder=EncoderConfig(**mc["encoder"]),
        decoder=DecoderConfig(**mc["decoder"]),
        align_weight=mc["align_weight"],
    )
    model = SemanticParser(
        cfg, Vocab.from_json(meta["vocab"]), grammar, seed=meta["model_seed"]
    )
    model.store.load_state_arrays(params)
    optimizer = None
    if adam_m:
        optimizer = Adam(model.store)
        optimizer.load_state_arrays(adam_m, adam_v, meta["adam_steps"])
    return model, optimizer, meta


# -- the loop ----------------------------------------------------------------


@dataclass
class TrainResult:
    steps: int
    best_step: int
    best_exact: float
    best_action_acc: float
    final_loss: float
    history: list = field(default_factory=list)
    best_path: str | None = None
    last_path: str | None = None


def _gold_examples(data):
    examples = data.examples if isinstance(data, Dataset) else list(data)
    return [ex for ex in examples if ex.actions is not None]


def train(
    model: SemanticParser,
    train_data,
    dev_data=None,
    cfg: TrainConfig = TrainConfig(),
    run_dir=None,
    start_step: int = 0,
    stop_step: int | None = None,
    optimizer: Adam | None = None,
    restore_best: bool = True,
    checkpoint_extra: dict | None = None,
    log=None,
) -> TrainResult:
    """Optimize model in place; returns per-eval history and best metrics.

    Pass start_step and the optimizer from load_checkpoint to resume; the
    schedule stays pinned to cfg.max_steps either way. stop_step halts a
    run early without changing that schedule.
    Evaluation runs on dev_data when given, else on the training examples.
    With restore_best the weights of the best eval are put back at the end.
    """
    examples = _gold_examples(train_data)
    if not examples:
        raise ValueError("no gold-labeled training examples")
    eval_data = _gold_examples(dev_data) if dev_data is not None else examples
    rng = Rng.from_seed(cfg.seed)
    if optimizer is None:
        optimizer = Adam(model.store, lr=cfg.peak_lr)
    run_path = None
    metrics_f = None
    if run_dir is not None:
        run_path = Path(run_dir)
        run_path.mkdir(parents=True, exist_ok=True)
        metrics_f = open(run_path / "metrics.jsonl", "a")

    end_step = cfg.max_steps if stop_step is None else min(stop_step, cfg.max_steps)
    best = (-1.0, -1.0)
    best_step = 0
    best_snapshot = None
    history: list = []
    final_loss = float("nan")
    t0 = time.monotonic()
    try:
        for step in range(start_step + 1, end_step + 1):
            lr = lr_at(step, cfg)
            gen = rng.child("batch", str(step)).generator()
            idx = gen.choice(
                len(examples),
                size=cfg.batch_size,
                replace=len(examples) < cfg.batch_size,
            )
            model.store.zero_grad()
            n_act = n_cor = 0
            nll_sum = align_sum = 0.0
            with Tape() as tape:
                total = None
                for k, i in enumerate(idx):
                    ex_rng = rng.child("step", str(step), "ex", str(k))
                    loss, st = model.example_loss(examples[int(i)], ex_rng, train=True)
                    total = loss if total is None else total + loss
                    n_act += st["n_actions"]
                    n_cor += st["n_correct"]
                    nll_sum += st["nll"]
                    align_sum += st["align"]
                total = total * (1.0 / len(idx))
            final_loss = float(total.data)
            if not np.isfinite(final_loss):
                raise TrainingDiverged(f"non-finite loss at step {step}")
            tape.backward(total)
            grad_norm = clip_global_norm(model.store, cfg.clip_norm)
            optimizer.step(lr)

            if metrics_f is not None and (
                step % cfg.log_every == 0 or step == end_step
            ):
                row = {
                    "step": step,
                    "loss": final_loss,
                    "nll": nll_sum / len(idx),
                    "align": align_sum / len(idx),
                    "lr": lr,
                    "grad_norm": grad_norm,
                    "batch_action_acc": n_cor / n_act if n_act else 0.0,
                    "elapsed": time.monotonic() - t0,
                }
                metrics_f.write(json.dumps(row, sort_keys=True) + "\n")
                metrics_f.flush()

            if step % cfg.eval_every == 0 or step == end_step:
                rep = evaluate(model, eval_data, beam_size=cfg.eval_beam)
                snap = {"step": step, "loss": final_loss, **rep.to_dict()}
                history.append(snap)
                if log is not None:
                    log(
                        f"step {step}: loss {final_loss:.4f} "
                        f"exact {rep.exact:.3f} action_acc {rep.action_accuracy:.3f}"
                    )
                if metrics_f is not None:
                    metrics_f.write(json.dumps({"eval": snap}, sort_keys=True) + "\n")
                    metrics_f.flush()
                score = (rep.exact, rep.action_accuracy)
                if score > best:
                    best = score
                    best_step = step
                    best_snapshot = {
                        n: a.copy() for n, a in model.store.state_arrays().items()
                    }
                    if run_path is not None:
                        save_checkpoint(
                            run_path / "best.npz", model, optimizer, step, cfg,
                            extra={
                                **(checkpoint_extra or {}),
                                "exact": rep.exact,
                                "action_acc": rep.action_accuracy,
                            },
                        )
    finally:
        if metrics_f is not None:
            metrics_f.close()

    last_path = None
    if run_path is not None:
        last_path = str(run_path / "last.npz")
        save_checkpoint(last_path, model, optimizer, end_step, cfg,
                        extra=checkpoint_extra)
    if restore_best and best_snapshot is not None:
        model.store.load_state_arrays(best_snapshot)
    return TrainResult(
        steps=end_step - start_step,
        best_step=best_step,
        best_exact=max(best[0], 0.0),
        best_action_acc=max(best[1], 0.0),
        final_loss=final_loss,
        history=history,
        best_path=str(run_path / "best.npz") if run_path and best_snapshot else None,
        last_path=last_path,
    )
