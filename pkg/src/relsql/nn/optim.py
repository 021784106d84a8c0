"""Adam optimizer and global-norm gradient clipping."""

import numpy as np

from .params import ParameterStore

__all__ = ["Adam", "clip_global_norm"]


def clip_global_norm(store: ParameterStore, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm.

    Returns the pre-clip norm. Parameters without a gradient are skipped.
    """
    total = 0.0
    for _name, t in store.items():
        if t.grad is not None:
            total += float((t.grad * t.grad).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for _name, t in store.items():
            if t.grad is not None:
                t.grad *= scale
    return norm


class Adam:
    """Adam with bias correction; epsilon added outside the square root."""

    def __init__(self, store: ParameterStore, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.store = store
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in store.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in store.items()}

    def step(self, lr=None) -> None:
        """Apply one update using current gradients; lr overrides the default."""
        if lr is None:
            lr = self.lr
        self.step_count += 1
        bc1 = 1.0 - self.beta1 ** self.step_count
        bc2 = 1.0 - self.beta2 ** self.step_count
        for name, t in self.store.items():
            if t.grad is None:
                continue
            g = t.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            mhat = m / bc1
            vhat = v / bc2
            t.data -= lr * mhat / (np.sqrt(vhat) + self.eps)

    def zero_grad(self) -> None:
        self.store.zero_grad()

    def state_arrays(self):
        """(m, v, step_count) for checkpointing."""
        return self.m, self.v, self.step_count

    def load_state_arrays(self, m, v, step_count) -> None:
        for name in self.m:
            if name not in m or name not in v:
                raise ValueError(f"optimizer state missing for {name}")
            self.m[name] = np.asarray(m[name]).astype(self.m[name].dtype).copy()
            self.v[name] = np.asarray(v[name]).astype(self.v[name].dtype).copy()
        self.step_count = int(step_count)
