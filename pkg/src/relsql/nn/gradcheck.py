"""Finite-difference verification of tape gradients.

Central differences with step h on sampled coordinates of each parameter,
compared elementwise against the analytic gradient with relative error
|a - n| / max(|a|, |n|, floor).
"""

from dataclasses import dataclass

import numpy as np

from .tensor import Tape, Tensor

__all__ = ["gradcheck", "GradCheckResult"]


@dataclass
class GradCheckResult:
    max_rel_err: float
    worst: tuple  # (tensor index, flat element index, analytic, numeric)
    checked: int

    @property
    def ok(self) -> bool:
        return self.max_rel_err < self.tol

    tol: float = 1e-4


def gradcheck(fn, tensors, h=1e-5, tol=1e-4, sample_per_tensor=None, rng=None, atol=1e-7):
    """Check d fn() / d t for every tensor t in `tensors`.

    fn must be a deterministic closure returning a scalar loss Tensor and must
    not depend on an outer tape. When sample_per_tensor is set, only that many
    coordinates per tensor are probed (uniformly, via rng). Coordinates where
    both sides are below atol count as agreeing: a dead relu unit has an exact
    analytic zero while the finite difference is cancellation noise, and the
    relative-error formula would amplify that noise into a spurious failure.
    """
    tensors = list(tensors)
    for t in tensors:
        t.requires_grad = True
        t.grad = None
    with Tape() as tape:
        loss = fn()
    tape.backward(loss)
    analytic = [
        np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors
    ]
    for t in tensors:
        t.grad = None

    max_rel = 0.0
    worst = None
    checked = 0
    for ti, t in enumerate(tensors):
        flat = t.data.reshape(-1)
        n = flat.size
        if sample_per_tensor is not None and n > sample_per_tensor:
            if rng is None:
                raise ValueError("sampling requires an rng")
            idxs = rng.choice(n, size=sample_per_tensor, replace=False)
        else:
            idxs = range(n)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + h
            up = fn().item()
            flat[i] = orig - h
            down = fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            a = analytic[ti].reshape(-1)[i]
            if max(abs(a), abs(numeric)) < atol:
                rel = 0.0
            else:
                rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            checked += 1
            if rel > max_rel:
                max_rel = rel
                worst = (ti, int(i), float(a), float(numeric))
    return GradCheckResult(max_rel_err=max_rel, worst=worst, checked=checked, tol=tol)
