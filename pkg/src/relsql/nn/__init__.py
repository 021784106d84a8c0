"""Numerics substrate: tensors, autodiff tape, ops, optimizer, RNG streams."""

from . import ops
from .gradcheck import GradCheckResult, gradcheck
from .optim import Adam, clip_global_norm
from .params import ParameterStore, glorot, normal_init
from .rng import Rng
from .tensor import (
    AutodiffError,
    GraphConsumedError,
    ShapeError,
    Tape,
    Tensor,
    active_tape,
    get_default_dtype,
    set_default_dtype,
    zeros,
)

__all__ = [
    "ops",
    "Tensor",
    "Tape",
    "zeros",
    "active_tape",
    "set_default_dtype",
    "get_default_dtype",
    "AutodiffError",
    "ShapeError",
    "GraphConsumedError",
    "ParameterStore",
    "glorot",
    "normal_init",
    "Adam",
    "clip_global_norm",
    "Rng",
    "gradcheck",
    "GradCheckResult",
]
