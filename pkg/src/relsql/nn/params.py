"""Named parameter registry and weight initializers.

Names are slash-separated paths like ``encoder/layer0/attn_wq`` so checkpoint
files and optimizer state can refer to parameters without object identity.
"""

import numpy as np

from .tensor import Tensor, get_default_dtype

__all__ = ["ParameterStore", "glorot", "normal_init"]


def glorot(gen, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    """Glorot/Xavier uniform init."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return gen.uniform(-limit, limit, size=shape).astype(get_default_dtype())


def normal_init(gen, shape, std=0.02) -> np.ndarray:
    return (gen.standard_normal(shape) * std).astype(get_default_dtype())


class ParameterStore:
    """Ordered name -> Tensor map for all trainable weights of a model."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(np.asarray(array, dtype=get_default_dtype()), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def tensors(self):
        return list(self._params.values())

    def param_count(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self._params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite all parameter values; names and shapes must match exactly."""
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise ValueError(
                f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}"
            )
        for name, t in self._params.items():
            arr = np.asarray(arrays[name], dtype=get_default_dtype())
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {arr.shape} vs {t.data.shape}"
                )
            t.data = arr.copy()
