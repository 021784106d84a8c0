"""Dense tensors with tape-based reverse-mode automatic differentiation.

A Tape records every op executed while it is active (execution order is a
valid topological order, so backward just walks the records in reverse).
Tensors are numpy-backed; float64 is the default dtype so that gradients can
be verified against finite differences, float32 is available for training.
"""

import threading

import numpy as np

__all__ = [
    "Tensor",
    "Tape",
    "AutodiffError",
    "ShapeError",
    "GraphConsumedError",
    "tensor",
    "zeros",
    "set_default_dtype",
    "get_default_dtype",
    "active_tape",
]


class AutodiffError(Exception):
    """Base class for tensor/graph errors."""


class ShapeError(AutodiffError):
    def __init__(self, op, *shapes):
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)
        pretty = " vs ".join(str(s) for s in self.shapes)
        super().__init__(f"{op}: incompatible shapes {pretty}")


class GraphConsumedError(AutodiffError):
    pass


_state = threading.local()
_DEFAULT_DTYPE = [np.float64]


def set_default_dtype(dtype) -> None:
    """Switch the dtype used for new tensors (float64 or float32)."""
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float64), np.dtype(np.float32)):
        raise ValueError(f"unsupported dtype {dtype}")
    _DEFAULT_DTYPE[0] = dtype.type


def get_default_dtype():
    return _DEFAULT_DTYPE[0]


def active_tape():
    """The tape currently recording in this thread, or None."""
    return getattr(_state, "tape", None)


class Tape:
    """Op records for one forward pass; confined to a single thread.

    Usage::

        with Tape() as tape:
            loss = ...
        tape.backward(loss)
    """

    def __init__(self):
        self._records = []
        self._consumed = False

    def __enter__(self):
        if getattr(_state, "tape", None) is not None:
            raise AutodiffError("a tape is already active in this thread")
        _state.tape = self
        return self

    def __exit__(self, exc_type, exc, tb):
        _state.tape = None
        return False

    def record(self, op, out, backward_fn):
        self._records.append((op, out, backward_fn))

    def __len__(self):
        return len(self._records)

    def backward(self, loss) -> None:
        """Populate .grad on every requires_grad tensor reachable from loss.

        The loss must be scalar; a tape can only be walked once.
        """
        if self._consumed:
            raise GraphConsumedError("backward() already called on this tape")
        if loss.data.size != 1:
            raise AutodiffError(
                f"backward() needs a scalar loss, got shape {loss.shape}"
            )
        self._consumed = True
        loss._accum_grad(np.ones_like(loss.data))
        for _op, out, backward_fn in reversed(self._records):
            if out.grad is None:
                continue
            backward_fn(out.grad)


class Tensor:
    """A dense array plus an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, np.ndarray) and data.dtype == get_default_dtype():
            self.data = data
        else:
            self.data = np.asarray(data, dtype=get_default_dtype())
        self.requires_grad = bool(requires_grad)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def _accum_grad(self, g) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={tuple(self.shape)}{flag})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return mul(self, 1.0 / other)
        return mul(self, reciprocal(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def reshape(self, *shape):
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data, requires_grad=False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad=False) -> Tensor:
    return Tensor(np.zeros(shape, dtype=get_default_dtype()), requires_grad)


def _record(op, out, parents, backward_fn):
    """Attach a backward closure if a tape is active and grads are needed."""
    tape = active_tape()
    if tape is None:
        return out
    if not any(p.requires_grad for p in parents):
        return out
    out.requires_grad = True
    tape.record(op, out, backward_fn)
    return out


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    try:
        out = Tensor(a.data + b.data)
    except ValueError:
        raise ShapeError("add", a.shape, b.shape) from None

    def backward(g):
        if a.requires_grad:
            a._accum_grad(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum_grad(_unbroadcast(g, b.shape))

    return _record("add", out, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    try:
        out = Tensor(a.data * b.data)
    except ValueError:
        raise ShapeError("mul", a.shape, b.shape) from None

    def backward(g):
        if a.requires_grad:
            a._accum_grad(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum_grad(_unbroadcast(g * a.data, b.shape))

    return _record("mul", out, (a, b), backward)


def reciprocal(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(1.0 / a.data)

    def backward(g):
        if a.requires_grad:
            a._accum_grad(-g * out.data * out.data)

    return _record("reciprocal", out, (a,), backward)


def exp(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.exp(a.data))

    def backward(g):
        if a.requires_grad:
            a._accum_grad(g * out.data)

    return _record("exp", out, (a,), backward)


def log(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.log(a.data))

    def backward(g):
        if a.requires_grad:
            a._accum_grad(g / a.data)

    return _record("log", out, (a,), backward)


def tanh(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.tanh(a.data))

    def backward(g):
        if a.requires_grad:
            a._accum_grad(g * (1.0 - out.data * out.data))

    return _record("tanh", out, (a,), backward)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(1.0 / (1.0 + np.exp(-a.data)))

    def backward(g):
        if a.requires_grad:
            a._accum_grad(g * out.data * (1.0 - out.data))

    return _record("sigmoid", out, (a,), backward)


def relu(a) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.maximum(a.data, 0.0))

    def backward(g):
        if a.requires_grad:
            a._accum_grad(g * (a.data > 0.0))

    return _record("relu", out, (a,), backward)


# -- shape ------------------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    old = a.shape
    out = Tensor(a.data.reshape(shape))

    def backward(g):
        if a.requires_grad:
            a._accum_grad(g.reshape(old))

    return _record("reshape", out, (a,), backward)


def transpose(a, axes=None) -> Tensor:
    a = _wrap(a)
    out = Tensor(np.transpose(a.data, axes))
    inv = None if axes is None else np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a._accum_grad(np.transpose(g, inv))

    return _record("transpose", out, (a,), backward)


def take(a, index) -> Tensor:
    """Basic or integer indexing with gradient scatter on backward."""
    a = _wrap(a)
    out = Tensor(a.data[index].copy())

    def backward(g):
        if a.requires_grad:
            buf = np.zeros_like(a.data)
            np.add.at(buf, index, g)
            a._accum_grad(buf)

    return _record("take", out, (a,), backward)


def concat(tensors, axis=0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accum_grad(g[tuple(sl)])

    return _record("concat", out, tuple(tensors), backward)


def stack(tensors, axis=0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    out = Tensor(np.stack([t.data for t in tensors], axis=axis))

    def backward(g):
        parts = np.moveaxis(g, axis, 0)
        for t, part in zip(tensors, parts):
            if t.requires_grad:
                t._accum_grad(part)

    return _record("stack", out, tuple(tensors), backward)


# -- reductions -------------------------------------------------------------


def sum_(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def backward(g):
        if not a.requires_grad:
            return
        if axis is None:
            a._accum_grad(np.broadcast_to(g, a.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accum_grad(np.broadcast_to(g, a.shape).copy())

    return _record("sum", out, (a,), backward)


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def max_(a, axis) -> Tensor:
    """Max along one axis; gradient flows to the (first) argmax entries."""
    a = _wrap(a)
    out = Tensor(a.data.max(axis=axis))
    idx = a.data.argmax(axis=axis)

    def backward(g):
        if not a.requires_grad:
            return
        buf = np.zeros_like(a.data)
        grid = list(np.indices(out.data.shape))
        grid.insert(axis if axis >= 0 else a.data.ndim + axis, idx)
        buf[tuple(grid)] = g
        a._accum_grad(buf)

    return _record("max", out, (a,), backward)


# -- matmul -----------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product of >=2-d operands; leading dims follow numpy stacking."""
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim < 2 or b.data.ndim < 2 or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    out = Tensor(np.matmul(a.data, b.data))

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accum_grad(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accum_grad(_unbroadcast(gb, b.shape))

    return _record("matmul", out, (a, b), backward)
