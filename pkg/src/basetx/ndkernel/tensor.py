"""ND tensor with reverse-mode autodiff on a numpy substrate.

Forward ops record onto the active GradTape (a thread-local stack);
replaying the tape in reverse yields gradients for every requires_grad
leaf. All math that needs gradients anywhere in the package runs through
these ops.
"""

from __future__ import annotations

import threading

import numpy as np

_DEFAULT_DTYPE = [np.float64]


def set_default_dtype(dtype) -> None:
    """Set the dtype used for tensors built from python data (float32/float64)."""
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype!r}; use float32 or float64")
    _DEFAULT_DTYPE[0] = dt.type


def default_dtype():
    return _DEFAULT_DTYPE[0]


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested op."""


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf; the graph is in an error state."""

    def __init__(self, op: str):
        super().__init__(f"non-finite values produced by op '{op}'")
        self.op = op


class Tensor:
    """A dense row-major array plus gradient-tracking metadata."""

    __slots__ = ("data", "requires_grad", "_tape")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(_DEFAULT_DTYPE[0])
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self._tape = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- operator sugar (all dispatch to module-level ops) --
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


# ---------------------------------------------------------------------------
# Tape machinery
# ---------------------------------------------------------------------------

_LOCAL = threading.local()


def _stack() -> list:
    s = getattr(_LOCAL, "tapes", None)
    if s is None:
        s = _LOCAL.tapes = []
    return s


def active_tape():
    s = _stack()
    return s[-1] if s else None


class _Record:
    __slots__ = ("op", "inputs", "output", "backward_fn")

    def __init__(self, op, inputs, output, backward_fn):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward_fn = backward_fn


class GradTape:
    """Ordered record of forward ops; reverse replay produces gradients.

    Use as a context manager around the forward pass, then call
    ``backward(loss)`` (or the module-level ``backward``) to get a map
    from leaf tensor id to gradient Tensor. Tapes are independent; each
    thread keeps its own active stack.
    """

    def __init__(self):
        self._records: list[_Record] = []
        self._produced: set[int] = set()
        self._leaves: dict[int, Tensor] = {}

    def __enter__(self) -> "GradTape":
        _stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        popped = _stack().pop()
        assert popped is self, "mismatched GradTape nesting"

    def __len__(self) -> int:
        return len(self._records)

    def _emit(self, op, inputs, output, backward_fn) -> None:
        self._records.append(_Record(op, inputs, output, backward_fn))
        self._produced.add(id(output))
        for t in inputs:
            if t.requires_grad and id(t) not in self._produced:
                self._leaves[id(t)] = t

    def backward(self, loss: Tensor) -> dict[int, Tensor]:
        """Gradient of a scalar loss w.r.t. every requires_grad leaf."""
        if loss.data.size != 1:
            raise ShapeError(
                f"backward needs a scalar loss, got shape {loss.data.shape}"
            )
        if id(loss) not in self._produced:
            raise RuntimeError(
                "detached graph: loss was not produced under this tape"
            )
        grads: dict[int, np.ndarray] = {
            id(loss): np.ones_like(loss.data)
        }
        for rec in reversed(self._records):
            gout = grads.pop(id(rec.output), None)
            if gout is None:
                continue
            gins = rec.backward_fn(gout)
            for t, g in zip(rec.inputs, gins):
                if g is None or not t.requires_grad:
                    continue
                acc = grads.get(id(t))
                grads[id(t)] = g if acc is None else acc + g
        out: dict[int, Tensor] = {}
        for tid, g in grads.items():
            leaf = self._leaves.get(tid)
            if leaf is not None:
                out[tid] = Tensor(g.reshape(leaf.data.shape))
        return out


def backward(loss: Tensor) -> dict[int, Tensor]:
    """Backward through the tape that recorded ``loss``."""
    tape = loss._tape
    if tape is None:
        raise RuntimeError("detached graph: loss carries no tape record")
    return tape.backward(loss)


def _emit(op: str, out_data: np.ndarray, inputs: tuple, backward_fn) -> Tensor:
    if not np.isfinite(out_data).all():
        raise NonFiniteError(op)
    tape = active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs, dtype=out_data.dtype)
    if needs:
        out._tape = tape
        tape._emit(op, inputs, out, backward_fn)
    return out


def _as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype))


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# Elementwise ops
# ---------------------------------------------------------------------------


def add(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    out = a.data + b.data

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _emit("add", out, (a, b), back)


def sub(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    out = a.data - b.data

    def back(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _emit("sub", out, (a, b), back)


def mul(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    out = a.data * b.data

    def back(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _emit("mul", out, (a, b), back)


def div(a, b) -> Tensor:
    a = _as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = _as_tensor(b, like=a)
    out = a.data / b.data

    def back(g):
        return (
            _unbroadcast(g / b.data, a.data.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape),
        )

    return _emit("div", out, (a, b), back)


def neg(a) -> Tensor:
    a = _as_tensor(a)

    def back(g):
        return (-g,)

    return _emit("neg", -a.data, (a,), back)


def power(a, p: float) -> Tensor:
    a = _as_tensor(a)
    p = float(p)
    out = a.data**p

    def back(g):
        return (g * p * a.data ** (p - 1.0),)

    return _emit("pow", out, (a,), back)


def texp(a) -> Tensor:
    a = _as_tensor(a)
    out = np.exp(a.data)

    def back(g):
        return (g * out,)

    return _emit("exp", out, (a,), back)


def tlog(a) -> Tensor:
    a = _as_tensor(a)
    out = np.log(a.data)

    def back(g):
        return (g / a.data,)

    return _emit("log", out, (a,), back)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    out = np.maximum(a.data, 0)

    def back(g):
        return (g * (a.data > 0),)

    return _emit("relu", out, (a,), back)


# ---------------------------------------------------------------------------
# Shape ops
# ---------------------------------------------------------------------------


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    old = a.data.shape
    out = a.data.reshape(shape)

    def back(g):
        return (g.reshape(old),)

    return _emit("reshape", out, (a,), back)


def transpose(a, axes=None) -> Tensor:
    a = _as_tensor(a)
    out = np.transpose(a.data, axes)
    if axes is None:
        inv = None
    else:
        inv = np.argsort(axes)

    def back(g):
        return (np.transpose(g, inv),)

    return _emit("transpose", out, (a,), back)


def take(a, idx) -> Tensor:
    """Numpy-style indexing/slicing; backward scatters into zeros."""
    a = _as_tensor(a)
    out = a.data[idx]

    def back(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        return (buf,)

    return _emit("take", np.ascontiguousarray(out), (a,), back)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return _emit("concat", out, tuple(ts), back)


def stack(tensors, axis: int = 0) -> Tensor:
    ts = [_as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in ts], axis=axis)

    def back(g):
        moved = np.moveaxis(g, axis, 0)
        return tuple(moved[i] for i in range(len(ts)))

    return _emit("stack", out, tuple(ts), back)


# ---------------------------------------------------------------------------
# Reductions
# ---------------------------------------------------------------------------


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _emit("sum", np.asarray(out), (a,), back)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        count = a.data.size
    else:
        axs = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axs:
            count *= a.data.shape[ax]

    def back(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, a.data.shape).copy(),)

    return _emit("mean", np.asarray(out), (a,), back)


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a = _as_tensor(a)
    b = _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(
            f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}"
        )
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}"
        )
    out = a.data @ b.data

    def back(g):
        return g @ b.data.T, a.data.T @ g

    return _emit("matmul", out, (a, b), back)


# ---------------------------------------------------------------------------
# Softmax family
# ---------------------------------------------------------------------------


def softmax(a, axis=-1) -> Tensor:
    """Softmax jointly over one axis or a tuple of axes."""
    a = _as_tensor(a)
    axs = axis if isinstance(axis, tuple) else (axis,)
    m = a.data.max(axis=axs, keepdims=True)
    e = np.exp(a.data - m)
    s = e / e.sum(axis=axs, keepdims=True)

    def back(g):
        inner = (g * s).sum(axis=axs, keepdims=True)
        return (s * (g - inner),)

    return _emit("softmax", s, (a,), back)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    z = a.data - m
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    s = np.exp(out)

    def back(g):
        return (g - s * g.sum(axis=axis, keepdims=True),)

    return _emit("log_softmax", out, (a,), back)


def sqdist(a, b, axis=-1) -> Tensor:
    """Squared L2 distance along an axis, composed from primitives."""
    d = sub(a, b)
    return tsum(mul(d, d), axis=axis)
