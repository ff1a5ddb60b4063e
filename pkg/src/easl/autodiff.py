"""Minimal reverse-mode automatic differentiation over dense float64 tensors.

Every value in the model is a 2-D ``Tensor`` (row vectors are ``1 x n``,
scalars are ``1 x 1``).  Operations record themselves onto a global
``Tape`` in execution order; ``backward`` replays the tape in reverse,
accumulating adjoints into ``.grad`` of every tensor that requires
gradients.  Gradients accumulate across backward calls until explicitly
zeroed, which is what the freeze-based training schedule relies on.

Broadcasting is deliberately restricted to bias-row addition
(``(m, n) + (1, n)``) so the tape stays easy to audit.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionError

__all__ = [
    "Tensor",
    "Tape",
    "active_tape",
    "clear_tape",
    "no_grad",
    "backward",
    "matmul",
    "transpose",
    "add",
    "sub",
    "mul",
    "scale",
    "concat",
    "slice2d",
    "row",
    "sigmoid",
    "softmax",
    "sum_all",
    "mean_all",
    "abs_",
    "mean_abs",
]


class Tensor:
    """Dense float64 value with an optional accumulated gradient."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(arr) if self.requires_grad else None

    # -- constructors -------------------------------------------------
    @classmethod
    def zeros(cls, *shape: int, requires_grad: bool = False) -> "Tensor":
        return cls(np.zeros(shape), requires_grad=requires_grad)

    @classmethod
    def ones(cls, *shape: int, requires_grad: bool = False) -> "Tensor":
        return cls(np.ones(shape), requires_grad=requires_grad)

    # -- introspection ------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def _ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        return self.grad

    # -- operator sugar -----------------------------------------------
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other) -> "Tensor":
        return scale(self, float(other))

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


class _TapeEntry:
    __slots__ = ("out", "parents", "backward_fn")

    def __init__(self, out: Tensor, parents: tuple[Tensor, ...], backward_fn):
        self.out = out
        self.parents = parents
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of primitive operations, replayed in reverse by backward."""

    def __init__(self):
        self._entries: list[_TapeEntry] = []

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward_fn) -> None:
        self._entries.append(_TapeEntry(out, parents, backward_fn))

    def clear(self) -> None:
        self._entries.clear()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[_TapeEntry]:
        return self._entries


_ACTIVE_TAPE = Tape()
_GRAD_ENABLED = True


def active_tape() -> Tape:
    return _ACTIVE_TAPE


def clear_tape() -> None:
    _ACTIVE_TAPE.clear()


class no_grad:
    """Context manager that disables tape recording (for evaluation passes)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


def _make(out_data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Wrap an op result; record it on the tape when gradients are live."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out = Tensor(out_data, requires_grad=True)
        _ACTIVE_TAPE.record(out, parents, backward_fn)
    else:
        out = Tensor(out_data)
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every requires_grad ancestor.

    The tape is replayed once in reverse execution order, which is a valid
    reverse-topological order.  Adjoints are gathered in a scratch buffer and
    only added to ``.grad`` at the end, so calling backward twice without
    zeroing doubles the stored gradients exactly.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    adjoint: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    holders: dict[int, Tensor] = {id(loss): loss}
    for entry in reversed(_ACTIVE_TAPE.entries):
        out_adj = adjoint.get(id(entry.out))
        if out_adj is None:
            continue
        parent_grads = entry.backward_fn(out_adj)
        for parent, g in zip(entry.parents, parent_grads):
            if g is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in adjoint:
                adjoint[key] += g
            else:
                adjoint[key] = g.copy()
                holders[key] = parent
    for key, tensor in holders.items():
        if tensor.requires_grad:
            tensor._ensure_grad()
            tensor.grad += adjoint[key]


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} x {b.shape}")
    a_data, b_data = a.data, b.data

    def bwd(g):
        return g @ b_data.T, a_data.T @ g

    return _make(a_data @ b_data, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    def bwd(g):
        return (g.T,)

    return _make(a.data.T.copy(), (a,), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:

        def bwd(g):
            return g, g

        return _make(a.data + b.data, (a, b), bwd)
    if b.shape == (1, a.shape[1]) and a.data.ndim == 2:
        # bias-row broadcast, the only broadcast this engine supports
        def bwd(g):
            return g, g.sum(axis=0, keepdims=True)

        return _make(a.data + b.data, (a, b), bwd)
    raise DimensionError(f"add: incompatible shapes {a.shape} + {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"sub: incompatible shapes {a.shape} - {b.shape}")

    def bwd(g):
        return g, -g

    return _make(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"mul: incompatible shapes {a.shape} * {b.shape}")
    a_data, b_data = a.data, b.data

    def bwd(g):
        return g * b_data, g * a_data

    return _make(a_data * b_data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd(g):
        return (g * c,)

    return _make(a.data * c, (a,), bwd)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if axis not in (0, 1):
        raise DimensionError(f"concat: axis must be 0 or 1, got {axis}")
    parts = list(tensors)
    if not parts:
        raise ContractError("concat: empty tensor list")
    sizes = [t.shape[axis] for t in parts]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        out = []
        for i in range(len(parts)):
            sl = slice(offsets[i], offsets[i + 1])
            out.append(g[sl, :] if axis == 0 else g[:, sl])
        return tuple(out)

    try:
        data = np.concatenate([t.data for t in parts], axis=axis)
    except ValueError as exc:
        raise DimensionError(
            f"concat: incompatible shapes {[t.shape for t in parts]} on axis {axis}"
        ) from exc
    return _make(data, tuple(parts), bwd)


def slice2d(a: Tensor, rows: slice, cols: slice) -> Tensor:
    shape = a.shape

    def bwd(g):
        out = np.zeros(shape)
        out[rows, cols] = g
        return (out,)

    return _make(a.data[rows, cols].copy(), (a,), bwd)


def row(a: Tensor, i: int) -> Tensor:
    """Select one row as a ``1 x n`` tensor (embedding-table lookup)."""
    if not 0 <= i < a.shape[0]:
        raise DimensionError(f"row: index {i} out of range for shape {a.shape}")
    return slice2d(a, slice(i, i + 1), slice(None))


def sigmoid(x: Tensor) -> Tensor:
    # exp of -|x| only: saturates without ever overflowing
    t = np.exp(-np.abs(x.data))
    out_data = np.where(x.data >= 0, 1.0 / (1.0 + t), t / (1.0 + t))

    def bwd(g):
        return (g * out_data * (1.0 - out_data),)

    return _make(out_data, (x,), bwd)


def softmax(x: Tensor, axis: int) -> Tensor:
    if axis not in (0, 1):
        raise DimensionError(f"softmax: axis must be 0 or 1, got {axis}")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * out_data).sum(axis=axis, keepdims=True)
        return (out_data * (g - inner),)

    return _make(out_data, (x,), bwd)


def sum_all(x: Tensor) -> Tensor:
    shape = x.shape

    def bwd(g):
        return (np.full(shape, g.reshape(-1)[0]),)

    return _make(np.array([[x.data.sum()]]), (x,), bwd)


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    shape = x.shape

    def bwd(g):
        return (np.full(shape, g.reshape(-1)[0] / n),)

    return _make(np.array([[x.data.mean()]]), (x,), bwd)


def abs_(x: Tensor) -> Tensor:
    # subgradient at 0 is 0 (np.sign(0) == 0), as the MAE losses require
    sign = np.sign(x.data)

    def bwd(g):
        return (g * sign,)

    return _make(np.abs(x.data), (x,), bwd)


def mean_abs(x: Tensor) -> Tensor:
    """Mean of elementwise absolute values, as a scalar tensor."""
    return mean_all(abs_(x))
