"""Dense float64 tensors with reverse-mode differentiation.

Every op in this module builds a node that remembers its parents and a
closure mapping the output gradient to one gradient per parent.  Calling
:func:`backward` on a scalar walks the graph once in reverse topological
order.  Leaf tensors accumulate into ``.grad`` (``+=``) until
:meth:`Tensor.zero_grad` is called; nothing is reset implicitly.

Values are numpy arrays; broadcasting is supported for the elementwise ops
and for batched ``matmul``, which is all the model needs.
"""

from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

_GELU_C = math.sqrt(2.0 / math.pi)
_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Build no graph inside the block; outputs never require grad."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A value in a computation graph.

    Leaves created with ``requires_grad=True`` own a zero-initialised
    ``grad`` array of the same shape.  Interior nodes receive ``grad`` during
    :func:`backward` so intermediate gradients can be inspected.
    """

    __slots__ = ("data", "grad", "requires_grad", "name", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.array(data, dtype=np.float64)
        _check_finite(arr, "leaf")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self.name = name
        self.op = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"expected a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self.op}{tag})"

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

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _check_finite(arr: np.ndarray, op: str) -> None:
    if not np.isfinite(arr).all():
        raise FloatingPointError(f"non-finite value produced by {op}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_op(data: np.ndarray, parents: Iterable[Tensor], backward_fn: BackwardFn, op: str) -> Tensor:
    """Wrap ``data`` as the output of a differentiable op.

    ``backward_fn(g)`` must return one gradient (or ``None``) per parent, in
    the same order, each already reduced to that parent's shape.
    """
    out = Tensor.__new__(Tensor)
    data = np.asarray(data, dtype=np.float64)
    _check_finite(data, op)
    parents = tuple(parents)
    out.data = data
    out.name = None
    out.op = op
    out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    out.grad = None
    if out.requires_grad:
        out._parents = parents
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``grad``."""
    if loss.data.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return
    pending: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo_order(loss)):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        node.grad = g
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            prev = pending.get(id(parent))
            pending[id(parent)] = pg if prev is None else prev + pg


# ---------------------------------------------------------------- elementwise


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_op(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_op(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
        "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_op(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def _bw(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return make_op(out, (a, b), _bw, "div")


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return make_op(x.data * c, (x,), lambda g: (g * c,), "scale")


def square(x: Tensor) -> Tensor:
    return make_op(x.data * x.data, (x,), lambda g: (2.0 * x.data * g,), "square")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make_op(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    if np.any(x.data <= 0):
        raise ValueError("log of a non-positive value")
    return make_op(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def gelu(x: Tensor) -> Tensor:
    """Tanh-approximated GELU."""
    u = x.data
    inner = _GELU_C * (u + 0.044715 * u**3)
    t = np.tanh(inner)
    out = 0.5 * u * (1.0 + t)

    def _bw(g):
        d_inner = _GELU_C * (1.0 + 3 * 0.044715 * u**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * d_inner),)

    return make_op(out, (x,), _bw, "gelu")


# ----------------------------------------------------------------- structural


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def _bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_op(a.data @ b.data, (a, b), _bw, "matmul")


def transpose(x: Tensor) -> Tensor:
    """Swap the last two axes."""
    return make_op(np.swapaxes(x.data, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    src = x.shape
    return make_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(src),), "reshape")


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    src = x.shape
    out = np.broadcast_to(x.data, tuple(shape)).copy()
    return make_op(out, (x,), lambda g: (_unbroadcast(g, src),), "broadcast_to")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = [t.shape for t in tensors]
        raise ValueError(f"concat shape mismatch along axis {axis}: {shapes}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_op(out, tensors, _bw, "concat")


def narrow(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Contiguous slice ``[start, stop)`` along ``axis``."""
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def _bw(g):
        full = np.zeros_like(x.data)
        full[index] = g
        return (full,)

    return make_op(x.data[index], (x,), _bw, "narrow")


def take(x: Tensor, indices: Sequence[int], axis: int = -1) -> Tensor:
    """Select entries ``indices`` along ``axis`` (duplicates allowed)."""
    idx = np.asarray(indices, dtype=np.intp)
    ax = axis % x.ndim

    def _bw(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (slice(None),) * ax + (idx,), g)
        return (full,)

    return make_op(np.take(x.data, idx, axis=ax), (x,), _bw, "take")


# ------------------------------------------------------------------ reductions


def sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:  # noqa: A001
    src = x.shape

    def _bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, src).copy(),)

    return make_op(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), _bw, "sum")


def mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    n = x.data.size if axis is None else x.shape[axis]
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / n)


def max_pool(x: Tensor, axis: int = -2) -> Tensor:
    """Maximum along ``axis`` (kept as a length-1 axis).

    The gradient goes to the first maximising index only, so ties are
    resolved deterministically toward the lowest index.
    """
    ax = axis % x.ndim
    arg = np.expand_dims(np.argmax(x.data, axis=ax), ax)
    out = np.take_along_axis(x.data, arg, axis=ax)

    def _bw(g):
        full = np.zeros_like(x.data)
        np.put_along_axis(full, arg, g, axis=ax)
        return (full,)

    return make_op(out, (x,), _bw, "max_pool")


def gmp_rows(m: Tensor) -> Tensor:
    """Column-wise max over the row (query) axis: ``[..., q, r] -> [..., 1, r]``."""
    if m.shape[-2] < 1:
        raise ValueError("gmp_rows needs at least one row")
    return max_pool(m, axis=-2)


def l2_norm(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Euclidean norm along ``axis``; the subgradient at 0 is taken as 0."""
    n = np.sqrt(np.sum(x.data * x.data, axis=axis, keepdims=True))

    def _bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        safe = np.where(n > 0, n, 1.0)
        return (np.where(n > 0, g * x.data / safe, 0.0),)

    out = n if keepdims else np.squeeze(n, axis=axis)
    return make_op(out, (x,), _bw, "l2_norm")


def variance(x: Tensor, axis: int | None = None) -> Tensor:
    """Population variance (no Bessel correction)."""
    centered = sub(x, mean(x, axis=axis, keepdims=True))
    return mean(square(centered), axis=axis)


# ------------------------------------------------------------ normalisations


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def _bw(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return make_op(out, (x,), _bw, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def _bw(g):
        return (g - probs * np.sum(g, axis=axis, keepdims=True),)

    return make_op(out, (x,), _bw, "log_softmax")


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv

    def _bw(g):
        dxhat = g * gain.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        return dx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape)

    return make_op(xhat * gain.data + bias.data, (x, gain, bias), _bw, "layer_norm")


def cosine(u: Tensor, v: Tensor) -> Tensor:
    """Cosine similarity of two vectors (last axis)."""
    u, v = as_tensor(u), as_tensor(v)
    if u.shape[-1] != v.shape[-1]:
        raise ValueError(f"cosine shape mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u.data, axis=-1)
    nv = np.linalg.norm(v.data, axis=-1)
    if np.any(nu < 1e-12) or np.any(nv < 1e-12):
        raise ZeroDivisionError("cosine of a zero-norm vector")
    return div(sum(mul(u, v), axis=-1), mul(l2_norm(u), l2_norm(v)))
