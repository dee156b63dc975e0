"""Dense float64 tensors with reverse-mode differentiation.

Every primitive records its inputs and a backward closure on the output
tensor. :func:`backward` orders the recorded graph into a tape and walks it
once in reverse.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidArgument, NumericError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording (inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "op", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn = None
        self.op = "leaf"
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Tensor):
            raise InvalidArgument("tensor / tensor is not a primitive; multiply by a reciprocal")
        return mul(self, 1.0 / float(o))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, o):
        return matmul(self, o)

    def __getitem__(self, idx):
        return slice_(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def make_op(data: np.ndarray, parents: Sequence[Tensor], backward: Callable, op: str) -> Tensor:
    """Wrap a primitive's forward value; ``backward(g)`` returns one grad (or None) per parent."""
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by {op}")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out.op = op
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out.parents = tuple(parents)
        out.backward_fn = backward
    else:
        out.parents = ()
        out.backward_fn = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def _check_broadcast(a: np.ndarray, b: np.ndarray, op: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise InvalidArgument(f"{op}: incompatible shapes {a.shape} and {b.shape}") from exc


# elementwise ------------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "add")
    sa, sb = a.shape, b.shape
    return make_op(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "sub")
    sa, sb = a.shape, b.shape
    return make_op(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a.data, b.data, "mul")
    ad, bd = a.data, b.data
    return make_op(
        ad * bd, (a, b), lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)), "mul"
    )


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_op(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return make_op(y, (x,), lambda g: (g * (1.0 - y * y),), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    e = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1.0, e) / (1.0 + e)
    return make_op(y, (x,), lambda g: (g * y * (1.0 - y),), "sigmoid")


def log_sigmoid(x: Tensor) -> Tensor:
    """log(sigmoid(x)) without overflow: min(x, 0) - log1p(exp(-|x|))."""
    e = np.exp(-np.abs(x.data))
    y = np.minimum(x.data, 0.0) - np.log1p(e)
    # d/dx log sigmoid(x) = 1 - sigmoid(x)
    s_neg = np.where(x.data >= 0, e, 1.0) / (1.0 + e)
    return make_op(y, (x,), lambda g: (g * s_neg,), "log_sigmoid")


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        y = np.exp(x.data)
    return make_op(y, (x,), lambda g: (g * y,), "exp")


def log(x: Tensor) -> Tensor:
    xd = x.data
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(xd)
    return make_op(y, (x,), lambda g: (g / xd,), "log")


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    xd = x.data
    inside = (xd >= lo) & (xd <= hi)
    return make_op(np.clip(xd, lo, hi), (x,), lambda g: (g * inside,), "clip")


def abs_(x: Tensor) -> Tensor:
    s = np.sign(x.data)
    return make_op(np.abs(x.data), (x,), lambda g: (g * s,), "abs")


# reductions and shape ops ---------------------------------------------------------


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axis(axis, x.ndim)
    shape = x.shape
    y = x.data.sum(axis=axes, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, shape).copy(),)

    return make_op(np.asarray(y), (x,), back, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axis(axis, x.ndim)
    n = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(sum_(x, axis, keepdims), 1.0 / n)


def norm(x: Tensor, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis``; the gradient at a zero vector is taken as 0."""
    xd = x.data
    n = np.sqrt(np.sum(xd * xd, axis=axis))

    def back(g):
        nk = np.expand_dims(n, axis)
        safe = np.where(nk > 0, nk, 1.0)
        return (np.where(nk > 0, xd / safe, 0.0) * np.expand_dims(g, axis),)

    return make_op(n, (x,), back, "norm")


def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    try:
        y = x.data.reshape(shape)
    except ValueError as exc:
        raise InvalidArgument(f"cannot reshape {old} to {shape}") from exc
    return make_op(y, (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)
    return make_op(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def _is_basic(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (slice, int, np.integer, type(None), type(Ellipsis))) for i in items)


def slice_(x: Tensor, idx) -> Tensor:
    shape = x.shape
    try:
        y = x.data[idx]
    except IndexError as exc:
        raise InvalidArgument(f"bad index {idx!r} for shape {shape}") from exc
    basic = _is_basic(idx)

    def back(g):
        full = np.zeros(shape)
        if basic:
            full[idx] += g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return make_op(np.array(y), (x,), back, "slice")


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(t) for t in xs]
    if not xs:
        raise InvalidArgument("concat of nothing")
    nd = xs[0].ndim
    ax = axis % nd
    for t in xs:
        if t.ndim != nd or any(t.shape[i] != xs[0].shape[i] for i in range(nd) if i != ax):
            raise InvalidArgument("concat: incompatible shapes " + str([t.shape for t in xs]))
    sizes = [t.shape[ax] for t in xs]
    cuts = np.cumsum(sizes)[:-1]
    return make_op(
        np.concatenate([t.data for t in xs], axis=ax), xs, lambda g: tuple(np.split(g, cuts, axis=ax)), "concat"
    )


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)
    return make_op(y, (x,), lambda g: (y * (g - np.sum(g * y, axis=axis, keepdims=True)),), "softmax")


# linear algebra -----------------------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise InvalidArgument("matmul needs operands of rank >= 2")
    if a.shape[-1] != b.shape[-2]:
        raise InvalidArgument(f"matmul: inner dimensions differ {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def back(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    return make_op(ad @ bd, (a, b), back, "matmul")


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    """x (B, C, H, W), w (O, C, kh, kw), b (O,) -> (B, O, Ho, Wo).

    Forward gathers strided patches into a column matrix; the input gradient is
    scattered back with one strided add per kernel offset.
    """
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise InvalidArgument(f"conv2d: incompatible shapes {x.shape} and {w.shape}")
    if stride < 1 or padding < 0:
        raise InvalidArgument("conv2d: stride must be >= 1 and padding >= 0")
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    Ho = (H + 2 * padding - kh) // stride + 1
    Wo = (W + 2 * padding - kw) // stride + 1
    if Ho < 1 or Wo < 1:
        raise InvalidArgument("conv2d: kernel larger than padded input")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # (B, Ho, Wo, C, kh, kw) -> rows of patches
    cols = win[:, :, :Ho, :Wo].transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * kh * kw)
    wmat = w.data.reshape(O, C * kh * kw)
    out = cols @ wmat.T
    if b is not None:
        out += b.data
    out = np.ascontiguousarray(out.reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2))
    wshape = w.shape

    def back(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(B * Ho * Wo, O)
        gw = (g2.T @ cols).reshape(wshape)
        # (C, kh, kw, B, Ho, Wo): each kernel offset is a contiguous block
        gcols = (wmat.T @ g2.T).reshape(C, kh, kw, B, Ho, Wo)
        gx = np.zeros((C, B) + xp.shape[2:])
        for i in range(kh):
            for j in range(kw):
                gx[:, :, i : i + stride * (Ho - 1) + 1 : stride, j : j + stride * (Wo - 1) + 1 : stride] += gcols[:, i, j]
        gx = gx.transpose(1, 0, 2, 3)
        if padding:
            gx = gx[:, :, padding:-padding, padding:-padding]
        gx = np.ascontiguousarray(gx)
        if b is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    parents = (x, w) if b is None else (x, w, b)
    return make_op(out, parents, back, "conv2d")


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbor 2x upsampling of the last two axes."""
    if x.ndim < 2:
        raise InvalidArgument("upsample2x needs at least 2 dims")
    y = x.data.repeat(2, axis=-2).repeat(2, axis=-1)
    shape = x.shape

    def back(g):
        g = g.reshape(shape[:-2] + (shape[-2], 2, shape[-1], 2))
        return (g.sum(axis=(-3, -1)),)

    return make_op(y, (x,), back, "upsample2x")


# backward -------------------------------------------------------------------------


class ComputationTape:
    """Topologically ordered list of recorded nodes reachable from an output."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_output(cls, out: Tensor) -> "ComputationTape":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack = [(out, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node.parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return cls(order)

    def __len__(self):
        return len(self.nodes)


def backward(out: Tensor) -> None:
    """Accumulate d(out)/d(leaf) into ``.grad`` of every tensor that requires it."""
    if out.data.size != 1:
        raise InvalidArgument(f"backward needs a scalar output, got shape {out.shape}")
    if not out.requires_grad:
        return
    tape = ComputationTape.from_output(out)
    grads: dict[int, np.ndarray] = {id(out): np.ones_like(out.data)}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node.backward_fn is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for p, pg in zip(node.parents, node.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg
