"""Dense float64 tensors with reverse-mode differentiation.

Every op that touches a tensor with ``requires_grad`` records its parents and
a closure producing the parent gradients.  Nodes get a monotonically
increasing id at creation, so sorting the reachable nodes by id descending is
a valid reverse topological order; :func:`backward` relies on that.
"""
from __future__ import annotations

import itertools
import threading
from typing import Callable, Sequence

import numpy as np

from ..errors import NumericError, ShapeError

_uid = itertools.count()
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "enabled", True)


class no_grad:
    """Context manager disabling graph recording on the current thread."""

    def __enter__(self):
        self._prev = is_grad_enabled()
        _state.enabled = False
        return self

    def __exit__(self, *exc):
        _state.enabled = self._prev
        return False


class Tensor:
    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "uid", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: Callable | None = None
        self.uid = next(_uid)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a tensor is not supported")
        return scale(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], fn: Callable, op: str) -> Tensor:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite value produced by {op}")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.uid = next(_uid)
    out.name = None
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out.parents = tuple(parents)
        out.backward_fn = fn
    else:
        out.requires_grad = False
        out.parents = ()
        out.backward_fn = None
    return out


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _broadcast_check(a: np.ndarray, b: np.ndarray, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as e:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from e


# elementwise arithmetic ----------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a.data, b.data, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a.data, b.data, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (unbroadcast(g, sa), unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check(a.data, b.data, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b), lambda g: (unbroadcast(g * bd, ad.shape), unbroadcast(g * ad, bd.shape)), "mul")


def scale(a, s: float) -> Tensor:
    a = as_tensor(a)
    s = float(s)
    return _make(a.data * s, (a,), lambda g: (g * s,), "scale")


# linear algebra -------------------------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    try:
        out = np.matmul(ad, bd)
    except ValueError as e:
        raise ShapeError(f"matmul: incompatible shapes {ad.shape} and {bd.shape}") from e

    def fn(g):
        if ad.ndim == 1 and bd.ndim == 1:
            return g * bd, g * ad
        if bd.ndim == 1:
            ga = g[..., None] * bd
            gb = (ad * g[..., None]).reshape(-1, bd.shape[0]).sum(axis=0)
            return ga, gb
        if ad.ndim == 1:
            ga = (bd * g[..., None, :]).sum(axis=-1).reshape(-1, ad.shape[0]).sum(axis=0)
            gb = unbroadcast(ad[:, None] * g[..., None, :], bd.shape)
            return ga, gb
        ga = unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape)
        gb = unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape)
        return ga, gb

    return _make(out, (a, b), fn, "matmul")


def linear(x, W, b=None) -> Tensor:
    """``x @ W.T + b`` over the last axis of ``x``; ``W`` is ``(out, in)``."""
    x, W = as_tensor(x), as_tensor(W)
    xd, Wd = x.data, W.data
    if Wd.ndim != 2 or xd.shape[-1] != Wd.shape[1]:
        raise ShapeError(f"linear: input {xd.shape} does not match weight {Wd.shape}")
    out = xd @ Wd.T
    parents: tuple[Tensor, ...] = (x, W)
    if b is not None:
        b = as_tensor(b)
        if b.shape != (Wd.shape[0],):
            raise ShapeError(f"linear: bias {b.shape} does not match weight {Wd.shape}")
        out = out + b.data
        parents = (x, W, b)

    def fn(g):
        g2 = g.reshape(-1, Wd.shape[0])
        x2 = xd.reshape(-1, Wd.shape[1])
        gx = g @ Wd
        gW = g2.T @ x2
        if b is None:
            return gx, gW
        return gx, gW, g2.sum(axis=0)

    return _make(out, parents, fn, "linear")


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    out = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)
    return _make(out, (a,), lambda g: (np.transpose(g, inv),), "transpose")


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot reshape {old} to {shape}") from e
    return _make(out, (a,), lambda g: (g.reshape(old),), "reshape")


# structural -----------------------------------------------------------------

def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: {e}") from e
    splits = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(out, ts, lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"stack: {e}") from e
    n = len(ts)
    return _make(out, ts, lambda g: tuple(np.take(g, i, axis=axis) for i in range(n)), "stack")


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, slice, type(None), type(Ellipsis))) for i in items)


def getitem(a, idx) -> Tensor:
    a = as_tensor(a)
    out = a.data[idx]
    shape = a.shape
    basic = _is_basic_index(idx)

    def fn(g):
        full = np.zeros(shape)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return _make(np.array(out, dtype=np.float64), (a,), fn, "slice")


def take(a, indices, axis: int = 0) -> Tensor:
    """Gather along ``axis``; repeated indices accumulate gradient."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    out = np.take(a.data, idx, axis=axis)
    shape = a.shape

    def fn(g):
        full = np.zeros(shape)
        gm = np.moveaxis(g, axis, 0)
        fm = np.moveaxis(full, axis, 0)
        np.add.at(fm, idx, gm)
        return (full,)

    return _make(out, (a,), fn, "take")


def segment_max(a, segment_ids, n_segments: int) -> Tensor:
    """Row-wise max of ``a`` (shape ``(P, D)``) within each segment.

    Ties share the gradient equally, which is a valid subgradient.
    """
    a = as_tensor(a)
    seg = np.asarray(segment_ids, dtype=np.intp)
    if a.ndim != 2 or len(seg) != a.shape[0]:
        raise ShapeError("segment_max expects (P, D) input and P segment ids")
    counts = np.bincount(seg, minlength=n_segments)
    if np.any(counts == 0):
        raise ShapeError("every segment needs at least one row")
    order = np.argsort(seg, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    out = np.maximum.reduceat(a.data[order], starts, axis=0)
    ad = a.data

    def fn(g):
        hit = (ad == out[seg]).astype(np.float64)
        ties = np.zeros_like(out)
        np.add.at(ties, seg, hit)
        return (hit * (g / ties)[seg],)

    return _make(out, (a,), fn, "segment_max")


def cumsum(a, axis: int = 0) -> Tensor:
    a = as_tensor(a)
    out = np.cumsum(a.data, axis=axis)
    return _make(out, (a,), lambda g: (np.flip(np.cumsum(np.flip(g, axis), axis=axis), axis),), "cumsum")


# nonlinearities ---------------------------------------------------------------

def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * np.tanh(0.5 * x) + 0.5


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = _sigmoid(a.data)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    t = np.tanh(a.data)
    return _make(t, (a,), lambda g: (g * (1.0 - t * t),), "tanh")


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def log(a, floor: float | None = None) -> Tensor:
    """Natural log; with ``floor`` the input is clamped from below first
    (the clamped entries receive zero gradient)."""
    a = as_tensor(a)
    x = a.data
    if floor is not None:
        clipped = x < floor
        x = np.where(clipped, floor, x)
    elif np.any(x <= 0):
        raise NumericError("log of a non-positive value")
    else:
        clipped = None

    def fn(g):
        gx = g / x
        if clipped is not None:
            gx = np.where(clipped, 0.0, gx)
        return (gx,)

    return _make(np.log(x), (a,), fn, "log")


# reductions -------------------------------------------------------------------

def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    out = np.sum(a.data, axis=axis, keepdims=keepdims)

    def fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _make(np.asarray(out, dtype=np.float64), (a,), fn, "sum")


def mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    return scale(tsum(a, axis), 1.0 / n)


def mean_sq_error(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"mean_sq_error: shapes {a.shape} and {b.shape} differ")
    diff = a.data - b.data
    n = diff.size
    return _make(
        np.asarray(np.mean(diff * diff)),
        (a, b),
        lambda g: (2.0 * g * diff / n, -2.0 * g * diff / n),
        "mean_sq_error",
    )


def sum_sq(a) -> Tensor:
    """Sum of squared entries."""
    a = as_tensor(a)
    d = a.data
    return _make(np.asarray(np.sum(d * d)), (a,), lambda g: (2.0 * g * d,), "sum_sq")


# recurrent cell ------------------------------------------------------------------

def lstm_cell(x, hc, W_ih, W_hh, b) -> Tensor:
    """One LSTM step on a packed state ``hc = [h, c]`` of shape ``(B, 2H)``.

    Gate order is (input, forget, cell, output).  ``W_ih`` is ``(4H, I)``,
    ``W_hh`` is ``(4H, H)``.
    """
    x, hc, W_ih, W_hh, b = (as_tensor(t) for t in (x, hc, W_ih, W_hh, b))
    H = W_hh.shape[1]
    if W_ih.shape[0] != 4 * H or W_hh.shape[0] != 4 * H or b.shape != (4 * H,):
        raise ShapeError("lstm_cell: gate weights must have 4H rows")
    if x.ndim != 2 or x.shape[1] != W_ih.shape[1] or hc.shape != (x.shape[0], 2 * H):
        raise ShapeError(f"lstm_cell: bad shapes x={x.shape} hc={hc.shape} for H={H}")
    xd, hd, cd = x.data, hc.data[:, :H], hc.data[:, H:]
    Wi, Wh = W_ih.data, W_hh.data
    gates = xd @ Wi.T + hd @ Wh.T + b.data
    act = _sigmoid(gates)
    i, f, o = act[:, :H], act[:, H : 2 * H], act[:, 3 * H :]
    gg = np.tanh(gates[:, 2 * H : 3 * H])
    c_new = f * cd + i * gg
    tc = np.tanh(c_new)
    out = np.concatenate([o * tc, c_new], axis=1)

    def fn(g):
        gh, gc = g[:, :H], g[:, H:]
        do = gh * tc
        dc = gc + gh * o * (1.0 - tc * tc)
        dgates = np.concatenate(
            [dc * gg * i * (1.0 - i), dc * cd * f * (1.0 - f), dc * i * (1.0 - gg * gg), do * o * (1.0 - o)],
            axis=1,
        )
        gx = dgates @ Wi
        return (
            gx,
            np.concatenate([dgates @ Wh, dc * f], axis=1),
            dgates.T @ xd,
            dgates.T @ hd,
            dgates.sum(axis=0),
        )

    return _make(out, (x, hc, W_ih, W_hh, b), fn, "lstm_cell")


# reverse pass --------------------------------------------------------------------

def backward(loss: Tensor, wrt: Sequence[Tensor]) -> list[np.ndarray]:
    """Gradients of scalar ``loss`` with respect to each tensor in ``wrt``.

    Tensors the loss does not depend on get zeros.  Nothing is stored on the
    tensors, so independent backward passes never contaminate each other.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {}
    if loss.requires_grad:
        nodes: dict[int, Tensor] = {}
        stack_ = [loss]
        while stack_:
            t = stack_.pop()
            if t.uid in nodes:
                continue
            nodes[t.uid] = t
            for p in t.parents:
                if p.requires_grad and p.uid not in nodes:
                    stack_.append(p)
        grads[loss.uid] = np.ones_like(loss.data)
        for uid in sorted(nodes, reverse=True):
            t = nodes[uid]
            g = grads.get(uid)
            if g is None or t.backward_fn is None:
                continue
            for p, gp in zip(t.parents, t.backward_fn(g)):
                if not p.requires_grad or gp is None:
                    continue
                if p.uid in grads:
                    grads[p.uid] = grads[p.uid] + gp
                else:
                    grads[p.uid] = gp
    return [grads[w.uid] if w.uid in grads else np.zeros_like(w.data) for w in wrt]
