"""Dense float64 tensors with taped reverse-mode automatic differentiation.

Values live in row-major numpy arrays and are immutable by convention once an
op has produced them; only ``grad`` buffers accumulate. Each differentiable op
records a backward closure on its output while grad mode is on; ``backward``
replays the recorded graph once in reverse topological order and then
invalidates it (a fresh forward pass builds a fresh tape).

Broadcasting is deliberately minimal: same-shape, one row ``(1, n)`` against
``(m, n)``, one column ``(m, 1)`` against ``(m, n)``, and python scalars.
"""

from __future__ import annotations

import contextlib
import threading
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AllMasked, NonFinite, NonScalarRoot, ShapeMismatch, StaleGraph

EPS = 1e-12


class _GradMode(threading.local):
    # per-thread so concurrent read-only forward passes cannot corrupt the
    # recording mode of a training thread
    enabled = True


_mode = _GradMode()


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values only)."""
    prev = _mode.enabled
    _mode.enabled = False
    try:
        yield
    finally:
        _mode.enabled = prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_freed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None
        self._freed = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def backward(self) -> None:
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.array(g)  # copy: g may be a view into another buffer
        else:
            t.grad += g


def _out(data, parents, bw) -> Tensor:
    if _mode.enabled:
        for p in parents:
            if p.requires_grad:
                t = Tensor(data, requires_grad=True)
                t._parents = parents
                t._backward = bw
                return t
    return Tensor(data)


def backward(root: Tensor) -> None:
    """Populate gradients of everything the scalar ``root`` depends on.

    Visits each recorded node exactly once in reverse topological order, then
    discards the tape; a second call on the same root raises StaleGraph.
    """
    if root._freed:
        raise StaleGraph("backward already ran on this graph")
    if root.data.size != 1:
        raise NonScalarRoot(f"backward root must be scalar, got shape {root.data.shape}")
    root._freed = True
    if root._backward is None:
        return  # constant root: nothing recorded

    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        nid = id(node)
        if nid in seen:
            continue
        seen.add(nid)
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        fn = node._backward
        if fn is not None:
            fn(node.grad)
            node._backward = None
            node._parents = ()
            node._freed = True


def matmul(a: Tensor, b: Tensor, ta: bool = False, tb: bool = False) -> Tensor:
    """2-D matrix product ``op(a) @ op(b)`` with optional operand transposes."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeMismatch(f"matmul needs 2-D operands, got {a.data.shape} and {b.data.shape}")
    A = a.data.T if ta else a.data
    B = b.data.T if tb else b.data
    if A.shape[1] != B.shape[0]:
        raise ShapeMismatch(f"matmul inner extents differ: {A.shape} x {B.shape}")
    if not np.isfinite(A).all() or not np.isfinite(B).all():
        raise NonFinite("matmul input contains non-finite values")
    out = A @ B

    def bw(go):
        if a.requires_grad:
            ga = go @ B.T
            _accum(a, ga.T if ta else ga)
        if b.requires_grad:
            gb = A.T @ go
            _accum(b, gb.T if tb else gb)

    return _out(out, (a, b), bw)


def _broadcast_kind(sa, sb):
    # returns how b relates to a: "same", "row", "col"
    if sa == sb:
        return "same"
    if len(sa) == 2 and len(sb) == 2 and sb[0] == 1 and sb[1] == sa[1]:
        return "row"
    if len(sa) == 2 and len(sb) == 2 and sb[1] == 1 and sb[0] == sa[0]:
        return "col"
    return None


def _reduce_to(g: np.ndarray, kind: str) -> np.ndarray:
    if kind == "row":
        return g.sum(axis=0, keepdims=True)
    if kind == "col":
        return g.sum(axis=1, keepdims=True)
    return g


def add(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out = a.data + s

        def bw_s(go):
            _accum(a, go)

        return _out(out, (a,), bw_s)

    kind = _broadcast_kind(a.data.shape, b.data.shape)
    if kind is None:
        kind_a = _broadcast_kind(b.data.shape, a.data.shape)
        if kind_a is None:
            raise ShapeMismatch(f"add shapes incompatible: {a.data.shape} vs {b.data.shape}")
        return add(b, a)
    out = a.data + b.data

    def bw(go):
        if a.requires_grad:
            _accum(a, go)
        if b.requires_grad:
            _accum(b, _reduce_to(go, kind))

    return _out(out, (a, b), bw)


def sub(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -float(b))
    kind = _broadcast_kind(a.data.shape, b.data.shape)
    if kind != "same":
        raise ShapeMismatch(f"sub needs equal shapes, got {a.data.shape} vs {b.data.shape}")
    out = a.data - b.data

    def bw(go):
        if a.requires_grad:
            _accum(a, go)
        if b.requires_grad:
            _accum(b, -go)

    return _out(out, (a, b), bw)


def neg(a: Tensor) -> Tensor:
    out = -a.data

    def bw(go):
        _accum(a, -go)

    return _out(out, (a,), bw)


def mul(a: Tensor, b) -> Tensor:
    if not isinstance(b, Tensor):
        s = float(b)
        out = a.data * s

        def bw_s(go):
            _accum(a, go * s)

        return _out(out, (a,), bw_s)

    kind = _broadcast_kind(a.data.shape, b.data.shape)
    if kind is None:
        kind_a = _broadcast_kind(b.data.shape, a.data.shape)
        if kind_a is None:
            raise ShapeMismatch(f"mul shapes incompatible: {a.data.shape} vs {b.data.shape}")
        return mul(b, a)
    out = a.data * b.data

    def bw(go):
        if a.requires_grad:
            _accum(a, go * b.data)
        if b.requires_grad:
            _accum(b, _reduce_to(go * a.data, kind))

    return _out(out, (a, b), bw)


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)

    def bw(go):
        _accum(x, go * (1.0 - y * y))

    return _out(y, (x,), bw)


def sigmoid(x: Tensor) -> Tensor:
    y = 0.5 * (np.tanh(0.5 * x.data) + 1.0)  # stable for any magnitude

    def bw(go):
        _accum(x, go * y * (1.0 - y))

    return _out(y, (x,), bw)


def exp(x: Tensor) -> Tensor:
    y = np.exp(x.data)

    def bw(go):
        _accum(x, go * y)

    return _out(y, (x,), bw)


def log(x: Tensor, eps: float = 0.0) -> Tensor:
    base = x.data + eps
    y = np.log(base)

    def bw(go):
        _accum(x, go / base)

    return _out(y, (x,), bw)


def tsum(x: Tensor) -> Tensor:
    y = x.data.sum()

    def bw(go):
        _accum(x, np.full(x.data.shape, float(go)))

    return _out(y, (x,), bw)


def mean(x: Tensor) -> Tensor:
    n = x.data.size
    y = x.data.sum() / n

    def bw(go):
        _accum(x, np.full(x.data.shape, float(go) / n))

    return _out(y, (x,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeMismatch("concat of zero tensors")
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def bw(go):
        offset = 0
        for t, n in zip(tensors, sizes):
            if t.requires_grad:
                idx = [slice(None)] * go.ndim
                idx[axis] = slice(offset, offset + n)
                _accum(t, go[tuple(idx)])
            offset += n

    return _out(out, tuple(tensors), bw)


def narrow(x: Tensor, axis: int, start: int, length: int) -> Tensor:
    idx = [slice(None)] * x.data.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)
    out = x.data[idx]

    def bw(go):
        if x.requires_grad:
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[idx] += go

    return _out(out, (x,), bw)


def reshape(x: Tensor, shape) -> Tensor:
    out = x.data.reshape(shape)

    def bw(go):
        _accum(x, go.reshape(x.data.shape))

    return _out(out, (x,), bw)


def transpose(x: Tensor) -> Tensor:
    out = x.data.T

    def bw(go):
        _accum(x, go.T)

    return _out(out, (x,), bw)


def rows(table: Tensor, ids) -> Tensor:
    """Gather rows of a 2-D table by integer ids (embedding lookup)."""
    ids = np.asarray(ids, dtype=np.intp)
    out = table.data[ids]

    def bw(go):
        if table.requires_grad:
            if table.grad is None:
                table.grad = np.zeros_like(table.data)
            np.add.at(table.grad, ids, go)

    return _out(out, (table,), bw)


def masked_softmax(x: Tensor, axis: int, mask=None, allow_empty: bool = False) -> Tensor:
    """Softmax along ``axis`` over unmasked positions; masked positions are 0.

    Numerically stabilized by max-subtraction. Raises AllMasked when a slice
    has no unmasked entry (unless ``allow_empty``, which zero-fills it).
    """
    xd = x.data
    if mask is None:
        m = np.ones(xd.shape, dtype=bool)
    else:
        m = np.broadcast_to(np.asarray(mask, dtype=bool), xd.shape)
    counts = m.sum(axis=axis, keepdims=True)
    if (counts == 0).any():
        if not allow_empty:
            raise AllMasked(f"softmax slice along axis {axis} has no unmasked entry")
    masked_vals = np.where(m, xd, -np.inf)
    mx = masked_vals.max(axis=axis, keepdims=True, initial=-np.inf)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    e = np.exp(np.where(m, xd - mx, -np.inf))
    denom = e.sum(axis=axis, keepdims=True) + EPS
    y = e / denom

    def bw(go):
        inner = (go * y).sum(axis=axis, keepdims=True)
        _accum(x, y * (go - inner))

    return _out(y, (x,), bw)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when rate is 0. Draws from ``rng``."""
    if rate <= 0.0:
        return x
    if rate >= 1.0:
        raise ShapeMismatch(f"dropout rate must be < 1, got {rate}")
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    out = x.data * keep

    def bw(go):
        _accum(x, go * keep)

    return _out(out, (x,), bw)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)
