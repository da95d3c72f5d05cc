"""Dense tensors with reverse-mode automatic differentiation.

The op set is the minimum needed for small MLP adversarial losses: matmul,
(broadcasting) add/sub/mul, elementwise exp/log/tanh/sigmoid/relu/softplus/abs,
sum/mean/L2-norm reductions, concatenate, row slicing and reshape, plus a
fused `linear` for speed.  Every op records its parents so a scalar loss can
be backpropagated to all `requires_grad` leaves.

Training runs in float32.  For verification (gradient checks against finite
differences) build tensors from float64 arrays; ops preserve the input dtype.
Stability guards: exp arguments are clamped to +/-EXP_CLAMP and log arguments
floored at LOG_FLOOR, and the gradients are those of the guarded functions.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

EXP_CLAMP = 30.0
LOG_FLOOR = float(np.exp(-30.0))


class Tensor:
    """A numpy array plus the graph bookkeeping needed for backward()."""

    __slots__ = ("data", "grad", "requires_grad", "op", "parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype != np.float64 and arr.dtype != np.float32:
            arr = arr.astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor input contains non-finite values")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self.parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self):
        """A new leaf holding a copy of the values; no gradient flows back."""
        return Tensor(self.data.copy())

    def item(self):
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar; scalars are handled without creating constant leaves
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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data, dtype=None):
    return Tensor(data, requires_grad=False, dtype=dtype)


def parameter(data, dtype=None):
    return Tensor(data, requires_grad=True, dtype=dtype)


def _node(data, op, parents, backward):
    """Internal constructor for op outputs (skips input validation)."""
    t = Tensor.__new__(Tensor)
    t.data = np.asarray(data)
    t.grad = None
    t.requires_grad = any(p.requires_grad for p in parents)
    t.op = op
    t.parents = tuple(parents)
    t._backward = backward if t.requires_grad else None
    return t


def _accum(t, g):
    if not t.requires_grad:
        return
    if g.dtype != t.data.dtype:
        g = g.astype(t.data.dtype)
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(grad, shape):
    """Sum `grad` over the axes numpy broadcasting introduced w.r.t. `shape`."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(a, b, opname):
    try:
        np.broadcast_shapes(a.data.shape, b.data.shape)
    except ValueError:
        raise ValueError(
            f"{opname}: shape mismatch {a.data.shape} vs {b.data.shape}"
        ) from None


# ---------------------------------------------------------------------------
# elementwise binary ops

def add(a, b):
    if not isinstance(b, Tensor):
        a_t, b = a, float(b)
        out = _node(a_t.data + b, "add_scalar", (a_t,), None)
        if out.requires_grad:
            out._backward = lambda g: _accum(a_t, g)
        return out
    if not isinstance(a, Tensor):
        return add(b, a)
    _check_broadcast(a, b, "add")
    out = _node(a.data + b.data, "add", (a, b), None)
    if out.requires_grad:
        def backward(g):
            _accum(a, _unbroadcast(g, a.data.shape))
            _accum(b, _unbroadcast(g, b.data.shape))
        out._backward = backward
    return out


def sub(a, b):
    if not isinstance(b, Tensor):
        return add(a, -b)
    if not isinstance(a, Tensor):
        return add(mul(b, -1.0), a)
    _check_broadcast(a, b, "sub")
    out = _node(a.data - b.data, "sub", (a, b), None)
    if out.requires_grad:
        def backward(g):
            _accum(a, _unbroadcast(g, a.data.shape))
            _accum(b, _unbroadcast(-g, b.data.shape))
        out._backward = backward
    return out


def mul(a, b):
    if not isinstance(b, Tensor):
        a_t, c = a, float(b)
        out = _node(a_t.data * c, "mul_scalar", (a_t,), None)
        if out.requires_grad:
            out._backward = lambda g: _accum(a_t, g * c)
        return out
    if not isinstance(a, Tensor):
        return mul(b, a)
    _check_broadcast(a, b, "mul")
    out = _node(a.data * b.data, "mul", (a, b), None)
    if out.requires_grad:
        def backward(g):
            _accum(a, _unbroadcast(g * b.data, a.data.shape))
            _accum(b, _unbroadcast(g * a.data, b.data.shape))
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul: expected 2-D operands, got {a.data.shape} and {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.data.shape} vs {b.data.shape}")
    out = _node(a.data @ b.data, "matmul", (a, b), None)
    if out.requires_grad:
        def backward(g):
            _accum(a, g @ b.data.T)
            _accum(b, a.data.T @ g)
        out._backward = backward
    return out


def linear(x, w, b):
    """Fused affine map x @ w + b for (batch, in) inputs; b has shape (out,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ValueError(f"linear: shape mismatch {x.data.shape} vs {w.data.shape}")
    if b.data.shape != (w.data.shape[1],):
        raise ValueError(f"linear: bias shape {b.data.shape} vs weight {w.data.shape}")
    out = _node(x.data @ w.data + b.data, "linear", (x, w, b), None)
    if out.requires_grad:
        def backward(g):
            _accum(x, g @ w.data.T)
            _accum(w, x.data.T @ g)
            _accum(b, g.sum(axis=0))
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# elementwise unary ops

def exp(a):
    clipped = np.clip(a.data, -EXP_CLAMP, EXP_CLAMP)
    out = _node(np.exp(clipped), "exp", (a,), None)
    if out.requires_grad:
        mask = np.abs(a.data) <= EXP_CLAMP
        out._backward = lambda g: _accum(a, g * out.data * mask)
    return out


def log(a):
    floored = np.maximum(a.data, LOG_FLOOR)
    out = _node(np.log(floored), "log", (a,), None)
    if out.requires_grad:
        mask = a.data >= LOG_FLOOR
        out._backward = lambda g: _accum(a, g * mask / floored)
    return out


def tanh(a):
    out = _node(np.tanh(a.data), "tanh", (a,), None)
    if out.requires_grad:
        out._backward = lambda g: _accum(a, g * (1.0 - out.data * out.data))
    return out


def sigmoid(a):
    out = _node(expit(a.data), "sigmoid", (a,), None)
    if out.requires_grad:
        out._backward = lambda g: _accum(a, g * out.data * (1.0 - out.data))
    return out


def relu(a):
    out = _node(np.maximum(a.data, 0.0), "relu", (a,), None)
    if out.requires_grad:
        mask = a.data > 0
        out._backward = lambda g: _accum(a, g * mask)
    return out


def softplus(a):
    """log(1 + e^x), evaluated stably; log-sigmoid losses are built from this."""
    out = _node(np.logaddexp(0.0, a.data), "softplus", (a,), None)
    if out.requires_grad:
        out._backward = lambda g: _accum(a, g * expit(a.data))
    return out


def absolute(a):
    out = _node(np.abs(a.data), "abs", (a,), None)
    if out.requires_grad:
        sign = np.sign(a.data)
        out._backward = lambda g: _accum(a, g * sign)
    return out


# ---------------------------------------------------------------------------
# reductions

def _spread(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def tsum(a, axis=None, keepdims=False):
    out = _node(np.sum(a.data, axis=axis, keepdims=keepdims), "sum", (a,), None)
    if out.requires_grad:
        out._backward = lambda g: _accum(a, _spread(g, a.data.shape, axis, keepdims))
    return out


def tmean(a, axis=None, keepdims=False):
    out = _node(np.mean(a.data, axis=axis, keepdims=keepdims), "mean", (a,), None)
    if out.requires_grad:
        count = a.data.size // out.data.size
        out._backward = lambda g: _accum(a, _spread(g / count, a.data.shape, axis, keepdims))
    return out


def l2_norm(a, axis=None, keepdims=False):
    sq = np.sum(a.data * a.data, axis=axis, keepdims=keepdims)
    out = _node(np.sqrt(sq), "l2_norm", (a,), None)
    if out.requires_grad:
        def backward(g):
            denom = np.maximum(out.data, 1e-12)
            _accum(a, _spread(g / denom, a.data.shape, axis, keepdims) * a.data)
        out._backward = backward
    return out


# ---------------------------------------------------------------------------
# shape ops

def concatenate(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ValueError("concatenate: empty input list")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = [t.data.shape for t in tensors]
        raise ValueError(f"concatenate: incompatible shapes {shapes}") from None
    out = _node(data, "concatenate", tensors, None)
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)

        def backward(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accum(t, g[tuple(idx)])
        out._backward = backward
    return out


def row_slice(a, start, stop):
    if a.data.ndim < 1 or not (0 <= start <= stop <= a.data.shape[0]):
        raise ValueError(f"row_slice: invalid range [{start}:{stop}] for shape {a.data.shape}")
    out = _node(np.ascontiguousarray(a.data[start:stop]), "row_slice", (a,), None)
    if out.requires_grad:
        def backward(g):
            full = np.zeros_like(a.data)
            full[start:stop] = g
            _accum(a, full)
        out._backward = backward
    return out


def reshape(a, shape):
    out = _node(a.data.reshape(shape), "reshape", (a,), None)
    if out.requires_grad:
        out._backward = lambda g: _accum(a, g.reshape(a.data.shape))
    return out


# ---------------------------------------------------------------------------
# backward pass

def topological_order(root):
    """Parents-before-children ordering of the graph reachable from `root`."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss):
    """Backpropagate from a scalar loss; sets .grad on every reached tensor.

    Returns the list of requires_grad leaves reached from the loss (their
    gradients are in .grad).  Each graph node is visited exactly once.
    """
    if loss.data.size != 1:
        raise ValueError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    order = topological_order(loss)
    for t in order:
        t.grad = None
    loss.grad = np.ones_like(loss.data)
    for t in reversed(order):
        if t.grad is None or t._backward is None:
            continue
        t._backward(t.grad)
    return [t for t in order if t.op == "leaf" and t.requires_grad]


def gradients(loss, params):
    """Gradient of a scalar loss for an explicit parameter list.

    Parameters that do not influence the loss get zero gradients.
    """
    backward(loss)
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
