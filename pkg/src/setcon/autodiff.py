"""Reverse-mode automatic differentiation over dense numpy arrays.

A small taped autodiff engine: every operation records its parents and a
backward closure on the produced node. Calling ``backward()`` on a scalar
result walks the tape in reverse topological order and accumulates
gradients into every node that requires them.

Two numeric modes are supported through the array dtype: float64 for
reference computations and finite-difference gradient checks, float32 for
training. Operations preserve the dtype of their inputs.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "DimensionError",
    "NumericError",
    "as_tensor",
    "constant",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "matmul",
    "linear",
    "relu",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "tsum",
    "tmean",
    "reshape",
    "swap_axes",
    "concat",
    "take",
    "broadcast_to",
    "detach",
    "softmax",
    "logsumexp",
    "layer_norm",
    "gru_cell",
    "grad_check",
    "assert_finite",
]

_FLOAT_DTYPES = (np.float32, np.float64)


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible; names the operand."""


class NumericError(ArithmeticError):
    """Raised when a computation produces or receives non-finite values."""


class Tensor:
    """A dense array node in the computation tape.

    ``data`` is always a float32 or float64 numpy array. Nodes created by
    operations carry a backward closure; leaves carry none.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # operator sugar
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
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def backward(self):
        """Accumulate gradients of this scalar into all upstream nodes."""
        if self.data.size != 1:
            raise DimensionError("backward() requires a scalar output")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None


def _topo_order(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
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


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def constant(x, dtype=None):
    """A leaf tensor that never receives gradients."""
    return Tensor(np.asarray(x, dtype=dtype), requires_grad=False)


def detach(x):
    """Cut the tape: same values, no gradient flow."""
    out = Tensor(x.data, requires_grad=False)
    return out


def _make(data, parents, backward):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(node, g):
    # Assignment without copy is safe: gradient arrays are never mutated
    # in place once handed over, only replaced by fresh sums.
    if not node.requires_grad:
        return
    if node.grad is None:
        node.grad = g if isinstance(g, np.ndarray) else np.asarray(g)
    else:
        node.grad = node.grad + g


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _coerce_pair(a, b):
    """Wrap operands; python scalars adopt the other operand's dtype so
    float32 computations stay float32."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor) and np.isscalar(b):
        return a, Tensor(np.asarray(b, dtype=a.data.dtype))
    if isinstance(b, Tensor) and not isinstance(a, Tensor) and np.isscalar(a):
        return Tensor(np.asarray(a, dtype=b.data.dtype)), b
    return as_tensor(a), as_tensor(b)


# elementwise arithmetic -------------------------------------------------

def add(a, b):
    a, b = _coerce_pair(a, b)
    data = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def sub(a, b):
    a, b = _coerce_pair(a, b)
    data = a.data - b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b):
    a, b = _coerce_pair(a, b)
    data = a.data * b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def div(a, b):
    a, b = _coerce_pair(a, b)
    data = a.data / b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return _make(data, (a, b), backward)


def neg(a):
    a = as_tensor(a)

    def backward(g):
        _accumulate(a, -g)

    return _make(-a.data, (a,), backward)


def power(a, p):
    a = as_tensor(a)
    p = float(p)
    data = a.data ** p

    def backward(g):
        _accumulate(a, g * p * a.data ** (p - 1.0))

    return _make(data, (a,), backward)


# matrix products --------------------------------------------------------

def matmul(a, b):
    """Batched matrix product with numpy broadcasting of leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape[-1] != b.data.shape[-2]:
        raise DimensionError(
            f"matmul: inner extents differ, left {a.data.shape} vs right {b.data.shape}"
        )
    data = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        _accumulate(a, _unbroadcast(ga, a.data.shape))
        _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _make(data, (a, b), backward)


def linear(x, w, b=None):
    """Affine map over the trailing axis: y = x @ w + b.

    ``w`` is [In, Out]; ``x`` may carry arbitrary leading dimensions.
    """
    x, w = as_tensor(x), as_tensor(w)
    if w.data.ndim != 2:
        raise DimensionError(f"linear: weight must be 2-d, got shape {w.data.shape}")
    if x.data.shape[-1] != w.data.shape[0]:
        raise DimensionError(
            f"linear: input trailing extent {x.data.shape[-1]} does not match "
            f"weight rows {w.data.shape[0]}"
        )
    if b is not None:
        b = as_tensor(b)
        if b.data.shape != (w.data.shape[1],):
            raise DimensionError(
                f"linear: bias shape {b.data.shape} does not match weight cols {w.data.shape[1]}"
            )
    n_in, n_out = w.data.shape
    lead = x.data.shape[:-1]
    x2 = x.data.reshape(-1, n_in)
    y2 = x2 @ w.data
    if b is not None:
        y2 = y2 + b.data
    data = y2.reshape(lead + (n_out,))
    parents = (x, w) if b is None else (x, w, b)

    def backward(g):
        g2 = g.reshape(-1, n_out)
        _accumulate(x, (g2 @ w.data.T).reshape(x.data.shape))
        _accumulate(w, x2.T @ g2)
        if b is not None:
            _accumulate(b, g2.sum(axis=0))

    return _make(data, parents, backward)


# nonlinearities ---------------------------------------------------------

def relu(a):
    a = as_tensor(a)
    data = np.maximum(a.data, 0)

    def backward(g):
        _accumulate(a, g * (a.data > 0))

    return _make(data, (a,), backward)


def sigmoid(a):
    a = as_tensor(a)
    data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        _accumulate(a, g * data * (1.0 - data))

    return _make(data, (a,), backward)


def tanh(a):
    a = as_tensor(a)
    data = np.tanh(a.data)

    def backward(g):
        _accumulate(a, g * (1.0 - data * data))

    return _make(data, (a,), backward)


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward(g):
        _accumulate(a, g * data)

    return _make(data, (a,), backward)


def log(a):
    a = as_tensor(a)
    data = np.log(a.data)

    def backward(g):
        _accumulate(a, g / a.data)

    return _make(data, (a,), backward)


# reductions -------------------------------------------------------------

def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.data.shape))
            return
        gg = g
        if not keepdims:
            gg = np.expand_dims(gg, axis)
        _accumulate(a, np.broadcast_to(gg, a.data.shape))

    return _make(data, (a,), backward)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    if axis is None:
        n = a.data.size
    else:
        n = a.data.shape[axis]
    return tsum(a, axis=axis, keepdims=keepdims) * (1.0 / n)


# shape manipulation -----------------------------------------------------

def reshape(a, shape):
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _make(data, (a,), backward)


def swap_axes(a, ax1, ax2):
    a = as_tensor(a)
    data = np.swapaxes(a.data, ax1, ax2)

    def backward(g):
        _accumulate(a, np.swapaxes(g, ax1, ax2))

    return _make(data, (a,), backward)


def concat(tensors, axis):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        pieces = np.split(g, splits, axis=axis)
        for t, piece in zip(tensors, pieces):
            _accumulate(t, piece)

    return _make(data, tuple(tensors), backward)


def take(a, idx):
    """Basic indexing/slicing with scatter-add backward."""
    a = as_tensor(a)
    data = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        _accumulate(a, full)

    return _make(data, (a,), backward)


def broadcast_to(a, shape):
    a = as_tensor(a)
    data = np.broadcast_to(a.data, shape)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))

    return _make(data, (a,), backward)


# fused composites -------------------------------------------------------

def softmax(a, axis=-1):
    """Softmax along ``axis``, stabilized by subtracting the detached max."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        _accumulate(a, data * (g - dot))

    return _make(data, (a,), backward)


def logsumexp(a, axis=-1, keepdims=False):
    """log(sum(exp(a))) along ``axis``, stabilized by the detached max."""
    a = as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=axis, keepdims=True)
    data = np.log(s) + m
    soft = e / s
    if not keepdims:
        data = np.squeeze(data, axis=axis)

    def backward(g):
        gg = g if keepdims else np.expand_dims(g, axis)
        _accumulate(a, gg * soft)

    return _make(data, (a,), backward)


LAYER_NORM_EPS = 1e-6


def layer_norm(x, gain, offset, eps=LAYER_NORM_EPS):
    """Normalize each trailing vector to zero mean / unit variance, then
    apply the learnable affine (gain, offset)."""
    x, gain, offset = as_tensor(x), as_tensor(gain), as_tensor(offset)
    c = x.data.shape[-1]
    if gain.data.shape != (c,) or offset.data.shape != (c,):
        raise DimensionError(
            f"layer_norm: gain/offset must have shape ({c},), got "
            f"{gain.data.shape} and {offset.data.shape}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gain.data + offset.data

    def backward(g):
        _accumulate(gain, (g * xhat).reshape(-1, c).sum(axis=0))
        _accumulate(offset, g.reshape(-1, c).sum(axis=0))
        gx = g * gain.data
        m1 = gx.mean(axis=-1, keepdims=True)
        m2 = (gx * xhat).mean(axis=-1, keepdims=True)
        _accumulate(x, inv * (gx - m1 - xhat * m2))

    return _make(data, (x, gain, offset), backward)


def gru_cell(h, x, wz, uz, bz, wr, ur, br, wh, uh, bh):
    """One gated recurrent unit step, h' = (1 - z) * h + z * h~.

    Gates: z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
    h~ = tanh(x Wh + (r * h) Uh + bh). ``h`` and ``x`` share the trailing
    extent with the square weight matrices.
    """
    h, x = as_tensor(h), as_tensor(x)
    if h.data.shape != x.data.shape:
        raise DimensionError(
            f"gru_cell: state shape {h.data.shape} does not match input shape {x.data.shape}"
        )
    z = sigmoid(linear(x, wz, bz) + linear(h, uz))
    r = sigmoid(linear(x, wr, br) + linear(h, ur))
    h_cand = tanh(linear(x, wh, bh) + linear(mul(r, h), uh))
    one_minus_z = sub(1.0, z)
    return add(mul(one_minus_z, h), mul(z, h_cand))


# verification helpers ---------------------------------------------------

def assert_finite(arr, what="array"):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite values in {what}")


def grad_check(f, x, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps a Tensor to a scalar Tensor; ``x`` must be float64 for the
    finite differences to resolve. Error per coordinate is
    |analytic - numeric| / max(1, |numeric|).
    """
    x = as_tensor(x)
    # astype yields an owned, contiguous buffer so the flat view below can
    # perturb coordinates in place.
    base = Tensor(x.data.astype(np.float64), requires_grad=True)
    out = f(base)
    assert_finite(out.data, "grad_check forward value")
    out.backward()
    analytic = base.grad if base.grad is not None else np.zeros_like(base.data)
    assert_finite(analytic, "grad_check analytic gradient")

    flat = base.data.reshape(-1)
    numeric = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f(Tensor(base.data, requires_grad=False)).data)
        flat[i] = orig - eps
        lo = float(f(Tensor(base.data, requires_grad=False)).data)
        flat[i] = orig
        numeric[i] = (hi - lo) / (2.0 * eps)
    assert_finite(numeric, "grad_check numeric gradient")
    numeric = numeric.reshape(base.data.shape)
    err = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
    return float(err.max()) if err.size else 0.0
