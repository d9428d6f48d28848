"""Dense float tensors with reverse-mode automatic differentiation.

A Tensor wraps an immutable float32/float64 numpy array and remembers how it
was produced; calling ``backward()`` on a scalar walks the graph once and
accumulates parameter gradients. The op set is the minimum the generator and
the verification harness need: broadcasting arithmetic, (batched) matmul,
reshape/transpose/slicing, reductions, leaky ReLU, row softmax, 2-D padding
and flat gathers (for convolution patches).

Values are immutable after construction: operations never write in place,
and the wrapped arrays are marked read-only. Gradients for an op with no
differentiable parents are not tracked at all, so pure inference builds no
graph.
"""

import numpy as np

from . import flops

_ALLOWED = (np.dtype(np.float32), np.dtype(np.float64))


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.array(data, dtype=dtype, copy=True)
        if arr.dtype not in _ALLOWED:
            arr = arr.astype(np.float64)
        arr.setflags(write=False)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._backward = None
        self._parents = ()

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data)

    def numpy(self):
        """Read-only view of the underlying array."""
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, grad={self.requires_grad})"

    # -- graph plumbing -----------------------------------------------------

    def detach(self):
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out._backward = None
        out._parents = ()
        return out

    def assign(self, data):
        """Replace the stored array (optimizer updates). Keeps dtype."""
        arr = np.asarray(data, dtype=self.dtype)
        if arr.shape != self.shape:
            raise ValueError(f"assign shape {arr.shape} != {self.shape}")
        arr = np.array(arr, copy=True)
        arr.setflags(write=False)
        self.data = arr

    def zero_grad(self):
        self.grad = None

    def backward(self, gradient=None):
        if gradient is None:
            if self.size != 1:
                raise ValueError("backward() without gradient requires a scalar")
            gradient = np.ones_like(self.data)
        gradient = np.asarray(gradient, dtype=self.dtype)

        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p._parents or p.requires_grad:
                    stack.append((p, False))

        self.grad = gradient if self.grad is None else self.grad + gradient
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0) if isinstance(other, Tensor) else -_as_scalar(other, self.dtype))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / _as_scalar(other, self.dtype))

    def __rtruediv__(self, other):
        return mul(power(self, -1.0), other)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take_slice(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, *axes):
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def sqrt(self):
        return power(self, 0.5)

    def square(self):
        return mul(self, self)

    def exp(self):
        return texp(self)


def parameter(data, dtype=np.float32):
    """Trainable tensor."""
    return Tensor(data, requires_grad=True, dtype=dtype)


def constant(data, dtype=np.float32):
    return Tensor(data, requires_grad=False, dtype=dtype)


# -- helpers ----------------------------------------------------------------


def _as_scalar(x, dtype):
    return np.asarray(x, dtype=dtype)


def _coerce(x, like):
    if isinstance(x, Tensor):
        if x.dtype != like.dtype:
            raise TypeError(f"dtype mismatch: {x.dtype} vs {like.dtype}")
        return x
    t = Tensor.__new__(Tensor)
    t.data = np.asarray(x, dtype=like.dtype)
    t.grad = None
    t.requires_grad = False
    t._backward = None
    t._parents = ()
    return t


def _make(data, parents, backward):
    """Internal node constructor; drops the graph when nothing needs grads."""
    out = Tensor.__new__(Tensor)
    data.setflags(write=False)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    track = any(p.requires_grad or p._parents for p in parents)
    out._backward = backward if track else None
    out._parents = tuple(parents) if track else ()
    flops.counter.record(0, data.size)
    return out


def _accum(t, g):
    if t.requires_grad or t._parents:
        t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g, shape):
    """Reduce a broadcasted gradient back to the operand's shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


# -- primitive ops ----------------------------------------------------------


def add(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a)
    data = a.data + b.data
    flops.counter.record(data.size, 0)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(data, (a, b), backward)


def mul(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a)
    data = a.data * b.data
    flops.counter.record(data.size, 0)

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), backward)


def power(a, exponent):
    exponent = float(exponent)
    data = a.data**exponent
    flops.counter.record(2 * data.size, 0)

    def backward(g):
        _accum(a, g * exponent * a.data ** (exponent - 1.0))

    return _make(data, (a,), backward)


def texp(a):
    data = np.exp(a.data)
    flops.counter.record(data.size, 0)

    def backward(g):
        _accum(a, g * data)

    return _make(data, (a,), backward)


def tlog(a):
    data = np.log(a.data)
    flops.counter.record(data.size, 0)

    def backward(g):
        _accum(a, g / a.data)

    return _make(data, (a,), backward)


def matmul(a, b):
    a = a if isinstance(a, Tensor) else Tensor(a)
    b = _coerce(b, a)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ValueError(f"matmul shapes {a.shape} x {b.shape}")
    data = np.matmul(a.data, b.data)
    m = a.data.shape[-2] if a.ndim > 1 else 1
    k = a.data.shape[-1]
    n = b.data.shape[-1] if b.ndim > 1 else 1
    batch = max(data.size // max(m * n, 1), 1)
    flops.counter.record(2 * batch * m * k * n, 0)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2)) if b.ndim > 1 else np.multiply.outer(g, b.data)
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g) if a.ndim > 1 else np.multiply.outer(a.data, g)
        _accum(a, _unbroadcast(ga, a.shape))
        _accum(b, _unbroadcast(gb, b.shape))

    return _make(data, (a, b), backward)


def reshape(a, shape):
    data = a.data.reshape(shape)

    def backward(g):
        _accum(a, g.reshape(a.shape))

    return _make(np.ascontiguousarray(data), (a,), backward)


def transpose(a, axes=None):
    data = np.transpose(a.data, axes)
    inv = None if axes is None else np.argsort(axes)

    def backward(g):
        _accum(a, np.transpose(g, inv))

    return _make(np.ascontiguousarray(data), (a,), backward)


def take_slice(a, idx):
    data = a.data[idx]

    def backward(g):
        full = np.zeros(a.shape, dtype=a.dtype)
        np.add.at(full, idx, g)
        _accum(a, full)

    return _make(np.ascontiguousarray(data), (a,), backward)


def tsum(a, axis=None, keepdims=False):
    data = a.data.sum(axis=axis, keepdims=keepdims)
    flops.counter.record(a.size, 0)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.shape).copy())

    return _make(np.asarray(data), (a,), backward)


def tmean(a, axis=None, keepdims=False):
    count = a.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis, keepdims), 1.0 / count)


def leaky_relu(a, slope=0.2):
    data = np.where(a.data >= 0, a.data, slope * a.data)
    flops.counter.record(a.size, 0)

    def backward(g):
        _accum(a, g * np.where(a.data >= 0, 1.0, slope).astype(a.dtype))

    return _make(data, (a,), backward)


def softmax_rows(a):
    """Row-stochastic softmax over the last axis, stabilized by row-max shift.

    Raises on non-finite input; the shift guarantees finite output for any
    finite logits.
    """
    if not np.isfinite(a.data).all():
        raise ValueError("softmax_rows: non-finite input")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)
    flops.counter.record(5 * a.size, 0)

    def backward(g):
        inner = (g * data).sum(axis=-1, keepdims=True)
        _accum(a, (g - inner) * data)

    return _make(data, (a,), backward)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus(a):
    """log(1 + exp(x)), numerically stable; gradient is the logistic sigmoid."""
    data = np.logaddexp(np.zeros((), dtype=a.dtype), a.data)
    flops.counter.record(4 * a.size, 0)

    def backward(g):
        _accum(a, g * _sigmoid(a.data))

    return _make(data, (a,), backward)


def pad2d(a, width):
    """Zero-pad the first two axes of a (H, W, ...) tensor by `width`."""
    pad = [(width, width), (width, width)] + [(0, 0)] * (a.ndim - 2)
    data = np.pad(a.data, pad)

    def backward(g):
        _accum(a, g[width:-width, width:-width] if width else g)

    return _make(data, (a,), backward)


def take_flat(a, indices):
    """Gather from the row-major flattening of `a`; output takes `indices.shape`."""
    flat = a.data.reshape(-1)
    data = flat[indices]

    def backward(g):
        gf = np.zeros(a.size, dtype=a.dtype)
        np.add.at(gf, indices.reshape(-1), g.reshape(-1))
        _accum(a, gf.reshape(a.shape))

    return _make(np.ascontiguousarray(data), (a,), backward)


def concat(tensors, axis=0):
    first = tensors[0]
    tensors = [_coerce(t, first) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _make(data, tuple(tensors), backward)
