"""Reverse-mode autodiff on dense numpy arrays.

A ``Tensor`` wraps an ndarray plus an optional gradient and a record of the
op that produced it.  Ops build the computation graph on the fly; calling
``backward()`` on a scalar runs one reverse topological sweep, accumulating
gradients by addition.  Nodes with ``requires_grad=False`` never receive a
gradient, and an op whose inputs all have ``requires_grad=False`` records no
graph at all.

Float64 is the default dtype; float32 arrays are accepted and kept (training
in production mode), but all verification tolerances assume float64.
"""

import contextlib

import numpy as np

DEFAULT_DTYPE = np.float64

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (eval-mode forwards)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled():
    return _grad_enabled


def _unbroadcast(grad, shape):
    """Sum ``grad`` back down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """Dense value grid with optional gradient and graph record."""

    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        if arr.ndim and min(arr.shape) < 1:
            raise ValueError(f"tensor extents must be >= 1, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.op = "leaf"
        self._parents = ()
        self._backward_fn = None

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, op, backward_fn):
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out.op = op
            out._parents = tuple(parents)
            out._backward_fn = backward_fn
        return out

    def _accum(self, grad):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, op={self.op!r}{flag})"

    # -- backward sweep -----------------------------------------------------

    def backward(self):
        """Reverse sweep from a scalar loss node."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar, got shape {self.data.shape}")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is not None:
                node._backward_fn(node.grad)

    # -- arithmetic ---------------------------------------------------------

    @staticmethod
    def _coerce(other):
        return other if isinstance(other, Tensor) else Tensor(other)

    def _coerce_like(self, other):
        # python scalars adopt this tensor's dtype; a bare np.asarray would
        # produce a float64 0-d array and silently upcast float32 graphs
        if isinstance(other, Tensor):
            return other
        if isinstance(other, (int, float)) and not isinstance(other, bool):
            return Tensor(np.asarray(other, dtype=self.data.dtype))
        return Tensor(other)

    def __add__(self, other):
        other = self._coerce_like(other)
        a, b = self, other

        def bw(g):
            a._accum(_unbroadcast(g, a.data.shape))
            b._accum(_unbroadcast(g, b.data.shape))

        return Tensor._make(a.data + b.data, (a, b), "add", bw)

    __radd__ = __add__

    def __mul__(self, other):
        other = self._coerce_like(other)
        a, b = self, other

        def bw(g):
            a._accum(_unbroadcast(g * b.data, a.data.shape))
            b._accum(_unbroadcast(g * a.data, b.data.shape))

        return Tensor._make(a.data * b.data, (a, b), "mul", bw)

    __rmul__ = __mul__

    def __neg__(self):
        a = self
        return Tensor._make(-a.data, (a,), "neg", lambda g: a._accum(-g))

    def __sub__(self, other):
        return self + (-self._coerce_like(other))

    def __rsub__(self, other):
        return self._coerce_like(other) + (-self)

    def __truediv__(self, other):
        other = self._coerce_like(other)
        a, b = self, other

        def bw(g):
            a._accum(_unbroadcast(g / b.data, a.data.shape))
            b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        return Tensor._make(a.data / b.data, (a, b), "div", bw)

    def __rtruediv__(self, other):
        return self._coerce_like(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        a = self

        def bw(g):
            a._accum(g * exponent * a.data ** (exponent - 1))

        return Tensor._make(a.data**exponent, (a,), "pow", bw)

    def __matmul__(self, other):
        other = self._coerce_like(other)
        a, b = self, other

        def bw(g):
            a._accum(g @ b.data.T)
            b._accum(a.data.T @ g)

        return Tensor._make(a.data @ b.data, (a, b), "matmul", bw)

    # -- reductions and shape ops -------------------------------------------

    def sum(self, axis=None, keepdims=False):
        a = self

        def bw(g):
            if axis is None:
                a._accum(np.broadcast_to(g, a.data.shape).copy())
                return
            gg = g
            if not keepdims:
                gg = np.expand_dims(g, axis)
            a._accum(np.broadcast_to(gg, a.data.shape).copy())

        return Tensor._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), "sum", bw)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[ax] for ax in np.atleast_1d(axis)]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(n))

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old = a.data.shape
        return Tensor._make(
            a.data.reshape(shape), (a,), "reshape", lambda g: a._accum(g.reshape(old))
        )

    def transpose(self, *axes):
        a = self
        inv = tuple(np.argsort(axes))
        return Tensor._make(
            np.ascontiguousarray(a.data.transpose(axes)),
            (a,),
            "transpose",
            lambda g: a._accum(g.transpose(inv)),
        )

    # -- elementwise nonlinear ----------------------------------------------

    def log(self):
        a = self
        return Tensor._make(np.log(a.data), (a,), "log", lambda g: a._accum(g / a.data))

    def exp(self):
        a = self
        out_data = np.exp(a.data)
        return Tensor._make(out_data, (a,), "exp", lambda g: a._accum(g * out_data))

    def sqrt(self):
        a = self
        out_data = np.sqrt(a.data)
        return Tensor._make(out_data, (a,), "sqrt", lambda g: a._accum(g * 0.5 / out_data))

    def clip(self, lo, hi):
        """Clamp values; gradient passes only where no clamping happened."""
        a = self
        mask = (a.data >= lo) & (a.data <= hi)
        return Tensor._make(
            np.clip(a.data, lo, hi), (a,), "clip", lambda g: a._accum(g * mask)
        )


def concat(tensors, axis=1):
    """Concatenate along ``axis``; backward splits the gradient."""
    tensors = [Tensor._coerce(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            t._accum(np.ascontiguousarray(g[tuple(sl)]))

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor._make(data, tuple(tensors), "concat", bw)
