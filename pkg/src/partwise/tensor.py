"""Dense tensors with reverse-mode automatic differentiation.

Storage and compute are float32 by default; pass ``dtype=np.float64`` at
construction to run a shadow graph in double precision (used by the
gradient-check tests, never by training). The tape is dynamic: each
operation that touches a gradient-requiring tensor records a closure, and
``backward`` on a scalar replays the tape in reverse topological order,
then frees it. Tensors are treated as immutable once produced by an op;
mutate ``.data`` only on leaf parameters between steps.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

from .errors import ContractError, NumericError, ShapeError

DEFAULT_DTYPE = np.float32

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT2PI = 0.3989422804014327

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (teacher forward passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """N-d array plus optional gradient buffer and tape linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype if dtype is not None else None)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(DEFAULT_DTYPE)
        self.data: np.ndarray = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward = None

    # -- construction helpers -------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple, backward) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        if _grad_enabled and any(p.requires_grad or p._parents for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple:
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
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        """Same data, cut from the tape (stop-gradient)."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.dtype)  # own the buffer
        else:
            self.grad += g

    def __repr__(self) -> str:
        flag = ", grad" if self.grad is not None else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}{flag})"

    # -- elementwise arithmetic ------------------------------------------

    def __add__(self, other):
        other = as_tensor(other, self.dtype)
        out_data = self.data + other.data

        def backward(g):
            return _unbroadcast(g, self.shape), _unbroadcast(g, other.shape)

        return Tensor._result(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            return (-g,)

        return Tensor._result(-self.data, (self,), backward)

    def __sub__(self, other):
        return self + (-as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return as_tensor(other, self.dtype) + (-self)

    def __mul__(self, other):
        other = as_tensor(other, self.dtype)
        out_data = self.data * other.data

        def backward(g):
            return (_unbroadcast(g * other.data, self.shape),
                    _unbroadcast(g * self.data, other.shape))

        return Tensor._result(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other, self.dtype)
        out_data = self.data / other.data

        def backward(g):
            return (_unbroadcast(g / other.data, self.shape),
                    _unbroadcast(-g * self.data / (other.data * other.data), other.shape))

        return Tensor._result(out_data, (self, other), backward)

    def __rtruediv__(self, other):
        return as_tensor(other, self.dtype) / self

    def __pow__(self, n):
        if not isinstance(n, (int, float)):
            raise ContractError("only scalar exponents are supported")
        out_data = self.data ** n

        def backward(g):
            return (g * n * self.data ** (n - 1),)

        return Tensor._result(out_data, (self,), backward)

    # -- linear algebra ---------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        """Matrix product; stacks of matrices broadcast over leading axes."""
        other = as_tensor(other, self.dtype)
        if self.ndim < 2 or other.ndim < 2:
            raise ShapeError(f"matmul needs matrices, got {self.shape} @ {other.shape}")
        if self.shape[-1] != other.shape[-2]:
            raise ShapeError(f"matmul inner dimensions differ: {self.shape} @ {other.shape}")
        out_data = np.matmul(self.data, other.data)

        def backward(g):
            ga = np.matmul(g, other.data.swapaxes(-1, -2))
            gb = np.matmul(self.data.swapaxes(-1, -2), g)
            return _unbroadcast(ga, self.shape), _unbroadcast(gb, other.shape)

        return Tensor._result(out_data, (self, other), backward)

    __matmul__ = matmul

    def transpose(self, *axes) -> "Tensor":
        axes = axes or None

        def backward(g):
            inv = np.argsort(axes) if axes else None
            return (g.transpose(inv) if inv is not None else g.transpose(),)

        return Tensor._result(self.data.transpose(axes) if axes else self.data.T,
                              (self,), backward)

    @property
    def T(self) -> "Tensor":
        return self.transpose()

    def swapaxes(self, a: int, b: int) -> "Tensor":
        def backward(g):
            return (g.swapaxes(a, b),)

        return Tensor._result(self.data.swapaxes(a, b), (self,), backward)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])

        def backward(g):
            return (g.reshape(self.shape),)

        return Tensor._result(self.data.reshape(shape), (self,), backward)

    def broadcast_to(self, shape) -> "Tensor":
        shape = tuple(shape)

        def backward(g):
            return (_unbroadcast(g, self.shape),)

        return Tensor._result(np.broadcast_to(self.data, shape), (self,), backward)

    def __getitem__(self, idx) -> "Tensor":
        out_data = self.data[idx]

        def backward(g):
            gx = np.zeros_like(self.data)
            gx[idx] = g
            return (gx,)

        return Tensor._result(out_data, (self,), backward)

    # -- reductions --------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out_data = self.data.sum(axis=axis, keepdims=keepdims)

        def backward(g):
            if axis is None:
                return (np.broadcast_to(g, self.shape).astype(self.dtype),)
            gg = g if keepdims else np.expand_dims(g, axis)
            return (np.broadcast_to(gg, self.shape).astype(self.dtype),)

        return Tensor._result(out_data, (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        n = self.size if axis is None else self.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- elementwise functions ----------------------------------------------

    def abs(self) -> "Tensor":
        def backward(g):
            return (g * np.sign(self.data),)  # subgradient 0 at 0

        return Tensor._result(np.abs(self.data), (self,), backward)

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)

        def backward(g):
            return (g * out_data,)

        return Tensor._result(out_data, (self,), backward)

    def log(self) -> "Tensor":
        def backward(g):
            return (g / self.data,)

        return Tensor._result(np.log(self.data), (self,), backward)

    def sqrt(self) -> "Tensor":
        out_data = np.sqrt(self.data)

        def backward(g):
            return (g * 0.5 / out_data,)

        return Tensor._result(out_data, (self,), backward)

    def clamp(self, lo=None, hi=None) -> "Tensor":
        out_data = np.clip(self.data, lo, hi)
        inside = np.ones_like(self.data, dtype=bool)
        if lo is not None:
            inside &= self.data >= lo
        if hi is not None:
            inside &= self.data <= hi

        def backward(g):
            return (g * inside,)

        return Tensor._result(out_data, (self,), backward)

    def gelu(self) -> "Tensor":
        x = self.data
        cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
        out_data = x * cdf

        def backward(g):
            pdf = _INV_SQRT2PI * np.exp(-0.5 * x * x)
            return (g * (cdf + x * pdf),)

        return Tensor._result(out_data.astype(self.dtype, copy=False), (self,), backward)


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype if dtype is not None else DEFAULT_DTYPE))


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def zeros(shape, requires_grad: bool = False, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False, dtype=DEFAULT_DTYPE) -> Tensor:
    return Tensor(np.ones(shape, dtype=dtype), requires_grad=requires_grad)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- named operations ------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product a @ b (see Tensor.matmul)."""
    return as_tensor(a).matmul(b)


def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate tensors along an axis; gradient splits back."""
    parts = [as_tensor(p) for p in parts]
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        sl = [slice(None)] * g.ndim
        grads = []
        for i in range(len(parts)):
            sl[axis] = slice(offsets[i], offsets[i + 1])
            grads.append(g[tuple(sl)])
        return tuple(grads)

    return Tensor._result(out_data, tuple(parts), backward)


def softmax_rows(t: Tensor, temperature: float = 1.0) -> Tensor:
    """Row-stochastic softmax over the last axis, max-subtracted for stability.

    Logits are divided by ``temperature`` (> 0) before exponentiation.
    """
    if not temperature > 0:
        raise ContractError(f"softmax temperature must be positive, got {temperature}")
    t = as_tensor(t)
    if not np.all(np.isfinite(t.data)):
        raise NumericError("softmax_rows received non-finite logits")
    z = t.data / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        inner = (g * s).sum(axis=-1, keepdims=True)
        return (s * (g - inner) / temperature,)

    return Tensor._result(s.astype(t.dtype, copy=False), (t,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    n = x.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out_data = xhat * gain.data + bias.data

    def backward(g):
        gy = g * gain.data
        m1 = gy.mean(axis=-1, keepdims=True)
        m2 = (gy * xhat).mean(axis=-1, keepdims=True)
        gx = inv * (gy - m1 - xhat * m2)
        red = tuple(range(x.ndim - 1))
        ggain = (g * xhat).sum(axis=red) if red else (g * xhat)
        gbias = g.sum(axis=red) if red else g
        return gx.astype(x.dtype, copy=False), ggain, gbias

    return Tensor._result(out_data.astype(x.dtype, copy=False), (x, gain, bias), backward)


def l1_norm(t: Tensor) -> Tensor:
    """Sum of absolute values; subgradient at 0 is 0."""
    return as_tensor(t).abs().sum()


def l2_norm(t: Tensor) -> Tensor:
    """Euclidean norm of the flattened tensor; subgradient at 0 is 0."""
    t = as_tensor(t)
    nrm = float(np.sqrt((t.data.astype(np.float64) ** 2).sum()))

    def backward(g):
        if nrm == 0.0:
            return (np.zeros_like(t.data),)
        return ((g * (t.data / nrm)).astype(t.dtype, copy=False),)

    return Tensor._result(np.asarray(nrm, dtype=t.dtype), (t,), backward)


def backward(loss: Tensor, free_graph: bool = True) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable ``grad``.

    ``loss`` must be a scalar. Repeated calls without zeroing grads
    accumulate. The tape is freed afterwards unless ``free_graph=False``.
    """
    if loss.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")

    # iterative topological order; graphs can exceed the recursion limit
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
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
            if id(p) not in visited:
                stack.append((p, False))

    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is None or node.grad is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None:
                continue
            if parent.requires_grad or parent._parents:
                parent._accumulate(np.asarray(g, dtype=parent.dtype))

    if free_graph:
        for node in topo:
            intermediate = node._backward is not None
            node._parents = ()
            node._backward = None
            if intermediate:
                node.grad = None
