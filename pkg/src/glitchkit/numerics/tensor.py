"""Tensor values and the gradient tape.

A :class:`Tensor` is a thin wrapper over a C-contiguous numpy array
(``float32`` unless a caller explicitly asks for ``float64``, which only the
finite-difference checker does). Differentiable operations executed while a
:class:`Tape` is active, and with at least one input that ``requires_grad``,
append a node to that tape. :func:`backward` then walks the nodes in reverse
recording order.

Usage::

    x = Tensor([1.0, 2.0], requires_grad=True)
    with Tape() as tape:
        y = (x * x).sum()
    grads = backward(tape, y)
    grads[x]          # array([2., 4.], dtype=float32)
"""

import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import TapeError, UsageError

_local = threading.local()


def _tape_stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "__weakref__")

    def __init__(self, data, requires_grad=False, dtype=None, name=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if dtype is None:
            dtype = arr.dtype if arr.dtype in (np.float32, np.float64) else np.float32
        self.data = np.asarray(arr, dtype=dtype, order="C")
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _not_scalar(self)

    def detach(self):
        return Tensor(self.data.copy(), dtype=self.data.dtype)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype}{flag})"

    # arithmetic sugar, all routed through recorded ops
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other, self.dtype)))

    def __rsub__(self, other):
        return add(as_tensor(other, self.dtype), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self):
        return total(self)

    def mean(self):
        return mean(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def _not_scalar(t):
    raise UsageError(f"item() needs a single-element tensor, got shape {list(t.shape)}")


def as_tensor(x, dtype=np.float32):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype), dtype=dtype)


@dataclass
class Node:
    inputs: Sequence[Tensor]
    output: Tensor
    backward: Callable  # grad_output -> tuple of grads (or None) aligned with inputs
    op: str


class Tape:
    """Ordered record of the differentiable ops executed while it is active.

    A tape supports exactly one :func:`backward` pass; recording into or
    differentiating a consumed tape raises :class:`TapeError`.
    """

    def __init__(self):
        self.nodes = []
        self.consumed = False

    def __enter__(self):
        if self.consumed:
            raise TapeError("tape already consumed by a backward pass")
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def record(self, op, inputs, output, backward_fn):
        if self.consumed:
            raise TapeError("cannot record into a consumed tape")
        self.nodes.append(Node(tuple(inputs), output, backward_fn, op))

    def __len__(self):
        return len(self.nodes)


def record(op, inputs, out_data, backward_fn):
    """Wrap ``out_data`` in a Tensor and record it if any input needs a gradient."""
    out = Tensor(out_data, dtype=out_data.dtype)
    tape = active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(op, inputs, out, backward_fn)
    return out


def backward(tape, loss, grad_output=None):
    """Back-propagate from ``loss`` through ``tape``.

    Returns a dict mapping every participating ``requires_grad`` tensor to its
    gradient array, and stores the same array on ``tensor.grad`` (overwriting
    any previous value). ``loss`` must be a single-element tensor unless an
    explicit ``grad_output`` seed is given.
    """
    if tape.consumed:
        raise TapeError("tape already consumed by a backward pass; record a new one")
    if grad_output is None:
        if loss.data.size != 1:
            raise UsageError(f"backward needs a scalar loss, got shape {list(loss.shape)}")
        grad_output = np.ones_like(loss.data)
    else:
        grad_output = np.asarray(grad_output, dtype=loss.dtype).reshape(loss.shape)
    tape.consumed = True
    stack = _tape_stack()
    if tape in stack:
        stack.remove(tape)

    grads = {id(loss): grad_output}
    owners = {id(loss): loss}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.output), None)
        if g is None:
            continue
        if node.output.requires_grad and node.output is not loss:
            # keep intermediate gradients readable for callers that hold the tensor
            owners[id(node.output)] = node.output
            node.output.grad = g
        input_grads = node.backward(g)
        for inp, ig in zip(node.inputs, input_grads):
            if ig is None or not inp.requires_grad:
                continue
            key = id(inp)
            owners[key] = inp
            if key in grads:
                grads[key] = grads[key] + ig
            else:
                grads[key] = ig

    result = {}
    for key, g in grads.items():
        t = owners[key]
        g = np.asarray(g, dtype=t.dtype, order="C")
        t.grad = g
        result[t] = g
    tape.nodes = []
    return result


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b):
    a, b = as_tensor(a), as_tensor(b, a.dtype if isinstance(a, Tensor) else np.float32)
    out = a.data + b.data

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record("add", (a, b), out.astype(np.result_type(a.data, b.data)), bw)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b, a.dtype if isinstance(a, Tensor) else np.float32)
    out = a.data * b.data

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return record("mul", (a, b), out, bw)


def neg(a):
    return record("neg", (a,), -a.data, lambda g: (-g,))


def total(a):
    out = np.asarray(a.data.sum(), dtype=a.dtype)
    return record("sum", (a,), out, lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean(a):
    n = a.data.size
    out = np.asarray(a.data.mean(), dtype=a.dtype)
    return record("mean", (a,), out, lambda g: (np.full(a.shape, g / n, dtype=a.dtype),))


def reshape(a, shape):
    out = a.data.reshape(shape)
    return record("reshape", (a,), out, lambda g: (g.reshape(a.shape),))


def getitem(a, index):
    out = np.asarray(a.data[index], order="C")

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return record("getitem", (a,), out, bw)
