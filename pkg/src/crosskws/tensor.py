"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable operation in this package is built from the primitives
here.  Operations executed while a :class:`Tape` is active are recorded in
execution order; :func:`backward` replays the records in reverse and
accumulates gradients into ``Tensor.grad``.  Tapes are thread-local, so
independent tapes may run concurrently on different threads, but a single
tape must only ever be used from one thread.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class EmptyInputError(ValueError):
    """An operation received an input with no time steps / elements."""


class Tensor:
    """A dense float64 array plus an optional gradient buffer.

    Tensors produced by operations are treated as immutable; only the
    optimizer rewrites parameter data, and only between tapes.
    """

    __slots__ = ("data", "grad", "name")

    def __init__(self, data, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor holds non-finite values")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of size {self.data.size}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape})"


class _Node:
    __slots__ = ("out", "inputs", "vjp")

    def __init__(self, out, inputs, vjp):
        self.out = out
        self.inputs = inputs
        self.vjp = vjp


_LOCAL = threading.local()


def _tape_stack() -> list:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


class Tape:
    """Ordered record of executed operations, used as a context manager.

    Records appear in execution order, which is topological by
    construction; :func:`backward` walks them once, in reverse.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise RuntimeError("tape exited out of order")
        stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)


def _record(out: Tensor, inputs: tuple[Tensor, ...],
            vjp: Callable[[np.ndarray], tuple[np.ndarray, ...]]) -> None:
    stack = _tape_stack()
    if stack:
        stack[-1].nodes.append(_Node(out, inputs, vjp))


def backward(loss: Tensor, tape: Tape) -> None:
    """Populate ``grad`` on every tensor reachable from ``loss`` through ``tape``.

    ``loss`` must be a scalar produced while ``tape`` was active; its own
    seed gradient is 1.  Gradients accumulate, so callers reset them
    (``zero_grad``) between steps.  The walk is deterministic: records are
    visited exactly once, in reverse execution order.
    """
    if loss.data.size != 1:
        raise ShapeError("backward requires a scalar loss")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes):
        g = node.out.grad
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.vjp(g)):
            if gi is None:
                continue
            if inp.grad is None:
                # vjps may hand back g itself or a view; grad buffers must own
                # their memory
                inp.grad = gi.copy() if gi.base is not None or gi is g else gi
            else:
                inp.grad = inp.grad + gi


# ---------------------------------------------------------------------------
# primitive operations
# ---------------------------------------------------------------------------

def constant(data, name: str | None = None) -> Tensor:
    """A tensor that participates in ops but is not meant to receive updates."""
    return Tensor(data, name=name)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul expects 2-D operands")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.data.shape} x {b.data.shape}")
    out = Tensor(a.data @ b.data)

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    _record(out, (a, b), vjp)
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("transpose expects a 2-D tensor")
    out = Tensor(a.data.T)
    _record(out, (a,), lambda g: (g.T,))
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data + b.data)
    _record(out, (a, b), lambda g: (g, g))
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"sub shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data - b.data)
    _record(out, (a, b), lambda g: (g, -g))
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = Tensor(a.data * b.data)
    _record(out, (a, b), lambda g: (g * b.data, g * a.data))
    return out


def add_rowvec(a: Tensor, b: Tensor) -> Tensor:
    """Add a length-C vector to every row of a T x C matrix (bias add)."""
    if a.data.ndim != 2 or b.data.ndim != 1 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"add_rowvec shapes: {a.data.shape} + {b.data.shape}")
    out = Tensor(a.data + b.data[None, :])
    _record(out, (a, b), lambda g: (g, g.sum(axis=0)))
    return out


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(a.data * c)
    _record(out, (a,), lambda g: (g * c,))
    return out


def add_const(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(a.data + c)
    _record(out, (a,), lambda g: (g,))
    return out


def rsub_const(c: float, a: Tensor) -> Tensor:
    """c - a, elementwise."""
    c = float(c)
    out = Tensor(c - a.data)
    _record(out, (a,), lambda g: (-g,))
    return out


def pow_const(a: Tensor, p: float) -> Tensor:
    """a ** p for a > 0 (used on probabilities)."""
    p = float(p)
    if np.any(a.data <= 0.0):
        raise ValueError("pow_const requires strictly positive base")
    out = Tensor(a.data ** p)

    def vjp(g):
        return (g * p * a.data ** (p - 1.0),)

    _record(out, (a,), vjp)
    return out


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0.0):
        raise ValueError("log requires strictly positive input")
    out = Tensor(np.log(a.data))
    _record(out, (a,), lambda g: (g / a.data,))
    return out


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))
    mask = a.data > 0.0
    _record(out, (a,), lambda g: (g * mask,))
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                 np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(y)
    _record(out, (a,), lambda g: (g * y * (1.0 - y),))
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y)
    _record(out, (a,), lambda g: (g * (1.0 - y * y),))
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes only where unclipped."""
    y = np.clip(a.data, lo, hi)
    out = Tensor(y)
    mask = (a.data > lo) & (a.data < hi)
    _record(out, (a,), lambda g: (g * mask,))
    return out


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = Tensor(a.data.reshape(shape))
    orig = a.data.shape
    _record(out, (a,), lambda g: (g.reshape(orig),))
    return out


def take_row(a: Tensor, i: int) -> Tensor:
    """Row i of a 2-D tensor, as a 1-D tensor."""
    if a.data.ndim != 2:
        raise ShapeError("take_row expects a 2-D tensor")
    n = a.data.shape[0]
    if not -n <= i < n:
        raise IndexError(f"row {i} out of range for {n} rows")
    i = i % n
    out = Tensor(a.data[i])

    def vjp(g):
        full = np.zeros_like(a.data)
        full[i] = g
        return (full,)

    _record(out, (a,), vjp)
    return out


def sum_all(a: Tensor) -> Tensor:
    out = Tensor(a.data.sum())
    shape = a.data.shape
    _record(out, (a,), lambda g: (np.broadcast_to(g, shape),))
    return out


def mean_all(a: Tensor) -> Tensor:
    if a.data.size == 0:
        raise EmptyInputError("mean of empty tensor")
    n = a.data.size
    out = Tensor(a.data.mean())
    shape = a.data.shape
    _record(out, (a,), lambda g: (np.broadcast_to(g / n, shape),))
    return out


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax of a p x q matrix, stabilized by per-row max subtraction."""
    if a.data.ndim != 2:
        raise ShapeError("softmax_rows expects a 2-D tensor")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)

    def vjp(g):
        # dL/dx = y * (g - sum_j g_j y_j) per row
        dot = (g * y).sum(axis=1, keepdims=True)
        return (y * (g - dot),)

    _record(out, (a,), vjp)
    return out


def conv1d(x: Tensor, kernels: Tensor, stride: int = 1) -> Tensor:
    """1-D convolution over time with zero "same" padding.

    ``x`` is T x C_in, ``kernels`` is C_out x C_in x k with odd k; each side
    is padded by (k-1)/2 zeros and the output has ceil(T / stride) rows, so
    stride 1 preserves length.  Cross-correlation convention:
    out[i, o] = sum_{c,j} x_pad[i*stride + j, c] * kernels[o, c, j].
    """
    if x.data.ndim != 2 or kernels.data.ndim != 3:
        raise ShapeError("conv1d expects x: T x C_in, kernels: C_out x C_in x k")
    t, c_in = x.data.shape
    if t == 0:
        raise EmptyInputError("conv1d on empty input")
    c_out, kc_in, k = kernels.data.shape
    if kc_in != c_in:
        raise ShapeError(f"conv1d channel mismatch: input {c_in}, kernels {kc_in}")
    if k % 2 != 1:
        raise ShapeError("conv1d kernel width must be odd")
    if stride < 1:
        raise ValueError("conv1d stride must be >= 1")
    pad = (k - 1) // 2
    t_out = -(-t // stride)  # ceil(t / stride)

    x_pad = np.zeros((t + 2 * pad, c_in))
    x_pad[pad:pad + t] = x.data
    idx = np.arange(t_out)[:, None] * stride + np.arange(k)[None, :]  # t_out x k
    patches = x_pad[idx]                          # t_out x k x c_in
    x_col = patches.transpose(0, 2, 1).reshape(t_out, c_in * k)
    w_flat = kernels.data.reshape(c_out, c_in * k)
    out = Tensor(x_col @ w_flat.T)

    def vjp(g):
        dw = (g.T @ x_col).reshape(c_out, c_in, k)
        d_col = g @ w_flat                        # t_out x (c_in*k)
        d_patches = d_col.reshape(t_out, c_in, k).transpose(0, 2, 1)
        dx_pad = np.zeros_like(x_pad)
        np.add.at(dx_pad, idx, d_patches)
        return dx_pad[pad:pad + t], dw

    _record(out, (x, kernels), vjp)
    return out


def gru_forward(x: Tensor, w: Tensor, u: Tensor, b: Tensor,
                h0: Tensor | None = None) -> Tensor:
    """Run a GRU over a T x C input, returning all T hidden states (T x H).

    Gate layout packs z (update), r (reset) and the candidate along the last
    axis of ``w`` (C x 3H), ``u`` (H x 3H) and ``b`` (3H):

        z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
        r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
        c_t = tanh(x_t W_c + r_t * (h_{t-1} U_c) + b_c)
        h_t = (1 - z_t) * h_{t-1} + z_t * c_t

    The reset gate scales the recurrent projection (not the state itself).
    Backward runs full backpropagation through time for all five inputs.
    """
    if x.data.ndim != 2:
        raise ShapeError("gru_forward expects a T x C input")
    t_len, c_in = x.data.shape
    if t_len == 0:
        raise EmptyInputError("gru_forward on empty input")
    if w.data.ndim != 2 or u.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeError("gru weights must be w: C x 3H, u: H x 3H, b: 3H")
    h3 = w.data.shape[1]
    if h3 % 3 != 0:
        raise ShapeError("packed gru weight width must be a multiple of 3")
    h = h3 // 3
    if w.data.shape[0] != c_in or u.data.shape != (h, h3) or b.data.shape != (h3,):
        raise ShapeError(
            f"gru shapes inconsistent: x {x.data.shape}, w {w.data.shape}, "
            f"u {u.data.shape}, b {b.data.shape}")
    if h0 is not None and h0.data.shape != (h,):
        raise ShapeError(f"h0 must have shape ({h},)")

    h_prev0 = np.zeros(h) if h0 is None else h0.data
    x_proj = x.data @ w.data + b.data  # T x 3H

    hs = np.empty((t_len, h))
    zs = np.empty((t_len, h))
    rs = np.empty((t_len, h))
    cs = np.empty((t_len, h))
    hu_c = np.empty((t_len, h))  # h_{t-1} U_c, needed for the reset-gate grad

    def _sig(v):
        return np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                        np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))

    h_prev = h_prev0
    for t in range(t_len):
        hp = h_prev @ u.data  # 3H
        zr = _sig(x_proj[t, :2 * h] + hp[:2 * h])
        z, r = zr[:h], zr[h:]
        hu = hp[2 * h:]
        c = np.tanh(x_proj[t, 2 * h:] + r * hu)
        h_new = (1.0 - z) * h_prev + z * c
        zs[t], rs[t], cs[t], hu_c[t], hs[t] = z, r, c, hu, h_new
        h_prev = h_new

    out = Tensor(hs)

    def vjp(g):
        da = np.empty((t_len, h3))   # grads of pre-activations (z, r, c)
        dhu = np.empty((t_len, h3))  # rows multiplying U^T: (daz, dar, dac*r)
        dh = np.zeros(h)
        ut = u.data.T
        for t in range(t_len - 1, -1, -1):
            dh = dh + g[t]
            h_prev = hs[t - 1] if t > 0 else h_prev0
            z, r, c = zs[t], rs[t], cs[t]
            dz = dh * (c - h_prev)
            dc = dh * z
            dac = dc * (1.0 - c * c)
            dr = dac * hu_c[t]
            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            da[t, :h], da[t, h:2 * h], da[t, 2 * h:] = daz, dar, dac
            dhu[t, :2 * h] = da[t, :2 * h]
            dhu[t, 2 * h:] = dac * r
            dh = dh * (1.0 - z) + dhu[t] @ ut
        h_stack = np.vstack([h_prev0[None, :], hs[:-1]])
        dx = da @ w.data.T
        dw = x.data.T @ da
        du = h_stack.T @ dhu
        db = da.sum(axis=0)
        if h0 is None:
            return dx, dw, du, db
        return dx, dw, du, db, dh

    inputs = (x, w, u, b) if h0 is None else (x, w, u, b, h0)
    _record(out, inputs, vjp)
    return out


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared error over all elements."""
    d = sub(a, b)
    return mean_all(mul(d, d))


def finite_diff_check(f: Callable[[], Tensor], params: Sequence[Tensor],
                      eps: float = 1e-5) -> float:
    """Compare tape gradients of ``f()`` against central finite differences.

    Returns max over all parameter elements of
    |analytic - numeric| / max(1, |numeric|).  ``f`` must be deterministic
    and depend on ``params`` only through their current data.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = f()
    if loss.data.size != 1:
        raise ShapeError("finite_diff_check requires a scalar function")
    backward(loss, tape)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]

    worst = 0.0
    for p, ana in zip(params, analytic):
        flat = p.data.reshape(-1)
        if flat.size and not np.shares_memory(flat, p.data):
            raise ValueError("parameter data must be contiguous to perturb in place")
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = f().item()
            flat[i] = orig - eps
            f_minus = f().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(ana.reshape(-1)[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst
