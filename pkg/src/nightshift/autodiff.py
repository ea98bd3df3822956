"""Minimal reverse-mode automatic differentiation on numpy arrays.

A :class:`Tensor` wraps an ndarray plus a gradient buffer and graph
linkage to its parents. Ops are free functions that build the graph;
``Tensor.backward()`` runs reverse-mode accumulation over a topological
order. Convolutions run as GEMMs over im2col views, so the engine is fast
enough for small image networks on a CPU while staying easy to verify
against finite differences.

Conventions:
  * feature maps are (C, H, W), weights (Cout, Cin, kh, kw);
  * transposed-convolution weights are (Cin, Cout, kh, kw);
  * subgradients at kinks (|x| at 0, sqrt at 0, atan2 at the origin) are
    defined as 0 so gradients stay finite on degenerate inputs.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Tensor:
    """Node in the computation graph: value, gradient, parent linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable | None = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_wrap(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def backward(self) -> None:
        """Accumulate gradients of this scalar into every parent tensor."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward_fn is None:
                continue
            if node.grad is None:
                continue
            grads = node._backward_fn(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    parent.grad = g
                else:
                    parent.grad = parent.grad + g
            node.grad = None  # free intermediate buffers; leaves keep theirs


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _wrap(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


_grad_enabled = True


class no_grad:
    """Context manager suppressing graph construction (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _make(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _reduce_to(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# Elementwise ops
# ---------------------------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    data = a.data + b.data

    def backward_fn(grad):
        return (_reduce_to(grad, a.shape), _reduce_to(grad, b.shape))

    return _make(data, (a, b), backward_fn)


def sub(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    data = a.data - b.data

    def backward_fn(grad):
        return (_reduce_to(grad, a.shape), _reduce_to(-grad, b.shape))

    return _make(data, (a, b), backward_fn)


def mul(a: Tensor, b) -> Tensor:
    b = _wrap(b, a)
    data = a.data * b.data

    def backward_fn(grad):
        ga = _reduce_to(grad * b.data, a.shape) if a.requires_grad else None
        gb = _reduce_to(grad * a.data, b.shape) if b.requires_grad else None
        return (ga, gb)

    return _make(data, (a, b), backward_fn)


def neg(a: Tensor) -> Tensor:
    return _make(-a.data, (a,), lambda grad: (-grad,))


def square(a: Tensor) -> Tensor:
    return _make(a.data * a.data, (a,), lambda grad: (grad * (2.0 * a.data),))


def sqrt(a: Tensor) -> Tensor:
    root = np.sqrt(a.data)

    def backward_fn(grad):
        g = np.zeros_like(root)
        positive = root > 0
        g[positive] = grad[positive] * 0.5 / root[positive]
        return (g,)

    return _make(root, (a,), backward_fn)


def abs_(a: Tensor) -> Tensor:
    return _make(np.abs(a.data), (a,), lambda grad: (grad * np.sign(a.data),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, (a,), lambda grad: (grad * (1.0 - out * out),))


def atan2(y: Tensor, x: Tensor) -> Tensor:
    data = np.arctan2(y.data, x.data)
    denom = y.data * y.data + x.data * x.data
    safe = denom > 0

    def backward_fn(grad):
        gy = np.zeros_like(y.data)
        gx = np.zeros_like(x.data)
        gy[safe] = grad[safe] * x.data[safe] / denom[safe]
        gx[safe] = -grad[safe] * y.data[safe] / denom[safe]
        return (gy, gx)

    return _make(data, (y, x), backward_fn)


def mean(a: Tensor) -> Tensor:
    data = np.asarray(a.data.mean())

    def backward_fn(grad):
        return (np.full(a.shape, float(grad) / a.data.size, dtype=a.data.dtype),)

    return _make(data, (a,), backward_fn)


def concat_channels(tensors: Sequence[Tensor]) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=0)
    sizes = [t.shape[0] for t in tensors]

    def backward_fn(grad):
        out = []
        start = 0
        for size in sizes:
            out.append(grad[start : start + size])
            start += size
        return tuple(out)

    return _make(data, tuple(tensors), backward_fn)


# ---------------------------------------------------------------------------
# Structural ops
# ---------------------------------------------------------------------------


def subsample2(a: Tensor) -> Tensor:
    """Keep every other pixel: out(c, y, x) = in(c, 2y, 2x)."""
    data = a.data[:, ::2, ::2].copy()

    def backward_fn(grad):
        g = np.zeros_like(a.data)
        g[:, ::2, ::2] = grad
        return (g,)

    return _make(data, (a,), backward_fn)


def _pad_indices(h: int, w: int, pad: int, mode: str) -> np.ndarray:
    rows = np.arange(-pad, h + pad)
    cols = np.arange(-pad, w + pad)
    if mode == "edge":
        rows = np.clip(rows, 0, h - 1)
        cols = np.clip(cols, 0, w - 1)
    elif mode == "reflect":
        rows = np.abs(rows)
        rows = np.where(rows >= h, 2 * h - 2 - rows, rows)
        cols = np.abs(cols)
        cols = np.where(cols >= w, 2 * w - 2 - cols, cols)
    else:
        raise ValueError(f"unknown pad mode {mode!r}")
    return (rows[:, None] * w + cols[None, :]).ravel()


def _pad_gather(a: Tensor, pad: int, mode: str) -> Tensor:
    c, h, w = a.shape
    if mode == "reflect" and pad > min(h, w) - 1:
        raise ValueError(f"reflect pad {pad} too large for spatial size {h}x{w}")
    data = np.pad(a.data, ((0, 0), (pad, pad), (pad, pad)), mode=mode)
    idx = _pad_indices(h, w, pad, mode)

    def backward_fn(grad):
        g = np.empty((c, h * w), dtype=a.data.dtype)
        for ch in range(c):
            g[ch] = np.bincount(idx, weights=grad[ch].ravel(), minlength=h * w)
        return (g.reshape(a.shape),)

    return _make(data, (a,), backward_fn)


def pad_replicate(a: Tensor, pad: int) -> Tensor:
    return _pad_gather(a, pad, "edge")


def pad_reflect(a: Tensor, pad: int) -> Tensor:
    return _pad_gather(a, pad, "reflect")


# ---------------------------------------------------------------------------
# Convolutions (im2col + GEMM)
# ---------------------------------------------------------------------------


def _im2col(x: np.ndarray, kh: int, kw: int, stride: int) -> tuple[np.ndarray, int, int]:
    """(C, H, W) -> ((C*kh*kw, Ho*Wo) patch matrix, Ho, Wo)."""
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]
    c, ho, wo = windows.shape[:3]
    cols = windows.transpose(0, 3, 4, 1, 2).reshape(c * kh * kw, ho * wo)
    return np.ascontiguousarray(cols), ho, wo


def _col2im(cols: np.ndarray, shape: tuple[int, int, int], kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    """Scatter-add the inverse of _im2col."""
    c, h, w = shape
    out = np.zeros(shape, dtype=cols.dtype)
    cols = cols.reshape(c, kh, kw, ho, wo)
    for i in range(kh):
        for j in range(kw):
            out[:, i : i + stride * ho : stride, j : j + stride * wo : stride] += cols[:, i, j]
    return out


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, pad: int = 0) -> Tensor:
    """2-D correlation of (C,H,W) input with (Cout,Cin,kh,kw) weights.

    ``pad`` is zero padding; use pad_reflect/pad_replicate in front for
    other boundary conditions.
    """
    cout, cin, kh, kw = w.shape
    if x.shape[0] != cin:
        raise ValueError(f"conv2d channel mismatch: input {x.shape[0]}, weights expect {cin}")
    xp = x.data if pad == 0 else np.pad(x.data, ((0, 0), (pad, pad), (pad, pad)))
    cols, ho, wo = _im2col(xp, kh, kw, stride)
    wmat = w.data.reshape(cout, cin * kh * kw)
    out = wmat @ cols
    if b is not None:
        out = out + b.data[:, None]
    out = out.reshape(cout, ho, wo)
    parents = (x, w) if b is None else (x, w, b)

    def backward_fn(grad):
        gmat = grad.reshape(cout, ho * wo)
        gx = None
        if x.requires_grad:
            dcols = wmat.T @ gmat
            padded_shape = (cin, xp.shape[1], xp.shape[2])
            gxp = _col2im(dcols, padded_shape, kh, kw, stride, ho, wo)
            gx = gxp if pad == 0 else gxp[:, pad:-pad, pad:-pad]
        gw = (gmat @ cols.T).reshape(w.shape) if w.requires_grad else None
        if b is None:
            return (gx, gw)
        gb = gmat.sum(axis=1) if b.requires_grad else None
        return (gx, gw, gb)

    return _make(out, parents, backward_fn)


def conv_transpose2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 2, pad: int = 1) -> Tensor:
    """Transposed convolution of (Cin,H,W) with (Cin,Cout,kh,kw) weights.

    Output spatial size is (H-1)*stride - 2*pad + k, the adjoint of the
    matching conv2d.
    """
    cin, cout, kh, kw = w.shape
    if x.shape[0] != cin:
        raise ValueError(f"conv_transpose2d channel mismatch: input {x.shape[0]}, weights expect {cin}")
    _, h, win = x.shape
    hfull = (h - 1) * stride + kh
    wfull = (win - 1) * stride + kw
    ho = hfull - 2 * pad
    wo = wfull - 2 * pad
    if ho <= 0 or wo <= 0:
        raise ValueError("conv_transpose2d output size would be non-positive")
    xmat = x.data.reshape(cin, h * win)
    wmat = w.data.reshape(cin, cout * kh * kw)
    cols = (wmat.T @ xmat).reshape(cout, kh, kw, h, win)
    full = np.zeros((cout, hfull, wfull), dtype=x.data.dtype)
    for i in range(kh):
        for j in range(kw):
            full[:, i : i + stride * h : stride, j : j + stride * win : stride] += cols[:, i, j]
    out = full[:, pad : pad + ho, pad : pad + wo] if pad > 0 else full
    if b is not None:
        out = out + b.data[:, None, None]
    parents = (x, w) if b is None else (x, w, b)

    def backward_fn(grad):
        gfull = grad if pad == 0 else np.pad(grad, ((0, 0), (pad, pad), (pad, pad)))
        windows = np.lib.stride_tricks.sliding_window_view(gfull, (kh, kw), axis=(1, 2))
        windows = windows[:, ::stride, ::stride]
        dcols = np.ascontiguousarray(windows.transpose(0, 3, 4, 1, 2)).reshape(
            cout * kh * kw, h * win
        )
        gx = (wmat @ dcols).reshape(x.shape) if x.requires_grad else None
        gw = (xmat @ dcols.T).reshape(w.shape) if w.requires_grad else None
        if b is None:
            return (gx, gw)
        gb = grad.sum(axis=(1, 2)) if b.requires_grad else None
        return (gx, gw, gb)

    return _make(out, parents, backward_fn)


# ---------------------------------------------------------------------------
# Normalization and activations
# ---------------------------------------------------------------------------


def instance_norm(x: Tensor, weight: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization over the spatial axes, then affine scale/shift.

    ``weight`` and ``bias`` have shape (C, 1, 1).
    """
    data = x.data
    mu = data.mean(axis=(1, 2), keepdims=True)
    centered = data - mu
    var = (centered * centered).mean(axis=(1, 2), keepdims=True)
    istd = 1.0 / np.sqrt(var + np.asarray(eps, dtype=data.dtype))
    xhat = centered * istd
    out = weight.data * xhat + bias.data

    def backward_fn(grad):
        gx = None
        if x.requires_grad:
            dxhat = grad * weight.data
            m1 = dxhat.mean(axis=(1, 2), keepdims=True)
            m2 = (dxhat * xhat).mean(axis=(1, 2), keepdims=True)
            gx = istd * (dxhat - m1 - xhat * m2)
        gw = (grad * xhat).sum(axis=(1, 2), keepdims=True) if weight.requires_grad else None
        gb = grad.sum(axis=(1, 2), keepdims=True) if bias.requires_grad else None
        return (gx, gw, gb)

    return _make(out, (x, weight, bias), backward_fn)


def prelu(x: Tensor, alpha: Tensor) -> Tensor:
    """Parametric ReLU with per-channel (C,1,1) slope for negative inputs."""
    positive = x.data > 0
    out = np.where(positive, x.data, alpha.data * x.data)

    def backward_fn(grad):
        gx = None
        if x.requires_grad:
            gx = np.where(positive, grad, grad * alpha.data)
        ga = None
        if alpha.requires_grad:
            ga = _reduce_to(np.where(positive, 0.0, grad * x.data), alpha.shape)
        return (gx, ga)

    return _make(out, (x, alpha), backward_fn)


# ---------------------------------------------------------------------------
# Finite-difference verification
# ---------------------------------------------------------------------------


def finite_difference_check(fn, tensors: Sequence[Tensor], h: float = 1e-4) -> float:
    """Max relative error between reverse-mode and central-difference grads.

    ``fn`` maps the given tensors to a scalar Tensor. Inputs should be
    float64 for the differences to resolve below the usual 1e-4 gate.
    """
    for t in tensors:
        t.zero_grad()
    out = fn(*tensors)
    out.backward()
    analytic = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in tensors
    ]
    worst = 0.0
    for t, a in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        aflat = np.asarray(a, dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(fn(*tensors).data)
            flat[i] = orig - h
            fm = float(fn(*tensors).data)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            denom = max(abs(numeric), abs(aflat[i]), 1e-3)
            worst = max(worst, abs(numeric - aflat[i]) / denom)
    return worst
