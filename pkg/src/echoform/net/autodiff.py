"""Minimal reverse-mode autodiff on float64 arrays.

Every `Tensor` wraps a numpy array; ops build a DAG whose edges carry
pullback closures.  `backward` runs one reverse topological sweep, resetting
and then accumulating `.grad` on every reachable node, so parameters reused
across graphs never see stale gradients.  Complex quantities are represented
as a leading pair of real channels; the frequency-domain operators enter the
graph through `linear_complex`, whose pullback applies the complex adjoint.
"""

from __future__ import annotations

import numpy as np

from .. import kernels


class Tensor:
    """Node in the reverse-mode graph; value is always float64."""

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_pullback")

    def __init__(self, value, requires_grad: bool = False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._pullback = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"

    # Convenience arithmetic; constants are wrapped on the fly.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __neg__(self):
        return mul(self, constant(-1.0))


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def parameter(value) -> Tensor:
    return Tensor(value, requires_grad=True)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _node(value, parents: tuple[Tensor, ...], pullback) -> Tensor:
    out = Tensor(value, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = parents
        out._pullback = pullback
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` down to `shape` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    value = a.value + b.value

    def pull(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return _node(value, (a, b), pull)


def sub(a: Tensor, b: Tensor) -> Tensor:
    value = a.value - b.value

    def pull(g):
        return _unbroadcast(g, a.value.shape), -_unbroadcast(g, b.value.shape)

    return _node(value, (a, b), pull)


def mul(a: Tensor, b: Tensor) -> Tensor:
    value = a.value * b.value

    def pull(g):
        return (_unbroadcast(g * b.value, a.value.shape),
                _unbroadcast(g * a.value, b.value.shape))

    return _node(value, (a, b), pull)


def power(a: Tensor, p: float) -> Tensor:
    """Elementwise a**p for constant p (caller keeps the base in-domain)."""
    value = a.value**p

    def pull(g):
        return (g * p * a.value ** (p - 1.0),)

    return _node(value, (a,), pull)


def sqrt(a: Tensor) -> Tensor:
    value = np.sqrt(a.value)

    def pull(g):
        return (g * 0.5 / value,)

    return _node(value, (a,), pull)


# When set to a list, every relu() appends the smallest input magnitude it
# saw.  Finite-difference checks use this to verify no rectifier input sits
# within the probe step of its kink (where the difference quotient is not a
# valid derivative oracle).
relu_trace: list[float] | None = None


def relu(a: Tensor) -> Tensor:
    if relu_trace is not None:
        relu_trace.append(float(np.min(np.abs(a.value))))
    mask = a.value > 0.0
    value = np.where(mask, a.value, 0.0)

    def pull(g):
        return (g * mask,)

    return _node(value, (a,), pull)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def pull(g):
        g = np.asarray(g)
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.value.shape).copy(),)

    return _node(value, (a,), pull)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.value.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.value.shape[i] for i in axes]))
    return mul(sum_(a, axis=axis, keepdims=keepdims), constant(1.0 / count))


def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None,
           stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of [B,Ci,H,W] with [Co,Ci,kh,kw] (+ optional bias)."""
    value = kernels.conv2d_forward(x.value, w.value, stride, pad)
    kh, kw = w.value.shape[2], w.value.shape[3]
    h, wd = x.value.shape[2], x.value.shape[3]

    def pull(g):
        g = np.ascontiguousarray(g)
        gx = kernels.conv2d_grad_input(w.value, g, h, wd, stride, pad)
        gw = kernels.conv2d_grad_weight(x.value, g, kh, kw, stride, pad)
        return gx, gw

    out = _node(value, (x, w), pull)
    if b is not None:
        out = add(out, reshape(b, (1, b.value.size, 1, 1)))
    return out


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.value.shape
    value = a.value.reshape(shape)

    def pull(g):
        return (g.reshape(old),)

    return _node(value, (a,), pull)


def slice_channels(a: Tensor, lo: int, hi: int) -> Tensor:
    """a[:, lo:hi] on the channel axis of a [B,C,H,W] tensor."""
    value = a.value[:, lo:hi]

    def pull(g):
        full = np.zeros_like(a.value)
        full[:, lo:hi] = g
        return (full,)

    return _node(value, (a,), pull)


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    ca = a.value.shape[1]
    value = np.concatenate([a.value, b.value], axis=1)

    def pull(g):
        return g[:, :ca], g[:, ca:]

    return _node(value, (a, b), pull)


_UPSAMPLE_CACHE: dict[int, np.ndarray] = {}


def _upsample_weights(n: int) -> np.ndarray:
    """Dense (2n, n) matrix of 1D x2 bilinear interpolation, edges clamped."""
    w = _UPSAMPLE_CACHE.get(n)
    if w is None:
        w = np.zeros((2 * n, n))
        for i in range(2 * n):
            src = (i + 0.5) / 2.0 - 0.5
            i0 = int(np.floor(src))
            frac = src - i0
            w[i, min(max(i0, 0), n - 1)] += 1.0 - frac
            w[i, min(max(i0 + 1, 0), n - 1)] += frac
        _UPSAMPLE_CACHE[n] = w
    return w


def upsample2x(a: Tensor) -> Tensor:
    """Bilinear x2 upsampling of [B,C,H,W]; exact linear map, exact adjoint."""
    wh = _upsample_weights(a.value.shape[2])
    ww = _upsample_weights(a.value.shape[3])
    value = np.einsum("ph,bchw,qw->bcpq", wh, a.value, ww, optimize=True)

    def pull(g):
        return (np.einsum("ph,bcpq,qw->bchw", wh, g, ww, optimize=True),)

    return _node(value, (a,), pull)


def linear_complex(x: Tensor, fwd, adj, out_spatial: tuple[int, int]) -> Tensor:
    """Apply a complex-linear map per batch item of a [B,2,H,W] tensor.

    `fwd` maps a complex (H,W) array to complex `out_spatial`; `adj` is its
    exact adjoint.  The pullback is the real representation of the adjoint,
    which equals the transpose of the real Jacobian for any complex-linear
    map, so gradients stay exact.
    """
    b = x.value.shape[0]
    value = np.empty((b, 2) + out_spatial, dtype=np.float64)
    for i in range(b):
        y = fwd(x.value[i, 0] + 1j * x.value[i, 1])
        value[i, 0] = y.real
        value[i, 1] = y.imag

    def pull(g):
        gx = np.empty_like(x.value)
        for i in range(b):
            gc = adj(g[i, 0] + 1j * g[i, 1])
            gx[i, 0] = gc.real
            gx[i, 1] = gc.imag
        return (gx,)

    return _node(value, (x,), pull)


def _topo_order(root: Tensor) -> list[Tensor]:
    """Parents-before-children order over the requires_grad subgraph."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if p.requires_grad:
                stack.append((p, False))
    return order


def backward(root: Tensor, seed) -> None:
    """Accumulate d(root)/d(node), seeded with `seed`, into node.grad."""
    seed = np.asarray(seed, dtype=np.float64)
    if seed.shape != root.value.shape:
        raise ValueError(
            f"seed shape {seed.shape} does not match output shape {root.value.shape}"
        )
    if not root.requires_grad:
        return
    order = _topo_order(root)
    for node in order:
        node.grad = None
    root.grad = seed.copy()
    for node in reversed(order):
        if node._pullback is None or node.grad is None:
            continue
        grads = node._pullback(node.grad)
        for parent, g in zip(node._parents, grads):
            if not parent.requires_grad or g is None:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
