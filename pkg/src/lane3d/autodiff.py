"""Reverse-mode autodiff over numpy arrays.

Small tape: `Var` wraps an ndarray; ops build the graph; `backward` runs
the chain rule in reverse topological order. Plain ndarrays/scalars passed
to ops are constants. Heavy ops (conv2d) route through lane3d.kernels, the
rest is numpy. Dtype follows the inputs, so the same graph runs in float32
for training and float64 for finite-difference checks.
"""

import numpy as np

from . import kernels


class Var:
    __slots__ = ("value", "grad", "parents", "bwd")

    def __init__(self, value, parents=(), bwd=None):
        self.value = np.asarray(value)
        self.grad = None
        self.parents = parents
        self.bwd = bwd

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    def __repr__(self):
        return f"Var(shape={self.value.shape}, dtype={self.value.dtype})"

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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def _v(x):
    return x.value if isinstance(x, Var) else np.asarray(x)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _op(value, pairs):
    """Build a Var from (parent, grad_fn) pairs; non-Var parents are dropped."""
    parents = tuple(p for p, _ in pairs if isinstance(p, Var))
    if not parents:
        return Var(value)
    fns = tuple(fn for p, fn in pairs if isinstance(p, Var))

    def bwd(g):
        return tuple(fn(g) for fn in fns)

    return Var(value, parents, bwd)


def backward(root, seed=None):
    """Accumulate gradients of `root` (scalar unless seed given) into leaves."""
    topo = []
    seen = set()
    stack = [(root, iter(root.parents))]
    seen.add(id(root))
    while stack:
        node, it = stack[-1]
        advanced = False
        for p in it:
            if id(p) not in seen:
                seen.add(id(p))
                stack.append((p, iter(p.parents)))
                advanced = True
                break
        if not advanced:
            topo.append(node)
            stack.pop()

    if seed is None:
        if root.value.ndim != 0:
            raise ValueError("backward() without seed needs a scalar root")
        seed = np.ones((), dtype=root.value.dtype)
    root.grad = np.asarray(seed, dtype=root.value.dtype)

    for node in reversed(topo):
        if node.bwd is None or node.grad is None:
            continue
        grads = node.bwd(node.grad)
        for parent, g in zip(node.parents, grads):
            if g is None:
                continue
            if parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g


# ---------------------------------------------------------------------------
# elementwise / arithmetic


def add(a, b):
    av, bv = _v(a), _v(b)
    return _op(av + bv, [(a, lambda g: _unbroadcast(g, av.shape)),
                         (b, lambda g: _unbroadcast(g, bv.shape))])


def sub(a, b):
    av, bv = _v(a), _v(b)
    return _op(av - bv, [(a, lambda g: _unbroadcast(g, av.shape)),
                         (b, lambda g: _unbroadcast(-g, bv.shape))])


def mul(a, b):
    av, bv = _v(a), _v(b)
    return _op(av * bv, [(a, lambda g: _unbroadcast(g * bv, av.shape)),
                         (b, lambda g: _unbroadcast(g * av, bv.shape))])


def div(a, b):
    av, bv = _v(a), _v(b)
    return _op(av / bv, [(a, lambda g: _unbroadcast(g / bv, av.shape)),
                         (b, lambda g: _unbroadcast(-g * av / (bv * bv), bv.shape))])


def square(a):
    av = _v(a)
    return _op(av * av, [(a, lambda g: g * (2.0 * av))])


def sqrt(a):
    av = _v(a)
    out = np.sqrt(av)
    return _op(out, [(a, lambda g: g * (0.5 / np.maximum(out, np.finfo(out.dtype).tiny)))])


def exp(a):
    out = np.exp(_v(a))
    return _op(out, [(a, lambda g: g * out)])


def log(a):
    av = _v(a)
    return _op(np.log(av), [(a, lambda g: g / av)])


def absolute(a):
    av = _v(a)
    return _op(np.abs(av), [(a, lambda g: g * np.sign(av))])


def relu(a):
    av = _v(a)
    mask = av > 0
    return _op(np.where(mask, av, av.dtype.type(0)), [(a, lambda g: g * mask)])


def sigmoid(a):
    av = _v(a)
    out = np.empty_like(av)
    pos = av >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-av[pos]))
    ez = np.exp(av[~pos])
    out[~pos] = ez / (1.0 + ez)
    return _op(out, [(a, lambda g: g * out * (1.0 - out))])


def tanh(a):
    out = np.tanh(_v(a))
    return _op(out, [(a, lambda g: g * (1.0 - out * out))])


def softplus(a):
    av = _v(a)
    out = np.logaddexp(av.dtype.type(0), av)
    return _op(out, [(a, lambda g: g * _sigmoid_np(av))])


def _sigmoid_np(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# reductions / shape


def vsum(a, axis=None, keepdims=False):
    av = _v(a)
    out = av.sum(axis=axis, keepdims=keepdims)

    def g_fn(g):
        if axis is None:
            return np.broadcast_to(g, av.shape).astype(av.dtype, copy=False)
        ax = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            g = np.expand_dims(g, ax)
        return np.broadcast_to(g, av.shape)

    return _op(out, [(a, g_fn)])


def vmean(a, axis=None, keepdims=False):
    av = _v(a)
    if axis is None:
        n = av.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        n = int(np.prod([av.shape[i] for i in ax]))
    return mul(vsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    av = _v(a)
    return _op(av.reshape(shape), [(a, lambda g: g.reshape(av.shape))])


def transpose(a, axes):
    inv = np.argsort(axes)
    return _op(_v(a).transpose(axes), [(a, lambda g: g.transpose(inv))])


def concat(parts, axis):
    vals = [_v(p) for p in parts]
    out = np.concatenate(vals, axis=axis)
    sizes = [v.shape[axis] for v in vals]
    offsets = np.cumsum([0] + sizes)

    pairs = []
    for i, p in enumerate(parts):
        def g_fn(g, i=i):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            return g[tuple(sl)]
        pairs.append((p, g_fn))
    return _op(out, pairs)


def narrow(a, axis, start, size):
    av = _v(a)
    sl = [slice(None)] * av.ndim
    sl[axis] = slice(start, start + size)
    sl = tuple(sl)

    def g_fn(g):
        full = np.zeros(av.shape, dtype=g.dtype)
        full[sl] = g
        return full

    return _op(av[sl], [(a, g_fn)])


def matmul(a, b):
    av, bv = _v(a), _v(b)
    out = av @ bv

    def ga(g):
        r = g @ np.swapaxes(bv, -1, -2)
        return _unbroadcast(r, av.shape)

    def gb(g):
        r = np.swapaxes(av, -1, -2) @ g
        return _unbroadcast(r, bv.shape)

    return _op(out, [(a, ga), (b, gb)])


# ---------------------------------------------------------------------------
# structured ops


def conv2d(x, w, b, stride=1, pad=0):
    xv, wv, bv = _v(x), _v(w), _v(b)
    out = kernels.conv2d(xv, wv, bv, stride=stride, pad=pad)
    parents = tuple(p for p in (x, w, b) if isinstance(p, Var))
    which = tuple(isinstance(p, Var) for p in (x, w, b))

    def bwd(g):
        dx, dw, db = kernels.conv2d_grads(g, xv, wv, stride=stride, pad=pad)
        grads = (dx, dw, db)
        return tuple(gr for gr, keep in zip(grads, which) if keep)

    return Var(out, parents, bwd) if parents else Var(out)


def upsample2x(a):
    """Nearest-neighbour 2x upsampling on (N,C,H,W)."""
    av = _v(a)
    out = av.repeat(2, axis=2).repeat(2, axis=3)

    def g_fn(g):
        n, c, h2, w2 = g.shape
        return g.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))

    return _op(out, [(a, g_fn)])


def bce_with_logits(logits, targets, pos_weight=None):
    """Elementwise binary cross-entropy on logits; targets are constants."""
    t = np.asarray(targets)
    core = add(sub(relu(logits), mul(logits, t)), softplus(-absolute(logits)))
    if pos_weight is not None:
        w = np.where(t > 0.5, pos_weight, 1.0).astype(_v(logits).dtype)
        core = mul(core, w)
    return core
