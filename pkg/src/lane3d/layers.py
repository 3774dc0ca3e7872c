"""Trainable building blocks on top of the autodiff tape."""

import numpy as np

from . import autodiff as ad
from .autodiff import Var


class Module:
    """Base with named parameter registration; containers nest with dots."""

    def __init__(self):
        self._params = {}
        self._mods = {}

    def param(self, name, value):
        v = Var(np.asarray(value))
        self._params[name] = v
        return v

    def add(self, name, mod):
        self._mods[name] = mod
        return mod

    def params(self):
        out = dict(self._params)
        for name, mod in self._mods.items():
            for key, var in mod.params().items():
                out[f"{name}.{key}"] = var
        return out

    def state_arrays(self):
        return {k: v.value for k, v in self.params().items()}

    def load_state(self, arrays, prefix=""):
        mine = self.params()
        for key, var in mine.items():
            full = prefix + key
            if full not in arrays:
                raise ValueError(f"checkpoint missing parameter {full!r}")
            arr = np.asarray(arrays[full])
            if arr.shape != var.value.shape:
                raise ValueError(
                    f"checkpoint shape mismatch for {full!r}: "
                    f"stored {arr.shape}, model expects {var.value.shape}"
                )
            var.value = arr.astype(var.value.dtype, copy=True)

    def zero_grads(self):
        for v in self.params().values():
            v.grad = None


class Conv2d(Module):
    def __init__(self, cin, cout, k, rng, stride=1, dtype=np.float32, bias=True):
        super().__init__()
        self.stride = stride
        self.pad = k // 2
        std = np.sqrt(2.0 / (cin * k * k))
        self.w = self.param("w", (rng.standard_normal((cout, cin, k, k)) * std).astype(dtype))
        self.b = self.param("b", np.zeros(cout, dtype)) if bias else None

    def __call__(self, x):
        return ad.conv2d(x, self.w, self.b if self.b is not None else
                         np.zeros(self.w.value.shape[0], self.w.value.dtype),
                         stride=self.stride, pad=self.pad)


class GroupNorm(Module):
    def __init__(self, channels, groups=8, eps=1e-5, dtype=np.float32):
        super().__init__()
        while channels % groups != 0:
            groups -= 1
        self.groups = groups
        self.eps = eps
        self.gamma = self.param("gamma", np.ones((channels, 1, 1), dtype))
        self.beta = self.param("beta", np.zeros((channels, 1, 1), dtype))

    def __call__(self, x):
        n, c, h, w = x.shape
        g = self.groups
        r = ad.reshape(x, (n, g, (c // g) * h * w))
        m = ad.vmean(r, axis=2, keepdims=True)
        centered = ad.sub(r, m)
        var = ad.vmean(ad.square(centered), axis=2, keepdims=True)
        xn = ad.div(centered, ad.sqrt(ad.add(var, self.eps)))
        xn = ad.reshape(xn, (n, c, h, w))
        return ad.add(ad.mul(xn, self.gamma), self.beta)


class ConvBlock(Module):
    """conv -> groupnorm -> relu"""

    def __init__(self, cin, cout, rng, stride=1, k=3, dtype=np.float32, groups=8):
        super().__init__()
        self.conv = self.add("conv", Conv2d(cin, cout, k, rng, stride=stride, dtype=dtype))
        self.norm = self.add("norm", GroupNorm(cout, groups=groups, dtype=dtype))

    def __call__(self, x):
        return ad.relu(self.norm(self.conv(x)))


class ResBlock(Module):
    def __init__(self, channels, rng, dtype=np.float32, groups=8):
        super().__init__()
        self.b1 = self.add("b1", ConvBlock(channels, channels, rng, dtype=dtype, groups=groups))
        self.c2 = self.add("c2", Conv2d(channels, channels, 3, rng, dtype=dtype))
        self.n2 = self.add("n2", GroupNorm(channels, groups=groups, dtype=dtype))

    def __call__(self, x):
        y = self.n2(self.c2(self.b1(x)))
        return ad.relu(ad.add(y, x))


class Adam:
    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.t += 1
        b1t = 1.0 - self.b1 ** self.t
        b2t = 1.0 - self.b2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            g = np.asarray(g, dtype=p.value.dtype)
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * (g * g)
            mhat = self.m[i] / b1t
            vhat = self.v[i] / b2t
            p.value = p.value - (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.value.dtype)


def finite_diff_grad(loss_fn, var, indices, h=1e-4):
    """Central-difference gradient of loss_fn() w.r.t. var.value at flat indices."""
    out = []
    flat = var.value.reshape(-1)
    for idx in indices:
        old = flat[idx]
        flat[idx] = old + h
        lp = float(loss_fn())
        flat[idx] = old - h
        lm = float(loss_fn())
        flat[idx] = old
        out.append((lp - lm) / (2.0 * h))
    return np.array(out)
