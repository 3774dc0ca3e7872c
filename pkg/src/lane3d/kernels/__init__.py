"""Hot numeric kernels with numba and pure-numpy implementations.

The public functions here are the only compute paths the rest of the
package uses for convolutions, bilinear sampling, CRF mean-field sweeps and
ray marching. ``lane3d.backend`` picks the implementation; `lane3d benchmark`
compares the two.
"""

import numpy as np

from .. import backend
from . import conv_numpy as _np_impl

_numba_impl = None


def _impl():
    global _numba_impl
    if backend.active_backend() == "numpy":
        return _np_impl
    if _numba_impl is None:
        from . import conv_numba

        _numba_impl = conv_numba
    return _numba_impl


def conv2d(x, w, b=None, stride=1, pad=0):
    """Cross-correlation of x (N,Cin,H,W) with w (Cout,Cin,kh,kw)."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ValueError(f"bad conv shapes x={x.shape} w={w.shape}")
    xp = _pad(x, pad)
    if b is None:
        b = np.zeros(w.shape[0], dtype=x.dtype)
    return _impl().conv2d_forward(xp, w, b.astype(x.dtype, copy=False), stride)


def conv2d_grads(dy, x, w, stride=1, pad=0):
    """Gradients (dx, dw, db) of conv2d for upstream gradient dy."""
    xp = _pad(x, pad)
    kh, kw = w.shape[2], w.shape[3]
    impl = _impl()
    dy = np.ascontiguousarray(dy)
    dxp = impl.conv2d_backward_input(dy, w, stride, xp.shape[2], xp.shape[3])
    if pad:
        dx = dxp[:, :, pad:-pad, pad:-pad]
    else:
        dx = dxp
    dw = impl.conv2d_backward_weights(dy, xp, stride, kh, kw)
    db = dy.sum(axis=(0, 2, 3))
    return np.ascontiguousarray(dx), dw, db


def _pad(x, pad):
    if pad == 0:
        return np.ascontiguousarray(x)
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def bilinear_sample(img, ys, xs):
    """Sample img (C,H,W) or (H,W) at float coords (M,). Zero fill outside.

    Returns (values, valid); values has shape (C,M) or (M,).
    """
    squeeze = img.ndim == 2
    if squeeze:
        img = img[None]
    img = np.ascontiguousarray(img)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    out, valid = _impl().bilinear_sample(img, ys, xs)
    if squeeze:
        out = out[0]
    return out, valid


def meanfield_sweeps(q, prob, logit_u, w1, nbr, kv, deg, sweeps):
    return _impl().meanfield_sweeps(q, prob, logit_u, w1, nbr, kv, deg, sweeps)


def march_ground_profile(origin, dirs, amp, wavelength, t_max=400.0, coarse_step=0.5):
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    return _impl().march_ground_profile(
        origin, dirs, float(amp), float(wavelength), float(t_max), float(coarse_step)
    )
