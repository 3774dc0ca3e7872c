"""Pure-numpy convolution kernels (im2col + BLAS)."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _windows(xp, kh, kw, stride):
    # (N, Cin, Ho, Wo, kh, kw) view over the padded input
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, ::stride, ::stride]


def conv2d_forward(xp, w, b, stride):
    """Correlate a pre-padded input with w. xp (N,Cin,Hp,Wp), w (Cout,Cin,kh,kw)."""
    kh, kw = w.shape[2], w.shape[3]
    win = _windows(xp, kh, kw, stride)
    y = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (N,Ho,Wo,Cout)
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    if b is not None:
        y += b[None, :, None, None]
    return y


def conv2d_backward_input(dy, w, stride, hp, wp):
    """Gradient w.r.t. the pre-padded input. Returns (N,Cin,hp,wp)."""
    n, cout, ho, wo = dy.shape
    cin, kh, kw = w.shape[1], w.shape[2], w.shape[3]
    dxp = np.zeros((n, cin, hp, wp), dtype=dy.dtype)
    for ky in range(kh):
        for kx in range(kw):
            contrib = np.tensordot(dy, w[:, :, ky, kx], axes=(1, 0))  # (N,Ho,Wo,Cin)
            dxp[:, :, ky : ky + stride * ho : stride, kx : kx + stride * wo : stride] += (
                contrib.transpose(0, 3, 1, 2)
            )
    return dxp


def conv2d_backward_weights(dy, xp, stride, kh, kw):
    win = _windows(xp, kh, kw, stride)
    dw = np.tensordot(dy, win, axes=([0, 2, 3], [0, 2, 3]))  # (Cout,Cin,kh,kw)
    return np.ascontiguousarray(dw)


def bilinear_sample(img, ys, xs):
    """Sample img (C,H,W) at float coords; zero outside, valid inside support.

    Returns (out (C,M), valid (M,) bool). Exact at integer coordinates.
    """
    c, h, w = img.shape
    valid = (ys >= 0.0) & (ys <= h - 1.0) & (xs >= 0.0) & (xs <= w - 1.0)
    yc = np.clip(ys, 0.0, h - 1.0)
    xc = np.clip(xs, 0.0, w - 1.0)
    y0 = np.minimum(yc.astype(np.int64), h - 1)
    x0 = np.minimum(xc.astype(np.int64), w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (yc - y0).astype(img.dtype)
    wx = (xc - x0).astype(img.dtype)
    flat = img.reshape(c, -1)
    i00 = flat[:, y0 * w + x0]
    i01 = flat[:, y0 * w + x1]
    i10 = flat[:, y1 * w + x0]
    i11 = flat[:, y1 * w + x1]
    top = i00 * (1.0 - wx) + i01 * wx
    bot = i10 * (1.0 - wx) + i11 * wx
    out = top * (1.0 - wy) + bot * wy
    out *= valid[None, :]
    return out.astype(img.dtype, copy=False), valid


def meanfield_sweeps(q, prob, logit_u, w1, nbr, kv, deg, sweeps):
    """Sequential binary mean-field updates, `sweeps` full passes in cell order.

    q, prob, logit_u: (M,); nbr (M,D) int64 neighbor indices (-1 padded);
    kv (M,D) pairwise weights; deg (M,) valid neighbor counts.
    Updates q in place. The per-cell update order is part of the contract
    (free energy is non-increasing only for sequential sweeps).
    """
    m = q.shape[0]
    for _ in range(sweeps):
        for i in range(m):
            d = deg[i]
            s = 0.0
            for k in range(d):
                s += kv[i, k] * (2.0 * q[nbr[i, k]] - 1.0)
            if s == 0.0 and w1 == 1.0:
                q[i] = prob[i]
            else:
                q[i] = 1.0 / (1.0 + np.exp(-(w1 * logit_u[i] + s)))
    return q


def march_ground_profile(origin, dirs, amp, wavelength, t_max, coarse_step):
    """First intersection of rays with the surface z = amp*sin(2*pi*y/wavelength).

    origin (3,), dirs (M,3) road-frame ray directions. Returns t (M,), -1 where
    the ray never crosses the surface before t_max. Coarse march + bisection.
    """
    m = dirs.shape[0]
    t_out = np.full(m, -1.0)
    two_pi = 2.0 * np.pi

    def gap(t, d):
        p = origin[None, :] + t[:, None] * d
        return p[:, 2] - amp * np.sin(two_pi * p[:, 1] / wavelength)

    n_steps = int(np.ceil(t_max / coarse_step))
    t_lo = np.zeros(m)
    g_lo = gap(t_lo, dirs)
    alive = g_lo > 0.0  # rays that start below the surface never count as a hit
    up = dirs[:, 2] >= 0.0
    alive &= ~(up & (origin[2] - abs(amp) > 0.0))
    t_hi_all = np.zeros(m)
    found = np.zeros(m, dtype=bool)
    for k in range(1, n_steps + 1):
        if not alive.any():
            break
        t_hi = np.full(m, k * coarse_step)
        z_hi = origin[2] + t_hi * dirs[:, 2]
        g_hi = gap(t_hi, dirs)
        cross = alive & (g_hi <= 0.0)
        t_hi_all[cross] = t_hi[cross]
        found |= cross
        alive &= ~cross
        alive &= ~(up & (z_hi - abs(amp) > 0.0))
        g_lo = np.where(alive, g_hi, g_lo)
        t_lo = np.where(alive, t_hi, t_lo)
    if found.any():
        idx = np.where(found)[0]
        lo = t_hi_all[idx] - coarse_step
        hi = t_hi_all[idx]
        d = dirs[idx]
        for _ in range(45):
            mid = 0.5 * (lo + hi)
            g = gap(mid, d)
            below = g <= 0.0
            hi = np.where(below, mid, hi)
            lo = np.where(below, lo, mid)
        t_out[idx] = 0.5 * (lo + hi)
    return t_out
