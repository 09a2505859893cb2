"""Vectorized pure-numpy kernels, equivalent to the loop kernels up to
floating-point summation order."""

import math

import numpy as np


def _shift(img, ox, oy):
    """A[y, x] = img[y + oy, x + ox] with zeros where that index leaves the
    image.  Callers only read inside the valid margin, where no zero shows."""
    h, w = img.shape
    out = np.zeros_like(img)
    ys_src = slice(max(oy, 0), min(h + oy, h))
    xs_src = slice(max(ox, 0), min(w + ox, w))
    ys_dst = slice(max(-oy, 0), max(-oy, 0) + (ys_src.stop - ys_src.start))
    xs_dst = slice(max(-ox, 0), max(-ox, 0) + (xs_src.stop - xs_src.start))
    out[ys_dst, xs_dst] = img[ys_src, xs_src]
    return out


def _bilinear_shift(img, dx, dy):
    x0 = int(math.floor(dx))
    y0 = int(math.floor(dy))
    fx = dx - x0
    fy = dy - y0
    return (
        _shift(img, x0, y0) * (1 - fx) * (1 - fy)
        + _shift(img, x0 + 1, y0) * fx * (1 - fy)
        + _shift(img, x0, y0 + 1) * (1 - fx) * fy
        + _shift(img, x0 + 1, y0 + 1) * fx * fy
    )


def _box_sum(arr, half):
    """Sum of arr over a centered (2*half+1)^2 window, via an integral image."""
    w = 2 * half + 1
    padded = np.pad(arr, half)
    integral = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1))
    np.cumsum(padded, axis=0, out=integral[1:, :-1])
    np.cumsum(integral[1:, :-1], axis=1, out=integral[1:, 1:])
    integral[1:, 0] = 0.0
    return (
        integral[w:, w:]
        - integral[:-w, w:]
        - integral[w:, :-w]
        + integral[:-w, :-w]
    )


def tplbp_code_map(img, r, s_count, w, alpha, tau):
    h_img, w_img = img.shape
    half = w // 2
    margin = int(math.ceil(r)) + half + 1

    dists = np.empty((s_count, h_img, w_img))
    for i in range(s_count):
        ang = 2.0 * math.pi * i / s_count
        ring = _bilinear_shift(img, r * math.cos(ang), -r * math.sin(ang))
        dists[i] = _box_sum((ring - img) ** 2, half)

    codes = np.zeros((h_img, w_img), dtype=np.int16)
    for i in range(s_count):
        bit = (dists[i] - dists[(i + alpha) % s_count]) >= tau
        codes |= bit.astype(np.int16) << i
    codes[:margin, :] = -1
    codes[-margin:, :] = -1
    codes[:, :margin] = -1
    codes[:, -margin:] = -1
    return codes


def sift_raw_descriptor(mag, ori, px, py, radius, n_spatial, n_ori):
    h_img, w_img = mag.shape
    xs = np.arange(int(math.ceil(px - radius)), int(math.floor(px + radius)) + 1)
    ys = np.arange(int(math.ceil(py - radius)), int(math.floor(py + radius)) + 1)
    xs = xs[(xs >= 0) & (xs < w_img)]
    ys = ys[(ys >= 0) & (ys < h_img)]
    hist = np.zeros(n_spatial * n_spatial * n_ori)
    if xs.size == 0 or ys.size == 0:
        return hist

    gx, gy = np.meshgrid(xs, ys)
    dx = gx - px
    dy = gy - py
    bin_w = 2.0 * radius / n_spatial
    weight = np.exp(-(dx**2 + dy**2) / (2.0 * radius * radius))
    contrib = (mag[gy, gx] * weight).ravel()

    u = (dx / bin_w + 0.5 * n_spatial - 0.5).ravel()
    v = (dy / bin_w + 0.5 * n_spatial - 0.5).ravel()
    o = (ori[gy, gx] * (n_ori / (2.0 * math.pi))).ravel()
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    o0 = np.floor(o).astype(np.int64)
    fu, fv, fo = u - u0, v - v0, o - o0

    for dv in range(2):
        vb = v0 + dv
        wv = fv if dv else 1.0 - fv
        for du in range(2):
            ub = u0 + du
            wu = fu if du else 1.0 - fu
            ok = (vb >= 0) & (vb < n_spatial) & (ub >= 0) & (ub < n_spatial)
            for do in range(2):
                ob = (o0 + do) % n_ori
                wo = fo if do else 1.0 - fo
                idx = (vb[ok] * n_spatial + ub[ok]) * n_ori + ob[ok]
                np.add.at(hist, idx, contrib[ok] * wv[ok] * wu[ok] * wo[ok])
    return hist
