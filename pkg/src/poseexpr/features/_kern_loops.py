"""Scalar-loop kernels, written in nopython-compatible style.

These are compiled with numba when the numba backend is active; the numpy
backend never imports them unless explicitly requested (benchmarks do, to
time the uncompiled loops).
"""

import math

import numpy as np


def bilinear(img, x, y):
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    fx = x - x0
    fy = y - y0
    v00 = img[y0, x0]
    v01 = img[y0, x0 + 1]
    v10 = img[y0 + 1, x0]
    v11 = img[y0 + 1, x0 + 1]
    return (
        v00 * (1 - fx) * (1 - fy)
        + v01 * fx * (1 - fy)
        + v10 * (1 - fx) * fy
        + v11 * fx * fy
    )


def tplbp_code_map(img, r, s_count, w, alpha, tau):
    """Three-patch LBP code at every valid pixel; -1 outside the margin."""
    h_img, w_img = img.shape
    half = w // 2
    margin = int(math.ceil(r)) + half + 1
    codes = np.full((h_img, w_img), -1, dtype=np.int16)

    dxs = np.empty(s_count)
    dys = np.empty(s_count)
    for i in range(s_count):
        ang = 2.0 * math.pi * i / s_count
        dxs[i] = r * math.cos(ang)
        dys[i] = -r * math.sin(ang)

    dists = np.empty(s_count)
    for y in range(margin, h_img - margin):
        for x in range(margin, w_img - margin):
            for i in range(s_count):
                acc = 0.0
                for dv in range(-half, half + 1):
                    for du in range(-half, half + 1):
                        ring = bilinear(img, x + dxs[i] + du, y + dys[i] + dv)
                        diff = ring - img[y + dv, x + du]
                        acc += diff * diff
                dists[i] = acc
            code = 0
            for i in range(s_count):
                if dists[i] - dists[(i + alpha) % s_count] >= tau:
                    code |= 1 << i
            codes[y, x] = code
    return codes


def sift_raw_descriptor(mag, ori, px, py, radius, n_spatial, n_ori):
    """Unnormalized orientation histogram grid around one keypoint.

    Gaussian-weighted magnitudes, trilinearly interpolated over
    (row bin, column bin, orientation bin); out-of-image pixels contribute
    nothing.  Output is row-major (row, col, orientation).
    """
    h_img, w_img = mag.shape
    hist = np.zeros(n_spatial * n_spatial * n_ori)
    bin_w = 2.0 * radius / n_spatial
    sigma = radius
    two_sigma2 = 2.0 * sigma * sigma
    ori_per_rad = n_ori / (2.0 * math.pi)

    x_lo = int(math.ceil(px - radius))
    x_hi = int(math.floor(px + radius))
    y_lo = int(math.ceil(py - radius))
    y_hi = int(math.floor(py + radius))
    for y in range(y_lo, y_hi + 1):
        if y < 0 or y >= h_img:
            continue
        for x in range(x_lo, x_hi + 1):
            if x < 0 or x >= w_img:
                continue
            dx = x - px
            dy = y - py
            weight = math.exp(-(dx * dx + dy * dy) / two_sigma2)
            u = dx / bin_w + 0.5 * n_spatial - 0.5
            v = dy / bin_w + 0.5 * n_spatial - 0.5
            o = ori[y, x] * ori_per_rad
            contrib = mag[y, x] * weight

            u0 = int(math.floor(u))
            v0 = int(math.floor(v))
            o0 = int(math.floor(o))
            fu = u - u0
            fv = v - v0
            fo = o - o0
            for dv in range(2):
                vb = v0 + dv
                if vb < 0 or vb >= n_spatial:
                    continue
                wv = fv if dv == 1 else 1.0 - fv
                for du in range(2):
                    ub = u0 + du
                    if ub < 0 or ub >= n_spatial:
                        continue
                    wu = fu if du == 1 else 1.0 - fu
                    for do in range(2):
                        ob = (o0 + do) % n_ori
                        wo = fo if do == 1 else 1.0 - fo
                        hist[(vb * n_spatial + ub) * n_ori + ob] += (
                            contrib * wv * wu * wo
                        )
    return hist
