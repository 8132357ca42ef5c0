# Per-pixel hot loops. Rows are distributed with prange; scatters go through
# per-thread buffers reduced in thread order.
import os

import numba
import numpy as np
from numba import njit, prange

if "NUMBA_THREADING_LAYER" not in os.environ and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True, inline="always")
def _axis_taps(u, n, zero_pad):
    """Two interpolation taps along one grid axis of ``n`` cells."""
    if zero_pad:
        i0 = int(np.floor(u))
        f = u - i0
        w0 = 1.0 - f
        w1 = f
        i1 = i0 + 1
        if i0 < 0 or i0 > n - 1:
            w0 = 0.0
            i0 = 0
        if i1 < 0 or i1 > n - 1:
            w1 = 0.0
            i1 = 0
        return i0, i1, w0, w1
    if u < 0.0:
        u = 0.0
    elif u > n - 1.0:
        u = n - 1.0
    if n == 1:
        return 0, 0, 1.0, 0.0
    i0 = int(u)
    if i0 > n - 2:
        i0 = n - 2
    f = u - i0
    return i0, i0 + 1, 1.0 - f, f


@njit(cache=True, inline="always")
def _cell_coord(i, n_pix, n_cells):
    # pixel centres and cell centres both at (2k+1)/N - 1 in [-1, 1]
    return (i + 0.5) * n_cells / n_pix - 0.5


@njit(cache=True, parallel=True)
def slice_grid(grid, caxis, out, zero_pad):
    C, D, GH, GW = grid.shape
    H, W = caxis.shape
    for y in prange(H):
        iy0, iy1, wy0, wy1 = _axis_taps(_cell_coord(y, H, GH), GH, zero_pad)
        for x in range(W):
            ix0, ix1, wx0, wx1 = _axis_taps(_cell_coord(x, W, GW), GW, zero_pad)
            ic0, ic1, wc0, wc1 = _axis_taps(caxis[y, x], D, False)
            w000 = wc0 * wy0 * wx0
            w001 = wc0 * wy0 * wx1
            w010 = wc0 * wy1 * wx0
            w011 = wc0 * wy1 * wx1
            w100 = wc1 * wy0 * wx0
            w101 = wc1 * wy0 * wx1
            w110 = wc1 * wy1 * wx0
            w111 = wc1 * wy1 * wx1
            for k in range(C):
                out[k, y, x] = (
                    w000 * grid[k, ic0, iy0, ix0]
                    + w001 * grid[k, ic0, iy0, ix1]
                    + w010 * grid[k, ic0, iy1, ix0]
                    + w011 * grid[k, ic0, iy1, ix1]
                    + w100 * grid[k, ic1, iy0, ix0]
                    + w101 * grid[k, ic1, iy0, ix1]
                    + w110 * grid[k, ic1, iy1, ix0]
                    + w111 * grid[k, ic1, iy1, ix1]
                )


@njit(cache=True, parallel=True)
def splat_grid(cot, caxis, buf, zero_pad):
    """Scatter ``cot`` into ``buf[thread]``; caller sums over axis 0."""
    nt, C, D, GH, GW = buf.shape
    H, W = caxis.shape
    chunk = (H + nt - 1) // nt
    for t in prange(nt):
        for y in range(t * chunk, min(H, (t + 1) * chunk)):
            iy0, iy1, wy0, wy1 = _axis_taps(_cell_coord(y, H, GH), GH, zero_pad)
            for x in range(W):
                ix0, ix1, wx0, wx1 = _axis_taps(_cell_coord(x, W, GW), GW, zero_pad)
                ic0, ic1, wc0, wc1 = _axis_taps(caxis[y, x], D, False)
                for k in range(C):
                    v = cot[k, y, x]
                    buf[t, k, ic0, iy0, ix0] += wc0 * wy0 * wx0 * v
                    buf[t, k, ic0, iy0, ix1] += wc0 * wy0 * wx1 * v
                    buf[t, k, ic0, iy1, ix0] += wc0 * wy1 * wx0 * v
                    buf[t, k, ic0, iy1, ix1] += wc0 * wy1 * wx1 * v
                    buf[t, k, ic1, iy0, ix0] += wc1 * wy0 * wx0 * v
                    buf[t, k, ic1, iy0, ix1] += wc1 * wy0 * wx1 * v
                    buf[t, k, ic1, iy1, ix0] += wc1 * wy1 * wx0 * v
                    buf[t, k, ic1, iy1, ix1] += wc1 * wy1 * wx1 * v


@njit(cache=True, parallel=True)
def apply_affine(coeffs, img, out, bad_col, det_tol):
    """Cayley-map the matrix part per pixel, apply (A, b) and clamp to [0, 1].

    ``bad_col[y]`` receives the first column of row ``y`` whose resolvent is
    singular, or stays -1.
    """
    _, H, W = img.shape
    for y in prange(H):
        for x in range(W):
            h00 = 0.5 * coeffs[0, y, x]
            h01 = 0.5 * coeffs[1, y, x]
            h02 = 0.5 * coeffs[2, y, x]
            h10 = 0.5 * coeffs[3, y, x]
            h11 = 0.5 * coeffs[4, y, x]
            h12 = 0.5 * coeffs[5, y, x]
            h20 = 0.5 * coeffs[6, y, x]
            h21 = 0.5 * coeffs[7, y, x]
            h22 = 0.5 * coeffs[8, y, x]
            # resolvent R = I - M/2
            r00 = 1.0 - h00
            r01 = -h01
            r02 = -h02
            r10 = -h10
            r11 = 1.0 - h11
            r12 = -h12
            r20 = -h20
            r21 = -h21
            r22 = 1.0 - h22
            a00 = r11 * r22 - r12 * r21
            a01 = r02 * r21 - r01 * r22
            a02 = r01 * r12 - r02 * r11
            a10 = r12 * r20 - r10 * r22
            a11 = r00 * r22 - r02 * r20
            a12 = r02 * r10 - r00 * r12
            a20 = r10 * r21 - r11 * r20
            a21 = r01 * r20 - r00 * r21
            a22 = r00 * r11 - r01 * r10
            det = r00 * a00 + r01 * a10 + r02 * a20
            if abs(det) < det_tol:
                if bad_col[y] < 0:
                    bad_col[y] = x
                for c in range(3):
                    out[c, y, x] = img[c, y, x]
                continue
            # A rgb = adj(R) (P rgb) / det with P = I + M/2
            i0 = img[0, y, x]
            i1 = img[1, y, x]
            i2 = img[2, y, x]
            v0 = i0 + h00 * i0 + h01 * i1 + h02 * i2
            v1 = i1 + h10 * i0 + h11 * i1 + h12 * i2
            v2 = i2 + h20 * i0 + h21 * i1 + h22 * i2
            inv = 1.0 / det
            o0 = (a00 * v0 + a01 * v1 + a02 * v2) * inv + coeffs[9, y, x]
            o1 = (a10 * v0 + a11 * v1 + a12 * v2) * inv + coeffs[10, y, x]
            o2 = (a20 * v0 + a21 * v1 + a22 * v2) * inv + coeffs[11, y, x]
            out[0, y, x] = min(max(o0, 0.0), 1.0)
            out[1, y, x] = min(max(o1, 0.0), 1.0)
            out[2, y, x] = min(max(o2, 0.0), 1.0)


@njit(cache=True, inline="always")
def _resample_taps(i, n_out, n_in):
    s = (i + 0.5) * n_in / n_out - 0.5
    if s < 0.0:
        s = 0.0
    elif s > n_in - 1.0:
        s = n_in - 1.0
    i0 = int(s)
    if i0 > n_in - 1:
        i0 = n_in - 1
    i1 = min(i0 + 1, n_in - 1)
    f = s - i0
    return i0, i1, 1.0 - f, f


@njit(cache=True, parallel=True)
def resize_bilinear(src, out):
    C, h, w = src.shape
    _, H, W = out.shape
    for y in prange(H):
        y0, y1, wy0, wy1 = _resample_taps(y, H, h)
        for x in range(W):
            x0, x1, wx0, wx1 = _resample_taps(x, W, w)
            for c in range(C):
                out[c, y, x] = (
                    wy0 * (wx0 * src[c, y0, x0] + wx1 * src[c, y0, x1])
                    + wy1 * (wx0 * src[c, y1, x0] + wx1 * src[c, y1, x1])
                )


@njit(cache=True, parallel=True)
def upsample_add_clamp(delta, base, out):
    """out = clamp(base + Up(delta), 0, 1) in one pass."""
    C, h, w = delta.shape
    _, H, W = base.shape
    for y in prange(H):
        y0, y1, wy0, wy1 = _resample_taps(y, H, h)
        for x in range(W):
            x0, x1, wx0, wx1 = _resample_taps(x, W, w)
            for c in range(C):
                v = base[c, y, x] + (
                    wy0 * (wx0 * delta[c, y0, x0] + wx1 * delta[c, y0, x1])
                    + wy1 * (wx0 * delta[c, y1, x0] + wx1 * delta[c, y1, x1])
                )
                out[c, y, x] = min(max(v, 0.0), 1.0)


@njit(cache=True, parallel=True)
def block_mean(src, out, p):
    C, h, w = out.shape
    scale = 1.0 / (p * p)
    for y in prange(h):
        for c in range(C):
            for x in range(w):
                acc = 0.0
                for dy in range(p):
                    for dx in range(p):
                        acc += src[c, y * p + dy, x * p + dx]
                out[c, y, x] = acc * scale


def num_threads():
    return numba.get_num_threads()
