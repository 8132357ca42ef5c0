"""Bilinear resampling, area downsampling and flow warping.

Images are planar ``(C, H, W)``; 2-D fields are accepted and returned as 2-D.
Bilinear resampling uses half-pixel centres with edge replication, the same
convention as ``cv2.resize(..., INTER_LINEAR)``.
"""
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import ShapeMismatch


def _planar(x):
    x = np.asarray(x)
    if x.ndim == 2:
        return x[None], True
    if x.ndim != 3:
        raise ShapeMismatch(f"expected (H, W) or (C, H, W), got {x.shape}")
    return x, False


def _float(x):
    return x if x.dtype in (np.float32, np.float64) else x.astype(np.float64)


def downsample(img, p):
    """Average non-overlapping ``p x p`` blocks."""
    x, flat = _planar(img)
    C, H, W = x.shape
    if H % p or W % p:
        raise ShapeMismatch(f"({H}, {W}) is not divisible by p={p}")
    if p == 1:
        out = _float(x).copy()
    else:
        out = np.empty((C, H // p, W // p), dtype=_float(x).dtype)
        _kernels.block_mean(np.ascontiguousarray(_float(x)), out, p)
    return out[0] if flat else out


def downsample_adjoint(g, p):
    x, flat = _planar(g)
    out = np.repeat(np.repeat(x, p, axis=1), p, axis=2) / (p * p)
    return out[0] if flat else out


def resize_bilinear(img, H, W):
    x, flat = _planar(img)
    x = np.ascontiguousarray(_float(x))
    if x.shape[1:] == (H, W):
        out = x.copy()
    else:
        out = np.empty((x.shape[0], H, W), dtype=x.dtype)
        _kernels.resize_bilinear(x, out)
    return out[0] if flat else out


def upsample(img, p):
    x, _ = _planar(img)
    return resize_bilinear(img, x.shape[1] * p, x.shape[2] * p)


@lru_cache(maxsize=64)
def interp_matrix(n_out, n_in):
    """Sparse ``(n_out, n_in)`` matrix of 1-D bilinear resampling weights."""
    i = np.arange(n_out)
    s = np.clip((i + 0.5) * n_in / n_out - 0.5, 0.0, n_in - 1.0)
    i0 = np.minimum(np.floor(s).astype(np.int64), n_in - 1)
    i1 = np.minimum(i0 + 1, n_in - 1)
    f = s - i0
    rows = np.concatenate([i, i])
    cols = np.concatenate([i0, i1])
    vals = np.concatenate([1.0 - f, f])
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_out, n_in))


def resize_bilinear_adjoint(g, h, w):
    """Transpose of :func:`resize_bilinear` from ``(h, w)`` to ``g``'s size."""
    x, flat = _planar(g)
    _, H, W = x.shape
    Uy = interp_matrix(H, h)
    Ux = interp_matrix(W, w)
    out = np.empty((x.shape[0], h, w), dtype=np.result_type(x.dtype, np.float32))
    for c in range(x.shape[0]):
        out[c] = (Ux.T @ (Uy.T @ x[c]).T).T
    return out[0] if flat else out


def upsample_add_clamp(delta, base):
    """``clamp(base + Up(delta), 0, 1)`` fused in a single pass."""
    delta = np.ascontiguousarray(_float(np.asarray(delta)))
    base = np.ascontiguousarray(np.asarray(base, dtype=delta.dtype))
    out = np.empty_like(base)
    _kernels.upsample_add_clamp(delta, base, out)
    return out


def warp(img, flow):
    """Backward-warp the previous frame onto the current one.

    ``flow`` is the forward flow ``(u, v)`` from the previous frame to the
    current one, stacked as ``(2, H, W)``.  The current pixel ``x`` is
    sampled from the previous frame at ``x - flow(x)``.  Returns the warped
    image and a boolean mask of samples that landed inside the frame.
    """
    x, flat = _planar(img)
    flow = np.asarray(flow, dtype=float)
    _, H, W = x.shape
    if flow.shape != (2, H, W):
        raise ShapeMismatch(f"flow shape {flow.shape} does not match frame ({H}, {W})")
    yy, xx = np.mgrid[0:H, 0:W].astype(float)
    sx = xx - flow[0]
    sy = yy - flow[1]
    tol = 1e-9
    valid = (sx >= -tol) & (sx <= W - 1 + tol) & (sy >= -tol) & (sy <= H - 1 + tol)
    sx = np.clip(sx, 0, W - 1)
    sy = np.clip(sy, 0, H - 1)
    x0 = np.minimum(np.floor(sx).astype(np.int64), max(W - 2, 0))
    y0 = np.minimum(np.floor(sy).astype(np.int64), max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    fx = sx - x0
    fy = sy - y0
    out = (
        (1 - fy) * ((1 - fx) * x[:, y0, x0] + fx * x[:, y0, x1])
        + fy * ((1 - fx) * x[:, y1, x0] + fx * x[:, y1, x1])
    )
    return (out[0] if flat else out), valid
