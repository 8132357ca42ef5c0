"""Bilateral sub-grids: containers, trilinear slicing and its adjoint, fusion,
per-pixel affine application and the four Lie-algebra regularizers.

Coordinate convention: pixel centres and grid-cell centres both sit at
``(2k+1)/N - 1`` on ``[-1, 1]``.  Along the guide axis a guide value ``g``
maps to ``c = 2g - 1``, so bin ``k`` of ``Gc`` is centred on
``g = (k + 0.5) / Gc``.  Coordinates beyond the outermost cell centres clamp
to the boundary cell; ``boundary="zero"`` instead lets the spatial stencil
fall off the grid, with missing cells contributing zero.
"""
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from . import _kernels
from .errors import ShapeMismatch, SingularResolvent
from .liealg import DET_TOL

N_COEFFS = 12
_BOUNDARIES = ("clamp", "zero")


def _check_coeffs(coeffs, axis_name):
    coeffs = np.asarray(coeffs)
    if coeffs.ndim != 4 or coeffs.shape[0] != N_COEFFS:
        raise ShapeMismatch(f"grid must be (12, {axis_name}, Gh, Gw), got {coeffs.shape}")
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("grid coefficients must be finite")
    return coeffs


@dataclass
class ChromaticGrid:
    """Spatial-colour grid, ``coeffs`` shaped ``(12, Gc, Gh, Gw)``."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = _check_coeffs(self.coeffs, "Gc")

    @classmethod
    def zeros(cls, gc=8, gh=16, gw=16, dtype=np.float64):
        return cls(np.zeros((N_COEFFS, gc, gh, gw), dtype=dtype))

    @property
    def shape(self):
        return self.coeffs.shape


@dataclass
class TemporalGrid:
    """Temporal grid, ``coeffs`` shaped ``(12, T, Gh, Gw)`` with odd ``T``."""

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = _check_coeffs(self.coeffs, "T")
        if self.coeffs.shape[1] % 2 == 0:
            raise ShapeMismatch(f"T must be odd so the centre frame exists, got {self.coeffs.shape[1]}")

    @classmethod
    def zeros(cls, t=5, gh=16, gw=16, dtype=np.float64):
        return cls(np.zeros((N_COEFFS, t, gh, gw), dtype=dtype))

    @property
    def shape(self):
        return self.coeffs.shape


def _as_array(grid):
    return grid.coeffs if isinstance(grid, (ChromaticGrid, TemporalGrid)) else np.asarray(grid)


def _zero_pad(boundary):
    if boundary not in _BOUNDARIES:
        raise ValueError(f"boundary must be one of {_BOUNDARIES}")
    return boundary == "zero"


def guide_axis(guide, n_bins):
    """Continuous bin index of each guide value (``g * Gc - 0.5``)."""
    return np.ascontiguousarray(np.asarray(guide) * n_bins - 0.5)


def center_axis(n_frames, H, W, dtype=np.float64):
    return np.full((H, W), (n_frames - 1) / 2.0, dtype=dtype)


def _slice(coeffs, caxis, boundary):
    coeffs = np.ascontiguousarray(coeffs)
    H, W = caxis.shape
    if H < 2 or W < 2:
        raise ShapeMismatch(f"slicing resolution must be at least 2x2, got ({H}, {W})")
    out = np.empty((coeffs.shape[0], H, W), dtype=np.result_type(coeffs.dtype, caxis.dtype))
    _kernels.slice_grid(coeffs, caxis.astype(out.dtype, copy=False), out, _zero_pad(boundary))
    return out


def slice_chromatic(grid, guide, H=None, W=None, boundary="clamp"):
    """Trilinear slice of a chromatic grid at the guide's resolution."""
    coeffs = _as_array(grid)
    guide = np.asarray(guide)
    if H is not None and guide.shape != (H, W):
        raise ShapeMismatch(f"guide shape {guide.shape} != ({H}, {W})")
    if guide.ndim != 2:
        raise ShapeMismatch(f"guide must be 2-D, got {guide.shape}")
    return _slice(coeffs, guide_axis(guide, coeffs.shape[1]), boundary)


def slice_temporal(grid, H, W, boundary="clamp", dtype=None):
    """Bilinear slice of the centre plane (``tau = 0``) of a temporal grid."""
    coeffs = _as_array(grid)
    dtype = coeffs.dtype if dtype is None else dtype
    return _slice(coeffs, center_axis(coeffs.shape[1], H, W, dtype), boundary)


def splat_adjoint(cotangent, guide, grid_shape, boundary="clamp"):
    """Exact transpose of slicing: scatter a coefficient field into a grid.

    ``guide`` is the chromatic guide used by the forward slice, or ``None``
    for a temporal grid sliced at its centre plane.
    """
    cot = np.ascontiguousarray(cotangent)
    C, D, GH, GW = grid_shape
    if cot.ndim != 3 or cot.shape[0] != C:
        raise ShapeMismatch(f"cotangent {cot.shape} incompatible with grid {grid_shape}")
    H, W = cot.shape[1:]
    if guide is None:
        caxis = center_axis(D, H, W, cot.dtype)
    else:
        guide = np.asarray(guide)
        if guide.shape != (H, W):
            raise ShapeMismatch(f"guide shape {guide.shape} != cotangent ({H}, {W})")
        caxis = guide_axis(guide, D).astype(cot.dtype, copy=False)
    nt = _kernels.num_threads()
    buf = np.zeros((nt, C, D, GH, GW), dtype=np.result_type(cot.dtype, np.float64))
    _kernels.splat_grid(cot, caxis, buf, _zero_pad(boundary))
    return buf.sum(axis=0)


def fuse(cR, cG, ct):
    """``(cR + cG) / 2 + ct``: dual-guide average plus temporal coefficients."""
    cR, cG, ct = (np.asarray(c) for c in (cR, cG, ct))
    if not (cR.shape == cG.shape == ct.shape):
        raise ShapeMismatch(f"coefficient fields differ: {cR.shape}, {cG.shape}, {ct.shape}")
    return 0.5 * (cR + cG) + ct


def apply_affine(coeffs, image):
    """Per pixel: ``clamp(Cay(M) rgb + b, 0, 1)``.  Returns a new frame."""
    coeffs = np.ascontiguousarray(coeffs)
    image = np.ascontiguousarray(image)
    if coeffs.shape[0] != N_COEFFS or image.shape[0] != 3 or coeffs.shape[1:] != image.shape[1:]:
        raise ShapeMismatch(f"coefficients {coeffs.shape} do not match image {image.shape}")
    dtype = np.result_type(coeffs.dtype, image.dtype)
    out = np.empty(image.shape, dtype=dtype)
    bad = np.full(image.shape[1], -1, dtype=np.int64)
    _kernels.apply_affine(coeffs.astype(dtype, copy=False), image.astype(dtype, copy=False),
                          out, bad, DET_TOL)
    rows = np.flatnonzero(bad >= 0)
    if rows.size:
        y = int(rows[0])
        raise SingularResolvent(f"singular resolvent at pixel (y={y}, x={int(bad[y])})",
                                pixel=(y, int(bad[y])))
    return out


@dataclass(frozen=True)
class RegWeights:
    lambda_id: float = 0.01
    lambda_sp: float = 0.05
    lambda_tm: float = 0.10
    lambda_g: float = 0.02


class RegResult(NamedTuple):
    value: float
    per_term: Tuple[float, float, float, float]
    gradients: Tuple[np.ndarray, np.ndarray, np.ndarray]


def _spatial_sq(g, grad, scale):
    dy = g[:, :, 1:, :] - g[:, :, :-1, :]
    dx = g[:, :, :, 1:] - g[:, :, :, :-1]
    grad[:, :, 1:, :] += 2 * scale * dy
    grad[:, :, :-1, :] -= 2 * scale * dy
    grad[:, :, :, 1:] += 2 * scale * dx
    grad[:, :, :, :-1] -= 2 * scale * dx
    return float(np.sum(dy * dy) + np.sum(dx * dx))


def lie_regularizers(gR, gG, gt, weights=RegWeights()):
    """The four penalties on the grids, with exact gradients.

    Each term is a mean so the weights do not depend on the grid size:

    * identity prior: squared Frobenius norm of the gl(3) part, averaged
      over every cell of the three grids;
    * spatial smoothness: squared forward differences along both spatial
      axes summed over the 12 channels, averaged over those same cells;
    * temporal smoothness: squared forward differences along tau, averaged
      over the temporal grid's cells;
    * guide consistency: elementwise mean of ``|gR - gG|``.
    """
    R, G, T = (np.asarray(_as_array(g), dtype=np.float64) for g in (gR, gG, gt))
    if R.shape != G.shape:
        raise ShapeMismatch(f"chromatic grids differ: {R.shape} vs {G.shape}")
    grads = [np.zeros_like(R), np.zeros_like(G), np.zeros_like(T)]
    n_cells = 2 * int(np.prod(R.shape[1:])) + int(np.prod(T.shape[1:]))

    ident = 0.0
    for g, d in zip((R, G, T), grads):
        ident += float(np.sum(g[:9] ** 2))
        d[:9] += weights.lambda_id * 2.0 * g[:9] / n_cells
    ident /= n_cells

    spatial = 0.0
    for g, d in zip((R, G, T), grads):
        spatial += _spatial_sq(g, d, weights.lambda_sp / n_cells)
    spatial /= n_cells

    n_t = int(np.prod(T.shape[1:]))
    dt = T[:, 1:] - T[:, :-1]
    temporal = float(np.sum(dt * dt)) / n_t
    grads[2][:, 1:] += weights.lambda_tm * 2.0 * dt / n_t
    grads[2][:, :-1] -= weights.lambda_tm * 2.0 * dt / n_t

    diff = R - G
    guide = float(np.mean(np.abs(diff)))
    s = np.sign(diff) * (weights.lambda_g / diff.size)
    grads[0] += s
    grads[1] -= s

    terms = (ident, spatial, temporal, guide)
    value = (weights.lambda_id * ident + weights.lambda_sp * spatial
             + weights.lambda_tm * temporal + weights.lambda_g * guide)
    return RegResult(float(value), terms, tuple(grads))
