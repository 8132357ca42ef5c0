"""Restoration and temporal-consistency metrics, plus grid statistics."""
from dataclasses import dataclass, field
from typing import List, Optional
import csv
import io

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ShapeMismatch, TooSmall, ZeroAnchor
from .resample import warp

PSNR_CAP = 99.0


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    """PSNR in dB for peak 1.0, capped at 99 dB."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse < 1e-12:
        return PSNR_CAP
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP)


def _gaussian_taps(size=11, sigma=1.5):
    x = np.arange(size) - (size - 1) / 2
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def ssim(a, b, win_size=11, sigma=1.5, K1=0.01, K2=0.03, data_range=1.0):
    """Mean SSIM with a Gaussian window, averaged over channels.

    Statistics use population (biased) moments and only windows that fit
    entirely inside the image contribute.
    """
    a, b = _pair(a, b)
    if a.ndim == 2:
        a, b = a[None], b[None]
    if min(a.shape[-2:]) < win_size:
        raise TooSmall(f"images must be at least {win_size} pixels on each side")
    taps = _gaussian_taps(win_size, sigma)
    pad = (win_size - 1) // 2
    C1 = (K1 * data_range) ** 2
    C2 = (K2 * data_range) ** 2

    def blur(x):
        y = correlate1d(x, taps, axis=-1, mode="reflect")
        y = correlate1d(y, taps, axis=-2, mode="reflect")
        return y[..., pad:-pad, pad:-pad]

    mu_a, mu_b = blur(a), blur(b)
    saa = blur(a * a) - mu_a ** 2
    sbb = blur(b * b) - mu_b ** 2
    sab = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * sab + C2)
    den = (mu_a ** 2 + mu_b ** 2 + C1) * (saa + sbb + C2)
    per_channel = np.mean(num / den, axis=(-2, -1))
    return float(np.mean(per_channel))


def tof(frames, flows):
    """Flow-warped inter-frame l1 error, averaged over in-bounds pixels.

    ``flows[k]`` is the forward flow from frame ``k`` to frame ``k + 1``.
    """
    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    if len(flows) != len(frames) - 1:
        raise ShapeMismatch(f"{len(frames)} frames need {len(frames) - 1} flows, got {len(flows)}")
    if len(frames) < 2:
        return 0.0
    errs = []
    for k, flow in enumerate(flows):
        cur, prev = frames[k + 1], frames[k]
        if cur.shape != prev.shape:
            raise ShapeMismatch("frames differ in shape")
        warped, valid = warp(prev, flow)
        if not valid.any():
            continue
        diff = np.abs(cur - warped)
        if diff.ndim == 3:
            diff = diff.mean(axis=0)
        errs.append(float(diff[valid].mean()))
    return float(np.mean(errs)) if errs else 0.0


def grid_similarity(ga, gb):
    """Relative Frobenius distance to the anchor ``gb`` and Pearson r."""
    a = np.ravel(getattr(ga, "coeffs", ga)).astype(np.float64)
    b = np.ravel(getattr(gb, "coeffs", gb)).astype(np.float64)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    nb = np.linalg.norm(b)
    if nb < 1e-12:
        raise ZeroAnchor("anchor grid has (near) zero norm")
    rel = float(np.linalg.norm(a - b) / nb)
    da, db = a - a.mean(), b - b.mean()
    denom = np.linalg.norm(da) * np.linalg.norm(db)
    if denom == 0:
        r = 1.0 if np.array_equal(a, b) else 0.0
    else:
        r = float(np.clip(da @ db / denom, -1.0, 1.0))
    if np.array_equal(a, b):
        rel, r = 0.0, 1.0
    return rel, r


def per_bin_norms(grid):
    """``(Gc, 12)`` table of spatial l2 norms per colour bin and channel."""
    g = np.asarray(getattr(grid, "coeffs", grid), dtype=np.float64)
    return np.sqrt(np.sum(g * g, axis=(2, 3))).T


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    per_frame_psnr: List[float] = field(default_factory=list)
    per_frame_ssim: List[float] = field(default_factory=list)
    sigma_psnr: float = 0.0
    tof: Optional[float] = None

    def to_keyvalue(self):
        lines = [f"psnr={self.psnr:.6f}", f"ssim={self.ssim:.6f}",
                 f"sigma_psnr={self.sigma_psnr:.6f}",
                 f"tof={'nan' if self.tof is None else format(self.tof, '.8f')}",
                 f"frames={len(self.per_frame_psnr)}"]
        return "\n".join(lines) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["frame", "psnr", "ssim"])
        for k, (p, s) in enumerate(zip(self.per_frame_psnr, self.per_frame_ssim)):
            w.writerow([k, f"{p:.6f}", f"{s:.6f}"])
        w.writerow(["summary", f"{self.psnr:.6f}", f"{self.ssim:.6f}"])
        return buf.getvalue()


def sigma_psnr(per_frame):
    """Population standard deviation of per-frame PSNR."""
    x = np.asarray(per_frame, dtype=np.float64)
    if x.size == 0:
        return 0.0
    # shifting by the first entry makes constant lists exactly zero
    return float(np.std(x - x[0]))


def evaluate(pred_frames, gt_frames, flows=None):
    if len(pred_frames) != len(gt_frames):
        raise ShapeMismatch(f"{len(pred_frames)} predictions vs {len(gt_frames)} references")
    per_psnr = [psnr(p, g) for p, g in zip(pred_frames, gt_frames)]
    per_ssim = [ssim(p, g) for p, g in zip(pred_frames, gt_frames)]
    t = tof(pred_frames, flows) if flows is not None else None
    return MetricReport(float(np.mean(per_psnr)), float(np.mean(per_ssim)), per_psnr, per_ssim,
                        sigma_psnr(per_psnr), t)
