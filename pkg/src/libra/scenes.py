"""Deterministic synthetic scenes for tests, demos and benchmarks.

Scenes are defined in normalized coordinates, so the same scene rendered at
two resolutions differs only by sampling.
"""
from dataclasses import dataclass
from typing import List

import numpy as np

from .asm import HazeParams, synthesize, transmission


def _coords(H, W):
    y = (2 * np.arange(H) + 1) / H - 1
    x = (2 * np.arange(W) + 1) / W - 1
    return np.meshgrid(y, x, indexing="ij")


def smooth_clean(H, W, seed=0, n_waves=3, max_freq=0.6, lo=0.1, hi=0.9, offset=(0.0, 0.0)):
    """Low-frequency colour image in ``[lo, hi]``.

    Each channel is a sum of a few random cosines with at most ``max_freq``
    cycles across the frame.  ``offset`` shifts the pattern in normalized
    units, which is how translating sequences are built.
    """
    rng = np.random.default_rng(seed)
    yy, xx = _coords(H, W)
    yy = yy - offset[0]
    xx = xx - offset[1]
    img = np.empty((3, H, W))
    for c in range(3):
        acc = np.zeros((H, W))
        for _ in range(n_waves):
            fy, fx = rng.uniform(-max_freq, max_freq, 2)
            ph = rng.uniform(0, 2 * np.pi)
            acc += rng.uniform(0.5, 1.0) * np.cos(np.pi * (fy * yy + fx * xx) + ph)
        acc = (acc - acc.min()) / max(np.ptp(acc), 1e-12)
        img[c] = acc
    base = rng.uniform(0.25, 0.75, 3).reshape(3, 1, 1)
    img = 0.6 * img + 0.4 * base
    return lo + (hi - lo) * img


def constant_depth(H, W, value=0.5):
    return np.full((H, W), float(value))


def two_plane_depth(H, W, near=0.25, far=0.75, split=0.5):
    """Near plane on the left, far plane on the right of column ``split * W``."""
    d = np.full((H, W), float(near))
    d[:, int(round(split * W)):] = far
    return d


def ramp_depth(H, W, lo=0.2, hi=0.8):
    yy, xx = _coords(H, W)
    return lo + (hi - lo) * 0.25 * (xx + 1) * (1 + 0.5 * (yy + 1)) / 1.5


@dataclass
class Scene:
    clean: List[np.ndarray]
    depth: List[np.ndarray]
    trans: List[np.ndarray]
    hazy: List[np.ndarray]
    params: HazeParams

    @property
    def center(self):
        return len(self.clean) // 2


def make_scene(H, W, depth="constant", beta=0.7, a_inf=0.8, n_frames=5, seed=0, **depth_kw):
    """Static hazy sequence: identical clean frames over a fixed depth map."""
    params = HazeParams(beta, a_inf)
    J = smooth_clean(H, W, seed=seed)
    if depth == "constant":
        d = constant_depth(H, W, **depth_kw)
    elif depth == "two_plane":
        d = two_plane_depth(H, W, **depth_kw)
    elif depth == "ramp":
        d = ramp_depth(H, W, **depth_kw)
    else:
        raise ValueError(f"unknown depth kind {depth!r}")
    t = transmission(d, beta)
    I = synthesize(J, t, params)
    return Scene([J] * n_frames, [d] * n_frames, [t] * n_frames, [I] * n_frames, params)


def translating_clean(H, W, n_frames, shift=(0, 1), seed=0):
    """Frames of a larger smooth canvas cropped at integer pixel offsets.

    Returns ``(frames, flows)`` where ``flows[k]`` is the exact constant
    forward flow ``(u, v)`` from frame ``k`` to ``k + 1``.
    """
    dy, dx = shift
    pad_y, pad_x = abs(dy) * (n_frames - 1), abs(dx) * (n_frames - 1)
    canvas = smooth_clean(H + pad_y, W + pad_x, seed=seed, max_freq=2.0)
    frames = []
    for k in range(n_frames):
        # frame k+1 at x equals frame k at x - shift
        oy = (pad_y if dy > 0 else 0) - k * dy
        ox = (pad_x if dx > 0 else 0) - k * dx
        frames.append(canvas[:, oy:oy + H, ox:ox + W].copy())
    flow = np.stack([np.full((H, W), float(dx)), np.full((H, W), float(dy))])
    return frames, [flow.copy() for _ in range(n_frames - 1)]


def write_toy_sequence(root, H=64, W=64, n_frames=5, shift=(0, 1), beta=1.0, a_inf=0.8,
                       proxy=2, seed=0, fps=5.0):
    """Write clean PNGs, proxy-resolution raw disparity and flow, and a manifest.

    Returns the manifest path.  Disparity moves with the content, so the
    flows are exact for both modalities.
    """
    from pathlib import Path

    from . import io as lio
    from .resample import downsample

    root = Path(root)
    for sub in ("clean", "depth", "flow"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    frames, flows = translating_clean(H, W, n_frames, shift, seed=seed)
    disp, _ = translating_clean(H, W, n_frames, shift, seed=seed + 100)
    m = lio.Manifest(beta=beta, a_inf=(a_inf,) * 3 if np.isscalar(a_inf) else tuple(a_inf),
                     fps=fps)
    for k, f in enumerate(frames):
        p = root / "clean" / f"{k:04d}.png"
        lio.write_frame(p, f)
        m.clean.append(p)
        p = root / "depth" / f"{k:04d}.lbf"
        lio.write_field(p, 10.0 * downsample(disp[k][0], proxy))
        m.depth.append(p)
    for k, fl in enumerate(flows):
        p = root / "flow" / f"{k:04d}.lbf"
        lio.write_field(p, downsample(fl, proxy) / proxy)
        m.flow.append(p)
    path = root / "manifest.txt"
    lio.write_manifest(path, m)
    return path
