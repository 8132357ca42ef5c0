"""Resolution-scaling benchmark of the grid pipeline.

Per output size the benchmark times, with fixed grids:

* ``fit_or_predict_time_ms``: one loss-and-gradient step of the grid fit on
  a fixed ``thumb x thumb`` thumbnail of the frame.  This is the grid-side
  work, which does not depend on the output size.
* ``slice_time_ms``: slicing both chromatic grids and the temporal grid at
  ``H/p x W/p`` and fusing the coefficients.
* ``apply_time_ms``: area downsampling, the per-pixel Cayley affine map and
  the full-resolution recombination.

``total_fps`` counts all three; ``path_fps`` counts only slice and apply.
"""
from dataclasses import dataclass, astuple, fields
import csv
import time

import numpy as np

from . import resample
from .fit import FitConfig, _Problem
from .grid import apply_affine, fuse, slice_chromatic, slice_temporal
from .scenes import smooth_clean


@dataclass
class BenchRecord:
    height: int
    width: int
    fit_or_predict_time_ms: float
    slice_time_ms: float
    apply_time_ms: float
    total_fps: float
    path_fps: float

    @property
    def resolution(self):
        return self.height, self.width


def fixed_grids(config=None, n_frames=5, scale=0.02, seed=0):
    """Small seeded grids, so every size is timed against the same model."""
    c = config or FitConfig()
    rng = np.random.default_rng(seed)
    R = scale * rng.standard_normal((12, c.grid_c, c.grid_h, c.grid_w))
    G = scale * rng.standard_normal((12, c.grid_c, c.grid_h, c.grid_w))
    T = scale * rng.standard_normal((12, n_frames, c.grid_h, c.grid_w))
    return R, G, T


def _timed(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


class _SizeCase:
    """Prepared inputs and the three timed stages for one output size."""

    def __init__(self, H, W, grids, p=4, thumb=256, dtype=np.float32, seed=0):
        self.H, self.W = H, W
        frame = smooth_clean(H, W, seed=seed).astype(dtype)
        R, G, T = (np.ascontiguousarray(g, dtype=dtype) for g in grids)
        small = resample.resize_bilinear(frame.astype(np.float64), thumb, thumb)
        config = FitConfig(p=1, grid_c=R.shape[1], grid_h=R.shape[2], grid_w=R.shape[3])
        problem = _Problem(small[None].repeat(T.shape[1], axis=0), small, config)
        grids64 = [np.asarray(g, dtype=np.float64) for g in grids]
        I_lr = resample.downsample(frame, p)
        h, w = I_lr.shape[1:]

        def slice_and_fuse():
            return fuse(slice_chromatic(R, I_lr[0]), slice_chromatic(G, I_lr[1]),
                        slice_temporal(T, h, w))

        coeffs = slice_and_fuse()

        def apply_and_recombine():
            lo = resample.downsample(frame, p)
            J_lr = apply_affine(coeffs, lo)
            return resample.upsample_add_clamp(J_lr - lo, frame)

        self.stages = (lambda: problem.loss(grids64), slice_and_fuse, apply_and_recombine)
        self.times = [[] for _ in self.stages]

    def run_once(self, record=True):
        for stage, out in zip(self.stages, self.times):
            t = _timed(stage)
            if record:
                out.append(t)

    def record(self):
        t_fit, t_slice, t_apply = (1e3 * float(np.median(t)) for t in self.times)
        return BenchRecord(self.H, self.W, t_fit, t_slice, t_apply,
                           1e3 / (t_fit + t_slice + t_apply), 1e3 / (t_slice + t_apply))


def run_bench(sizes, repeats=5, p=4, thumb=256, seed=0):
    """Time every size; repeats are interleaved across sizes.

    Each size gets one discarded warm-up run, then ``repeats`` timed rounds
    visit the sizes in turn, so slow drift of the machine is spread over all
    sizes instead of biasing whichever ran last.  Times are medians.
    """
    sizes = [tuple(int(v) for v in s) for s in sizes]
    if repeats < 3:
        raise ValueError("repeats must be at least 3")
    grids = fixed_grids(seed=seed)
    cases = [_SizeCase(H, W, grids, p, thumb, seed=seed) for H, W in sizes]
    for c in cases:
        c.run_once(record=False)
    for _ in range(repeats):
        for c in cases:
            c.run_once()
    return [c.record() for c in cases]


def write_csv(path_or_file, records):
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f.name for f in fields(BenchRecord)])
        for r in records:
            w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in astuple(r)])
    finally:
        if own:
            fh.close()


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    kinds = {f.name: f.type for f in fields(BenchRecord)}
    return [BenchRecord(**{k: (int if kinds[k] in (int, "int") else float)(v) for k, v in r.items()})
            for r in rows]


def loglog_slope(pixels, times):
    return float(np.polyfit(np.log(pixels), np.log(times), 1)[0])
