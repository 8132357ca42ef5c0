"""Named property suites with measured values against their bounds."""
from dataclasses import dataclass
import time

import numpy as np

from . import liealg
from .asm import HazeParams, invert_oracle, oracle_coeffs, synthesize
from .fit import FitConfig, fit_grids, numerical_gradient_check
from .grid import apply_affine, slice_chromatic, slice_temporal, splat_adjoint
from .metrics import grid_similarity
from .scenes import make_scene, smooth_clean


@dataclass
class Check:
    name: str
    value: float
    bound: str
    passed: bool

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.6g} (bound {self.bound})"


def suite_prop1(seed=0):
    gen = liealg.prop1_slope_probe(200, seed=seed)
    com = liealg.prop1_slope_probe(200, seed=seed, commuting=True)
    return [Check("generic slope", gen.slope, "[0.9, 1.1]", 0.9 <= gen.slope <= 1.1),
            Check("commuting slope", com.slope, "[1.35, 1.65]", 1.35 <= com.slope <= 1.65)]


def random_unit_ball(rng, n):
    """``n`` Gaussian 3x3 matrices with Frobenius norm uniform in (0, 1]."""
    return liealg.random_matrices(rng, rng.uniform(1e-3, 1.0, n))


def suite_cayley(seed=0, n=1000, h=1e-5):
    rng = np.random.default_rng(seed)
    M = random_unit_ball(rng, n)
    I = np.eye(3)
    inv_err = np.abs(liealg.cayley(-M) @ liealg.cayley(M) - I).max()
    dets = np.linalg.det(liealg.cayley(M))
    ref = np.linalg.det(I + M / 2) / np.linalg.det(I - M / 2)
    det_err = np.max(np.abs(dets - ref) / np.abs(ref))
    dM = rng.standard_normal(M.shape)
    an = liealg.cayley_differential(M, dM)
    fd = (liealg.cayley(M + h * dM) - liealg.cayley(M - h * dM)) / (2 * h)
    diff_err = np.max(np.linalg.norm(an - fd, axis=(-2, -1)) / np.linalg.norm(an, axis=(-2, -1)))
    return [Check("inverse identity max abs", inv_err, "<= 1e-10", inv_err <= 1e-10),
            Check("determinant identity max rel", det_err, "<= 1e-10", det_err <= 1e-10),
            Check("differential vs FD max rel", diff_err, "<= 1e-6", diff_err <= 1e-6)]


def adjoint_gap(rng, kind, boundary="clamp"):
    """Relative gap ``|<Sx, y> - <x, S^T y>|`` for one random slice operator."""
    D = int(rng.integers(2, 10))
    if kind == "temporal":
        D |= 1
    shape = (12, D, int(rng.integers(2, 18)), int(rng.integers(2, 18)))
    H, W = int(rng.integers(2, 40)), int(rng.integers(2, 40))
    x = rng.standard_normal(shape)
    y = rng.standard_normal((12, H, W))
    if kind == "chromatic":
        guide = rng.uniform(0, 1, (H, W))
        Sx = slice_chromatic(x, guide, boundary=boundary)
    else:
        guide = None
        Sx = slice_temporal(x, H, W, boundary=boundary)
    Sty = splat_adjoint(y, guide, shape, boundary)
    lhs, rhs = float(np.sum(Sx * y)), float(np.sum(x * Sty))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30)


def gradient_instance(seed=0, n=32, scale=0.05):
    """Small random problem whose intermediate values stay inside (0, 1)."""
    rng = np.random.default_rng(seed)
    frames = [smooth_clean(n, n, seed=seed + k, lo=0.3, hi=0.7) for k in range(5)]
    target = np.clip(frames[2] + 0.05 * rng.standard_normal(frames[2].shape), 0, 1)
    cfg = FitConfig(p=4)
    grids = [scale * rng.standard_normal((12, 8, 16, 16)),
             scale * rng.standard_normal((12, 8, 16, 16)),
             scale * rng.standard_normal((12, 5, 16, 16))]
    return frames, target, cfg, grids


def suite_adjoint(seed=0, trials=100):
    rng = np.random.default_rng(seed)
    gaps = [adjoint_gap(rng, ("chromatic", "temporal")[k % 2], ("clamp", "zero")[(k // 2) % 2])
            for k in range(trials)]
    worst = max(gaps)
    return [Check(f"slice/splat transpose over {trials} trials", worst, "<= 1e-6 rel", worst <= 1e-6)]


def suite_gradients(seed=0, probes=40):
    frames, target, cfg, grids = gradient_instance(seed)
    err, info = numerical_gradient_check(frames, target, cfg, probes, grids, seed=seed,
                                         return_info=True)
    ok = err <= 1e-4 and info["checked"] > 0
    return [Check(f"loss gradient vs FD ({info['checked']} probes, {info['flagged']} at kinks)",
                  err, "<= 1e-4 rel", ok)]


def asm_roundtrip(seed=0, n=256):
    rng = np.random.default_rng(seed)
    J = rng.uniform(0, 1, (3, n, n))
    t = rng.uniform(0.05, 1.0, (n, n))
    params = HazeParams(float(rng.uniform(0.5, 2.0)), rng.uniform(0.6, 1.0, 3))
    I = synthesize(J, t, params)
    J_hat = invert_oracle(I, t, params)
    via_grid = apply_affine(oracle_coeffs(t, params), I)
    return float(np.abs(J_hat - J).max()), float(np.abs(via_grid - J_hat).max())


def suite_asm_roundtrip(seed=0):
    err, agree = asm_roundtrip(seed)
    return [Check("synthesize -> invert max abs", err, "<= 1e-5", err <= 1e-5),
            Check("oracle coefficients vs closed form", agree, "<= 1e-6", agree <= 1e-6)]


def resolution_invariance(full=192, depth="ramp", seed=1, divisors=(6, 4, 2), config=None):
    """Fit one scene at several input scales; compare grids to the full-scale fit."""
    def fitted(n):
        sc = make_scene(n, n, depth=depth, seed=seed)
        r = fit_grids(sc.hazy, sc.clean[sc.center], config)
        return np.concatenate([g.coeffs.ravel() for g in r.grids]), r.final_psnr

    anchor, _ = fitted(full)
    out = {}
    for d in divisors:
        g, _ = fitted(full // d)
        out[d] = grid_similarity(g, anchor)
    return out


def suite_resolution_invariance(seed=0):
    sims = resolution_invariance(seed=seed + 1)
    order = sorted(sims, reverse=True)
    rels = [sims[d][0] for d in order]
    checks = [Check(f"rel_frob at 1/{d}", sims[d][0], "monotone", True) for d in order]
    mono = all(b <= a for a, b in zip(rels, rels[1:]))
    checks.append(Check("rel_frob non-increasing with resolution", float(mono), "== 1", mono))
    r_half = sims[2][1]
    checks.append(Check("pearson at 1/2", r_half, ">= 0.99", r_half >= 0.99))
    return checks


SUITES = {
    "prop1": suite_prop1,
    "cayley": suite_cayley,
    "adjoint": suite_adjoint,
    "asm-roundtrip": suite_asm_roundtrip,
    "gradients": suite_gradients,
    "resolution-invariance": suite_resolution_invariance,
}


def run_suite(name, seed=0):
    """Returns ``(checks, seconds)``; raises KeyError for unknown names."""
    fn = SUITES[name]
    t0 = time.perf_counter()
    checks = fn(seed=seed)
    return checks, time.perf_counter() - t0
