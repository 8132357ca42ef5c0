"""Direct numerical fitting of the bilateral grids to a hazy/clean pair.

The forward model is slice -> fuse -> Cayley -> affine -> recombination:

    J_lr   = clamp(Cay(M) I_lr + b)              at H/p x W/p
    J_full = clamp(I_hr + Up(J_lr - Down(I_hr)))  at H x W

and the grids are fitted by gradient descent on the Charbonnier data term
plus ``lambda_lie`` times the Lie regularizers, starting from zero grids
(the identity transform).
"""
from dataclasses import dataclass, field, fields, replace
from typing import List, Optional, Tuple
import logging

import numpy as np

from . import resample
from .errors import DivergenceDetected, ShapeMismatch
from .grid import (ChromaticGrid, RegWeights, TemporalGrid, apply_affine, fuse,
                   lie_regularizers, slice_chromatic, slice_temporal, splat_adjoint)
from .liealg import cayley_vjp, resolvent_inverse

log = logging.getLogger(__name__)

_EYE = np.eye(3)


@dataclass
class FitConfig:
    lambda_id: float = 0.01
    lambda_sp: float = 0.05
    lambda_tm: float = 0.10
    lambda_g: float = 0.02
    lambda_lie: float = 0.2
    charbonnier_eps: float = 1e-3
    # upper end of the step-size probe ladder
    step_size: float = 1e3
    max_iters: int = 2000
    grad_tol: float = 1e-10
    p: int = 4
    seed: int = 0
    # not part of the key=value file format unless given explicitly
    momentum: float = 0.0
    grid_c: int = 8
    grid_h: int = 16
    grid_w: int = 16
    probe_steps: int = 10
    probe_candidates: int = 12
    probe_factor: float = 0.5
    # the probe only sees the early, l1-like regime; the stiffer late regime
    # near the optimum needs a smaller step
    probe_safety: float = 0.25

    def __post_init__(self):
        lams = (self.lambda_id, self.lambda_sp, self.lambda_tm, self.lambda_g, self.lambda_lie)
        if any(l < 0 for l in lams):
            raise ValueError("all lambda weights must be non-negative")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.charbonnier_eps <= 0:
            raise ValueError("charbonnier_eps must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")

    @property
    def reg_weights(self):
        return RegWeights(self.lambda_id, self.lambda_sp, self.lambda_tm, self.lambda_g)

    def with_(self, **kw):
        return replace(self, **kw)


FILE_KEYS = ("lambda_id", "lambda_sp", "lambda_tm", "lambda_g", "lambda_lie",
             "charbonnier_eps", "step_size", "max_iters", "grad_tol", "p", "seed")
OPTIONAL_KEYS = ("momentum", "grid_c", "grid_h", "grid_w", "probe_steps", "probe_candidates",
                 "probe_factor", "probe_safety")


@dataclass
class TraceEntry:
    iteration: int
    data_term: float
    reg_terms: Tuple[float, float, float, float]
    total: float


@dataclass
class FitResult:
    grid_R: ChromaticGrid
    grid_G: ChromaticGrid
    grid_T: TemporalGrid
    loss_trace: List[TraceEntry] = field(default_factory=list)
    final_psnr: float = float("nan")
    step_size: float = float("nan")
    iterations: int = 0
    converged: bool = False
    final_step: float = float("nan")

    @property
    def grids(self):
        return self.grid_R, self.grid_G, self.grid_T


def charbonnier(pred, target, eps):
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"{pred.shape} vs {target.shape}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    r = pred - target
    return float(np.mean(np.sqrt(r * r + eps * eps)))


def charbonnier_grad(pred, target, eps):
    r = np.asarray(pred, dtype=float) - target
    return r / np.sqrt(r * r + eps * eps) / r.size


def _stack_frames(frames):
    frames = np.asarray(frames)
    if frames.ndim == 3:
        frames = frames[None]
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise ShapeMismatch(f"expected T frames shaped (3, H, W), got {frames.shape}")
    return frames


def center_frame(frames):
    frames = _stack_frames(frames)
    return frames[frames.shape[0] // 2]


def _coeffs(g):
    return g.coeffs if hasattr(g, "coeffs") else np.asarray(g)


def fused_coefficients(grid_R, grid_G, grid_T, frames, p, boundary="clamp"):
    """Fused 12-channel coefficient field at ``H/p x W/p`` and the low-res frame."""
    I_lr = resample.downsample(center_frame(frames), p)
    h, w = I_lr.shape[1:]
    cR = slice_chromatic(_coeffs(grid_R), I_lr[0], boundary=boundary)
    cG = slice_chromatic(_coeffs(grid_G), I_lr[1], boundary=boundary)
    ct = slice_temporal(_coeffs(grid_T), h, w, boundary=boundary, dtype=cR.dtype)
    return fuse(cR, cG, ct), I_lr


def pipeline_forward(grid_R, grid_G, grid_T, frames, p=4, boundary="clamp"):
    """Render ``(J_lr, J_full)`` for the centre frame of ``frames``.

    The learned high-frequency residual of the full model does not exist
    here, so ``J_full`` is the input plus the upsampled low-frequency
    correction.
    """
    I_hr = center_frame(frames)
    if I_hr.shape[1] % p or I_hr.shape[2] % p:
        raise ShapeMismatch(f"frame {I_hr.shape[1:]} is not divisible by p={p}")
    c, I_lr = fused_coefficients(grid_R, grid_G, grid_T, frames, p, boundary)
    J_lr = apply_affine(c, I_lr)
    J_full = resample.upsample_add_clamp(J_lr - I_lr, I_hr)
    return J_lr, J_full


class _Problem:
    """Loss and gradient of the fitting objective for one window of frames."""

    def __init__(self, frames, target, config, boundary="clamp"):
        frames = _stack_frames(frames)
        self.config = config
        self.boundary = boundary
        self.I_hr = np.asarray(center_frame(frames), dtype=np.float64)
        self.target = np.asarray(target, dtype=np.float64)
        if self.target.shape != self.I_hr.shape:
            raise ShapeMismatch(f"target {self.target.shape} != frames {self.I_hr.shape}")
        p = config.p
        H, W = self.I_hr.shape[1:]
        if H % p or W % p:
            raise ShapeMismatch(f"frame ({H}, {W}) is not divisible by p={p}")
        self.n_frames = frames.shape[0]
        self.I_lr = resample.downsample(self.I_hr, p)
        self.h, self.w = self.I_lr.shape[1:]
        self.weights = config.reg_weights

    def zero_grids(self):
        c = self.config
        return [np.zeros((12, c.grid_c, c.grid_h, c.grid_w)),
                np.zeros((12, c.grid_c, c.grid_h, c.grid_w)),
                np.zeros((12, self.n_frames, c.grid_h, c.grid_w))]

    def forward(self, grids):
        R, G, T = grids
        cR = slice_chromatic(R, self.I_lr[0], boundary=self.boundary)
        cG = slice_chromatic(G, self.I_lr[1], boundary=self.boundary)
        ct = slice_temporal(T, self.h, self.w, boundary=self.boundary, dtype=np.float64)
        c = fuse(cR, cG, ct)
        M = np.moveaxis(c[:9], 0, -1).reshape(self.h, self.w, 3, 3)
        Rinv = resolvent_inverse(M)
        A = Rinv @ (_EYE + 0.5 * M)
        rgb = np.moveaxis(self.I_lr, 0, -1)
        lin = np.moveaxis(np.einsum("hwij,hwj->hwi", A, rgb), -1, 0) + c[9:]
        J_lr = np.clip(lin, 0.0, 1.0)
        pre = self.I_hr + resample.upsample(J_lr - self.I_lr, self.config.p)
        J_full = np.clip(pre, 0.0, 1.0)
        return dict(M=M, Rinv=Rinv, A=A, rgb=rgb, lin=lin, pre=pre, J_lr=J_lr, J_full=J_full)

    def loss(self, grids, want_grad=True):
        cfg = self.config
        st = self.forward(grids)
        data = charbonnier(st["J_full"], self.target, cfg.charbonnier_eps)
        reg = lie_regularizers(*grids, self.weights)
        total = data + cfg.lambda_lie * reg.value
        if not want_grad:
            return total, data, reg, None, st
        g_full = charbonnier_grad(st["J_full"], self.target, cfg.charbonnier_eps)
        # clamp is treated as zero-gradient saturation outside [0, 1]
        g_pre = g_full * ((st["pre"] >= 0) & (st["pre"] <= 1))
        g_lr = resample.resize_bilinear_adjoint(g_pre, self.h, self.w)
        g_lin = g_lr * ((st["lin"] >= 0) & (st["lin"] <= 1))
        g_vec = np.moveaxis(g_lin, 0, -1)
        g_A = g_vec[..., :, None] * st["rgb"][..., None, :]
        g_M = cayley_vjp(st["M"], g_A, st["A"], st["Rinv"])
        g_c = np.concatenate([np.moveaxis(g_M.reshape(self.h, self.w, 9), -1, 0), g_lin])
        shapes = [g.shape for g in grids]
        gR = splat_adjoint(0.5 * g_c, self.I_lr[0], shapes[0], self.boundary)
        gG = splat_adjoint(0.5 * g_c, self.I_lr[1], shapes[1], self.boundary)
        gT = splat_adjoint(g_c, None, shapes[2], self.boundary)
        grads = [gR + cfg.lambda_lie * reg.gradients[0],
                 gG + cfg.lambda_lie * reg.gradients[1],
                 gT + cfg.lambda_lie * reg.gradients[2]]
        return total, data, reg, grads, st


def _descend(problem, grids, step, n_iters, momentum, trace=None, start_iter=0,
             grad_tol=0.0, diverge_at=None, backtrack=False):
    """Fixed-step descent; returns ``(grids, loss, last_iter, converged, step)``.

    With ``backtrack`` a step that would raise the loss is rejected and the
    step size halved, which suppresses the period-two oscillation that a
    fixed step falls into near the optimum.  A candidate beyond
    ``diverge_at`` always raises :class:`DivergenceDetected`.
    """
    def check(total, it):
        if not np.isfinite(total) or (diverge_at is not None and total > diverge_at):
            raise DivergenceDetected(f"loss {total:.6g} at iteration {it} exceeds the divergence bound")

    grids = [g.copy() for g in grids]
    vel = [np.zeros_like(g) for g in grids]
    total, data, reg, grads, _ = problem.loss(grids)
    check(total, start_iter)
    if trace is not None:
        trace.append(TraceEntry(start_iter, data, reg.per_term, total))
    converged = False
    it = start_iter
    for it in range(start_iter + 1, start_iter + n_iters + 1):
        gnorm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if gnorm < grad_tol:
            converged = True
            it -= 1
            break
        new_vel = [momentum * v - step * d for v, d in zip(vel, grads)]
        cand = [g + v for g, v in zip(grids, new_vel)]
        c_total, c_data, c_reg, c_grads, _ = problem.loss(cand)
        check(c_total, it)
        if backtrack and c_total > total:
            step *= 0.5
            vel = [np.zeros_like(g) for g in grids]
        else:
            grids, vel = cand, new_vel
            total, data, reg, grads = c_total, c_data, c_reg, c_grads
        if trace is not None:
            trace.append(TraceEntry(it, data, reg.per_term, total))
    return grids, total, it, converged, step


def probe_step_size(problem, grids, config):
    """Pick a fixed step from a geometric ladder by a short descent run.

    Each candidate ``step_size * factor**k`` runs ``probe_steps`` iterations;
    among candidates whose loss never rose, the one with the lowest final
    loss wins, and the returned step is that winner times ``probe_safety``.
    """
    start = problem.loss(grids, want_grad=False)[0]
    best, best_loss = None, np.inf
    for k in range(config.probe_candidates):
        step = config.step_size * config.probe_factor ** k
        trace = []
        try:
            _, final, _, _, _ = _descend(problem, grids, step, config.probe_steps, config.momentum,
                                         trace=trace, diverge_at=10 * start)
        except (DivergenceDetected, ArithmeticError):
            continue
        totals = [e.total for e in trace]
        if any(b > a * (1 + 1e-12) for a, b in zip(totals, totals[1:])):
            continue
        if final < best_loss:
            best, best_loss = step, final
    if best is None:
        best = config.step_size * config.probe_factor ** (config.probe_candidates - 1)
    return best * config.probe_safety


def fit_grids(frames, target, config=None, init=None, boundary="clamp", probe=True):
    """Fit the chromatic pair and temporal grid to reproduce ``target``.

    ``frames`` holds the ``T`` hazy frames of the window; the centre one is
    restored.  ``init`` optionally supplies starting grids (for resuming);
    otherwise all grids start at zero.
    """
    from .metrics import psnr

    config = config or FitConfig()
    problem = _Problem(frames, target, config, boundary)
    if init is None:
        grids = problem.zero_grids()
    else:
        grids = [np.array(_coeffs(g), dtype=np.float64) for g in init]
    initial = problem.loss(grids, want_grad=False)[0]
    step = probe_step_size(problem, grids, config) if (probe and config.max_iters > 0) else config.step_size
    log.debug("fit: step %.4g, initial loss %.6g", step, initial)
    trace: List[TraceEntry] = []
    grids, _, last, converged, final_step = _descend(
        problem, grids, step, config.max_iters, config.momentum, trace=trace,
        grad_tol=config.grad_tol, diverge_at=10 * initial, backtrack=True)
    st = problem.forward(grids)
    result = FitResult(ChromaticGrid(grids[0]), ChromaticGrid(grids[1]), TemporalGrid(grids[2]),
                       trace, psnr(st["J_full"], problem.target), step, last, converged,
                       final_step)
    return result


def numerical_gradient_check(frames, target, config=None, num_probes=20, grids=None,
                             step=1e-5, seed=0, boundary="clamp", return_info=False):
    """Worst relative error of the analytic gradient against central differences.

    Probes whose finite-difference stencil changes which pixels are clamped
    are flagged and excluded, since the loss has a kink there, as are probes
    where both derivatives vanish because every pixel they reach saturates.
    """
    config = config or FitConfig()
    problem = _Problem(frames, target, config, boundary)
    grids = problem.zero_grids() if grids is None else [np.array(_coeffs(g), dtype=np.float64) for g in grids]
    _, _, _, grads, st0 = problem.loss(grids)
    rng = np.random.default_rng(seed)
    sizes = [g.size for g in grids]

    def clamp_pattern(state):
        return (np.concatenate([(state["lin"] < 0).ravel(), (state["lin"] > 1).ravel(),
                                (state["pre"] < 0).ravel(), (state["pre"] > 1).ravel()]))

    base = clamp_pattern(st0)
    worst, checked, flagged = 0.0, 0, 0
    for _ in range(num_probes):
        which = int(rng.integers(3))
        idx = np.unravel_index(int(rng.integers(sizes[which])), grids[which].shape)
        vals = []
        patterns = []
        for sgn in (1, -1):
            trial = [g.copy() for g in grids]
            trial[which][idx] += sgn * step
            total, _, _, _, st = problem.loss(trial, want_grad=False)
            vals.append(total)
            patterns.append(clamp_pattern(st))
        if any(np.any(pt != base) for pt in patterns):
            flagged += 1
            continue
        fd = (vals[0] - vals[1]) / (2 * step)
        an = grads[which][idx]
        if abs(an) < 1e-14 and abs(fd) < 1e-14:
            # saturated everywhere the entry reaches: nothing to compare
            flagged += 1
            continue
        err = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
        worst = max(worst, err)
        checked += 1
    if return_info:
        return worst, {"checked": checked, "flagged": flagged}
    return worst
