"""Two-pass haze synthesis from clean frames, raw depth and flow, plus QA.

Pass one (external) supplies per-frame raw depth or disparity and forward
flow at a proxy resolution.  Pass two, implemented here, normalizes depth per
clip, smooths it along the flow, lifts it to full resolution with a guided
filter and renders the hazy frames.  ``qa_checks`` then verifies the bundle.
"""
from dataclasses import dataclass, field, fields
from typing import List, Optional

import numpy as np

from .asm import HazeParams, synthesize, transmission
from .errors import DegenerateField, FormatError, ShapeMismatch
from .resample import resize_bilinear, warp

RANGE_SLACK = 1e-6

# Invented tier table: three scattering strengths times three airlight levels.
HAZE_REGIMES = {
    f"{tier}-{level}": (beta, a)
    for tier, beta in (("light", 0.5), ("moderate", 1.0), ("dense", 2.0))
    for level, a in (("dim", 0.7), ("mid", 0.8), ("bright", 0.9))
}


def regime_params(name):
    try:
        beta, a = HAZE_REGIMES[name]
    except KeyError:
        raise KeyError(f"unknown regime {name!r}; choose from {sorted(HAZE_REGIMES)}") from None
    return HazeParams(beta, a)


@dataclass
class FlowField:
    """Forward flow from one frame to the next, in pixels."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ShapeMismatch(f"u {self.u.shape} and v {self.v.shape} must be equal 2-D shapes")

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a)
        if a.ndim != 3 or a.shape[0] != 2:
            raise ShapeMismatch(f"expected a (2, H, W) flow stack, got {a.shape}")
        return cls(a[0], a[1])

    def stack(self):
        return np.stack([self.u, self.v])

    @property
    def shape(self):
        return self.u.shape

    def resized(self, H, W):
        """Resample to ``(H, W)`` and rescale the displacements to match."""
        h, w = self.shape
        return FlowField(resize_bilinear(self.u, H, W) * (W / w),
                         resize_bilinear(self.v, H, W) * (H / h))


@dataclass
class SequenceBundle:
    clean: List[np.ndarray]
    depth: List[np.ndarray]
    flow: List[FlowField]
    params: Optional[HazeParams] = None
    hazy: List[np.ndarray] = field(default_factory=list)
    trans: List[np.ndarray] = field(default_factory=list)

    @property
    def shape(self):
        return np.shape(self.clean[0])[-2:]

    def __len__(self):
        return len(self.clean)


@dataclass
class SynthConfig:
    lo_pct: float = 1.0
    hi_pct: float = 99.0
    flip: bool = False
    blend: float = 0.3
    radius: int = 8
    eps: float = 1e-4
    theta_d: float = 0.02
    theta_i: float = 0.05

    @classmethod
    def from_text(cls, text, source="<config>"):
        from .io import parse_keyvalue

        kinds = {f.name: type(f.default) for f in fields(cls)}
        kw = {}
        for key, value, n in parse_keyvalue(text, source):
            if key not in kinds:
                raise FormatError(f"{source}:{n}: unknown synthesis key {key!r}")
            kind = kinds[key]
            if kind is bool:
                kw[key] = value.lower() in ("1", "true", "yes", "on")
            else:
                kw[key] = kind(float(value)) if kind is int else float(value)
        return cls(**kw)


def normalize_depth(raw, lo_pct=1.0, hi_pct=99.0, flip=False):
    """Clip to the ``[lo_pct, hi_pct]`` percentiles and rescale to [0, 1].

    ``raw`` may be a single field or a stack of frames, in which case the
    percentiles are taken over the whole clip.  With ``flip`` the result is
    ``1 - d``, turning disparity (large = near) into depth (large = far).
    """
    if not 0 <= lo_pct < hi_pct <= 100:
        raise ValueError(f"need 0 <= lo_pct < hi_pct <= 100, got {lo_pct}, {hi_pct}")
    r = np.asarray(raw, dtype=np.float64)
    lo, hi = np.percentile(r, [lo_pct, hi_pct])
    if hi - lo < 1e-9:
        raise DegenerateField(f"percentile range {hi - lo:.3g} is degenerate")
    d = (np.clip(r, lo, hi) - lo) / (hi - lo)
    return 1.0 - d if flip else d


def _flow_stack(f):
    return f.stack() if isinstance(f, FlowField) else np.asarray(f, dtype=np.float64)


def temporal_smooth_depth(depths, flows, blend=0.3):
    """Causal flow-guided blending ``d'_k = (1-b) d_k + b warp(d'_{k-1})``.

    Where the warped sample leaves the frame the current depth is kept.
    """
    if not 0 <= blend < 1:
        raise ValueError(f"blend must lie in [0, 1), got {blend}")
    depths = [np.asarray(d, dtype=np.float64) for d in depths]
    if len(flows) != len(depths) - 1:
        raise ShapeMismatch(f"{len(depths)} depth frames need {len(depths) - 1} flows, got {len(flows)}")
    if any(d.shape != depths[0].shape for d in depths):
        raise ShapeMismatch("depth frames differ in shape")
    out = [depths[0].copy()]
    for k in range(1, len(depths)):
        w, valid = warp(out[-1], _flow_stack(flows[k - 1]))
        out.append(np.where(valid, (1 - blend) * depths[k] + blend * w, depths[k]))
    return out


def luminance(frame):
    f = np.asarray(frame, dtype=np.float64)
    return 0.299 * f[0] + 0.587 * f[1] + 0.114 * f[2]


def box_mean(x, r):
    """Mean over a ``(2r+1)^2`` window clipped to the image."""
    def along(a, axis):
        n = a.shape[axis]
        c = np.cumsum(a, axis=axis)
        c = np.concatenate([np.zeros_like(np.take(c, [0], axis=axis)), c], axis=axis)
        i = np.arange(n)
        hi = np.minimum(i + r + 1, n)
        lo = np.maximum(i - r, 0)
        shape = [1] * a.ndim
        shape[axis] = n
        return (np.take(c, hi, axis=axis) - np.take(c, lo, axis=axis)) / (hi - lo).reshape(shape)

    return along(along(np.asarray(x, dtype=np.float64), 0), 1)


def guided_upsample(low, guide, radius=8, eps=1e-4):
    """Bilinear upsampling followed by a guided filter on the guide's luminance."""
    low = np.asarray(low, dtype=np.float64)
    guide = np.asarray(guide, dtype=np.float64)
    if guide.ndim == 3:
        g = luminance(guide) if guide.shape[0] == 3 else guide[0]
    else:
        g = guide
    H, W = g.shape
    if low.ndim != 2 or low.shape[0] > H or low.shape[1] > W:
        raise ShapeMismatch(f"cannot upsample {low.shape} onto a {g.shape} guide")
    if radius < 1 or eps <= 0:
        raise ValueError("radius must be >= 1 and eps > 0")
    p = low if low.shape == (H, W) else resize_bilinear(low, H, W)
    mg, mp = box_mean(g, radius), box_mean(p, radius)
    cov = box_mean(g * p, radius) - mg * mp
    var = box_mean(g * g, radius) - mg * mg
    a = cov / (var + eps)
    b = mp - a * mg
    return box_mean(a, radius) * g + box_mean(b, radius)


def prepare_depth(raw_depths, flows, frame_shape, guides, config=SynthConfig()):
    """Normalize, smooth and lift raw proxy depths to full resolution.

    ``flows`` are given at the raw depth's resolution.  The guided-filter
    radius is specified at full resolution.
    """
    d = normalize_depth(np.stack(raw_depths), config.lo_pct, config.hi_pct, config.flip)
    smooth = temporal_smooth_depth(list(d), flows, config.blend)
    if any(tuple(np.shape(g)[-2:]) != tuple(frame_shape) for g in guides):
        raise ShapeMismatch(f"guide frames must all be {tuple(frame_shape)}")
    lifted = [guided_upsample(s, g, config.radius, config.eps) for s, g in zip(smooth, guides)]
    return [np.clip(x, 0.0, 1.0) for x in lifted]


def render_sequence(bundle, params):
    """Fill in transmission and hazy frames with one ``(beta, A_inf)`` per clip."""
    trans = [transmission(d, params.beta) for d in bundle.depth]
    hazy = [synthesize(J, t, params) for J, t in zip(bundle.clean, trans)]
    return SequenceBundle(list(bundle.clean), list(bundle.depth), list(bundle.flow),
                          params, hazy, trans)


def build_sequence(clean, raw_depths, raw_flows, params, config=SynthConfig()):
    """Full pass two: flows are resized to the frame size for storage."""
    clean = [np.asarray(c, dtype=np.float64) for c in clean]
    H, W = clean[0].shape[-2:]
    flows = [f if isinstance(f, FlowField) else FlowField.from_array(f) for f in raw_flows]
    depth = prepare_depth(raw_depths, flows, (H, W), clean, config)
    full_flows = [f if f.shape == (H, W) else f.resized(H, W) for f in flows]
    return render_sequence(SequenceBundle(clean, depth, full_flows), params)


@dataclass
class QAResult:
    name: str
    passed: bool
    value: float
    bound: float
    detail: str = ""


@dataclass
class QAReport:
    checks: List[QAResult]

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self):
        lines = [f"{c.name}: {'PASS' if c.passed else 'FAIL'} value={c.value:.6g} bound={c.bound:.6g}"
                 + (f" ({c.detail})" if c.detail else "") for c in self.checks]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"


QA_NAMES = ("alignment", "depth_stability", "haze_consistency", "airlight_roundtrip", "pixel_range")


def _check_alignment(b):
    T = len(b.clean)
    counts = {"clean": T, "depth": len(b.depth), "hazy": len(b.hazy), "trans": len(b.trans)}
    problems = [f"{k} has {n} frames, expected {T}" for k, n in counts.items() if n != T]
    if len(b.flow) != max(T - 1, 0):
        problems.append(f"flow has {len(b.flow)} fields, expected {max(T - 1, 0)}")
    shape = tuple(b.shape) if T else None
    for k in ("clean", "depth", "hazy", "trans"):
        for i, x in enumerate(getattr(b, k)):
            if tuple(np.shape(x)[-2:]) != shape:
                problems.append(f"{k}[{i}] is {np.shape(x)[-2:]}, expected {shape}")
    for i, f in enumerate(b.flow):
        if tuple(_flow_stack(f).shape[-2:]) != shape:
            problems.append(f"flow[{i}] is {_flow_stack(f).shape[-2:]}, expected {shape}")
    return QAResult("alignment", not problems, float(len(problems)), 0.0, "; ".join(problems))


def _check_depth(b, theta):
    worst, at = 0.0, -1
    n = min(len(b.depth) - 1, len(b.flow))
    for k in range(n):
        prev, cur = np.asarray(b.depth[k]), np.asarray(b.depth[k + 1])
        fl = _flow_stack(b.flow[k])
        if prev.shape != cur.shape or fl.shape[1:] != cur.shape:
            continue
        w, valid = warp(prev, fl)
        if valid.any():
            e = float(np.mean(np.abs(cur - w)[valid]))
            if e > worst:
                worst, at = e, k + 1
    return QAResult("depth_stability", worst <= theta, worst, theta,
                    f"worst at frame {at}" if at >= 0 else "")


def _check_haze(b, theta):
    worst, worst_bound, at = 0.0, theta, -1
    margin = -np.inf
    n = min(len(b.hazy), len(b.clean))
    for k in range(1, n):
        dI = float(np.mean(np.abs(np.asarray(b.hazy[k]) - np.asarray(b.hazy[k - 1]))))
        dJ = float(np.mean(np.abs(np.asarray(b.clean[k]) - np.asarray(b.clean[k - 1]))))
        if dI - (theta + dJ) > margin:
            margin, worst, worst_bound, at = dI - (theta + dJ), dI, theta + dJ, k
    ok = margin <= 0
    return QAResult("haze_consistency", ok, worst, worst_bound, f"worst at frame {at}" if at >= 0 else "")


def airlight_estimates(hazy, clean, t, min_haze=0.1):
    """Per-pixel ``(I - J t) / (1 - t)`` where ``1 - t >= min_haze``, shape ``(3, n)``."""
    I, J, t = (np.asarray(x, dtype=np.float64) for x in (hazy, clean, t))
    mask = (1.0 - t) >= min_haze
    return ((I - J * t) / np.where(mask, 1.0 - t, 1.0))[:, mask]


def _check_airlight(b, med_tol=1e-4, iqr_tol=1e-3):
    if b.params is None:
        return QAResult("airlight_roundtrip", False, np.inf, med_tol, "no haze parameters")
    A = np.asarray(b.params.A_inf).reshape(3, 1)
    failed, worst_med, worst_iqr, diag = [], 0.0, 0.0, []
    for k, (I, J, t) in enumerate(zip(b.hazy, b.clean, b.trans)):
        if np.shape(I) != np.shape(J) or np.shape(I)[1:] != np.shape(t):
            failed.append(k)
            continue
        est = airlight_estimates(I, J, t)
        if est.shape[1] == 0:
            diag.append(f"frame {k}: no pixel with 1-t >= 0.1")
            continue
        dev = np.abs(est - A).ravel()
        med = float(np.median(dev))
        q1, q3 = np.percentile(est - A, [25, 75], axis=1)
        iqr = float(np.max(q3 - q1))
        worst_med, worst_iqr = max(worst_med, med), max(worst_iqr, iqr)
        if med > med_tol or iqr > iqr_tol:
            failed.append(k)
            diag.append(f"frame {k}: median {med:.3g}, iqr {iqr:.3g}")
    detail = "; ".join(diag) if diag else f"iqr {worst_iqr:.3g}"
    return QAResult("airlight_roundtrip", not failed, worst_med, med_tol,
                    (f"failed frames {failed}; " if failed else "") + detail)


def _check_range(b):
    s = RANGE_SLACK
    bad = []

    def within(name, xs, lo, hi, lo_open=False):
        for i, x in enumerate(xs):
            x = np.asarray(x)
            if not np.all(np.isfinite(x)):
                bad.append(f"{name}[{i}] not finite")
            elif x.min() < lo - s or x.max() > hi + s or (lo_open and x.min() <= 0):
                bad.append(f"{name}[{i}] in [{x.min():.6g}, {x.max():.6g}]")

    within("clean", b.clean, 0, 1)
    within("hazy", b.hazy, 0, 1)
    within("depth", b.depth, 0, 1)
    within("trans", b.trans, 0, 1, lo_open=True)
    H, W = b.shape
    for i, f in enumerate(b.flow):
        a = _flow_stack(f)
        if not np.all(np.isfinite(a)) or np.abs(a).max(initial=0) > min(H, W):
            bad.append(f"flow[{i}] non-finite or beyond {min(H, W)} px")
    return QAResult("pixel_range", not bad, float(len(bad)), 0.0, "; ".join(bad))


def qa_checks(bundle, theta_d=0.02, theta_i=0.05):
    """Run the five bundle checks; failures are recorded, never raised."""
    return QAReport([
        _check_alignment(bundle),
        _check_depth(bundle, theta_d),
        _check_haze(bundle, theta_i),
        _check_airlight(bundle),
        _check_range(bundle),
    ])
