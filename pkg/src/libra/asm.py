"""Atmospheric scattering model: haze rendering and its per-pixel affine inverse."""
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyMask, ShapeMismatch

DEPTH_SLACK = 1e-6
T_FLOOR = 0.01


@dataclass(frozen=True)
class HazeParams:
    """Scattering coefficient ``beta`` and per-channel atmospheric light."""

    beta: float
    A_inf: tuple

    def __post_init__(self):
        a = np.broadcast_to(np.asarray(self.A_inf, dtype=float), (3,))
        object.__setattr__(self, "A_inf", tuple(float(v) for v in a))
        if not np.isfinite(self.beta) or self.beta <= 0:
            raise DomainError(f"beta must be positive, got {self.beta}")
        if np.any(a < 0) or np.any(a > 1):
            raise DomainError(f"A_inf components must lie in [0, 1], got {self.A_inf}")

    @property
    def a_inf(self):
        """Atmospheric light as a ``(3, 1, 1)`` array, ready to broadcast."""
        return np.asarray(self.A_inf).reshape(3, 1, 1)


def _check_frame(frame, t):
    frame = np.asarray(frame, dtype=float)
    t = np.asarray(t, dtype=float)
    if frame.ndim != 3 or frame.shape[0] != 3 or frame.shape[1:] != t.shape:
        raise ShapeMismatch(f"frame {frame.shape} and field {t.shape} disagree")
    return frame, t


def transmission(depth, beta):
    """``exp(-beta * d)`` for normalized depth ``d`` in [0, 1]."""
    d = np.asarray(depth, dtype=float)
    if not np.isfinite(beta) or beta <= 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if d.size and (d.min() < -DEPTH_SLACK or d.max() > 1 + DEPTH_SLACK):
        raise DomainError(f"depth outside [0, 1]: range [{d.min():.6g}, {d.max():.6g}]")
    return np.exp(-beta * np.clip(d, 0.0, 1.0))


def synthesize(clean, t, params):
    """Render haze: ``I = J t + A (1 - t)``."""
    J, t = _check_frame(clean, t)
    return J * t + params.a_inf * (1.0 - t)


def invert_oracle(hazy, t, params, t_floor=T_FLOOR):
    """Closed-form dehazing ``J = (I - A) / max(t, t_floor) + A``, clamped to [0, 1]."""
    if not 0 < t_floor <= 0.2:
        raise DomainError(f"t_floor must lie in (0, 0.2], got {t_floor}")
    I, t = _check_frame(hazy, t)
    A = params.a_inf
    return np.clip((I - A) / np.maximum(t, t_floor) + A, 0.0, 1.0)


def oracle_gain_offset(t, params, t_floor=T_FLOOR):
    """Scalar gain ``a = 1/t`` and per-channel offset ``b = A (1 - a)``."""
    a = 1.0 / np.maximum(np.asarray(t, dtype=float), t_floor)
    return a, params.a_inf * (1.0 - a)


def oracle_coeffs(t, params, t_floor=T_FLOOR):
    """Coefficient field whose Cayley image is ``(a I_3, b)`` at each pixel.

    The matrix part is ``diag(m, m, m)`` with ``m = 2(a - 1)/(a + 1)``, the
    scalar inverse of the Cayley map.
    """
    a, b = oracle_gain_offset(t, params, t_floor)
    if np.any(a <= 0):
        raise DomainError("gain must be positive for a Cayley preimage to exist")
    m = 2.0 * (a - 1.0) / (a + 1.0)
    c = np.zeros((12,) + a.shape)
    c[0] = c[4] = c[8] = m
    c[9:] = b
    return c


def _fwd_diff(x, axis):
    d = np.zeros_like(x)
    sl_hi = [slice(None)] * x.ndim
    sl_lo = [slice(None)] * x.ndim
    sl_hi[axis] = slice(1, None)
    sl_lo[axis] = slice(None, -1)
    d[tuple(sl_lo)] = x[tuple(sl_hi)] - x[tuple(sl_lo)]
    return d


def gradient_attenuation_check(hazy, clean, t, tol=1e-6):
    """Check ``grad I = t grad J`` where the transmission is locally flat.

    Returns ``(max_dev, mask_fraction)``: the worst deviation over pixels
    whose transmission forward differences are both below ``tol``, and the
    fraction of pixels in that mask.
    """
    I, t = _check_frame(hazy, t)
    J, _ = _check_frame(clean, t)
    mask = np.ones(t.shape, dtype=bool)
    devs = []
    for axis in (1, 2):
        dt = _fwd_diff(t, axis - 1)
        mask &= np.abs(dt) < tol
        devs.append(np.max(np.abs(_fwd_diff(I, axis) - t * _fwd_diff(J, axis)), axis=0))
    if not mask.any():
        raise EmptyMask("no pixel has a locally constant transmission")
    dev = np.maximum(devs[0], devs[1])
    return float(dev[mask].max()), float(mask.mean())
