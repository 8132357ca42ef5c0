"""3x3 Lie-algebra arithmetic and the Cayley chart onto GL(3).

All functions broadcast over leading axes: a "matrix" argument is any array
of shape ``(..., 3, 3)``.  The resolvent ``I - M/2`` is inverted in closed
form through its adjugate, never through a general LU.
"""
from dataclasses import dataclass, field
from typing import List, Tuple
import warnings

import numpy as np

from .errors import DegenerateFit, SingularResolvent

DET_TOL = 1e-9

_EYE = np.eye(3)


@dataclass(frozen=True)
class AffineCoeff:
    """Twelve coefficients of aff(3): a gl(3) matrix part plus a translation."""

    matrix_part: np.ndarray
    translation: np.ndarray

    @classmethod
    def from_vector(cls, c):
        c = np.asarray(c, dtype=float)
        if c.shape != (12,):
            raise ValueError(f"expected 12 coefficients, got shape {c.shape}")
        return cls(c[:9].reshape(3, 3).copy(), c[9:].copy())

    def to_vector(self):
        return np.concatenate([np.ravel(self.matrix_part), np.ravel(self.translation)])

    def to_transform(self):
        return AffineTransform(cayley(self.matrix_part), np.array(self.translation, dtype=float))


@dataclass(frozen=True)
class AffineTransform:
    A: np.ndarray
    b: np.ndarray

    def __call__(self, rgb):
        return self.A @ np.asarray(rgb) + self.b


def adjugate(R):
    """Adjugate (transposed cofactor matrix) of ``(..., 3, 3)``."""
    R = np.asarray(R)
    r = [[R[..., i, j] for j in range(3)] for i in range(3)]
    adj = np.empty_like(R)
    for i in range(3):
        for j in range(3):
            # cofactor C_ji
            a, b = (i + 1) % 3, (i + 2) % 3
            c, d = (j + 1) % 3, (j + 2) % 3
            adj[..., i, j] = r[c][a] * r[d][b] - r[c][b] * r[d][a]
    return adj


def det3(R):
    R = np.asarray(R)
    return (
        R[..., 0, 0] * (R[..., 1, 1] * R[..., 2, 2] - R[..., 1, 2] * R[..., 2, 1])
        - R[..., 0, 1] * (R[..., 1, 0] * R[..., 2, 2] - R[..., 1, 2] * R[..., 2, 0])
        + R[..., 0, 2] * (R[..., 1, 0] * R[..., 2, 1] - R[..., 1, 1] * R[..., 2, 0])
    )


def resolvent_inverse(M):
    """Return ``(I - M/2)^-1`` in closed form.

    Raises SingularResolvent when ``|det(I - M/2)| < 1e-9`` anywhere.
    """
    R = _EYE - 0.5 * np.asarray(M, dtype=float)
    det = det3(R)
    bad = np.abs(det) < DET_TOL
    if np.any(bad):
        where = tuple(int(i) for i in np.argwhere(bad)[0]) if bad.ndim else None
        raise SingularResolvent(
            f"|det(I - M/2)| < {DET_TOL:g}; M is outside the Cayley operating region",
            pixel=where,
        )
    return adjugate(R) / det[..., None, None]


def cayley(M):
    """Cayley map ``(I - M/2)^-1 (I + M/2)``.

    >>> cayley(np.zeros((3, 3)))
    array([[1., 0., 0.],
           [0., 1., 0.],
           [0., 0., 1.]])
    """
    M = np.asarray(M, dtype=float)
    return resolvent_inverse(M) @ (_EYE + 0.5 * M)


def cayley_differential(M, dM):
    """Directional derivative of :func:`cayley` at ``M`` along ``dM``.

    Uses ``dCay = (I - M/2)^-1 (dM/2) (Cay(M) + I)``.
    """
    M = np.asarray(M, dtype=float)
    Rinv = resolvent_inverse(M)
    A = Rinv @ (_EYE + 0.5 * M)
    return Rinv @ (0.5 * np.asarray(dM, dtype=float)) @ (A + _EYE)


def cayley_vjp(M, G, A=None, Rinv=None):
    """Pull a cotangent ``G`` on ``Cay(M)`` back to ``M``.

    Transpose of :func:`cayley_differential`:
    ``grad_M = 1/2 R^-T G (A + I)^T``.  ``A`` and ``Rinv`` may be passed in
    when the caller already has them.
    """
    M = np.asarray(M, dtype=float)
    if Rinv is None:
        Rinv = resolvent_inverse(M)
    if A is None:
        A = Rinv @ (_EYE + 0.5 * M)
    return 0.5 * np.swapaxes(Rinv, -1, -2) @ G @ np.swapaxes(A + _EYE, -1, -2)


def commutator(Ma, Mb):
    Ma = np.asarray(Ma, dtype=float)
    Mb = np.asarray(Mb, dtype=float)
    return Ma @ Mb - Mb @ Ma


def composition_residual(M_chi, M_tau, relative=True):
    """Error of replacing group composition by algebra addition.

    ``||Cay(Mc + Mt) - Cay(Mc) Cay(Mt)||_F``, divided by
    ``||Cay(Mc) Cay(Mt)||_F`` when ``relative`` (the default).
    """
    prod = cayley(M_chi) @ cayley(M_tau)
    diff = cayley(np.asarray(M_chi) + np.asarray(M_tau)) - prod
    err = np.linalg.norm(diff, axis=(-2, -1))
    if relative:
        err = err / np.linalg.norm(prod, axis=(-2, -1))
    return err


def random_matrices(rng, norms, commuting=False):
    """Gaussian 3x3 matrices rescaled to exact Frobenius ``norms``.

    With ``commuting`` the matrices are diagonal, so any two of them commute.
    """
    norms = np.asarray(norms, dtype=float)
    if commuting:
        M = np.zeros(norms.shape + (3, 3))
        d = rng.standard_normal(norms.shape + (3,))
        M[..., [0, 1, 2], [0, 1, 2]] = d
    else:
        M = rng.standard_normal(norms.shape + (3, 3))
    scale = norms / np.linalg.norm(M, axis=(-2, -1))
    return M * scale[..., None, None]


@dataclass
class SlopeProbe:
    slope: float
    intercept: float
    samples: List[Tuple[float, float]] = field(default_factory=list)


def prop1_slope_probe(num_pairs=200, rho_min=1e-3, rho_max=0.5, seed=0,
                      commuting=False, relative=True):
    """Fit the log-log slope of the composition error against ``||M||_F^2``.

    Pairs are drawn at log-spaced scales ``rho`` in ``[rho_min, rho_max]``;
    both members of a pair have Frobenius norm exactly ``rho``.  A generic
    pair gives a slope near 1 (error quadratic in rho); commuting pairs give
    a slope near 3/2 (cubic error).
    """
    if num_pairs < 20:
        raise ValueError("num_pairs must be at least 20")
    if not (0.0 < rho_min <= rho_max < 1.0):
        raise ValueError("need 0 < rho_min <= rho_max < 1")
    rng = np.random.default_rng(seed)
    rho = np.geomspace(rho_min, rho_max, num_pairs)
    Ma = random_matrices(rng, rho, commuting)
    Mb = random_matrices(rng, rho, commuting)
    eps = composition_residual(Ma, Mb, relative=relative)
    x = rho ** 2
    samples = list(zip(x.tolist(), eps.tolist()))
    ok = eps > 1e-14
    if not np.any(ok):
        raise DegenerateFit("all composition errors are below 1e-14")
    lx = np.log(x[ok])
    if np.ptp(lx) < 1e-12 or ok.sum() < 2:
        raise DegenerateFit("no spread in ||M||_F^2; cannot fit a slope")
    if ok.sum() < len(ok):
        warnings.warn(f"{len(ok) - ok.sum()} samples below 1e-14 dropped from the fit")
    slope, intercept = np.polyfit(lx, np.log(eps[ok]), 1)
    return SlopeProbe(float(slope), float(intercept), samples)
