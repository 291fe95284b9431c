"""Single-mode Gaussian state algebra in SQL-normalized units.

Quadratures are ordered (X, P), with X in phase with the pump field.
The vacuum has covariance equal to the identity, so every variance returned
here is directly a noise level relative to the standard quantum limit.

The measured quadrature at local-oscillator phase ``chi`` is
``c = (cos chi, -sin chi)``.  With that sign, a positive shear followed by
lumped loss gives the familiar self-rotation noise formula::

    V(chi) = (1 - a) * (1 - 2 s sin(chi) cos(chi) + s**2 cos(chi)**2) + a
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import DegenerateStateError, InvalidParameterError

DET_TOL = 1e-9
_SINGULAR_DET = 1e-12


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Probe-mode Gaussian state.

    Attributes:
        mean: quadrature means (X, P).
        cov: 2x2 symmetric covariance, vacuum = identity.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = _readonly(self.mean)
        cov = np.array(self.cov, dtype=float)
        if mean.shape != (2,):
            raise InvalidParameterError(f"mean must have shape (2,), got {mean.shape}")
        if cov.shape != (2, 2):
            raise InvalidParameterError(f"cov must have shape (2, 2), got {cov.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidParameterError("state contains non-finite entries")
        # exact symmetry by construction
        off = 0.5 * (cov[0, 1] + cov[1, 0])
        cov[0, 1] = cov[1, 0] = off
        if np.linalg.eigvalsh(cov)[0] <= 0:
            raise InvalidParameterError("covariance must be positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", _readonly(cov))

    @property
    def det(self) -> float:
        c = self.cov
        return float(c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0])

    def is_physical(self, tol: float = DET_TOL) -> bool:
        """Heisenberg bound det(cov) >= 1 (within ``tol``)."""
        return self.det >= 1.0 - tol

    def allclose(self, other: "GaussianState", atol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.mean, other.mean, rtol=0, atol=atol)
            and np.allclose(self.cov, other.cov, rtol=0, atol=atol)
        )


def _check_finite(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise InvalidParameterError(f"{name} must be finite, got {value}")
    return value


def _transform(state: GaussianState, S: np.ndarray) -> GaussianState:
    return GaussianState(S @ state.mean, S @ state.cov @ S.T)


def vacuum() -> GaussianState:
    return GaussianState(np.zeros(2), np.eye(2))


def shear_matrix(s: float) -> np.ndarray:
    return np.array([[1.0, s], [0.0, 1.0]])


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def shear(state: GaussianState, s: float) -> GaussianState:
    """Phase-space shear X -> X + s P, P -> P.

    This is the exact action of self-rotation on the orthogonal vacuum
    mode; ``s`` is the dimensionless self-rotation strength ``gl``.
    """
    s = _check_finite("shear strength", s)
    return _transform(state, shear_matrix(s))


def rotate(state: GaussianState, theta: float) -> GaussianState:
    """Rotate the state so that ``variance_at(rotate(st, t), chi) == variance_at(st, chi + t)``."""
    theta = _check_finite("theta", theta)
    return _transform(state, rotation_matrix(theta))


def apply_loss(state: GaussianState, loss_fraction: float) -> GaussianState:
    """Beam-splitter loss: mix a fraction ``loss_fraction`` of vacuum into the mode."""
    loss = float(loss_fraction)
    if not 0.0 <= loss <= 1.0:
        raise InvalidParameterError(f"loss fraction must lie in [0, 1], got {loss_fraction}")
    t = 1.0 - loss
    return GaussianState(np.sqrt(t) * state.mean, t * state.cov + loss * np.eye(2))


def add_isotropic_noise(state: GaussianState, n: float) -> GaussianState:
    """Add phase-insensitive noise of variance ``n`` (SQL units)."""
    n = float(n)
    if not n >= 0.0:
        raise InvalidParameterError(f"noise variance must be >= 0, got {n}")
    return GaussianState(state.mean, state.cov + n * np.eye(2))


def quadrature_vector(chi):
    chi = np.asarray(chi, dtype=float)
    return np.cos(chi), -np.sin(chi)


def variance_at(state: GaussianState, chi):
    """Quadrature variance at LO phase ``chi`` (scalar or array)."""
    cx, cp = quadrature_vector(chi)
    c = state.cov
    v = c[0, 0] * cx * cx + 2.0 * c[0, 1] * cx * cp + c[1, 1] * cp * cp
    return float(v) if np.ndim(v) == 0 else v


def min_max_variance(state: GaussianState, tie_tol: float = 1e-14) -> Tuple[float, float, float]:
    """Extreme quadrature variances and the LO phase of the minimum.

    Returns ``(v_min, v_max, chi_min)`` with ``chi_min`` in [0, pi).
    Isotropic states report ``chi_min = 0``.
    """
    w, vecs = np.linalg.eigh(state.cov)
    v_min, v_max = float(w[0]), float(w[1])
    if v_max - v_min <= tie_tol * max(1.0, v_max):
        return v_min, v_max, 0.0
    vx, vp = vecs[:, 0]
    chi = float(np.mod(np.arctan2(-vp, vx), np.pi))
    if chi >= np.pi:
        chi = 0.0
    return v_min, v_max, chi


def to_db(relative_variance):
    """Noise relative to SQL in decibels; negative means squeezed."""
    r = np.asarray(relative_variance, dtype=float)
    if np.any(~(r > 0)):
        raise InvalidParameterError("relative variance must be positive")
    out = 10.0 * np.log10(r)
    return float(out) if out.ndim == 0 else out


def from_db(db):
    out = 10.0 ** (np.asarray(db, dtype=float) / 10.0)
    return float(out) if out.ndim == 0 else out


def wigner_grid(state: GaussianState, x_range, p_range, n_points: int):
    """Evaluate the Wigner function on a regular grid.

    Args:
        state: Gaussian state.
        x_range, p_range: (low, high) bounds of each axis.
        n_points: samples per axis (>= 2).

    Returns:
        ``(x, p, W)`` where ``W[i, j]`` is the density at ``(x[i], p[j])``.
    """
    n_points = int(n_points)
    if n_points < 2:
        raise InvalidParameterError("n_points must be >= 2")
    bounds = np.array([*x_range, *p_range], dtype=float)
    if bounds.shape != (4,) or not np.all(np.isfinite(bounds)):
        raise InvalidParameterError("grid ranges must be finite (low, high) pairs")
    det = state.det
    if det < _SINGULAR_DET:
        raise DegenerateStateError(f"covariance determinant {det:.3e} is singular")

    x = np.linspace(bounds[0], bounds[1], n_points)
    p = np.linspace(bounds[2], bounds[3], n_points)
    X, P = np.meshgrid(x - state.mean[0], p - state.mean[1], indexing="ij")
    inv = np.linalg.inv(state.cov)
    q = inv[0, 0] * X * X + 2.0 * inv[0, 1] * X * P + inv[1, 1] * P * P
    W = np.exp(-0.5 * q) / (2.0 * np.pi * np.sqrt(det))
    return x, p, W


def auto_wigner_range(state: GaussianState, n_sigma: float = 6.0):
    """Square window covering ``n_sigma`` standard deviations of the widest axis."""
    half = n_sigma * np.sqrt(np.linalg.eigvalsh(state.cov)[-1])
    mx, mp = state.mean
    return (mx - half, mx + half), (mp - half, mp + half)
