"""Vapor-cell model: self-rotation gl and absorption al versus laser detuning.

Each spectral line contributes a dispersive (odd) self-rotation profile and
an even absorption profile.  Detunings are in GHz.  All amplitudes in
:func:`default_model` are illustrative; they are chosen only to give the
familiar two-feature picture of a Rb D2 scan with two weak side lobes.
"""

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidParameterError, ModelInvalidError
from .gaussian_core import GaussianState, apply_loss, shear

EPS_MAX = 0.3
EPS_WARN = 0.1


class LineShape(str, Enum):
    GAUSSIAN = "gaussian"
    LORENTZIAN = "lorentzian"


@dataclass(frozen=True)
class LineComponent:
    """One absorption feature.

    ``width`` is the HWHM of the dispersive rotation profile (and of the
    Lorentzian absorption); for Gaussian absorption it is the 1/e half-width.
    """

    center: float
    width: float
    rotation_amplitude: float
    absorption_amplitude: float
    shape: LineShape = LineShape.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "shape", LineShape(self.shape))
        if not self.width > 0:
            raise InvalidParameterError(f"line width must be > 0, got {self.width}")
        if not self.absorption_amplitude >= 0:
            raise InvalidParameterError("absorption amplitude must be >= 0")

    def rotation(self, detuning):
        d = np.asarray(detuning, dtype=float) - self.center
        w = self.width
        return self.rotation_amplitude * 2.0 * d * w / (d * d + w * w)

    def absorption(self, detuning):
        d = np.asarray(detuning, dtype=float) - self.center
        w = self.width
        if self.shape is LineShape.GAUSSIAN:
            prof = np.exp(-((d / w) ** 2))
        else:
            prof = w * w / (d * d + w * w)
        return self.absorption_amplitude * prof


@dataclass(frozen=True)
class MediumModel:
    lines: Tuple[LineComponent, ...]
    temperature_label: str = ""
    slices: int = 1
    saturation_cubic: float = 0.0
    window: Tuple[float, float] = (-np.inf, np.inf)

    def __post_init__(self):
        object.__setattr__(self, "lines", tuple(self.lines))
        if int(self.slices) != self.slices or self.slices < 1:
            raise InvalidParameterError(f"slices must be a positive integer, got {self.slices}")
        if not self.saturation_cubic >= 0:
            raise InvalidParameterError("saturation_cubic must be >= 0")
        lo, hi = self.window
        if not lo < hi:
            raise InvalidParameterError("detuning window must satisfy low < high")

    def in_window(self, detuning) -> bool:
        d = np.asarray(detuning, dtype=float)
        lo, hi = self.window
        return bool(np.all((d >= lo) & (d <= hi)))


def default_model(slices: int = 1) -> MediumModel:
    """Two 87Rb ground-state hyperfine features plus two weak 85Rb side lobes.

    Zero detuning sits on the strongest absorption feature.
    """
    lines = (
        LineComponent(0.0, 0.45, 1.0, 0.55),
        LineComponent(6.83, 0.45, 0.7, 0.35),
        LineComponent(1.0, 0.35, 0.12, 0.06),
        LineComponent(4.0, 0.35, 0.08, 0.04),
    )
    return MediumModel(lines, temperature_label="70 C", slices=slices, window=(-3.0, 10.0))


def gl_at(model: MediumModel, detuning):
    """Self-rotation parameter gl at ``detuning`` (scalar or array)."""
    d = np.asarray(detuning, dtype=float)
    out = np.zeros_like(d)
    for line in model.lines:
        out = out + line.rotation(d)
    return float(out) if out.ndim == 0 else out


def alpha_at(model: MediumModel, detuning):
    """Absorbed fraction al at ``detuning``; raises if it reaches 1 anywhere."""
    d = np.asarray(detuning, dtype=float)
    out = np.zeros_like(d)
    for line in model.lines:
        out = out + line.absorption(d)
    if np.any(out >= 1.0):
        worst = float(np.max(out))
        raise ModelInvalidError(f"total absorption {worst:.4f} >= 1 on requested detunings")
    return float(out) if out.ndim == 0 else out


def check_ellipticity(eps) -> None:
    a = np.abs(np.asarray(eps, dtype=float))
    if not np.all(np.isfinite(a)) or np.any(a > EPS_MAX):
        raise InvalidParameterError(f"|ellipticity| must be <= {EPS_MAX}")
    if np.any(a > EPS_WARN):
        warnings.warn(f"ellipticity above {EPS_WARN}: small-angle model is approximate",
                      stacklevel=3)


def rotation_angle(gl, eps, saturation_cubic: float = 0.0):
    """phi = gl*eps - sat3*gl*eps**3 for known gl."""
    eps = np.asarray(eps, dtype=float)
    phi = gl * eps - saturation_cubic * gl * eps ** 3
    return float(phi) if np.ndim(phi) == 0 else phi


def self_rotation_angle(model: MediumModel, detuning: float, eps):
    check_ellipticity(eps)
    return rotation_angle(gl_at(model, detuning), eps, model.saturation_cubic)


def propagate_values(state: GaussianState, gl: float, alpha_l: float,
                     slices: int = 1) -> GaussianState:
    """Send ``state`` through a medium of total shear ``gl`` and loss ``alpha_l``.

    ``slices == 1`` is the lumped model: full shear, then all loss at the exit.
    For ``slices > 1`` each slice applies half its loss, a shear of gl/N and
    the other half of its loss.  Per-slice transmission is (1-al)**(1/N), so
    total linear transmission is exact for every N.
    """
    if not 0.0 <= alpha_l < 1.0:
        raise InvalidParameterError(f"alpha_l must lie in [0, 1), got {alpha_l}")
    n = int(slices)
    if n < 1:
        raise InvalidParameterError("slices must be >= 1")
    if n == 1:
        return apply_loss(shear(state, gl), alpha_l)

    half = -np.expm1(np.log1p(-alpha_l) / (2 * n))
    S = np.array([[1.0, gl / n], [0.0, 1.0]])
    t = 1.0 - half
    mean = np.array(state.mean)
    cov = np.array(state.cov)
    eye = np.eye(2)
    for _ in range(n):
        cov = t * cov + half * eye
        cov = S @ cov @ S.T
        cov = t * cov + half * eye
        mean = t * (S @ mean)
    return GaussianState(mean, cov)


def propagate(model: MediumModel, detuning: float, state: GaussianState,
              gl_scale: float = 1.0, slices: Optional[int] = None) -> GaussianState:
    """Cell output for ``state`` at ``detuning``.

    ``gl_scale`` multiplies gl (used by the optional RF roll-off).
    """
    gl = gl_at(model, detuning) * gl_scale
    al = alpha_at(model, detuning)
    return propagate_values(state, gl, al, model.slices if slices is None else slices)


def absorption_peak(model: MediumModel, grid: Sequence[float]) -> Tuple[float, float]:
    """(detuning, al) of the maximum absorption on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    a = alpha_at(model, grid)
    i = int(np.argmax(a))
    return float(grid[i]), float(a[i])
