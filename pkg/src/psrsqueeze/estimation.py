"""Parameter recovery from polarimeter scans and homodyne noise traces."""

import itertools
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from .detection import DetectionChain, NoiseTrace
from .errors import DegenerateFitError, InvalidParameterError
from .gaussian_core import to_db

TRACE_PARAMS = ("gl", "alpha_l", "excess", "n_el")
MAX_ITERATIONS = 200
FTOL = 1e-10
GTOL = 1e-8
N_STARTS = 8
_ALPHA_MAX = 1.0 - 1e-9


@dataclass
class PolarimeterScan:
    epsilons: np.ndarray
    angles: np.ndarray
    detuning: float = float("nan")

    def __post_init__(self):
        self.epsilons = np.asarray(self.epsilons, dtype=float)
        self.angles = np.asarray(self.angles, dtype=float)
        if self.epsilons.ndim != 1 or self.epsilons.shape != self.angles.shape:
            raise InvalidParameterError("epsilons and angles must be 1-D and of equal length")
        if self.epsilons.size < 4:
            raise InvalidParameterError("a polarimeter scan needs at least 4 points")


@dataclass
class FitResult:
    params: Dict[str, float]
    stderr: Dict[str, float]
    residual_rms: float
    converged: bool
    iterations: int
    message: str = ""
    residuals: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "params": {k: float(v) for k, v in self.params.items()},
            "stderr": {k: float(v) for k, v in self.stderr.items()},
            "residual_rms": float(self.residual_rms),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }


def fit_gl_polynomial(scan: PolarimeterScan, odd_degree: int = 1) -> FitResult:
    """Fit phi = c1*eps (+ c3*eps**3) through the origin; gl is c1.

    The cubic coefficient is reported as ``c3``.  Standard errors come from
    the residual variance.
    """
    if odd_degree not in (1, 3):
        raise InvalidParameterError("odd_degree must be 1 or 3")
    eps, phi = scan.epsilons, scan.angles
    if odd_degree == 3 and eps.size < 6:
        raise InvalidParameterError("a cubic fit needs at least 6 points")
    cols = [eps] if odd_degree == 1 else [eps, eps ** 3]
    X = np.column_stack(cols)
    if np.linalg.matrix_rank(X) < X.shape[1] or np.unique(eps).size < X.shape[1]:
        raise DegenerateFitError("ellipticities do not span the polynomial basis")

    coef, *_ = np.linalg.lstsq(X, phi, rcond=None)
    resid = phi - X @ coef
    dof = eps.size - X.shape[1]
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    names = ["gl", "c3"][: X.shape[1]]
    return FitResult(
        params=dict(zip(names, map(float, coef))),
        stderr=dict(zip(names, map(float, np.sqrt(np.diag(cov))))),
        residual_rms=float(np.sqrt(np.mean(resid ** 2))),
        converged=True,
        iterations=1,
        residuals=resid,
    )


def trace_model(chis, chain: DetectionChain, gl: float, alpha_l: float, excess: float,
                n_el: float):
    """Lumped-loss homodyne noise versus LO phase, vectorized over ``chis``."""
    s, c = np.sin(chis), np.cos(chis)
    eta = chain.total_efficiency
    cell = (1.0 - alpha_l) * (1.0 - 2.0 * gl * s * c + gl * gl * c * c) + alpha_l + excess
    return eta * cell + (1.0 - eta) + n_el


def _trace_jacobian(chis, chain, gl, alpha_l, excess, n_el):
    s, c = np.sin(chis), np.cos(chis)
    eta = chain.total_efficiency
    shape = 1.0 - 2.0 * gl * s * c + gl * gl * c * c
    return {
        "gl": eta * (1.0 - alpha_l) * (-2.0 * s * c + 2.0 * gl * c * c),
        "alpha_l": eta * (1.0 - shape),
        "excess": np.full_like(chis, eta),
        "n_el": np.ones_like(chis),
    }


def _starts(free: Sequence[str], guess: Mapping[str, float]):
    coarse = {
        "gl": [-2.0, -0.5, 0.5, 2.0],
        "alpha_l": [0.05, 0.5],
        "excess": [guess["excess"]],
        "n_el": [guess["n_el"]],
    }
    if "gl" not in free:
        coarse["alpha_l"] = list(np.linspace(0.02, 0.9, N_STARTS))
    grid = list(itertools.product(*(coarse[p] for p in free)))
    idx = np.unique(np.linspace(0, len(grid) - 1, min(N_STARTS, len(grid))).round().astype(int))
    return [np.array(grid[i]) for i in idx]


def _phase_coverage(chis) -> float:
    u = np.unique(np.mod(chis, np.pi))
    if u.size < 2:
        return 0.0
    gaps = np.diff(np.concatenate([u, [u[0] + np.pi]]))
    return float(np.pi - gaps.max() + np.pi / u.size)


def fit_noise_trace(trace: NoiseTrace, chain_known: DetectionChain,
                    free_params: Iterable[str] = ("gl", "alpha_l"),
                    fixed: Optional[Mapping[str, float]] = None,
                    max_iterations: int = MAX_ITERATIONS) -> FitResult:
    """Least-squares fit of a phase-scanned noise trace.

    Residuals are relative to the data.  When the trace carries a
    blocked-path reference it is fitted jointly (it pins ``n_el``).  Phases
    are absolute LO phases, so the sign of gl is identifiable; the 8-point
    multi-start guards against the mirror minimum at -gl.

    Parameters not in ``free_params`` take values from ``fixed``, defaulting
    to 0 except ``n_el`` which defaults to the chain's electronic noise.
    """
    free = [p for p in TRACE_PARAMS if p in set(free_params)]
    unknown = set(free_params) - set(TRACE_PARAMS)
    if unknown:
        raise InvalidParameterError(f"unknown fit parameters: {sorted(unknown)}")
    if not free:
        raise InvalidParameterError("at least one parameter must be free")
    n = len(trace)
    if n < 8:
        raise InvalidParameterError("trace needs at least 8 phase points")
    if _phase_coverage(trace.chis) < np.pi * (1 - 1e-9):
        raise InvalidParameterError("trace phases must span a full period (pi)")
    if len(free) > n / 2:
        raise InvalidParameterError("too many free parameters for the number of points")

    ref = trace.reference
    if "excess" in free and "n_el" in free and ref is None:
        raise DegenerateFitError("excess and n_el are only separable with a blocked-path reference")

    values = dict(gl=0.0, alpha_l=0.0, excess=0.0, n_el=chain_known.electronic_noise)
    values.update(fixed or {})
    y = trace.values
    chis = trace.chis

    guess = dict(values)
    if "n_el" in free:
        guess["n_el"] = max(float(np.mean(ref)) - 1.0, 0.0) + 1e-3 if ref is not None else 0.01
    if "excess" in free:
        guess["excess"] = 0.05

    lower = {"gl": -np.inf, "alpha_l": 0.0, "excess": 0.0, "n_el": 0.0}
    upper = {"gl": np.inf, "alpha_l": _ALPHA_MAX, "excess": np.inf, "n_el": np.inf}
    bounds = ([lower[p] for p in free], [upper[p] for p in free])

    def unpack(x):
        v = dict(values)
        v.update(zip(free, x))
        return v

    def resid(x):
        v = unpack(x)
        r = (y - trace_model(chis, chain_known, **v)) / y
        if ref is not None:
            r = np.concatenate([r, (ref - 1.0 - v["n_el"]) / ref])
        return r

    def jac(x):
        v = unpack(x)
        J = _trace_jacobian(chis, chain_known, **v)
        cols = []
        for p in free:
            col = -J[p] / y
            if ref is not None:
                extra = -1.0 / ref if p == "n_el" else np.zeros_like(ref)
                col = np.concatenate([col, extra])
            cols.append(col)
        return np.column_stack(cols)

    best = None
    for x0 in _starts(free, guess):
        x0 = np.clip(x0, [lo + 1e-6 if np.isfinite(lo) else lo for lo in bounds[0]],
                     [hi - 1e-6 if np.isfinite(hi) else hi for hi in bounds[1]])
        sol = least_squares(resid, x0, jac=jac, bounds=bounds, method="trf",
                            ftol=FTOL, gtol=GTOL, xtol=1e-15, max_nfev=max_iterations)
        if best is None or (sol.status > 0, -sol.cost) > (best.status > 0, -best.cost):
            best = sol

    r = best.fun
    m = r.size
    dof = max(m - len(free), 1)
    s2 = max(2.0 * best.cost / dof, np.finfo(float).eps ** 2)
    JtJ = best.jac.T @ best.jac
    cov = s2 * np.linalg.pinv(JtJ)
    se = np.sqrt(np.clip(np.diag(cov), np.finfo(float).tiny, None))
    fitted = unpack(best.x)
    converged = bool(best.status > 0) and bool(np.all(np.isfinite(se)))
    return FitResult(
        params={p: float(fitted[p]) for p in free},
        stderr={p: float(e) for p, e in zip(free, se)},
        residual_rms=float(np.sqrt(np.mean(r ** 2))),
        converged=converged,
        iterations=int(best.nfev),
        message=str(best.message),
        residuals=r,
    )


def _parabolic_vertex(x3, y3) -> Tuple[float, float]:
    (x0, x1, x2), (y0, y1, y2) = x3, y3
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom
    if a == 0:
        return x1, y1
    xv = -b / (2 * a)
    if not min(x0, x2) <= xv <= max(x0, x2):
        return x1, y1
    c = y1 - a * x1 * x1 - b * x1
    return xv, a * xv * xv + b * xv + c


def _refine_extremum(chis, y, i, periodic):
    n = y.size
    if periodic:
        step = np.pi
        j0, j2 = (i - 1) % n, (i + 1) % n
        x0 = chis[j0] - (step if i == 0 else 0.0)
        x2 = chis[j2] + (step if i == n - 1 else 0.0)
        return _parabolic_vertex((x0, chis[i], x2), (y[j0], y[i], y[j2]))
    if i == 0 or i == n - 1:
        return chis[i], y[i]
    return _parabolic_vertex(chis[i - 1:i + 2], y[i - 1:i + 2])


def trace_extrema(chis, values):
    """Refined (v_min, v_max, chi_min) of a sampled curve, in linear units.

    A three-point parabola refines each grid extremum; grids that tile one
    full period are treated as periodic.
    """
    chis = np.asarray(chis, dtype=float)
    y = np.asarray(values, dtype=float)
    order = np.argsort(chis)
    chis, y = chis[order], y[order]
    n = y.size
    if n < 3:
        i_min, i_max = int(np.argmin(y)), int(np.argmax(y))
        return float(y[i_min]), float(y[i_max]), float(chis[i_min])
    step = np.diff(chis)
    periodic = bool(np.allclose(step, step[0], rtol=0, atol=1e-12)
                    and np.isclose(n * step[0], np.pi))
    chi_min, v_min = _refine_extremum(chis, y, int(np.argmin(y)), periodic)
    _, v_max = _refine_extremum(chis, y, int(np.argmax(y)), periodic)
    if periodic:
        chi_min = np.mod(chi_min, np.pi)
    return float(v_min), float(v_max), float(chi_min)


def squeezing_summary(trace: NoiseTrace, sql_level: Optional[float] = None):
    """Model-free (min_db, max_db, chi_at_min) of a trace relative to SQL.

    The SQL level defaults to the mean of the blocked-path reference when the
    trace has one, else 1.
    """
    if len(trace) == 0:
        raise InvalidParameterError("empty trace")
    if sql_level is None:
        ref = trace.reference
        sql_level = float(np.mean(ref)) if ref is not None else 1.0
    v_min, v_max, chi_min = trace_extrema(trace.chis, trace.values)
    return to_db(v_min / sql_level), to_db(v_max / sql_level), chi_min
