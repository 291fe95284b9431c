"""Forward models of the measurement chain.

Covers the balanced polarimeter, inefficient balanced homodyne detection,
resonance-fluorescence excess noise and finite-averaging spectrum-analyzer
statistics.  All noise levels are relative to the SQL (vacuum variance 1).
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from . import rng
from .errors import InvalidParameterError, UnphysicalObservationError
from .gaussian_core import GaussianState, add_isotropic_noise, to_db, variance_at, vacuum
from .medium import MediumModel, alpha_at, self_rotation_angle

NOMINAL_VISIBILITY = 0.98
NOMINAL_PD_EFFICIENCY = 0.91
NATURAL_LINEWIDTH_MHZ = 6.0


@dataclass(frozen=True)
class DetectionChain:
    visibility: float = NOMINAL_VISIBILITY
    pd_efficiency: float = NOMINAL_PD_EFFICIENCY
    electronic_noise: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.visibility <= 1.0:
            raise InvalidParameterError(f"visibility must lie in (0, 1], got {self.visibility}")
        if not 0.0 < self.pd_efficiency <= 1.0:
            raise InvalidParameterError(f"pd_efficiency must lie in (0, 1], got {self.pd_efficiency}")
        if not self.electronic_noise >= 0.0:
            raise InvalidParameterError("electronic_noise must be >= 0")
        if not 0 <= int(self.rng_seed) < 2 ** 64:
            raise InvalidParameterError("rng_seed must be an unsigned 64-bit integer")

    @classmethod
    def from_mode_matching(cls, mode_matching: float, pd_efficiency: float, **kw) -> "DetectionChain":
        """Build a chain from the mode-matching efficiency V**2 rather than V."""
        return cls(visibility=float(np.sqrt(mode_matching)), pd_efficiency=pd_efficiency, **kw)

    @property
    def mode_matching(self) -> float:
        return self.visibility ** 2

    @property
    def total_efficiency(self) -> float:
        return self.visibility ** 2 * self.pd_efficiency

    @property
    def sql_reference(self) -> float:
        """Noise measured with the squeezed path blocked."""
        return 1.0 + self.electronic_noise

    def as_dict(self) -> Dict[str, float]:
        return {
            "visibility": self.visibility,
            "pd_efficiency": self.pd_efficiency,
            "electronic_noise": self.electronic_noise,
            "rng_seed": int(self.rng_seed),
        }


@dataclass(frozen=True)
class ExcessNoiseModel:
    """Phase-insensitive resonance-fluorescence noise.

    Lorentzian in RF frequency with half-width ``gamma_mhz``; in detuning it
    follows the medium's absorption normalized to unit peak.
    """

    medium: MediumModel
    peak_amplitude: float = 0.0
    gamma_mhz: float = NATURAL_LINEWIDTH_MHZ
    absorption_max: float = field(init=False, repr=False, default=0.0)
    peak_detuning: float = field(init=False, repr=False, default=float("nan"))

    def __post_init__(self):
        if not self.gamma_mhz > 0:
            raise InvalidParameterError("gamma_mhz must be > 0")
        if not self.peak_amplitude >= 0:
            raise InvalidParameterError("peak_amplitude must be >= 0")
        d, a = _absorption_peak(self.medium)
        object.__setattr__(self, "peak_detuning", d)
        object.__setattr__(self, "absorption_max", a)

    def profile(self, detuning):
        if self.absorption_max <= 0:
            return np.zeros_like(np.asarray(detuning, dtype=float)) + 0.0
        return alpha_at(self.medium, detuning) / self.absorption_max


def _absorption_peak(model: MediumModel) -> Tuple[float, float]:
    if not model.lines:
        return float("nan"), 0.0
    lo, hi = model.window
    if not (np.isfinite(lo) and np.isfinite(hi)):
        centers = [ln.center for ln in model.lines]
        pad = 10 * max(ln.width for ln in model.lines)
        lo, hi = min(centers) - pad, max(centers) + pad
    grid = np.linspace(lo, hi, 20001)
    a = alpha_at(model, grid)
    i = int(np.argmax(a))
    step = grid[1] - grid[0]
    res = minimize_scalar(lambda d: -alpha_at(model, d),
                          bounds=(grid[i] - step, grid[i] + step), method="bounded",
                          options={"xatol": 1e-12})
    if -res.fun > a[i]:
        return float(res.x), float(-res.fun)
    return float(grid[i]), float(a[i])


def excess_noise(model: ExcessNoiseModel, rf_mhz, detuning):
    """n0 * L(detuning) * G**2 / (G**2 + rf**2)."""
    rf = np.asarray(rf_mhz, dtype=float)
    if np.any(rf < 0):
        raise InvalidParameterError("rf_mhz must be >= 0")
    g2 = model.gamma_mhz ** 2
    out = model.peak_amplitude * model.profile(detuning) * g2 / (g2 + rf * rf)
    return float(out) if np.ndim(out) == 0 else out


def rolloff_factor(rf_mhz, rolloff_mhz: Optional[float]):
    """Phenomenological first-order gl roll-off 1/(1+(rf/rc)**2); 1 when disabled."""
    if rolloff_mhz is None or not np.isfinite(rolloff_mhz):
        return 1.0
    if not rolloff_mhz > 0:
        raise InvalidParameterError("rolloff_mhz must be > 0")
    r = np.asarray(rf_mhz, dtype=float) / rolloff_mhz
    return 1.0 / (1.0 + r * r)


def polarimeter_angle(s1, s2):
    """Rotation angle from balanced-polarimeter signals: (s1-s2) / (2(s1+s2))."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    total = s1 + s2
    if np.any(~(total > 0)):
        raise InvalidParameterError("polarimeter total signal must be positive")
    phi = (s1 - s2) / (2.0 * total)
    return float(phi) if phi.ndim == 0 else phi


def simulate_polarimeter(model: MediumModel, detuning: float, eps, total_power: float = 1.0,
                         noise_rms: float = 0.0, seed: int = 0, stream_key: Tuple = ()):
    """Photodiode signals (s1, s2) for incident ellipticity ``eps``.

    Noise on each diode is an independent Gaussian drawn from a stream keyed by
    ``(seed, *stream_key, i)`` for the i-th ellipticity.
    """
    if not total_power > 0:
        raise InvalidParameterError("total_power must be > 0")
    if not noise_rms >= 0:
        raise InvalidParameterError("noise_rms must be >= 0")
    phi = np.atleast_1d(self_rotation_angle(model, detuning, eps))
    s1 = total_power * (0.5 + phi)
    s2 = total_power * (0.5 - phi)
    if noise_rms > 0:
        xi = np.array([rng.stream(seed, *stream_key, i).normal(0.0, noise_rms, 2)
                       for i in range(phi.size)])
        s1 = s1 + xi[:, 0]
        s2 = s2 + xi[:, 1]
    if np.ndim(eps) == 0:
        return float(s1[0]), float(s2[0])
    return s1, s2


def homodyne_noise(cell_output: GaussianState, chain: DetectionChain, excess: float, chi):
    """Detected noise at LO phase ``chi``, relative to SQL.

    eta * Var_chi(cell + excess) + (1 - eta) + n_el with eta = V**2 * eta_pd.
    """
    eta = chain.total_efficiency
    v = variance_at(add_isotropic_noise(cell_output, excess), chi)
    return eta * v + (1.0 - eta) + chain.electronic_noise


def min_homodyne_noise(cell_output: GaussianState, chain: DetectionChain, excess: float) -> float:
    """Exact minimum over LO phase of :func:`homodyne_noise`."""
    lam = np.linalg.eigvalsh(cell_output.cov)[0] + excess
    eta = chain.total_efficiency
    return float(eta * lam + (1.0 - eta) + chain.electronic_noise)


def correct_to_cell_output(observed_rel_variance, chain: DetectionChain):
    """Invert the detection chain: noise at the cell output from observed noise."""
    eta = chain.total_efficiency
    floor = (1.0 - eta) + chain.electronic_noise
    obs = np.asarray(observed_rel_variance, dtype=float)
    if np.any(~(obs > floor)):
        raise UnphysicalObservationError(
            f"observed noise must exceed detection floor {floor:.6g}")
    out = (obs - floor) / eta
    return float(out) if out.ndim == 0 else out


@dataclass
class NoiseTrace:
    """Quadrature noise versus LO phase, relative to SQL.

    ``sql_analytic``/``sql_sampled`` hold the blocked-path reference trace
    when one was recorded alongside.
    """

    chis: np.ndarray
    analytic: np.ndarray
    sampled: Optional[np.ndarray] = None
    n_averages: int = 1
    rf_mhz: float = float("nan")
    detuning_ghz: float = float("nan")
    sql_analytic: Optional[np.ndarray] = None
    sql_sampled: Optional[np.ndarray] = None
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.chis = np.asarray(self.chis, dtype=float)
        self.analytic = np.asarray(self.analytic, dtype=float)
        n = self.chis.size
        if self.analytic.shape != (n,):
            raise InvalidParameterError("analytic must match chis in length")
        if np.any(~(self.analytic > 0)):
            raise InvalidParameterError("analytic variances must be positive")
        for name in ("sampled", "sql_analytic", "sql_sampled"):
            v = getattr(self, name)
            if v is not None:
                v = np.asarray(v, dtype=float)
                if v.shape != (n,):
                    raise InvalidParameterError(f"{name} must match chis in length")
                setattr(self, name, v)
        if int(self.n_averages) < 1:
            raise InvalidParameterError("n_averages must be positive")

    def __len__(self):
        return self.chis.size

    @property
    def values(self) -> np.ndarray:
        """Sampled data when present, else the analytic curve."""
        return self.sampled if self.sampled is not None else self.analytic

    @property
    def reference(self) -> Optional[np.ndarray]:
        if self.sampled is not None and self.sql_sampled is not None:
            return self.sql_sampled
        return self.sql_analytic

    def db(self):
        return to_db(self.values)


def sample_variances(variances, n_averages: int, seed: int, stream_key: Tuple = ()):
    """Mean-square estimates from ``n_averages`` Gaussian draws per point.

    Point ``i`` uses the stream ``(seed, *stream_key, i)``.
    """
    M = int(n_averages)
    if M < 2:
        raise InvalidParameterError("n_averages must be >= 2")
    variances = np.asarray(variances, dtype=float)
    out = np.empty_like(variances)
    for i, v in enumerate(variances):
        x = rng.stream(seed, *stream_key, i).standard_normal(M)
        out[i] = v * np.dot(x, x) / M
    return out


def sample_noise_trace(cell_output: GaussianState, chain: DetectionChain, excess: float,
                       chis: Sequence[float], n_averages: int, stream_key: Tuple = (),
                       with_reference: bool = False) -> NoiseTrace:
    """Simulate a zero-span spectrum-analyzer trace over LO phase.

    Streams are keyed by the chain seed and ``stream_key``; the blocked-path
    reference, if requested, uses a disjoint sub-stream.
    """
    chis = np.asarray(chis, dtype=float)
    analytic = homodyne_noise(cell_output, chain, excess, chis)
    sampled = sample_variances(analytic, n_averages, chain.rng_seed, (*stream_key, 0))
    trace = NoiseTrace(chis, analytic, sampled, n_averages=int(n_averages))
    if with_reference:
        ref = homodyne_noise(vacuum(), chain, 0.0, chis)
        trace.sql_analytic = ref
        trace.sql_sampled = sample_variances(ref, n_averages, chain.rng_seed, (*stream_key, 1))
    return trace


def analytic_noise_trace(cell_output: GaussianState, chain: DetectionChain, excess: float,
                         chis: Sequence[float], with_reference: bool = False) -> NoiseTrace:
    chis = np.asarray(chis, dtype=float)
    trace = NoiseTrace(chis, homodyne_noise(cell_output, chain, excess, chis))
    if with_reference:
        trace.sql_analytic = homodyne_noise(vacuum(), chain, 0.0, chis)
    return trace
