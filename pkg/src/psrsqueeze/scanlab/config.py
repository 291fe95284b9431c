"""Scan configuration: TOML schema, presets and validation.

Schema (every section and key is optional)::

    [scan]
    mode = "analytic"          # or "sampled"
    seed = 0
    n_averages = 10000
    chis = 256                 # LO phases over [0, pi)
    output_dir = "out"
    rolloff_mhz = 40.0         # omit to disable the gl roll-off
    workers = 1
    detunings = { start = -1.5, stop = 1.5, count = 31 }
    rfs = { start = 3.0, stop = 30.0, count = 28 }

    [medium]
    slices = 1
    temperature_label = "70 C"
    saturation_cubic = 0.0
    window_ghz = [-3.0, 10.0]
    [[medium.lines]]
    center_ghz = 0.0
    width_ghz = 0.45
    rotation_amplitude = 1.0
    absorption_amplitude = 0.55
    shape = "gaussian"         # or "lorentzian"

    [chain]
    visibility = 0.98
    pd_efficiency = 0.91
    electronic_noise = 0.0

    [excess]
    gamma_mhz = 6.0
    peak_amplitude = 0.3

    [phase_trace]
    detuning_ghz = 0.35
    rf_mhz = 5.0

    [polarimeter]
    epsilons = { start = -0.1, stop = 0.1, count = 21 }   # or a list
    noise_rms = 0.0
    total_power = 1.0
    odd_degree = 1

    [wigner]
    gl = 1.0
    alpha_l = 0.0
    n_points = 201
    n_sigma = 6.0
"""

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ..detection import DetectionChain, ExcessNoiseModel
from ..errors import ConfigError, PsrError
from ..medium import LineComponent, MediumModel, default_model

MODES = ("analytic", "sampled")

PRESETS: Dict[str, Dict[str, Any]] = {
    "paper-fig4": {
        "phase_trace": {"detuning_ghz": 0.35, "rf_mhz": 5.0},
    },
    "paper-fig5": {
        "scan": {
            "detunings": {"start": -1.5, "stop": 1.5, "count": 31},
            "rfs": {"start": 3.0, "stop": 30.0, "count": 28},
        },
    },
}


@dataclass(frozen=True)
class GridSpec:
    start: float
    stop: float
    count: int

    def __post_init__(self):
        if int(self.count) != self.count or self.count < 1:
            raise ConfigError(f"grid count must be a positive integer, got {self.count}")
        if not (np.isfinite(self.start) and np.isfinite(self.stop)):
            raise ConfigError("grid bounds must be finite")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.start)])
        return np.linspace(self.start, self.stop, int(self.count))


@dataclass(frozen=True)
class ScanConfig:
    medium: MediumModel = field(default_factory=default_model)
    chain: DetectionChain = field(default_factory=DetectionChain)
    excess_peak: float = 0.3
    excess_gamma_mhz: float = 6.0
    detunings: GridSpec = GridSpec(-1.5, 1.5, 31)
    rfs: GridSpec = GridSpec(3.0, 30.0, 28)
    chis: int = 256
    mode: str = "analytic"
    n_averages: int = 10000
    seed: int = 0
    output_dir: Path = Path("out")
    rolloff_mhz: Optional[float] = None
    workers: int = 1
    trace_detuning_ghz: float = 0.35
    trace_rf_mhz: float = 5.0
    epsilons: Tuple[float, ...] = tuple(np.linspace(-0.1, 0.1, 21))
    polarimeter_noise_rms: float = 0.0
    polarimeter_power: float = 1.0
    odd_degree: int = 1
    wigner_gl: float = 1.0
    wigner_alpha_l: float = 0.0
    wigner_points: int = 201
    wigner_n_sigma: float = 6.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.chis) < 1:
            raise ConfigError("chis must be >= 1")
        if self.mode == "sampled" and int(self.n_averages) < 2:
            raise ConfigError("sampled mode requires n_averages >= 2")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")
        if len(self.epsilons) < 4:
            raise ConfigError("at least 4 ellipticities are required")
        if self.odd_degree not in (1, 3):
            raise ConfigError("odd_degree must be 1 or 3")
        if self.chain.rng_seed != self.seed:
            object.__setattr__(self, "chain", replace(self.chain, rng_seed=int(self.seed)))

    @property
    def excess(self) -> ExcessNoiseModel:
        return ExcessNoiseModel(self.medium, self.excess_peak, self.excess_gamma_mhz)

    def chi_grid(self) -> np.ndarray:
        return np.arange(int(self.chis)) * (np.pi / int(self.chis))

    def with_overrides(self, **kw) -> "ScanConfig":
        return replace(self, **kw)


def _merge(base: Dict[str, Any], extra: Mapping[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _grid(raw, name) -> GridSpec:
    try:
        return GridSpec(float(raw["start"]), float(raw["stop"]), int(raw["count"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: expected {{start, stop, count}}") from exc


def _medium(raw: Mapping[str, Any]) -> MediumModel:
    base = default_model()
    if "lines" in raw:
        lines = []
        for i, ln in enumerate(raw["lines"]):
            try:
                lines.append(LineComponent(
                    center=float(ln["center_ghz"]),
                    width=float(ln["width_ghz"]),
                    rotation_amplitude=float(ln["rotation_amplitude"]),
                    absorption_amplitude=float(ln["absorption_amplitude"]),
                    shape=ln.get("shape", "gaussian"),
                ))
            except KeyError as exc:
                raise ConfigError(f"medium.lines[{i}] missing key {exc}") from exc
        window = tuple(raw.get("window_ghz", (-np.inf, np.inf)))
    else:
        lines = base.lines
        window = tuple(raw.get("window_ghz", base.window))
    return MediumModel(
        lines=tuple(lines),
        temperature_label=str(raw.get("temperature_label", base.temperature_label)),
        slices=int(raw.get("slices", 1)),
        saturation_cubic=float(raw.get("saturation_cubic", 0.0)),
        window=(float(window[0]), float(window[1])),
    )


def config_from_dict(raw: Mapping[str, Any], preset: Optional[str] = None) -> ScanConfig:
    """Build a validated :class:`ScanConfig`; preset values override ``raw``."""
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        raw = _merge(dict(raw), PRESETS[preset])
    known = {"scan", "medium", "chain", "excess", "phase_trace", "polarimeter", "wigner"}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")

    scan = raw.get("scan", {})
    kw: Dict[str, Any] = {}
    try:
        kw["medium"] = _medium(raw.get("medium", {}))
        ch = raw.get("chain", {})
        kw["chain"] = DetectionChain(
            visibility=float(ch.get("visibility", 0.98)),
            pd_efficiency=float(ch.get("pd_efficiency", 0.91)),
            electronic_noise=float(ch.get("electronic_noise", 0.0)),
            rng_seed=int(scan.get("seed", 0)),
        )
        ex = raw.get("excess", {})
        if "peak_amplitude" in ex:
            kw["excess_peak"] = float(ex["peak_amplitude"])
        if "gamma_mhz" in ex:
            kw["excess_gamma_mhz"] = float(ex["gamma_mhz"])
        if "detunings" in scan:
            kw["detunings"] = _grid(scan["detunings"], "scan.detunings")
        if "rfs" in scan:
            kw["rfs"] = _grid(scan["rfs"], "scan.rfs")
        for key in ("chis", "n_averages", "seed", "workers"):
            if key in scan:
                kw[key] = int(scan[key])
        if "mode" in scan:
            kw["mode"] = str(scan["mode"])
        if "output_dir" in scan:
            kw["output_dir"] = Path(scan["output_dir"])
        if scan.get("rolloff_mhz") is not None:
            kw["rolloff_mhz"] = float(scan["rolloff_mhz"])

        pt = raw.get("phase_trace", {})
        if "detuning_ghz" in pt:
            kw["trace_detuning_ghz"] = float(pt["detuning_ghz"])
        if "rf_mhz" in pt:
            kw["trace_rf_mhz"] = float(pt["rf_mhz"])

        pol = raw.get("polarimeter", {})
        if "epsilons" in pol:
            e = pol["epsilons"]
            vals = _grid(e, "polarimeter.epsilons").values() if isinstance(e, Mapping) else e
            kw["epsilons"] = tuple(float(v) for v in vals)
        if "noise_rms" in pol:
            kw["polarimeter_noise_rms"] = float(pol["noise_rms"])
        if "total_power" in pol:
            kw["polarimeter_power"] = float(pol["total_power"])
        if "odd_degree" in pol:
            kw["odd_degree"] = int(pol["odd_degree"])

        wg = raw.get("wigner", {})
        for src, dst, conv in (("gl", "wigner_gl", float), ("alpha_l", "wigner_alpha_l", float),
                               ("n_points", "wigner_points", int),
                               ("n_sigma", "wigner_n_sigma", float)):
            if src in wg:
                kw[dst] = conv(wg[src])
        return ScanConfig(**kw)
    except ConfigError:
        raise
    except (PsrError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path=None, preset: Optional[str] = None) -> ScanConfig:
    raw: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw, preset)
