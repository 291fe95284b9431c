"""Scan orchestration over detuning x RF grids and file emission."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..detection import (
    analytic_noise_trace,
    excess_noise,
    min_homodyne_noise,
    polarimeter_angle,
    rolloff_factor,
    sample_noise_trace,
    simulate_polarimeter,
)
from ..errors import PsrError
from ..estimation import PolarimeterScan, fit_gl_polynomial, trace_extrema
from ..gaussian_core import auto_wigner_range, to_db, vacuum, wigner_grid
from ..medium import alpha_at, gl_at, propagate, propagate_values
from . import io
from .config import ScanConfig

log = logging.getLogger(__name__)


@dataclass
class NoiseMap:
    detunings: np.ndarray
    rfs: np.ndarray
    min_db: np.ndarray
    excess_linear: np.ndarray
    min_rel_raw: np.ndarray


def _pmap(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _cell_output(config: ScanConfig, detuning: float, rf: float):
    scale = rolloff_factor(rf, config.rolloff_mhz)
    return propagate(config.medium, detuning, vacuum(), gl_scale=scale)


def _point(config: ScanConfig, excess_model, detuning: float, rf: float, mode: str):
    state = _cell_output(config, detuning, rf)
    e = excess_noise(excess_model, rf, detuning)
    if mode == "analytic":
        n_min = min_homodyne_noise(state, config.chain, e)
    else:
        # streams keyed by the point's coordinates, not its grid index
        trace = sample_noise_trace(state, config.chain, e, config.chi_grid(),
                                   config.n_averages, stream_key=(detuning, rf))
        n_min = trace_extrema(trace.chis, trace.sampled)[0]
    return n_min, e


def run_noise_map(config: ScanConfig, detunings: Optional[Sequence[float]] = None,
                  rfs: Optional[Sequence[float]] = None, mode: Optional[str] = None,
                  workers: Optional[int] = None) -> NoiseMap:
    """Minimum detected noise (electronic noise subtracted, dB) and excess noise per grid point."""
    d = np.asarray(config.detunings.values() if detunings is None else detunings, dtype=float)
    r = np.asarray(config.rfs.values() if rfs is None else rfs, dtype=float)
    mode = mode or config.mode
    excess_model = config.excess
    alpha_at(config.medium, d)  # fail early on an invalid medium

    pts = [(i, j) for i in range(d.size) for j in range(r.size)]
    res = _pmap(lambda ij: _point(config, excess_model, d[ij[0]], r[ij[1]], mode), pts,
                workers or config.workers)
    raw = np.empty((d.size, r.size))
    exc = np.empty_like(raw)
    for (i, j), (n_min, e) in zip(pts, res):
        raw[i, j], exc[i, j] = n_min, e
    min_db = to_db(raw - config.chain.electronic_noise)
    return NoiseMap(d, r, np.atleast_2d(min_db), exc, raw)


def _run_metadata(config: ScanConfig, mode: str) -> Dict[str, object]:
    ch = config.chain
    return {
        "mode": mode,
        "seed": int(config.seed),
        "n_averages": int(config.n_averages),
        "visibility": ch.visibility,
        "pd_efficiency": ch.pd_efficiency,
        "electronic_noise": ch.electronic_noise,
        "total_efficiency": ch.total_efficiency,
        "excess_peak": config.excess_peak,
        "excess_gamma_mhz": config.excess_gamma_mhz,
        "rolloff_mhz": "none" if config.rolloff_mhz is None else config.rolloff_mhz,
        "slices": config.medium.slices,
        "temperature_label": config.medium.temperature_label,
    }


def write_noise_map(nmap: NoiseMap, config: ScanConfig, out_dir, mode: str) -> Path:
    meta = _run_metadata(config, mode)
    meta["electronic_noise_subtracted"] = True
    meta["extrapolated"] = not config.medium.in_window(nmap.detunings)
    rows = []
    gl = gl_at(config.medium, nmap.detunings)
    al = alpha_at(config.medium, nmap.detunings)
    for i, d in enumerate(nmap.detunings):
        for j, rf in enumerate(nmap.rfs):
            rows.append([io.fmt(d), io.fmt(rf), io.fmt_db(nmap.min_db[i, j]),
                         io.fmt(nmap.excess_linear[i, j]), io.fmt(nmap.min_rel_raw[i, j]),
                         io.fmt(np.atleast_1d(gl)[i]), io.fmt(np.atleast_1d(al)[i])])
    cols = ["detuning_ghz", "rf_mhz", "min_db", "excess_linear", "min_rel_var_raw",
            "gl", "alpha_l"]
    return io.write_table(Path(out_dir) / "noise_map.csv", cols, rows, meta)


def run_phase_trace(config: ScanConfig, detuning: Optional[float] = None,
                    rf: Optional[float] = None, mode: Optional[str] = None):
    """Phase-scanned noise plus blocked-path SQL reference at one (detuning, rf)."""
    detuning = config.trace_detuning_ghz if detuning is None else float(detuning)
    rf = config.trace_rf_mhz if rf is None else float(rf)
    mode = mode or config.mode
    state = _cell_output(config, detuning, rf)
    e = excess_noise(config.excess, rf, detuning)
    chis = config.chi_grid()
    if mode == "analytic":
        trace = analytic_noise_trace(state, config.chain, e, chis, with_reference=True)
    else:
        trace = sample_noise_trace(state, config.chain, e, chis, config.n_averages,
                                   stream_key=(detuning, rf), with_reference=True)
        trace.n_averages = int(config.n_averages)
    trace.detuning_ghz = detuning
    trace.rf_mhz = rf
    trace.metadata = _run_metadata(config, mode)
    trace.metadata.update(excess=e, gl=float(gl_at(config.medium, detuning)),
                          alpha_l=float(alpha_at(config.medium, detuning)))
    return trace


def write_phase_trace(trace, out_dir) -> Path:
    meta = {"detuning_ghz": trace.detuning_ghz, "rf_mhz": trace.rf_mhz}
    meta.update(trace.metadata)
    return io.write_trace(Path(out_dir) / "phase_trace.csv", trace, meta)


def run_selfrotation_scan(config: ScanConfig, epsilons: Optional[Sequence[float]] = None,
                          detunings: Optional[Sequence[float]] = None) -> List[Dict[str, object]]:
    """Simulated polarimeter scans and gl fits, one row per detuning.

    A failed fit flags its row and the scan carries on.
    """
    eps = np.asarray(config.epsilons if epsilons is None else epsilons, dtype=float)
    if eps.size < 4:
        raise ValueError("at least 4 ellipticities are required")
    d = np.asarray(config.detunings.values() if detunings is None else detunings, dtype=float)

    def one(delta):
        row = {"detuning_ghz": float(delta), "gl_true": float(gl_at(config.medium, delta)),
               "alpha_l": float(alpha_at(config.medium, delta)),
               "gl_fitted": float("nan"), "stderr": float("nan"), "fit_ok": False}
        try:
            s1, s2 = simulate_polarimeter(config.medium, delta, eps, config.polarimeter_power,
                                          config.polarimeter_noise_rms, config.seed,
                                          stream_key=(float(delta),))
            fit = fit_gl_polynomial(PolarimeterScan(eps, polarimeter_angle(s1, s2), delta),
                                    config.odd_degree)
            row.update(gl_fitted=fit.params["gl"], stderr=fit.stderr["gl"], fit_ok=True)
        except PsrError as exc:
            log.warning("fit failed at detuning %.4f GHz: %s", delta, exc)
        return row

    return _pmap(one, list(d), config.workers)


def write_selfrotation_scan(rows, config: ScanConfig, out_dir) -> Path:
    cols = ["detuning_ghz", "gl_true", "gl_fitted", "stderr", "alpha_l", "fit_ok"]
    body = [[io.fmt(r[c]) for c in cols] for r in rows]
    meta = {
        "seed": int(config.seed),
        "noise_rms": config.polarimeter_noise_rms,
        "total_power": config.polarimeter_power,
        "odd_degree": config.odd_degree,
        "saturation_cubic": config.medium.saturation_cubic,
        "n_epsilons": len(config.epsilons),
        "extrapolated": not config.medium.in_window([r["detuning_ghz"] for r in rows]),
    }
    return io.write_table(Path(out_dir) / "selfrotation_scan.csv", cols, body, meta)


def emit_wigner(gl: float, alpha_l: float, out_dir, n_points: int = 201,
                x_range=None, p_range=None, n_sigma: float = 6.0):
    """Write the Wigner density of the lumped cell output for vacuum input.

    Produces ``wigner.csv`` and ``wigner_meta.json``; returns ``(x, p, W, paths)``.
    """
    state = propagate_values(vacuum(), gl, alpha_l)
    if x_range is None or p_range is None:
        ax, ap = auto_wigner_range(state, n_sigma)
        x_range = ax if x_range is None else x_range
        p_range = ap if p_range is None else p_range
    x, p, W = wigner_grid(state, x_range, p_range, n_points)
    out_dir = Path(out_dir)
    csv_path = io.write_matrix(out_dir / "wigner.csv", x, p, W)
    integral = float(W.sum() * (x[1] - x[0]) * (p[1] - p[0]))
    meta = {
        "gl": float(gl),
        "alpha_l": float(alpha_l),
        "n_points": int(n_points),
        "x_range": [float(v) for v in x_range],
        "p_range": [float(v) for v in p_range],
        "mean": [float(v) for v in state.mean],
        "cov": [[float(v) for v in row] for row in state.cov],
        "det_cov": state.det,
        "grid_integral": integral,
    }
    meta_path = io.write_json(out_dir / "wigner_meta.json", meta)
    return x, p, W, (csv_path, meta_path)
