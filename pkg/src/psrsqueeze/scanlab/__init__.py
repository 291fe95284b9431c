"""Configuration, scan orchestration, file output and the command-line interface."""

from .config import GridSpec, ScanConfig, config_from_dict, load_config
from .runner import (
    NoiseMap,
    emit_wigner,
    run_noise_map,
    run_phase_trace,
    run_selfrotation_scan,
)
