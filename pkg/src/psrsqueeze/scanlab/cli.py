"""Command-line entry point.

Exit codes: 0 success, 2 config error, 3 fit non-convergence, 4 I/O error.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..detection import DetectionChain, polarimeter_angle
from ..errors import ConfigError, PsrError
from ..estimation import PolarimeterScan, TRACE_PARAMS, fit_gl_polynomial, fit_noise_trace
from . import io, runner
from .config import MODES, PRESETS, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FIT = 3
EXIT_IO = 4

log = logging.getLogger("psrsqueeze")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="TOML scan configuration")
    p.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--workers", type=int, help="worker threads for grid evaluation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psrsqueeze",
        description="Self-rotation squeezing: simulate detection and fit parameters.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("noise-map", help="minimum noise (dB) and excess noise over detuning x RF")
    _common(p)

    p = sub.add_parser("phase-trace", help="noise vs LO phase with SQL reference")
    _common(p)
    p.add_argument("--detuning", type=float, help="GHz")
    p.add_argument("--rf", type=float, help="MHz")

    p = sub.add_parser("selfrotation-scan", help="polarimeter scans and gl fits vs detuning")
    _common(p)
    p.add_argument("--noise-rms", type=float)

    p = sub.add_parser("wigner", help="Wigner density of the cell output")
    _common(p)
    p.add_argument("--gl", type=float)
    p.add_argument("--alpha-l", type=float)
    p.add_argument("--points", type=int)

    p = sub.add_parser("fit-trace", help="fit a phase-trace CSV")
    _common(p)
    p.add_argument("input", type=Path)
    p.add_argument("--free", default="gl,alpha_l",
                   help=f"comma-separated subset of {','.join(TRACE_PARAMS)}")
    p.add_argument("--fixed", action="append", default=[], metavar="NAME=VALUE",
                   help="value for a non-free parameter (repeatable)")

    p = sub.add_parser("fit-polarimeter", help="fit gl from an epsilon/angle or epsilon/s1/s2 CSV")
    _common(p)
    p.add_argument("input", type=Path)
    p.add_argument("--degree", type=int, choices=(1, 3), default=1)
    return parser


def _load(args):
    cfg = load_config(args.config, args.preset)
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.out is not None:
        kw["output_dir"] = args.out
    if args.mode is not None:
        kw["mode"] = args.mode
    if args.workers is not None:
        kw["workers"] = args.workers
    if kw:
        try:
            cfg = cfg.with_overrides(**kw)
        except (PsrError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


def _chain_from_meta(meta, fallback: DetectionChain) -> DetectionChain:
    try:
        return DetectionChain(float(meta["visibility"]), float(meta["pd_efficiency"]),
                              float(meta["electronic_noise"]))
    except (KeyError, ValueError):
        return fallback


def _parse_fixed(items):
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or name not in TRACE_PARAMS:
            raise ConfigError(f"bad --fixed value {item!r}")
        out[name] = float(value)
    return out


def _cmd_noise_map(args, cfg):
    nmap = runner.run_noise_map(cfg)
    path = runner.write_noise_map(nmap, cfg, cfg.output_dir, cfg.mode)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_phase_trace(args, cfg):
    trace = runner.run_phase_trace(cfg, args.detuning, args.rf)
    path = runner.write_phase_trace(trace, cfg.output_dir)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_selfrotation(args, cfg):
    if args.noise_rms is not None:
        cfg = cfg.with_overrides(polarimeter_noise_rms=args.noise_rms)
    rows = runner.run_selfrotation_scan(cfg)
    path = runner.write_selfrotation_scan(rows, cfg, cfg.output_dir)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_wigner(args, cfg):
    gl = cfg.wigner_gl if args.gl is None else args.gl
    al = cfg.wigner_alpha_l if args.alpha_l is None else args.alpha_l
    n = cfg.wigner_points if args.points is None else args.points
    *_, paths = runner.emit_wigner(gl, al, cfg.output_dir, n, n_sigma=cfg.wigner_n_sigma)
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


def _cmd_fit_trace(args, cfg):
    try:
        trace, meta = io.read_trace(args.input)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{args.input}: {exc}") from exc
    chain = cfg.chain if args.config else _chain_from_meta(meta, cfg.chain)
    free = [s.strip() for s in args.free.split(",") if s.strip()]
    fit = fit_noise_trace(trace, chain, free, _parse_fixed(args.fixed))
    path = io.write_json(Path(cfg.output_dir) / "fit_trace.json", fit.to_dict())
    print(f"wrote {path}")
    return EXIT_OK if fit.converged else EXIT_FIT


def _cmd_fit_polarimeter(args, cfg):
    meta, rows = io.read_table(args.input)
    if not rows or "epsilon" not in rows[0]:
        raise ConfigError(f"{args.input}: need an 'epsilon' column")
    eps = np.array([float(r["epsilon"]) for r in rows])
    if "angle" in rows[0]:
        phi = np.array([float(r["angle"]) for r in rows])
    else:
        phi = polarimeter_angle([float(r["s1"]) for r in rows], [float(r["s2"]) for r in rows])
    fit = fit_gl_polynomial(PolarimeterScan(eps, phi), args.degree)
    path = io.write_json(Path(cfg.output_dir) / "fit_polarimeter.json", fit.to_dict())
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "noise-map": _cmd_noise_map,
    "phase-trace": _cmd_phase_trace,
    "selfrotation-scan": _cmd_selfrotation,
    "wigner": _cmd_wigner,
    "fit-trace": _cmd_fit_trace,
    "fit-polarimeter": _cmd_fit_polarimeter,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](args, cfg)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PsrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
