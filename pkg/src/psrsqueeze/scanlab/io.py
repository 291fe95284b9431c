"""Flat-file formats: comma-delimited CSV with ``#`` metadata preambles, and JSON.

Numbers are written with fixed formats (dB to 4 decimals, linear values to
12 significant digits) and LF line endings so reruns are byte-identical.
"""

import csv
import io
import json
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..detection import NoiseTrace
from ..gaussian_core import to_db

TRACE_COLUMNS = ["chi_rad", "analytic_rel_var", "sampled_rel_var", "analytic_db", "sampled_db"]
REFERENCE_COLUMNS = ["sql_analytic_rel_var", "sql_sampled_rel_var"]


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".12g")


def fmt_db(x) -> str:
    return "" if x is None else f"{float(x):.4f}"


def _meta_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_meta_value(x) for x in v) + "]"
    if isinstance(v, (float, int, np.floating, np.integer, bool, np.bool_)):
        return fmt(v)
    return str(v)


def write_table(path, columns: Sequence[str], rows: Sequence[Sequence[str]],
                metadata: Optional[Mapping[str, object]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for k, v in (metadata or {}).items():
        buf.write(f"# {k}: {_meta_value(v)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def read_table(path) -> Tuple[Dict[str, str], List[Dict[str, str]]]:
    """Return (metadata, rows) of a CSV written by :func:`write_table`."""
    meta: Dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    rows = list(csv.DictReader(body))
    return meta, rows


def write_trace(path, trace: NoiseTrace, metadata: Optional[Mapping[str, object]] = None) -> Path:
    cols = list(TRACE_COLUMNS)
    has_ref = trace.sql_analytic is not None
    if has_ref:
        cols += REFERENCE_COLUMNS
    rows = []
    for i in range(len(trace)):
        s = None if trace.sampled is None else trace.sampled[i]
        row = [fmt(trace.chis[i]), fmt(trace.analytic[i]), fmt(s),
               fmt_db(to_db(trace.analytic[i])), fmt_db(None if s is None else to_db(s))]
        if has_ref:
            rs = None if trace.sql_sampled is None else trace.sql_sampled[i]
            row += [fmt(trace.sql_analytic[i]), fmt(rs)]
        rows.append(row)
    meta = dict(metadata or {})
    meta.setdefault("detuning_ghz", trace.detuning_ghz)
    meta.setdefault("rf_mhz", trace.rf_mhz)
    meta.setdefault("n_averages", trace.n_averages)
    return write_table(path, cols, rows, meta)


def _column(rows, name) -> Optional[np.ndarray]:
    if not rows or name not in rows[0] or all(r[name] == "" for r in rows):
        return None
    return np.array([float(r[name]) for r in rows])


def read_trace(path) -> Tuple[NoiseTrace, Dict[str, str]]:
    meta, rows = read_table(path)
    missing = [c for c in ("chi_rad", "analytic_rel_var") if not rows or c not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")

    def num(key, default=float("nan")):
        try:
            return float(meta[key])
        except (KeyError, ValueError):
            return default

    trace = NoiseTrace(
        chis=_column(rows, "chi_rad"),
        analytic=_column(rows, "analytic_rel_var"),
        sampled=_column(rows, "sampled_rel_var"),
        n_averages=int(num("n_averages", 1)),
        rf_mhz=num("rf_mhz"),
        detuning_ghz=num("detuning_ghz"),
        sql_analytic=_column(rows, "sql_analytic_rel_var"),
        sql_sampled=_column(rows, "sql_sampled_rel_var"),
        metadata=dict(meta),
    )
    return trace, meta


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_matrix(path, x, p, W) -> Path:
    """Density matrix with two axis header rows; row i holds x[i], column j holds p[j]."""
    rows = [["x_axis"] + [fmt(v) for v in x], ["p_axis"] + [fmt(v) for v in p]]
    rows += [[fmt(x[i])] + [format(float(v), ".12e") for v in W[i]] for i in range(len(x))]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def read_matrix(path):
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    x = np.array([float(v) for v in rows[0][1:]])
    p = np.array([float(v) for v in rows[1][1:]])
    W = np.array([[float(v) for v in r[1:]] for r in rows[2:]])
    return x, p, W
