"""CSV/JSON time-series files and gnuplot helper scripts."""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError

COLUMNS = ("t", "Jx", "Jy", "Jz", "var_x", "var_y", "var_z", "energy")
FORMATS = ("csv", "json")


def _columns(rows, allowed=COLUMNS):
    if not rows:
        raise ConfigError("refusing to write an empty time series")
    keys = set(rows[0])
    unknown = keys - set(allowed)
    if unknown:
        raise ConfigError(f"unexpected columns {sorted(unknown)}")
    cols = [c for c in allowed if c in keys]
    for i, row in enumerate(rows):
        if set(row) != keys:
            raise ConfigError(f"row {i} has columns {sorted(row)}, expected {cols}")
    return cols


def format_float(x) -> str:
    return format(float(x), ".17g")


def render_csv(rows, columns=None) -> str:
    cols = _columns(rows) if columns is None else _columns(rows, columns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([format_float(row[c]) for c in cols])
    return buf.getvalue()


def render_json(rows, metadata=None, columns=None) -> str:
    cols = _columns(rows) if columns is None else _columns(rows, columns)
    meta = {"tool": "lmgsmf", "version": __version__}
    meta.update(metadata or {})
    doc = {
        "metadata": meta,
        "columns": cols,
        "records": [{c: float(row[c]) for c in cols} for row in rows],
    }
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def write_text(text: str, path) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_timeseries(rows, fmt="csv", path=None, metadata=None, columns=None) -> None:
    """Write rows (dicts keyed by column name) as CSV or JSON.

    Validation happens before anything touches the filesystem, so a bad
    call never leaves a partial file behind.
    """
    if fmt == "csv":
        text = render_csv(rows, columns)
    elif fmt == "json":
        text = render_json(rows, metadata, columns)
    else:
        raise ConfigError(f"unknown format {fmt!r}; choose csv or json")
    write_text(text, path)


def parse_timeseries(text: str, fmt="csv"):
    if fmt == "json":
        doc = json.loads(text)
        return [{c: float(rec[c]) for c in doc["columns"]} for rec in doc["records"]]
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    return [dict(zip(header, map(float, line))) for line in reader if line]


def read_timeseries(path):
    path = Path(path)
    fmt = "json" if path.suffix == ".json" else "csv"
    return parse_timeseries(path.read_text(), fmt)


def gnuplot_script(data_path, title, columns=("Jz",), xlabel="t [hbar/eps]") -> str:
    """A small gnuplot script plotting named CSV columns against t."""
    plots = ", ".join(f"'{data_path}' using 't':'{c}' with lines title '{c}'" for c in columns)
    return (
        "set datafile separator ','\n"
        f"set title '{title}'\n"
        f"set xlabel '{xlabel}'\n"
        f"plot {plots}\n"
    )
