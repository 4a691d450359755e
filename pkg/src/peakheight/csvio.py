"""Versioned CSV output.

Every file starts with comment lines::

    # schema: peakheight.<name>/<version>
    # generated: 2026-01-01T00:00:00+00:00      (omitted when reproducible)
    # <key>: <value>                            (run metadata)

followed by a header row and data rows. Floats are written with 17
significant digits so that a read-back is exact.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

#: Column layout of every emitted schema.
SCHEMAS = {
    "params/1": ("t", "rho", "sigma_tilde", "sigma"),
    "density/1": ("rho", "sigma_tilde", "x", "density"),
    "kacrice/1": ("scenario", "u", "tail", "se"),
    "peaks/1": ("realization_id", "location...", "height"),
    "tail/1": ("u", "tail", "se"),
    "benchmark/1": ("method", "nsims", "wall_seconds", "n_peaks"),
}


@dataclass
class CsvTable:
    """Parsed CSV file: schema id, metadata and typed columns."""

    schema: str
    meta: dict
    columns: dict

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0


def _follows(header: tuple, base: tuple) -> bool:
    # "name..." stands for one or more columns; trailing extras are allowed
    if "location..." in base:
        i = base.index("location...")
        tail = base[i + 1:]
        return (len(header) > len(base) - 1 and header[:i] == base[:i]
                and header[len(header) - len(tail):] == tail)
    return header[: len(base)] == base


def _fmt(v) -> str:
    if isinstance(v, (str, np.str_)):
        return str(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v)) if np.isfinite(v) else ("nan" if np.isnan(v) else ("inf" if v > 0 else "-inf"))


def render_csv(schema: str, header, rows, meta: dict | None = None,
               reproducible: bool = False) -> str:
    """CSV text for ``rows`` under ``schema``."""
    if schema not in SCHEMAS:
        raise ConfigError(f"unknown schema {schema!r}")
    header = tuple(header)
    if not _follows(header, SCHEMAS[schema]):
        raise ConfigError(f"header {header} does not follow schema {schema}")
    buf = io.StringIO()
    buf.write(f"# schema: peakheight.{schema}\n")
    if not reproducible:
        buf.write(f"# generated: {_dt.datetime.now(_dt.timezone.utc).isoformat(timespec='seconds')}\n")
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path, schema: str, header, rows, meta: dict | None = None,
              reproducible: bool = False) -> Path:
    """Write rows to ``path``; see :func:`render_csv`."""
    path = Path(path)
    text = render_csv(schema, header, rows, meta, reproducible)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc
    return path


def _column(values: list[str]):
    try:
        return np.array([float(v) for v in values])
    except ValueError:
        return np.array(values, dtype=object)


def read_csv(path) -> CsvTable:
    """Parse a file written by :func:`write_csv`.

    Raises
    ------
    ConfigError
        If the schema line is missing or unknown.
    """
    lines = Path(path).read_text().splitlines()
    meta, body = {}, []
    schema = None
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            if key == "schema":
                schema = value.removeprefix("peakheight.")
            else:
                meta[key] = value
        else:
            body.append(line)
    if schema not in SCHEMAS:
        raise ConfigError(f"{path}: missing or unknown schema line")
    rows = list(csv.reader(body))
    header, data = rows[0], rows[1:]
    cols = {h: _column([r[i] for r in data]) for i, h in enumerate(header)}
    return CsvTable(schema, meta, cols)
