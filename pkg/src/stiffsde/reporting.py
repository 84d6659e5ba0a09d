"""CSV and manifest output with reproducibility discipline.

Files carry a versioned comment header (``# schema=1`` first, then
``# key=value`` metadata), RFC-4180-style rows with dot decimals and LF
endings.  Floats are formatted with ``repr`` (shortest round-trip), so
identical values produce identical bytes.  Writing goes through a
temporary file and an atomic rename: a crashed run never leaves a
truncated file that looks complete.
"""

from __future__ import annotations

import csv
import io
import os
from typing import Iterable

import numpy as np

from .errors import ConfigError

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "format_value", "write_csv", "read_csv",
           "write_text_atomic", "parse_keyvalue", "read_keyvalue_file"]


def format_value(value) -> str:
    """Shortest round-trip text for a cell; numpy scalars are unwrapped."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_text_atomic(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str, kind: str, comments: Iterable[tuple], header,
              rows) -> None:
    """Write one report CSV.

    ``comments`` are (key, value) pairs emitted as ``# key=value`` lines
    after the schema line; ``rows`` are sequences matching ``header``.
    """
    buf = io.StringIO()
    buf.write(f"# schema={SCHEMA_VERSION}\n")
    buf.write(f"# kind={kind}\n")
    for key, value in comments:
        buf.write(f"# {key}={format_value(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    write_text_atomic(path, buf.getvalue())


def read_csv(path: str):
    """Parse a report CSV into (metadata dict, header list, row lists).

    Rejects files whose schema version does not match this package's.
    """
    meta = {}
    data_lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
            elif line.strip():
                data_lines.append(line)
    if meta.get("schema") != str(SCHEMA_VERSION):
        raise ConfigError(
            f"{path}: schema {meta.get('schema')!r} does not match "
            f"expected {SCHEMA_VERSION}")
    rows = list(csv.reader(data_lines))
    if not rows:
        raise ConfigError(f"{path}: no header row")
    return meta, rows[0], rows[1:]


def write_trajectory_csv(path: str, trajectory, seed=None) -> None:
    """Dump one path's grid values: step, t, x_1..x_n, norm_sq, blownup."""
    n = trajectory.states.shape[1]
    header = ["step", "t"] + [f"x_{i + 1}" for i in range(n)] + \
        ["norm_sq", "blownup"]
    comments = [("blowup_step", trajectory.blowup_step
                 if trajectory.blowup_step is not None else -1)]
    if seed is not None:
        comments.append(("seed", seed))
    rows = []
    for k, (t, state) in enumerate(zip(trajectory.times, trajectory.states)):
        blown = trajectory.blowup_step is not None \
            and k >= trajectory.blowup_step
        rows.append([k, t, *state, float(np.sum(np.square(state))), blown])
    write_csv(path, "trajectory", comments, header, rows)


def parse_keyvalue(lines: Iterable[str], source: str = "<config>") -> dict:
    """Parse ``key=value`` lines; '#' starts a comment, blanks are skipped."""
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def read_keyvalue_file(path: str) -> dict:
    with open(path) as fh:
        return parse_keyvalue(fh, source=path)
