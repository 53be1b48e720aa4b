"""Reading and writing probe function-object output.

Layout::

    # Probe 0 (-4.9 -4.9 1)
    # Probe 1 (-4.8 -4.9 1)
    ...
    # Time 0 1 ...
    1e-07  101325  101325 ...

Columns after the time follow the probe numbering.  Parsing reduces each
probe to its maximum over time and places it on the grid by coordinate.
"""
from __future__ import annotations

import re

import numpy as np

from ..errors import (NoTimeRowsError, NonNumericRowError, OffLatticeError, ProbeCountError,
                      ProbeFormatError)
from ..scene import GridSpec

LATTICE_TOL = 1e-6
_PROBE_RE = re.compile(r"^#\s*Probe\s+(\d+)\s*\(\s*(\S+)\s+(\S+)\s+(\S+)\s*\)\s*$")


def probe_locations(g: GridSpec) -> np.ndarray:
    """(ny*nx, 3) probe coordinates, row-major over the grid."""
    X, Y = g.mesh()
    return np.column_stack([X.ravel(), Y.ravel(), np.full(X.size, g.z_probe)])


def _fmt(v: float) -> str:
    return repr(float(v))


def write_probe_file(locations: np.ndarray, times: np.ndarray, values: np.ndarray) -> str:
    """Text for ``values`` of shape (n_times, n_probes) sampled at ``locations``."""
    locations = np.asarray(locations, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    lines = [f"# Probe {k} ({_fmt(x)} {_fmt(y)} {_fmt(z)})" for k, (x, y, z) in enumerate(locations)]
    lines.append("# Time " + " ".join(str(k) for k in range(len(locations))))
    for t, row in zip(times, values):
        lines.append(" ".join([_fmt(t)] + [_fmt(v) for v in row]))
    return "\n".join(lines) + "\n"


def _lattice_index(v: float, origin: float, step: float, n: int) -> int | None:
    i = int(round((v - origin) / step))
    if 0 <= i < n and abs(origin + i * step - v) <= LATTICE_TOL:
        return i
    return None


def parse_probe_file(text: str, g: GridSpec | None = None) -> np.ndarray:
    """Per-probe maximum over time, as a (ny, nx) field in file units (Pa)."""
    g = g or GridSpec()
    probes: list[tuple[float, float, float]] = []
    rows: list[np.ndarray] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            m = _PROBE_RE.match(line)
            if m:
                k = int(m.group(1))
                if k != len(probes):
                    raise ProbeFormatError(f"line {lineno}: probe {k} out of sequence")
                try:
                    probes.append(tuple(float(m.group(i)) for i in (2, 3, 4)))
                except ValueError as exc:
                    raise ProbeFormatError(f"line {lineno}: bad probe coordinate") from exc
            continue
        try:
            row = np.array([float(tok) for tok in line.split()])
        except ValueError as exc:
            raise NonNumericRowError(f"line {lineno}: non-numeric data row") from exc
        if row.size != len(probes) + 1:
            raise NonNumericRowError(
                f"line {lineno}: {row.size - 1} values for {len(probes)} probes")
        rows.append(row[1:])
    if len(probes) != g.nx * g.ny:
        raise ProbeCountError(f"{len(probes)} probes, grid needs {g.nx * g.ny}")
    if not rows:
        raise NoTimeRowsError("probe file has no time rows")
    peak = np.max(np.vstack(rows), axis=0)

    field = np.empty((g.ny, g.nx))
    seen = np.zeros((g.ny, g.nx), dtype=bool)
    for k, (x, y, _z) in enumerate(probes):
        i = _lattice_index(x, g.x0, g.dx, g.nx)
        j = _lattice_index(y, g.y0, g.dy, g.ny)
        if i is None or j is None:
            raise OffLatticeError(f"probe {k} at ({x}, {y}) is not on the grid lattice")
        if seen[j, i]:
            raise OffLatticeError(f"probe {k} duplicates grid point ({i}, {j})")
        seen[j, i] = True
        field[j, i] = peak[k]
    return field
