"""File formats: binary grids, truth sidecars and CSV dumps.

Grid files start with a 16-byte header (4-byte magic, then little-endian
``u32`` ``n_az``, ``n_rg`` and ``scan_index``) followed by the grid as
row-major little-endian ``float32``.
"""
import csv
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAP_MAGIC = b"RAMP"
SCORE_MAGIC = b"SMAP"
_HEADER = struct.Struct("<4sIII")


class GridFormatError(ValueError):
    pass


def write_grid(path, grid, scan_index, magic=MAP_MAGIC):
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise ValueError("grid must be two-dimensional")
    n_az, n_rg = grid.shape
    payload = _HEADER.pack(magic, n_az, n_rg, int(scan_index))
    payload += np.ascontiguousarray(grid, dtype="<f4").tobytes()
    atomic_write_bytes(path, payload)


def read_grid(path, magic=None):
    """Return ``(grid, scan_index, magic)`` from a grid file."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise GridFormatError(f"{path}: truncated header")
    file_magic, n_az, n_rg, scan = _HEADER.unpack_from(data)
    if magic is not None and file_magic != magic:
        raise GridFormatError(f"{path}: expected magic {magic!r}, found {file_magic!r}")
    expected = _HEADER.size + 4 * n_az * n_rg
    if len(data) != expected:
        raise GridFormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    grid = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n_az, n_rg)
    return grid.astype(np.float64), scan, file_magic


def atomic_write_bytes(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def write_csv(path, header, rows):
    """Write rows with ``repr``-exact floats so reruns are byte-identical."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_csv_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_truth_json(path, truth, n_az, n_rg):
    """Per-scan true states as a JSON sidecar."""
    doc = {
        "n_az": int(n_az),
        "n_rg": int(n_rg),
        "state_order": ["a", "a_dot", "r", "r_dot"],
        "scans": [
            {"scan": k, "states": [[float(v) for v in x] for x in truth[k]]}
            for k in range(truth.shape[0])
        ],
    }
    atomic_write_text(path, json.dumps(doc, indent=1) + "\n")


def read_truth_json(path):
    doc = json.loads(Path(path).read_text())
    scans = doc["scans"]
    n_t = len(scans[0]["states"]) if scans else 0
    truth = np.zeros((len(scans), n_t, 4))
    for k, entry in enumerate(scans):
        if entry["states"]:
            truth[k] = np.asarray(entry["states"], dtype=np.float64)
    return truth
