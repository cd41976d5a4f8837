"""File formats: binary matrices, CSV tables and JSON reports.

Binary matrix layout (little endian)::

    4 bytes   magic b"LVYM"
    uint64    rows
    uint64    cols
    16 bytes  ASCII tag, NUL padded (truncated if longer)
    rows*cols float64, row-major
"""

import csv
import json
import struct

import numpy as np

__all__ = ["write_binary", "read_binary", "write_csv_matrix", "write_table", "read_table", "write_json", "read_json"]

MAGIC = b"LVYM"
HEADER = struct.Struct("<4sQQ16s")


def write_binary(path, arr, tag):
    arr = np.asarray(arr, dtype="<f8")
    if arr.ndim != 2:
        raise ValueError("only 2-D arrays are supported")
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, arr.shape[0], arr.shape[1], tag.encode("ascii")[:16].ljust(16, b"\0")))
        fh.write(np.ascontiguousarray(arr).tobytes())


def read_binary(path):
    """Return ``(array, tag)``."""
    with open(path, "rb") as fh:
        head = fh.read(HEADER.size)
        if len(head) != HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols, tag = HEADER.unpack(head)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a matrix file")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(np.float64), tag.rstrip(b"\0").decode("ascii")


def write_csv_matrix(path, arr):
    np.savetxt(path, np.asarray(arr, dtype=float), delimiter=",", fmt="%.17g", encoding="utf-8")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_table(path, columns, rows):
    """UTF-8 CSV with a header row; floats written with full round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_table(path):
    """Return ``(columns, rows)`` with numeric-looking cells parsed as float."""
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        cols = next(rd)
        rows = []
        for r in rd:
            out = []
            for c in r:
                try:
                    out.append(float(c))
                except ValueError:
                    out.append(c)
            rows.append(out)
    return cols, rows


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
