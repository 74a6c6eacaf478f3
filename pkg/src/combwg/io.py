"""Artifact formats: self-describing binary grids and commented CSV tables.

A grid file is ``MAGIC``, a little-endian uint32 header length, a UTF-8 JSON
header and then the raw arrays in header order.  The header records the
shape and dtype of every array plus free-form metadata (grid spacings, k, ω).
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = ["MAGIC", "FORMAT_VERSION", "write_grid", "read_grid", "write_csv", "read_csv", "field_to_grid", "potential_to_grid"]

MAGIC = b"CWGRID\x00\x01"
FORMAT_VERSION = 1


class GridFormatError(ValueError):
    pass


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (tuple, list)):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    return v


def write_grid(path, arrays: Mapping[str, np.ndarray], meta: Mapping | None = None) -> Path:
    path = Path(path)
    entries = []
    blobs = []
    for name, arr in arrays.items():
        a = np.ascontiguousarray(arr)
        dt = a.dtype.newbyteorder("<")
        a = a.astype(dt, copy=False)
        entries.append({"name": name, "shape": list(a.shape), "dtype": dt.str})
        blobs.append(a.tobytes())
    header = {"format_version": FORMAT_VERSION, "arrays": entries, "meta": _plain(dict(meta or {}))}
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)
    return path


def read_grid(path) -> tuple[dict, dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise GridFormatError(f"{path}: not a grid file")
    off = len(MAGIC)
    (n,) = struct.unpack_from("<I", data, off)
    off += 4
    header = json.loads(data[off : off + n].decode("utf-8"))
    off += n
    if header.get("format_version") != FORMAT_VERSION:
        raise GridFormatError(f"{path}: unsupported format version {header.get('format_version')}")
    arrays = {}
    for e in header["arrays"]:
        dt = np.dtype(e["dtype"])
        count = int(np.prod(e["shape"], dtype=np.int64))
        arrays[e["name"]] = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(e["shape"]).copy()
        off += count * dt.itemsize
    if off != len(data):
        raise GridFormatError(f"{path}: {len(data) - off} trailing bytes")
    return header["meta"], arrays


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    """UTF-8 CSV with ``#`` metadata lines, a header row and 10-digit floats."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh)
        w.writerow(list(header))
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def field_to_grid(field, path) -> Path:
    """Store a :class:`combwg.bloch.ModeField` (complex components on its grid)."""
    m = field.mode
    meta = {
        "kind": "mode-field",
        "nz": len(field.z),
        "nx": len(field.x),
        "dz": float(field.z[1] - field.z[0]) if len(field.z) > 1 else 0.0,
        "dx": float(field.x[1] - field.x[0]) if len(field.x) > 1 else 0.0,
        "k_reduced": m.k_reduced,
        "omega_reduced": m.omega_reduced,
        "a_nm": m.fourier.a,
        "band_index": m.band_index,
        "amplitude": field.amplitude,
    }
    arrays = {"z": field.z, "x": field.x, "Ex": field.Ex, "Ez": field.Ez, "Hy": field.Hy, "eps": field.eps}
    return write_grid(path, arrays, meta)


def potential_to_grid(pmap, path) -> Path:
    meta = {
        "kind": "potential",
        "component": pmap.component,
        "units": "mK",
        "nz": len(pmap.z),
        "nx": len(pmap.x),
        "sidewall_x": pmap.params.sidewall_x,
    }
    return write_grid(path, {"z": pmap.z, "x": pmap.x, "U": pmap.U, "air": pmap.air.astype(np.uint8)}, meta)
