"""Binary container for third-order tensors.

Layout (all little-endian)::

    bytes 0-3     magic b"T3D1"
    bytes 4-27    l, m, n as uint64
    bytes 28-     l*m*n float64 values, frontal-slice-major

Frontal-slice-major means slice ``k`` is written in full before slice
``k + 1``; within a slice the entries are row-major (``a[i, j, k]`` sits at
offset ``k*l*m + i*m + j``).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"T3D1"
_HEADER = struct.Struct("<4sQQQ")


class T3DFormatError(ValueError):
    """Malformed T3D1 file; ``offset`` is the byte position of the problem."""

    def __init__(self, msg, offset):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


def to_bytes(a):
    a = np.asarray(a, dtype="<f8")
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ValueError(f"expected a third-order array, got shape {a.shape}")
    l, m, n = a.shape
    body = np.ascontiguousarray(a.transpose(2, 0, 1)).tobytes()
    return _HEADER.pack(MAGIC, l, m, n) + body


def from_bytes(buf):
    if len(buf) < 4:
        raise T3DFormatError("file too short for magic", len(buf))
    if buf[:4] != MAGIC:
        raise T3DFormatError(f"bad magic {buf[:4]!r}", 0)
    if len(buf) < _HEADER.size:
        raise T3DFormatError("truncated header", len(buf))
    _, l, m, n = _HEADER.unpack_from(buf, 0)
    if min(l, m, n) == 0:
        raise T3DFormatError(f"zero dimension in header {(l, m, n)}", 4)
    expected = _HEADER.size + 8 * l * m * n
    if len(buf) != expected:
        raise T3DFormatError(
            f"payload size mismatch: expected {expected} bytes, found {len(buf)}",
            min(len(buf), expected),
        )
    data = np.frombuffer(buf, dtype="<f8", offset=_HEADER.size).reshape(n, l, m)
    a = np.ascontiguousarray(data.transpose(1, 2, 0)).astype(float)
    if not np.all(np.isfinite(a)):
        bad = int(np.flatnonzero(~np.isfinite(data.ravel()))[0])
        raise T3DFormatError("non-finite value", _HEADER.size + 8 * bad)
    return a


def save(path, a):
    Path(path).write_bytes(to_bytes(a))


def load(path):
    return from_bytes(Path(path).read_bytes())


def save_with_manifest(prefix, tensors, meta):
    """Write ``{prefix}.{name}.t3d`` per tensor plus ``{prefix}.json``."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    files = {}
    for name, arr in tensors.items():
        fname = f"{prefix.name}.{name}.t3d"
        save(prefix.parent / fname, arr)
        files[name] = fname
    manifest = dict(meta)
    manifest["files"] = files
    (prefix.parent / f"{prefix.name}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return prefix.parent / f"{prefix.name}.json"


def load_with_manifest(manifest_path):
    manifest_path = Path(manifest_path)
    meta = json.loads(manifest_path.read_text())
    tensors = {name: load(manifest_path.parent / fname) for name, fname in meta["files"].items()}
    return tensors, meta
