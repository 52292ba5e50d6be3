"""Minimal reader/writer for the netpbm graymap and pixmap formats.

Supports ``P2``/``P5`` (gray) and ``P3``/``P6`` (RGB), plain and raw, with
``maxval`` up to 65535. Raw samples wider than one byte are big-endian as
the format prescribes.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

_CHANNELS = {b"P2": 1, b"P5": 1, b"P3": 3, b"P6": 3}


class NetpbmError(ValueError):
    pass


def _tokens(buf, start, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    i = start
    size = len(buf)
    while len(out) < count:
        while i < size and buf[i : i + 1].isspace():
            i += 1
        if i < size and buf[i : i + 1] == b"#":
            while i < size and buf[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < size and not buf[j : j + 1].isspace() and buf[j : j + 1] != b"#":
            j += 1
        if j == i:
            raise NetpbmError("truncated header")
        out.append(buf[i:j])
        i = j
    return out, i


def decode(buf):
    """Decode image bytes into ``(pixels, maxval)``; pixels are (h, w) or (h, w, 3) ints."""
    magic = buf[:2]
    if magic not in _CHANNELS:
        raise NetpbmError(f"unsupported image format (magic {magic!r}); expected P2, P3, P5 or P6")
    ch = _CHANNELS[magic]
    (w, h, maxval), pos = _tokens(buf, 2, 3)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise NetpbmError(f"bad header field: {exc}") from None
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise NetpbmError(f"bad header values w={w} h={h} maxval={maxval}")
    count = w * h * ch
    if magic in (b"P2", b"P3"):
        vals = buf[pos:].split()
        if len(vals) < count:
            raise NetpbmError(f"expected {count} samples, found {len(vals)}")
        data = np.array([int(v) for v in vals[:count]], dtype=np.int64)
    else:
        pos += 1  # single whitespace byte after maxval
        width = 1 if maxval < 256 else 2
        body = buf[pos : pos + count * width]
        if len(body) < count * width:
            raise NetpbmError(f"raster truncated: need {count * width} bytes, found {len(body)}")
        data = np.frombuffer(body, dtype=">u1" if width == 1 else ">u2").astype(np.int64)
    if data.max(initial=0) > maxval:
        raise NetpbmError("sample exceeds maxval")
    shape = (h, w) if ch == 1 else (h, w, 3)
    return data.reshape(shape), maxval


def read(path):
    return decode(Path(path).read_bytes())


def encode(pixels, maxval=255, plain=False):
    pixels = np.asarray(pixels)
    if pixels.ndim == 2:
        magic = "P2" if plain else "P5"
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = "P3" if plain else "P6"
    else:
        raise NetpbmError(f"cannot encode array of shape {pixels.shape}")
    if pixels.min(initial=0) < 0 or pixels.max(initial=0) > maxval:
        raise NetpbmError("pixel values outside [0, maxval]")
    h, w = pixels.shape[:2]
    header = f"{magic}\n{w} {h}\n{maxval}\n".encode()
    flat = pixels.astype(np.int64).ravel()
    if plain:
        return header + "\n".join(str(v) for v in flat).encode() + b"\n"
    dtype = ">u1" if maxval < 256 else ">u2"
    return header + flat.astype(dtype).tobytes()


def write(path, pixels, maxval=255, plain=False):
    Path(path).write_bytes(encode(pixels, maxval, plain))
