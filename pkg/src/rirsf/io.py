"""Binary tensor files, RIFF/WAVE audio, key=value sidecars and PGM heatmaps.

Tensor layout (all integers little-endian)::

    8 bytes   magic "RSFTENS1"
    u8        dtype code (0 = f32, 1 = c64 as interleaved re, im f32)
    u8        rank
    u32*rank  dims
    payload   row-major, prod(dims) * itemsize bytes
    u32       metadata length in bytes
    metadata  UTF-8 "key=value" lines joined by LF
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .dsp import Waveform

__all__ = [
    "FormatError", "TensorFile", "write_tensor", "read_tensor",
    "write_wav", "read_wav", "write_meta", "read_meta",
    "render_heatmap", "read_pgm",
]

MAGIC = b"RSFTENS1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<c8")}
_CODES = {"f32": 0, "c64": 1}


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


@dataclass
class TensorFile:
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def dtype(self) -> str:
        return "c64" if np.iscomplexobj(self.data) else "f32"


def _encode_meta(meta: dict) -> bytes:
    lines = []
    for key, value in meta.items():
        key, value = str(key), str(value)
        if not key or "=" in key or "\n" in key or "\n" in value:
            raise FormatError(f"metadata entry {key!r} cannot be encoded as one key=value line")
        lines.append(f"{key}={value}")
    return "\n".join(lines).encode("utf-8")


def _decode_meta(raw: bytes) -> dict:
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise FormatError("metadata: not valid UTF-8") from None
    meta = {}
    for line in text.split("\n") if text else []:
        key, sep, value = line.partition("=")
        if not sep:
            raise FormatError(f"metadata: line {line!r} lacks '='")
        meta[key] = value
    return meta


def _atomic_write(path, blob: bytes) -> None:
    # single writer; readers never see a partial file
    path = os.fspath(path)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def write_tensor(path, data, meta: dict | None = None) -> None:
    """Write a float32 or complex64 array of rank 1-4 (wider inputs are narrowed)."""
    arr = np.asarray(data)
    if arr.ndim < 1 or arr.ndim > 255:
        raise FormatError(f"rank: {arr.ndim} not supported")
    code = _CODES["c64" if np.iscomplexobj(arr) else "f32"]
    arr = np.ascontiguousarray(arr, dtype=_DTYPES[code])
    if any(d >= 2**32 for d in arr.shape):
        raise FormatError("dims: a dimension exceeds u32")
    meta_raw = _encode_meta(meta or {})
    blob = b"".join([
        MAGIC,
        struct.pack("<BB", code, arr.ndim),
        struct.pack(f"<{arr.ndim}I", *arr.shape),
        arr.tobytes(order="C"),
        struct.pack("<I", len(meta_raw)),
        meta_raw,
    ])
    _atomic_write(path, blob)


def read_tensor(path) -> TensorFile:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise FormatError(f"magic: expected {MAGIC!r}, found {blob[:8]!r}")
    if len(blob) < 10:
        raise FormatError("header: file ends inside the header")
    code, rank = struct.unpack_from("<BB", blob, 8)
    if code not in _DTYPES:
        raise FormatError(f"dtype: unknown code {code}")
    pos = 10
    if len(blob) < pos + 4 * rank:
        raise FormatError("dims: file ends inside the dimension list")
    dims = struct.unpack_from(f"<{rank}I", blob, pos)
    pos += 4 * rank
    nbytes = int(np.prod(dims, dtype=np.int64)) * _DTYPES[code].itemsize
    if len(blob) < pos + nbytes:
        raise FormatError("payload shorter than header claims")
    data = np.frombuffer(blob, _DTYPES[code], int(np.prod(dims, dtype=np.int64)), pos).reshape(dims)
    pos += nbytes
    if len(blob) < pos + 4:
        raise FormatError("metadata length: missing")
    (mlen,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if len(blob) != pos + mlen:
        raise FormatError(f"metadata length: header says {mlen} bytes, file holds {len(blob) - pos}")
    return TensorFile(data.copy(), _decode_meta(blob[pos:]))


# --- WAV --------------------------------------------------------------------

_PCM, _FLOAT, _EXTENSIBLE = 1, 3, 0xFFFE


def write_wav(path, wave: Waveform, encoding: str = "float32") -> None:
    """Interleaved RIFF/WAVE; ``encoding`` is ``float32`` or ``pcm16``."""
    x = wave.samples.T  # [N x M]
    if encoding == "float32":
        fmt, bits = _FLOAT, 32
        payload = np.ascontiguousarray(x, "<f4").tobytes()
    elif encoding == "pcm16":
        fmt, bits = _PCM, 16
        payload = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2").tobytes()
    else:
        raise FormatError(f"encoding: {encoding!r} is not pcm16 or float32")
    ch = wave.n_channels
    block = ch * bits // 8
    fmt_chunk = struct.pack("<HHIIHH", fmt, ch, int(wave.sample_rate),
                            int(wave.sample_rate) * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt_chunk)) + fmt_chunk
    body += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) % 2:
        body += b"\0"
    _atomic_write(path, b"RIFF" + struct.pack("<I", len(body)) + body)


def read_wav(path) -> Waveform:
    """PCM16 (scaled by 1/32768) or IEEE float32, any channel count."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 12 or blob[:4] != b"RIFF":
        raise FormatError("RIFF tag: missing")
    if blob[8:12] != b"WAVE":
        raise FormatError(f"WAVE tag: found {blob[8:12]!r}")
    pos, fmt, data = 12, None, None
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = blob[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise FormatError("fmt chunk: shorter than 16 bytes")
            fmt = struct.unpack_from("<HHIIHH", body)
            if fmt[0] == _EXTENSIBLE and len(body) >= 26:
                fmt = (struct.unpack_from("<H", body, 24)[0],) + fmt[1:]
        elif cid == b"data":
            if len(body) < size:
                raise FormatError("payload shorter than header claims")
            data = body
            break
        pos += 8 + size + (size & 1)
    if fmt is None:
        raise FormatError("fmt chunk: missing")
    if data is None:
        raise FormatError("data chunk: missing")
    code, ch, rate, _, block, bits = fmt
    if ch < 1:
        raise FormatError(f"channel count: {ch}")
    if (code, bits) == (_PCM, 16):
        dtype, scale = "<i2", 1.0 / 32768.0
    elif (code, bits) == (_FLOAT, 32):
        dtype, scale = "<f4", None
    else:
        raise FormatError(f"format code/bits: {code}/{bits} unsupported (need PCM16 or float32)")
    if block != ch * bits // 8:
        raise FormatError(f"block align: {block} disagrees with {ch} channels of {bits} bits")
    if len(data) % block:
        raise FormatError("payload shorter than header claims")
    x = np.frombuffer(data, dtype).reshape(-1, ch).T
    x = x.astype(np.float64) * scale if scale else x.astype(np.float64)
    return Waveform(x, rate)


# --- key=value sidecar ------------------------------------------------------

def write_meta(path, meta: dict) -> None:
    _atomic_write(path, _encode_meta(meta) + b"\n")


def read_meta(path) -> dict:
    with open(path, "rb") as fh:
        return _decode_meta(fh.read().rstrip(b"\n"))


# --- heatmap ----------------------------------------------------------------

def _map_pixels(values: np.ndarray):
    v = np.asarray(values, float)
    if v.ndim != 2 or v.size == 0:
        raise FormatError("heatmap: map is empty or not 2-D")
    if not np.all(np.isfinite(v)):
        raise FormatError("heatmap: map holds non-finite values")
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        pix = np.full(v.shape, 128, np.uint8)
    else:
        pix = np.round((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
    # frames -> columns, frequency -> rows with bin 0 at the bottom
    return pix.T[::-1], lo, hi


def render_heatmap(values, path) -> None:
    """8-bit P5 PGM of a [frames x bins] map, min and max in a header comment."""
    if hasattr(values, "values"):
        values = values.values
    pix, lo, hi = _map_pixels(values)
    h, w = pix.shape
    header = f"P5\n# min={lo!r} max={hi!r}\n{w} {h}\n255\n".encode("ascii")
    _atomic_write(path, header + pix.tobytes())


def read_pgm(path):
    """Return ``(pixels [rows x cols] uint8, min, max)`` from a heatmap file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    lines = blob.split(b"\n", 4)
    if len(lines) < 5 or lines[0] != b"P5":
        raise FormatError("PGM magic: expected P5")
    comment = lines[1].decode("ascii")
    try:
        fields_ = dict(item.split("=") for item in comment.lstrip("# ").split())
        lo, hi = float(fields_["min"]), float(fields_["max"])
        w, h = map(int, lines[2].split())
    except (ValueError, KeyError):
        raise FormatError("PGM header: cannot parse size or min/max comment") from None
    pix = np.frombuffer(lines[4], np.uint8)
    if pix.size != w * h:
        raise FormatError("payload shorter than header claims")
    return pix.reshape(h, w), lo, hi
