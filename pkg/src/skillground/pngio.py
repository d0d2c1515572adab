"""Minimal PNG writer/reader for 8-bit grayscale images.

Hand-rolled so that rendering is byte-deterministic: a fixed zlib level and
filter type mean identical pixels always produce identical files. Reading
supports exactly what the writer emits (plus tEXt metadata), which is all
the engine needs; arbitrary PNGs from the outside world are only inspected
for their header.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_ZLIB_LEVEL = 9


class PngFormatError(ValueError):
    pass


@dataclass
class PngInfo:
    width: int
    height: int
    bit_depth: int
    color_type: int
    texts: dict[str, str] = field(default_factory=dict)


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def encode_gray(pixels: np.ndarray, texts: dict[str, str] | None = None) -> bytes:
    """Encode a 2D uint8 array as a grayscale PNG.

    ``texts`` entries become tEXt chunks; values are stored latin-1-escaped
    via backslash encoding so arbitrary unicode survives the round trip.
    """
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise ValueError("pixels must be a 2D uint8 array")
    height, width = pixels.shape
    if width == 0 or height == 0:
        raise ValueError("image must be nonempty")
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0)
    raw = b"".join(b"\x00" + pixels[row].tobytes() for row in range(height))
    out = [PNG_SIGNATURE, _chunk(b"IHDR", ihdr)]
    for key, value in (texts or {}).items():
        payload = key.encode("latin-1") + b"\x00" + value.encode(
            "unicode_escape"
        )
        out.append(_chunk(b"tEXt", payload))
    out.append(_chunk(b"IDAT", zlib.compress(raw, _ZLIB_LEVEL)))
    out.append(_chunk(b"IEND", b""))
    return b"".join(out)


def _iter_chunks(data: bytes):
    pos = len(PNG_SIGNATURE)
    while pos + 8 <= len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        if len(payload) != length:
            raise PngFormatError("truncated chunk")
        yield tag, payload
        pos += 12 + length
    if pos != len(data):
        raise PngFormatError("trailing bytes after IEND")


def read_info(data: bytes) -> PngInfo:
    """Parse signature, IHDR, and tEXt chunks without decoding pixels."""
    if not data.startswith(PNG_SIGNATURE):
        raise PngFormatError("not a PNG: bad signature")
    info = None
    for tag, payload in _iter_chunks(data):
        if tag == b"IHDR":
            width, height, bit_depth, color_type = struct.unpack(
                ">IIBB", payload[:10]
            )
            info = PngInfo(width, height, bit_depth, color_type)
        elif tag == b"tEXt" and info is not None:
            key, _, value = payload.partition(b"\x00")
            info.texts[key.decode("latin-1")] = value.decode("latin-1").encode(
                "latin-1"
            ).decode("unicode_escape")
    if info is None:
        raise PngFormatError("missing IHDR chunk")
    return info


def decode_gray(data: bytes) -> np.ndarray:
    """Decode a PNG produced by encode_gray back into a 2D uint8 array."""
    info = read_info(data)
    if info.bit_depth != 8 or info.color_type != 0:
        raise PngFormatError(
            f"unsupported PNG (bit_depth={info.bit_depth}, color_type={info.color_type})"
        )
    idat = b"".join(p for tag, p in _iter_chunks(data) if tag == b"IDAT")
    raw = zlib.decompress(idat)
    stride = info.width + 1
    if len(raw) != stride * info.height:
        raise PngFormatError("unexpected IDAT length")
    rows = []
    for y in range(info.height):
        row = raw[y * stride : (y + 1) * stride]
        if row[0] != 0:
            raise PngFormatError(f"unsupported filter type {row[0]}")
        rows.append(np.frombuffer(row[1:], dtype=np.uint8))
    return np.stack(rows)
