"""Binary raster files.

Layout (all integers little-endian ``u32``)::

    magic "DIVF" | version=1 | m | n | ndims | dims[ndims] | data

``data`` holds ``prod(dims) * m * n`` little-endian float64 values, cells in
odometer order (last grid axis fastest) and each matrix row-major.  Label
files use magic ``"DIVL"`` and one ``u8`` per cell in place of the matrices;
their ``m`` and ``n`` fields are written as 1.
"""
from __future__ import annotations

import struct

import numpy as np

from .exceptions import FormatError

__all__ = ["write_field", "read_field", "write_labels", "read_labels", "VERSION"]

VERSION = 1


def _header(magic: bytes, m: int, n: int, dims) -> bytes:
    dims = [int(d) for d in dims]
    return magic + struct.pack(f"<{4 + len(dims)}I", VERSION, m, n, len(dims), *dims)


def _parse(buf: bytes, magic: bytes):
    if len(buf) < 20 or buf[:4] != magic:
        raise FormatError(f"not a {magic.decode()} file")
    version, m, n, nd = struct.unpack_from("<4I", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    off = 20 + 4 * nd
    if nd == 0 or len(buf) < off:
        raise FormatError("truncated header")
    dims = struct.unpack_from(f"<{nd}I", buf, 20)
    return m, n, tuple(dims), off


def write_field(path, raster: np.ndarray) -> None:
    raster = np.asarray(raster, dtype="<f8")
    m, n = raster.shape[-2:]
    with open(path, "wb") as fh:
        fh.write(_header(b"DIVF", m, n, raster.shape[:-2]))
        fh.write(np.ascontiguousarray(raster).tobytes())


def read_field(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    m, n, dims, off = _parse(buf, b"DIVF")
    count = int(np.prod(dims)) * m * n
    if len(buf) != off + 8 * count:
        raise FormatError(f"expected {count} float64 values, file holds {(len(buf) - off) / 8:g}")
    return np.frombuffer(buf, dtype="<f8", offset=off).astype(float).reshape(dims + (m, n))


def write_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(_header(b"DIVL", 1, 1, labels.shape))
        fh.write(np.ascontiguousarray(labels).tobytes())


def read_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    _, _, dims, off = _parse(buf, b"DIVL")
    if len(buf) != off + int(np.prod(dims)):
        raise FormatError("label payload size does not match header")
    return np.frombuffer(buf, dtype=np.uint8, offset=off).reshape(dims).copy()
