"""Binary feature-matrix files.

Layout: magic ``PXFM``, u16 version, 16-byte zero-padded family tag,
u64 rows, u64 cols, u16 element width (8), then row-major little-endian
float64 data.
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import ParseError
from .vector import FAMILIES

MAGIC = b"PXFM"
VERSION = 1
_HEADER = struct.Struct("<4sH16sQQH")


def save_feature_matrix(path, matrix: np.ndarray, family: str) -> None:
    if family not in FAMILIES:
        raise ValueError(f"unknown feature family {family!r}")
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    if matrix.ndim != 2:
        raise ValueError("feature matrix must be 2D (rows = samples)")
    with open(path, "wb") as fh:
        fh.write(
            _HEADER.pack(
                MAGIC, VERSION, family.encode().ljust(16, b"\0"),
                matrix.shape[0], matrix.shape[1], 8,
            )
        )
        fh.write(matrix.tobytes())


def load_feature_matrix(path) -> tuple[np.ndarray, str]:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ParseError("truncated feature matrix header")
        magic, version, family_raw, rows, cols, width = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ParseError(f"bad magic {magic!r}")
        if version != VERSION:
            raise ParseError(f"unsupported feature matrix version {version}")
        if width != 8:
            raise ParseError(f"unsupported element width {width}")
        family = family_raw.rstrip(b"\0").decode()
        data = fh.read(rows * cols * 8)
        if len(data) != rows * cols * 8:
            raise ParseError("truncated feature matrix data")
    matrix = np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()
    return matrix, family
