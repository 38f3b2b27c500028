"""On-disk formats: the ``GMAP`` gamma-field dump and atomic file writes."""

import os
import struct
import tempfile

import numpy as np

__all__ = ["GMAP_MAGIC", "encode_gamma_bin", "decode_gamma_bin", "atomic_write"]

GMAP_MAGIC = b"GMAP"
_HEADER = struct.Struct("<4sIII")


def encode_gamma_bin(gamma):
    """Pack an ``(H, W, C)`` gamma array.

    Layout: 16-byte header (magic ``GMAP``, little-endian u32 H, W, C)
    followed by row-major little-endian float32 values.
    """
    gamma = np.asarray(gamma)
    if gamma.ndim != 3:
        raise ValueError(f"gamma must be (H, W, C), got shape {gamma.shape}")
    h, w, c = gamma.shape
    return _HEADER.pack(GMAP_MAGIC, h, w, c) + gamma.astype("<f4").tobytes(order="C")


def decode_gamma_bin(data):
    if len(data) < _HEADER.size:
        raise ValueError("truncated GMAP header")
    magic, h, w, c = _HEADER.unpack_from(data)
    if magic != GMAP_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    expected = _HEADER.size + 4 * h * w * c
    if len(data) != expected:
        raise ValueError(f"GMAP payload is {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(h, w, c).copy()


def atomic_write(path, data):
    """Write ``data`` (bytes or str) to ``path`` via a temp file and rename."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
