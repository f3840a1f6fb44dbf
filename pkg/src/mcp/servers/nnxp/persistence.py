"""Binary connectome files.

Layout, little-endian throughout::

    magic        4 bytes   b"NNXP"
    version      u32       1
    layer count  u32       L
    layer sizes  L x u32
    elu alpha    f64
    weights      f64 per connection, layer pair by layer pair, source-major
                 (bias row last), i.e. the flat in-memory order
"""

from __future__ import annotations

import logging
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .connectome import Connectome, weight_count
from .errors import ConnectomeFileError

log = logging.getLogger(__name__)

MAGIC = b"NNXP"
FORMAT_VERSION = 1
_U32 = struct.Struct("<I")
_F64 = struct.Struct("<d")


def encode_connectome(c: Connectome) -> bytes:
    parts = [
        MAGIC,
        _U32.pack(FORMAT_VERSION),
        _U32.pack(len(c.layer_sizes)),
        struct.pack(f"<{len(c.layer_sizes)}I", *c.layer_sizes),
        _F64.pack(c.elu_alpha),
    ]
    parts.extend(w.astype("<f8").tobytes() for w in c.weights)
    return b"".join(parts)


def file_size(layer_sizes) -> int:
    sizes = list(layer_sizes)
    weights = sum(weight_count(a, b) for a, b in zip(sizes[:-1], sizes[1:]))
    return 4 + 4 + 4 + 4 * len(sizes) + 8 + 8 * weights


def save_connectome(c: Connectome, path: str | Path) -> Path:
    """Write ``c`` atomically: a temp file in the target directory is renamed over ``path``."""
    out_path = Path(path)
    data = encode_connectome(c)
    try:
        fd, tmp_name = tempfile.mkstemp(prefix=f".{out_path.name}.", dir=out_path.parent)
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(data)
            os.replace(tmp_name, out_path)
        except BaseException:
            Path(tmp_name).unlink(missing_ok=True)
            raise
    except OSError as exc:
        raise ConnectomeFileError(f"cannot write connectome to {out_path}: {exc}") from exc
    log.debug("saved connectome %s (%d bytes) to %s", list(c.layer_sizes), len(data), out_path)
    return out_path


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise ConnectomeFileError("unexpected end of data")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def decode_connectome(data: bytes) -> Connectome:
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise ConnectomeFileError("not a connectome file")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise ConnectomeFileError(f"unsupported version {version}")
    layer_count = reader.u32()
    if layer_count < 2:
        raise ConnectomeFileError(f"invalid layer count {layer_count}")
    sizes = tuple(reader.u32() for _ in range(layer_count))
    if min(sizes) < 1:
        raise ConnectomeFileError(f"invalid layer sizes {list(sizes)}")
    (alpha,) = _F64.unpack(reader.take(8))
    if not (np.isfinite(alpha) and alpha > 0):
        raise ConnectomeFileError(f"invalid elu alpha {alpha}")

    weights = []
    for n_src, n_dst in zip(sizes[:-1], sizes[1:]):
        count = weight_count(n_src, n_dst)
        array = np.frombuffer(reader.take(8 * count), dtype="<f8").astype(np.float64)
        if not np.all(np.isfinite(array)):
            raise ConnectomeFileError("non-finite weight")
        weights.append(array)
    if reader.offset != len(data):
        raise ConnectomeFileError(f"{len(data) - reader.offset} trailing bytes after connectome")
    return Connectome(sizes, tuple(weights), alpha)


def load_connectome(path: str | Path) -> Connectome:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConnectomeFileError(f"cannot read connectome from {path}: {exc}") from exc
    return decode_connectome(data)
