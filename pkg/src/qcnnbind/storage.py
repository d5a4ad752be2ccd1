"""Binary containers for encoded datasets and model checkpoints.

All integers and floats are little-endian; floats are IEEE-754 float64.

Dataset (``.qds``)::

    b"QCDS"  u16 version  u16 n_qubits  u64 count
    count x ( u32 id_len  id (utf-8)  f64 label_dg  f64[2**n_qubits] amplitudes )

Checkpoint (``.qckpt``)::

    b"QCKP"  u16 version
    u32 len  arch name (utf-8)
    u32 len  architecture text (utf-8)
    u32 n_filters
    n_filters x ( u16 m  f64[4**m] raw (row-major)  f64[4**m] projected (row-major) )
    f64 w0  f64 w1

The projected matrices are informational; loading always re-derives them
from the raw entries, and ``verify`` checks that both agree.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .circuit import ArchitectureSpec, ModelParams, format_arch, parse_arch
from .errors import FormatError
from .ingest import EncodedState

DATASET_MAGIC = b"QCDS"
CHECKPOINT_MAGIC = b"QCKP"
VERSION = 1
_F64 = np.dtype("<f8")


class _Reader:
    def __init__(self, data: bytes, path):
        self.data, self.pos, self.path = data, 0, path

    def take(self, n):
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.path}: truncated at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def floats(self, n):
        return np.frombuffer(self.take(8 * n), dtype=_F64).astype(float)

    def text(self):
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")


def _text(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def dataset_bytes(states, n_qubits: int) -> bytes:
    dim = 1 << n_qubits
    parts = [DATASET_MAGIC, struct.pack("<HHQ", VERSION, n_qubits, len(states))]
    for s in states:
        amps = np.asarray(s.amplitudes, dtype=_F64)
        if amps.shape != (dim,):
            raise FormatError(f"sample {s.id!r} has length {amps.size}, expected {dim}")
        parts += [_text(s.id), struct.pack("<d", s.label_dg), amps.tobytes()]
    return b"".join(parts)


def write_dataset(path, states, n_qubits: int) -> None:
    Path(path).write_bytes(dataset_bytes(states, n_qubits))


def is_dataset(path) -> bool:
    try:
        with open(path, "rb") as fh:
            return fh.read(4) == DATASET_MAGIC
    except OSError:
        return False


def read_dataset(path) -> tuple[int, list[EncodedState]]:
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != DATASET_MAGIC:
        raise FormatError(f"{path}: not a dataset file")
    version, n_qubits, count = r.unpack("<HHQ")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported dataset version {version}")
    dim = 1 << n_qubits
    states = []
    for _ in range(count):
        sid = r.text()
        (label,) = r.unpack("<d")
        states.append(EncodedState(r.floats(dim), label, sid))
    if r.pos != len(r.data):
        raise FormatError(f"{path}: {len(r.data) - r.pos} trailing bytes")
    return n_qubits, states


def checkpoint_bytes(arch: ArchitectureSpec, params: ModelParams, projected=None) -> bytes:
    if projected is None:
        projected = params.orth_filters()
    parts = [CHECKPOINT_MAGIC, struct.pack("<H", VERSION), _text(arch.name), _text(format_arch(arch)),
             struct.pack("<I", len(params.raw_filters))]
    for raw, q, layer in zip(params.raw_filters, projected, arch.layers):
        parts += [struct.pack("<H", layer.arity),
                  np.ascontiguousarray(raw, dtype=_F64).tobytes(),
                  np.ascontiguousarray(q, dtype=_F64).tobytes()]
    parts.append(struct.pack("<dd", params.w0, params.w1))
    return b"".join(parts)


def write_checkpoint(path, arch: ArchitectureSpec, params: ModelParams, projected=None) -> None:
    Path(path).write_bytes(checkpoint_bytes(arch, params, projected))


def read_checkpoint(path):
    """Return ``(arch, params, stored_projections)``."""
    r = _Reader(Path(path).read_bytes(), path)
    if r.take(4) != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint file")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    name = r.text()
    arch = parse_arch(r.text())
    if arch.name != name:
        raise FormatError(f"{path}: arch name {name!r} does not match embedded text {arch.name!r}")
    (n_filters,) = r.unpack("<I")
    raws, projs = [], []
    for _ in range(n_filters):
        (m,) = r.unpack("<H")
        d = 1 << m
        raws.append(r.floats(d * d).reshape(d, d))
        projs.append(r.floats(d * d).reshape(d, d))
    w = r.unpack("<dd")
    if r.pos != len(r.data):
        raise FormatError(f"{path}: {len(r.data) - r.pos} trailing bytes")
    return arch, ModelParams(raws, np.array(w)), projs
