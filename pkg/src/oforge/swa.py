"""Named-tensor checkpoint files and element-wise weight averaging.

File layout, all little-endian:

    magic "NTCK" | u32 version (1) | u32 tensor count
    per tensor, in strictly ascending name order:
        u16 name length | UTF-8 name | u8 dtype (0 f32, 1 f64) | u8 rank
        | rank * u64 dims | raw row-major payload

Averaging accumulates float32 tensors in float64 and float64 tensors in
extended precision, so averaging k identical checkpoints reproduces the
input bit-for-bit for any practical k.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    EmptyInput,
    MalformedCheckpoint,
    MissingFile,
    SchemaMismatch,
    ShapeOverflow,
    TruncatedFile,
    UnsupportedVersion,
)

MAGIC = b"NTCK"
VERSION = 1
MAX_ELEMENTS = 1 << 48

_CODE_TO_DTYPE = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_TO_CODE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_ACCUMULATORS = {0: np.float64, 1: np.longdouble}


class NamedTensorCheckpoint:
    """Immutable name -> float array mapping, names kept sorted ascending."""

    def __init__(self, entries):
        self._entries = {}
        for name in sorted(entries):
            arr = np.asarray(entries[name])
            key = np.dtype(arr.dtype)
            if key not in _DTYPE_TO_CODE:
                raise ValueError(f"tensor {name!r}: unsupported dtype {arr.dtype}")
            if not isinstance(name, str) or not name:
                raise ValueError("tensor names must be non-empty strings")
            if not arr.flags["C_CONTIGUOUS"]:
                arr = np.ascontiguousarray(arr)  # keeps 0-d rank intact
            self._entries[name] = arr

    @property
    def names(self):
        return list(self._entries)

    def __len__(self):
        return len(self._entries)

    def __getitem__(self, name):
        return self._entries[name]

    def items(self):
        return self._entries.items()

    def __eq__(self, other):
        if not isinstance(other, NamedTensorCheckpoint):
            return NotImplemented
        if self.names != other.names:
            return False
        for name, arr in self._entries.items():
            o = other._entries[name]
            if arr.dtype != o.dtype or arr.shape != o.shape:
                return False
            if arr.tobytes() != o.tobytes():  # bit-exact, NaN-safe
                return False
        return True


def write_checkpoint(ckpt: NamedTensorCheckpoint, path) -> None:
    parts = [MAGIC, struct.pack("<II", VERSION, len(ckpt))]
    for name, arr in ckpt.items():
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise ValueError(f"tensor name too long: {len(encoded)} bytes")
        code = _DTYPE_TO_CODE[np.dtype(arr.dtype)]
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_CODE_TO_DTYPE[code]).tobytes())
    Path(path).write_bytes(b"".join(parts))


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFile(
                f"file ends inside {what}: need {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def read_checkpoint(path) -> NamedTensorCheckpoint:
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    cur = _Cursor(path.read_bytes())
    magic = cur.take(4, "magic")
    if magic != MAGIC:
        raise BadMagic(f"{path}: magic {magic!r}, expected {MAGIC!r}")
    (version,) = cur.unpack("<I", "version")
    if version != VERSION:
        raise UnsupportedVersion(f"{path}: version {version}, supported: {VERSION}")
    (count,) = cur.unpack("<I", "tensor count")
    entries = {}
    prev_name = None
    for i in range(count):
        (name_len,) = cur.unpack("<H", f"tensor {i} name length")
        try:
            name = cur.take(name_len, f"tensor {i} name").decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedCheckpoint(f"tensor {i}: name is not UTF-8") from exc
        if prev_name is not None and not (prev_name < name):
            raise MalformedCheckpoint(
                f"tensor names out of order: {prev_name!r} then {name!r}"
            )
        prev_name = name
        code, rank = cur.unpack("<BB", f"tensor {name!r} header")
        if code not in _CODE_TO_DTYPE:
            raise MalformedCheckpoint(f"tensor {name!r}: unknown dtype code {code}")
        dims = cur.unpack(f"<{rank}Q", f"tensor {name!r} shape") if rank else ()
        elements = 1
        for d in dims:
            elements *= d
        if elements > MAX_ELEMENTS:
            raise ShapeOverflow(
                f"tensor {name!r}: {elements} elements exceeds limit {MAX_ELEMENTS}"
            )
        dtype = _CODE_TO_DTYPE[code]
        payload = cur.take(elements * dtype.itemsize, f"tensor {name!r} payload")
        entries[name] = np.frombuffer(payload, dtype=dtype).reshape(dims).copy()
    if cur.pos != len(cur.data):
        raise MalformedCheckpoint(
            f"{len(cur.data) - cur.pos} trailing bytes after last tensor"
        )
    return NamedTensorCheckpoint(entries)


def _check_schema(reference: NamedTensorCheckpoint, other: NamedTensorCheckpoint, path):
    if reference.names != other.names:
        missing = set(reference.names) ^ set(other.names)
        raise SchemaMismatch(f"{path}: tensor names differ (symmetric difference {sorted(missing)})")
    for name, arr in reference.items():
        o = other[name]
        if arr.shape != o.shape:
            raise SchemaMismatch(f"{path}: tensor {name!r} shape {o.shape} != {arr.shape}")
        if arr.dtype != o.dtype:
            raise SchemaMismatch(f"{path}: tensor {name!r} dtype {o.dtype} != {arr.dtype}")


def average_checkpoints(paths, weights=None) -> NamedTensorCheckpoint:
    """Per-element (weighted) mean over checkpoints with identical schemas.

    Weights default to uniform; they must be positive and one per path.
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise EmptyInput("need at least one checkpoint to average")
    if weights is not None:
        weights = [float(w) for w in weights]
        if len(weights) != len(paths):
            raise ValueError(f"got {len(weights)} weights for {len(paths)} checkpoints")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
    ckpts = [read_checkpoint(p) for p in paths]
    reference = ckpts[0]
    for path, ckpt in zip(paths[1:], ckpts[1:]):
        _check_schema(reference, ckpt, path)

    out = {}
    for name, ref_arr in reference.items():
        code = _DTYPE_TO_CODE[np.dtype(ref_arr.dtype)]
        acc_dtype = _ACCUMULATORS[code]
        acc = np.zeros(ref_arr.shape, dtype=acc_dtype)
        if weights is None:
            for ckpt in ckpts:
                acc += ckpt[name].astype(acc_dtype)
            acc /= len(ckpts)
        else:
            for ckpt, w in zip(ckpts, weights):
                acc += ckpt[name].astype(acc_dtype) * acc_dtype(w)
            acc /= acc_dtype(sum(weights))
        out[name] = acc.astype(ref_arr.dtype)
    return NamedTensorCheckpoint(out)
