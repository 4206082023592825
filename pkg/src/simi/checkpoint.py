"""Versioned binary checkpoints: parameters + optimizer state.

Layout (all integers little-endian):

    magic   4 bytes  b"SIMI"
    version u32      currently 1
    digest  32 bytes sha256 of the canonical training-config JSON
    config  u32 length + UTF-8 JSON (model config, for standalone inference)
    step    u64      optimizer step count
    count   u32      number of parameters
    then per parameter, in store order:
        name   u16 length + UTF-8
        dtype  u8 (1 = float32, 2 = float64)
        ndim   u8, then u32 per dimension
        value  raw little-endian array bytes
        m, v   raw little-endian array bytes (Adam moments, same shape)

Round-trips are byte-exact: loading and re-saving a checkpoint reproduces
the identical file.
"""

import hashlib
import json
import struct

import numpy as np

from .errors import CorruptCheckpoint
from .optim import ParamStore

MAGIC = b"SIMI"
VERSION = 1

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_CODE_FOR = {np.dtype(np.float32): 1, np.dtype(np.float64): 2}


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_digest(obj):
    """sha256 over the canonical JSON encoding of a config dict."""
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).digest()


def save_checkpoint(path, store, digest, config_dict):
    if len(digest) != 32:
        raise ValueError("digest must be 32 raw bytes")
    config_blob = canonical_json(config_dict).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(digest)
        fh.write(struct.pack("<I", len(config_blob)))
        fh.write(config_blob)
        fh.write(struct.pack("<Q", store.step_count))
        fh.write(struct.pack("<I", len(store.names())))
        for name, node in store.items():
            blob = name.encode("utf-8")
            value = node.value
            fh.write(struct.pack("<H", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<B", _CODE_FOR[np.dtype(value.dtype)]))
            fh.write(struct.pack("<B", value.ndim))
            for dim in value.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(value, dtype=value.dtype.newbyteorder("<")).tobytes())
            fh.write(np.ascontiguousarray(store.moment1[name]).astype(value.dtype.newbyteorder("<"), copy=False).tobytes())
            fh.write(np.ascontiguousarray(store.moment2[name]).astype(value.dtype.newbyteorder("<"), copy=False).tobytes())


class _Reader:
    def __init__(self, fh):
        self.fh = fh

    def exactly(self, n):
        blob = self.fh.read(n)
        if len(blob) != n:
            raise CorruptCheckpoint(f"unexpected end of file (wanted {n} bytes, got {len(blob)})")
        return blob

    def unpack(self, fmt):
        return struct.unpack(fmt, self.exactly(struct.calcsize(fmt)))[0]


def load_checkpoint(path):
    """Read a checkpoint; returns (store, meta) where meta carries
    ``digest`` (bytes), ``config`` (dict) and ``step`` (int)."""
    with open(path, "rb") as fh:
        r = _Reader(fh)
        if r.exactly(4) != MAGIC:
            raise CorruptCheckpoint(f"{path}: bad magic")
        version = r.unpack("<I")
        if version != VERSION:
            raise CorruptCheckpoint(f"{path}: unsupported version {version}")
        digest = r.exactly(32)
        config_len = r.unpack("<I")
        try:
            config = json.loads(r.exactly(config_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptCheckpoint(f"{path}: bad config blob: {exc}")
        step = r.unpack("<Q")
        count = r.unpack("<I")

        store = None
        for _ in range(count):
            name_len = r.unpack("<H")
            name = r.exactly(name_len).decode("utf-8")
            code = r.unpack("<B")
            if code not in _DTYPE_CODES:
                raise CorruptCheckpoint(f"{path}: unknown dtype code {code}")
            dtype = _DTYPE_CODES[code]
            ndim = r.unpack("<B")
            shape = tuple(r.unpack("<I") for _ in range(ndim))
            n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize if shape else dtype.itemsize
            if store is None:
                store = ParamStore(dtype=dtype.newbyteorder("="))
            value = np.frombuffer(r.exactly(n_bytes), dtype=dtype).reshape(shape).copy()
            m = np.frombuffer(r.exactly(n_bytes), dtype=dtype).reshape(shape).copy()
            v = np.frombuffer(r.exactly(n_bytes), dtype=dtype).reshape(shape).copy()
            store.add(name, value)
            store.moment1[name] = m.astype(dtype.newbyteorder("="), copy=False)
            store.moment2[name] = v.astype(dtype.newbyteorder("="), copy=False)
        if store is None:
            store = ParamStore()
        store.step_count = step
        trailing = fh.read(1)
        if trailing:
            raise CorruptCheckpoint(f"{path}: trailing bytes after parameter blobs")

    meta = {"digest": digest, "config": config, "step": step}
    return store, meta
