"""Binary checkpoint format.

Layout (all little-endian)::

    b"GRIN"  u32 version
    u32 count, then `count` parameter entries
    u32 count, then `count` optimizer-state entries

An entry is ``u32 name_len | name (utf-8) | u32 rank | rank x u64 dims |
f64 payload``. Optimizer scalars are rank-0 entries (``adam.lr``,
``adam.t``, ...); moment buffers are ``adam.m/<param>`` and
``adam.v/<param>``.
"""
import os
import struct

import numpy as np

from .errors import FormatError

MAGIC = b"GRIN"
VERSION = 1


def _entries_bytes(entries):
    out = [struct.pack("<I", len(entries))]
    for name, arr in entries.items():
        arr = np.asarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)))
        out.append(raw)
        out.append(struct.pack("<I", arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        out.append(arr.tobytes(order="C"))
    return b"".join(out)


def dumps(params, state=None):
    state = state or {}
    return MAGIC + struct.pack("<I", VERSION) + _entries_bytes(params) + _entries_bytes(state)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, field):
        if self.pos + n > len(self.buf):
            raise FormatError(f"file truncated while reading {field}", field)
        b = self.buf[self.pos:self.pos + n]
        self.pos += n
        return b

    def unpack(self, fmt, field):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), field))


def _read_entries(r, table):
    (count,) = r.unpack("<I", f"{table}.count")
    entries = {}
    for i in range(count):
        where = f"{table}[{i}]"
        (nlen,) = r.unpack("<I", f"{where}.name_length")
        try:
            name = r.take(nlen, f"{where}.name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"{where}.name is not valid UTF-8", f"{where}.name") from None
        (rank,) = r.unpack("<I", f"{where}.rank")
        if rank > 8:
            raise FormatError(f"{name!r}: implausible rank {rank}", f"{where}.rank")
        dims = r.unpack(f"<{rank}Q", f"{name}.dims")
        size = int(np.prod(dims, dtype=np.uint64)) if rank else 1
        if size * 8 > len(r.buf) - r.pos:
            raise FormatError(f"file truncated in payload of {name!r}", f"{name}.payload")
        payload = r.take(size * 8, f"{name}.payload")
        if name in entries:
            raise FormatError(f"duplicate entry {name!r}", f"{where}.name")
        entries[name] = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
    return entries


def loads(buf):
    """Parse a checkpoint; nothing is returned unless the whole file is valid."""
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic bytes, not a GRIN checkpoint", "magic")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", "version")
    params = _read_entries(r, "params")
    state = _read_entries(r, "state")
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after state table", "trailer")
    return params, state


def save_checkpoint(params, state, path):
    """Write atomically: the file at ``path`` is either the old or the new one."""
    data = dumps(params, state)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
