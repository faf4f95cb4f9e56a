"""Versioned binary container for trained models.

Layout (all integers little-endian)::

    b"CNPLMODL"            8-byte magic
    uint16 version
    uint32 header length   followed by a UTF-8 JSON header
    float64[...]           concatenated arrays, little-endian, in header order

The header carries a ``kind`` tag, a free-form ``descriptor`` and an array
manifest ``[{"name", "shape"}, ...]``.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"CNPLMODL"
VERSION = 1


class ContainerError(ValueError):
    pass


def write_container(path, kind: str, descriptor: dict, arrays: dict[str, np.ndarray]) -> None:
    names = list(arrays)
    manifest = [{"name": n, "shape": list(np.shape(arrays[n]))} for n in names]
    header = json.dumps({"kind": kind, "descriptor": descriptor, "arrays": manifest},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(header)))
        fh.write(header)
        for n in names:
            fh.write(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())


def read_container(path, expect_kind: str | None = None):
    """Return ``(kind, descriptor, arrays)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:len(MAGIC)] != MAGIC:
        raise ContainerError(f"{path}: not a model container (bad magic)")
    off = len(MAGIC)
    version, hlen = struct.unpack_from("<HI", data, off)
    if version != VERSION:
        raise ContainerError(f"{path}: container version {version}, expected {VERSION}")
    off += struct.calcsize("<HI")
    header = json.loads(data[off:off + hlen].decode("utf-8"))
    off += hlen
    if expect_kind is not None and header["kind"] != expect_kind:
        raise ContainerError(f"{path}: holds a {header['kind']!r} model, expected {expect_kind!r}")
    arrays = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        if off + 8 * count > len(data):
            raise ContainerError(f"{path}: trailing or missing payload bytes")
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
        arrays[entry["name"]] = arr.reshape(shape)
        off += 8 * count
    if off != len(data):
        raise ContainerError(f"{path}: trailing or missing payload bytes")
    return header["kind"], header["descriptor"], arrays
