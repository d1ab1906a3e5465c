"""Version-tagged binary checkpoint container for adapter states.

Follows the embedding-file convention: fixed magic, little-endian header,
then raw payload. The header is a JSON blob describing the adapter kind,
scalar metadata, and the shapes of the float64 arrays that follow it in
order, so states round-trip bit-exactly.
"""

import json
import os
import struct

import numpy as np

from .errors import BadMagic, DimensionMismatch

MAGIC = b"RAILCKP1"
VERSION = 1
PREFIX = struct.Struct("<8sII")  # magic, version, header length


def write_checkpoint(path, kind, meta, arrays):
    """Write ``arrays`` (an ordered dict of name -> ndarray) under ``meta``."""
    path = os.fspath(path)
    entries = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = json.dumps({"kind": kind, "meta": meta, "arrays": entries},
                        sort_keys=True).encode("utf-8")
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(PREFIX.pack(MAGIC, VERSION, len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)
    os.replace(tmp, path)


def read_checkpoint(path, kind):
    """Read a checkpoint, returning (meta, dict of name -> float64 array)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < PREFIX.size:
        raise BadMagic(f"{path}: file shorter than the checkpoint header")
    magic, version, header_len = PREFIX.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagic(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise BadMagic(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(blob[PREFIX.size:PREFIX.size + header_len])
    if header["kind"] != kind:
        raise DimensionMismatch(
            f"{path}: checkpoint holds a {header['kind']} state, expected {kind}"
        )
    arrays = {}
    offset = PREFIX.size + header_len
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(blob):
            raise DimensionMismatch(f"{path}: truncated array {entry['name']!r}")
        arrays[entry["name"]] = np.frombuffer(
            blob, dtype="<f8", count=count, offset=offset
        ).reshape(shape).copy()
        offset = end
    if offset != len(blob):
        raise DimensionMismatch(f"{path}: {len(blob) - offset} trailing bytes")
    return header["meta"], arrays
