"""Checkpoint container: a JSON header followed by raw float32 arrays.

Layout::

    8 bytes   little-endian uint64, header length N
    N bytes   UTF-8 JSON: {"meta": {...}, "tensors": [{"name", "shape", "offset"}]}
    ...       concatenated little-endian float32 payloads; offsets are relative
              to the first payload byte
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_LE_F32 = np.dtype("<f4")


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    offset = 0
    blobs = []
    for name, arr in arrays.items():
        blob = np.ascontiguousarray(arr, dtype=_LE_F32).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"meta": meta or {}, "tensors": entries}, sort_keys=True).encode("utf-8")
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)
    tmp.replace(path)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise ValueError(f"{path}: truncated checkpoint")
    (n,) = struct.unpack("<Q", raw[:8])
    header = json.loads(raw[8 : 8 + n].decode("utf-8"))
    payload = memoryview(raw)[8 + n :]
    arrays = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        end = start + 4 * count
        if end > len(payload):
            raise ValueError(f"{path}: tensor {entry['name']!r} runs past end of file")
        arrays[entry["name"]] = np.frombuffer(payload[start:end], dtype=_LE_F32).reshape(shape).copy()
    return arrays, header["meta"]
