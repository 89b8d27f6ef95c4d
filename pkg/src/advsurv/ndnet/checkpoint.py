"""Self-describing binary container for named float64 arrays plus metadata.

File layout (all integers little-endian):

    bytes 0..3   magic b"NDN1"
    bytes 4..11  uint64 header length H
    bytes 12..   H bytes of UTF-8 JSON:
                   {"meta": {...},
                    "arrays": [{"name": str, "shape": [int, ...],
                                "offset": int, "nbytes": int}, ...]}
    then         raw little-endian float64 buffers, row-major, in array order

Arrays are written sorted by name and offsets are relative to the end of the
header, so identical contents always produce identical bytes and values
round-trip bit-exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAGIC = b"NDN1"


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    entries = []
    buffers = []
    offset = 0
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
        raw = arr.astype("<f8", copy=False).tobytes()
        entries.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)}
        )
        buffers.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"meta": meta or {}, "arrays": entries}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for raw in buffers:
            fh.write(raw)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path}: not a parameter container (bad magic)")
    header_len = int.from_bytes(blob[4:12], "little")
    header = json.loads(blob[12 : 12 + header_len].decode("utf-8"))
    base = 12 + header_len
    arrays = {}
    for entry in header["arrays"]:
        start = base + entry["offset"]
        raw = blob[start : start + entry["nbytes"]]
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(entry["shape"]).copy()
    return arrays, header["meta"]
