"""Checkpoint file: length-prefixed JSON header, then raw little-endian f32 arrays.

Layout: 5-byte magic ``TSVM1``, u32 little-endian header length, UTF-8 JSON
header, then the parameter payload. The header records the architecture id,
epoch, metrics, and for every array its name, shape, and byte offset into the
payload (in layer order).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import TruncatedPayload

MAGIC = b"TSVM1"


def save_checkpoint(path, arch_id: str, epoch: int, metrics: dict,
                    named_arrays: dict[str, np.ndarray]) -> None:
    entries = []
    offset = 0
    blobs = []
    for name, arr in named_arrays.items():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        entries.append({"name": name, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({
        "arch": arch_id,
        "epoch": epoch,
        "metrics": metrics,
        "arrays": entries,
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    """Returns (header dict, {name: float32 array})."""
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise TruncatedPayload(f"not a checkpoint file: magic {data[:5]!r}")
    (hlen,) = struct.unpack_from("<I", data, 5)
    header = json.loads(data[9:9 + hlen].decode("utf-8"))
    payload = data[9 + hlen:]
    arrays = {}
    for ent in header["arrays"]:
        raw = payload[ent["offset"]:ent["offset"] + ent["nbytes"]]
        if len(raw) != ent["nbytes"]:
            raise TruncatedPayload(f"array {ent['name']} truncated")
        arrays[ent["name"]] = np.frombuffer(raw, dtype="<f4").reshape(ent["shape"]).copy()
    return header, arrays
