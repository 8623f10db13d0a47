"""Weight checkpoints: one JSON header line, then flat little-endian float32.

Layout:
    line 1   UTF-8 JSON + "\\n":
             {"format": "dualdepth-checkpoint", "version": 1,
              "meta": {...},
              "tensors": [{"name": str, "shape": [..], "offset": int}, ...]}
    rest     concatenated float32 little-endian arrays, C order

Offsets count float32 elements from the start of the binary section, in
file order.  Arrays of any float dtype are accepted for saving and are
stored as float32.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from dualdepth.errors import InputError

FORMAT_NAME = "dualdepth-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(
    path: str | Path, tensors: dict[str, np.ndarray], meta: dict | None = None
) -> None:
    entries = []
    blobs = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        if not np.all(np.isfinite(arr)):
            raise InputError(f"checkpoint tensor {name!r} has non-finite values")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.size
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "meta": meta or {},
        "tensors": entries,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8") + b"\n")
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (name -> float32 array, meta)."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        payload = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise InputError(f"{path} is not a checkpoint (bad header): {exc}") from exc
    if header.get("format") != FORMAT_NAME:
        raise InputError(f"{path} is not a {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise InputError(f"unsupported checkpoint version {header.get('version')}")

    flat = np.frombuffer(payload, dtype="<f4")
    out: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        shape = tuple(int(s) for s in entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = int(entry["offset"])
        if start + size > flat.size:
            raise InputError(f"checkpoint truncated: {entry['name']} extends past end of data")
        out[entry["name"]] = flat[start : start + size].reshape(shape).copy()
    return out, header.get("meta", {})
