"""Deterministic on-disk format for trained models.

Layout: an 8-byte magic tag, a little-endian uint64 header length, a JSON
header (sorted keys) describing kind, metadata, and array shapes, then the
raw C-order array bytes in header order. No timestamps or environment
details leak in, so saving the same model twice yields identical files.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["save_model", "load_model"]

_MAGIC = b"AGRASPM1"


def save_model(path, kind: str, arrays: dict[str, np.ndarray], meta: dict) -> None:
    names = sorted(arrays)
    header = {
        "kind": kind,
        "meta": meta,
        "arrays": [
            {
                "name": n,
                "dtype": str(arrays[n].dtype),
                "shape": list(arrays[n].shape),
            }
            for n in names
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(arrays[n]).tobytes())


def load_model(path) -> tuple[str, dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != _MAGIC:
            raise ValueError(f"not a model file: {path}")
        hlen = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        arrays: dict[str, np.ndarray] = {}
        for spec in header["arrays"]:
            dtype = np.dtype(spec["dtype"])
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * dtype.itemsize)
            arrays[spec["name"]] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
    return header["kind"], arrays, header.get("meta", {})
