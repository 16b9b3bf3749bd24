"""Checkpoint container: magic 'LPNAT1', a text header listing metadata and
parameter shapes, then raw little-endian float64 blobs in header order.

Header grammar (ASCII, one record per line):

    LPNAT1
    meta <key> <value>          # value is uri-quoted, no spaces
    param <name> <d0,d1,...>    # scalar shape encoded as '-'
    end

Metadata carries the config hash, trained-step counter and, for editing
students, the head manifest and embedding-tie topology.
"""

from __future__ import annotations

from urllib.parse import quote, unquote

import numpy as np

MAGIC = b"LPNAT1"


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict[str, str]):
    """Write parameters (insertion order preserved) and metadata."""
    lines = [MAGIC.decode()]
    for key, value in meta.items():
        if " " in key:
            raise ValueError(f"meta key may not contain spaces: {key!r}")
        lines.append(f"meta {key} {quote(str(value), safe='')}")
    for name, arr in params.items():
        if " " in name:
            raise ValueError(f"param name may not contain spaces: {name!r}")
        shape = ",".join(str(n) for n in arr.shape) or "-"
        lines.append(f"param {name} {shape}")
    lines.append("end")
    with open(path, "wb") as f:
        f.write(("\n".join(lines) + "\n").encode("ascii"))
        for arr in params.values():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(MAGIC):
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    header_end = blob.index(b"\nend\n") + len(b"\nend\n")
    header = blob[:header_end].decode("ascii").splitlines()
    meta: dict[str, str] = {}
    shapes: list[tuple[str, tuple[int, ...]]] = []
    for line in header[1:-1]:
        kind, name, payload = line.split(" ", 2)
        if kind == "meta":
            meta[name] = unquote(payload)
        elif kind == "param":
            shape = () if payload == "-" else tuple(int(x) for x in payload.split(","))
            shapes.append((name, shape))
        else:
            raise ValueError(f"{path}: bad header record {line!r}")
    params: dict[str, np.ndarray] = {}
    offset = header_end
    for name, shape in shapes:
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        params[name] = arr.reshape(shape).astype(np.float64)
        offset += count * 8
    if offset != len(blob):
        raise ValueError(f"{path}: trailing bytes after parameter blobs")
    return params, meta
