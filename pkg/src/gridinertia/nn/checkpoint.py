"""Checkpoint container: a text header describing the model followed by a
little-endian float64 payload with a CRC per tensor.

Layout::

    INRTCK01\n
    meta <key> <value>\n        (any number, order preserved)
    tensor <name> <ndim> <dim0> ... <crc32>\n   (payload order)
    end\n
    <tensor payloads, float64 little-endian, back to back>

Everything before ``end`` is ASCII; meta values may contain spaces but not
newlines.  Reads verify the magic, the per-tensor CRCs, and that the binary
payload is exactly consumed.
"""

import zlib

import numpy as np

from ..errors import CheckpointFormatError

MAGIC = b"INRTCK01"
_END = b"\nend\n"


def write_checkpoint(path, meta, tensors):
    """Write meta (dict of str -> str) and tensors (ordered (name, array)
    pairs) to path.  Identical inputs produce identical bytes."""
    header_lines = [MAGIC.decode("ascii")]
    for key, value in meta.items():
        key = str(key)
        value = str(value)
        if not key or any(ch.isspace() for ch in key):
            raise CheckpointFormatError(f"bad meta key {key!r}")
        if "\n" in value:
            raise CheckpointFormatError(f"meta value for {key!r} contains newline")
        header_lines.append(f"meta {key} {value}")
    payloads = []
    seen = set()
    for name, array in tensors:
        name = str(name)
        if not name or any(ch.isspace() for ch in name):
            raise CheckpointFormatError(f"bad tensor name {name!r}")
        if name in seen:
            raise CheckpointFormatError(f"duplicate tensor name {name!r}")
        seen.add(name)
        # ascontiguousarray would promote 0-dim arrays to shape (1,);
        # tobytes() already serializes any layout in C order.
        arr = np.asarray(array, dtype=np.float64)
        raw = arr.astype("<f8", copy=False).tobytes()
        crc = zlib.crc32(raw) & 0xFFFFFFFF
        dims = " ".join(str(d) for d in arr.shape)
        if arr.ndim:
            header_lines.append(f"tensor {name} {arr.ndim} {dims} {crc}")
        else:
            header_lines.append(f"tensor {name} 0 {crc}")
        payloads.append(raw)
    blob = "\n".join(header_lines).encode("ascii") + _END + b"".join(payloads)
    with open(path, "wb") as fh:
        fh.write(blob)


def read_checkpoint(path):
    """Read a checkpoint; returns (meta dict, dict name -> float64 array)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(MAGIC):
        raise CheckpointFormatError(f"{path}: bad magic, not a checkpoint file")
    split = blob.find(_END)
    if split < 0:
        raise CheckpointFormatError(f"{path}: header terminator missing")
    try:
        header = blob[:split].decode("ascii")
    except UnicodeDecodeError as exc:
        raise CheckpointFormatError(f"{path}: header is not ASCII") from exc
    payload = blob[split + len(_END):]

    meta = {}
    specs = []
    for lineno, line in enumerate(header.splitlines()[1:], start=2):
        parts = line.split(" ")
        if parts[0] == "meta":
            if len(parts) < 3:
                raise CheckpointFormatError(f"{path}:{lineno}: malformed meta line")
            meta[parts[1]] = " ".join(parts[2:])
        elif parts[0] == "tensor":
            if len(parts) < 4:
                raise CheckpointFormatError(f"{path}:{lineno}: malformed tensor line")
            name = parts[1]
            try:
                ndim = int(parts[2])
                dims = tuple(int(p) for p in parts[3:3 + ndim])
                crc = int(parts[3 + ndim])
            except (ValueError, IndexError) as exc:
                raise CheckpointFormatError(
                    f"{path}:{lineno}: malformed tensor line") from exc
            if len(parts) != 4 + ndim:
                raise CheckpointFormatError(
                    f"{path}:{lineno}: trailing tokens on tensor line")
            if any(d < 0 for d in dims):
                raise CheckpointFormatError(f"{path}:{lineno}: negative dimension")
            specs.append((name, dims, crc, lineno))
        else:
            raise CheckpointFormatError(
                f"{path}:{lineno}: unknown header record {parts[0]!r}")

    tensors = {}
    offset = 0
    for name, dims, crc, lineno in specs:
        if name in tensors:
            raise CheckpointFormatError(f"{path}:{lineno}: duplicate tensor {name!r}")
        count = 1
        for d in dims:
            count *= d
        nbytes = count * 8
        raw = payload[offset:offset + nbytes]
        if len(raw) != nbytes:
            raise CheckpointFormatError(
                f"{path}: payload truncated in tensor {name!r}")
        if (zlib.crc32(raw) & 0xFFFFFFFF) != crc:
            raise CheckpointFormatError(f"{path}: checksum mismatch in tensor {name!r}")
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(dims).astype(
            np.float64)
        offset += nbytes
    if offset != len(payload):
        raise CheckpointFormatError(
            f"{path}: {len(payload) - offset} trailing payload bytes")
    return meta, tensors
