"""Binary container: JSON header + little-endian array payload + checksum.

Layout (all integers little-endian):
    bytes 0..3    magic b"SMCF"
    bytes 4..7    u32 format version (currently 1)
    bytes 8..15   u64 header length H
    bytes 16..16+H  UTF-8 JSON header:
                  {"kind": str, "meta": {...},
                   "arrays": [{"name", "dtype", "shape"}, ...]}
    payload       arrays concatenated in header order, C-contiguous
    last 32 bytes sha256 of the payload

Used for model weights and corpus sequence blocks.
"""

import hashlib
import json
import struct

import numpy as np

MAGIC = b"SMCF"
VERSION = 1


class ContainerError(ValueError):
    pass


def write_container(path, kind, meta, arrays):
    """arrays: dict name -> ndarray (stored in insertion order)."""
    specs, chunks = [], []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        dt = arr.dtype.newbyteorder("<")
        specs.append({"name": name, "dtype": dt.str, "shape": list(arr.shape)})
        chunks.append(arr.astype(dt, copy=False).tobytes())
    payload = b"".join(chunks)
    header = json.dumps({"kind": kind, "meta": meta, "arrays": specs},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(header)))
        f.write(header)
        f.write(payload)
        f.write(hashlib.sha256(payload).digest())
    return payload_sha256(path)


def payload_sha256(path):
    """Checksum stored in the file (trailing 32 bytes), hex."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 48:
        raise ContainerError(f"{path}: truncated container")
    return data[-32:].hex()


def read_container(path):
    """Returns (kind, meta, dict name -> array).  Verifies the checksum."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 48 or data[:4] != MAGIC:
        raise ContainerError(f"{path}: not a shapemocap container")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise ContainerError(f"{path}: container version {version}, "
                             f"expected {VERSION}")
    (hlen,) = struct.unpack_from("<Q", data, 8)
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ContainerError(f"{path}: bad header ({e})") from None
    payload = data[16 + hlen:-32]
    if hashlib.sha256(payload).digest() != data[-32:]:
        raise ContainerError(f"{path}: payload checksum mismatch")
    arrays = {}
    off = 0
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        n = int(np.prod(spec["shape"], dtype=np.int64)) * dt.itemsize
        if off + n > len(payload):
            raise ContainerError(f"{path}: payload shorter than declared arrays")
        arrays[spec["name"]] = np.frombuffer(
            payload[off:off + n], dtype=dt).reshape(spec["shape"]).copy()
        off += n
    if off != len(payload):
        raise ContainerError(f"{path}: {len(payload) - off} trailing payload bytes")
    return header["kind"], header["meta"], arrays
