"""Checkpoint container: JSON header, raw little-endian tensors, checksum trailer.

Layout:
    MOLGUIDE-CKPT 1\\n
    [8-byte LE header length][UTF-8 JSON header]
    [tensor payloads, row-major, little-endian, in header order]
    [8-byte BLAKE2b digest of everything above]
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from molguide import __version__
from molguide.utils.errors import CheckpointError

MAGIC = b"MOLGUIDE-CKPT 1\n"
LENGTH_SIZE = 8
CHECKSUM_SIZE = 8
SUPPORTED_DTYPES = ("float32", "float64", "int64")


@dataclass
class Checkpoint:
    """Everything needed to rebuild a trained network and its diffusion process.

    Attributes:
        kind: "denoiser" or "classifier".
        tensors: parameter arrays by name, in a stable order.
        config: RunConfig echo.
        network: GraphTransformerConfig fields.
        space, schedule, marginals: the diffusion process.
        node_histogram: training node-count histogram (index = atom count).
        metadata: lambda_edge, loss function, lambda_guidance, steps, seed, final loss.
    """
    kind: str
    tensors: dict[str, np.ndarray]
    config: dict
    network: dict
    space: dict
    schedule: dict
    marginals: dict
    node_histogram: list[int] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def header(self) -> dict:
        entries = []
        offset = 0
        for name, array in self.tensors.items():
            nbytes = int(array.size * array.dtype.itemsize)
            entries.append({
                "name": name,
                "shape": list(array.shape),
                "dtype": array.dtype.name,
                "offset": offset,
                "nbytes": nbytes,
            })
            offset += nbytes
        return {
            "version": __version__,
            "kind": self.kind,
            "tensors": entries,
            "config": self.config,
            "network": self.network,
            "space": self.space,
            "schedule": self.schedule,
            "marginals": self.marginals,
            "node_histogram": self.node_histogram,
            "metadata": self.metadata,
        }


def _to_le(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    if array.dtype.name not in SUPPORTED_DTYPES:
        raise CheckpointError(f"unsupported tensor dtype {array.dtype}")
    return array.astype(array.dtype.newbyteorder("<"), copy=False)


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    ckpt.tensors = {name: _to_le(a) for name, a in ckpt.tensors.items()}
    header = json.dumps(ckpt.header(), sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = bytearray(MAGIC)
    body += struct.pack("<Q", len(header))
    body += header
    for array in ckpt.tensors.values():
        body += array.tobytes(order="C")
    body += hashlib.blake2b(bytes(body), digest_size=CHECKSUM_SIZE).digest()
    return bytes(body)


def decode_checkpoint(data: bytes) -> Checkpoint:
    """Parse and verify a container.

    Raises:
        CheckpointError: bad magic, truncated data, checksum mismatch, bad header.
    """
    if not data.startswith(MAGIC):
        raise CheckpointError("not a molguide checkpoint (bad magic)")
    if len(data) < len(MAGIC) + LENGTH_SIZE + CHECKSUM_SIZE:
        raise CheckpointError("checkpoint truncated")
    content, trailer = data[:-CHECKSUM_SIZE], data[-CHECKSUM_SIZE:]
    if hashlib.blake2b(content, digest_size=CHECKSUM_SIZE).digest() != trailer:
        raise CheckpointError("checkpoint checksum mismatch")

    pos = len(MAGIC)
    (header_len,) = struct.unpack("<Q", content[pos:pos + LENGTH_SIZE])
    pos += LENGTH_SIZE
    if pos + header_len > len(content):
        raise CheckpointError("checkpoint header truncated")
    try:
        header = json.loads(content[pos:pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"unreadable checkpoint header: {e}") from e
    payload = memoryview(content)[pos + header_len:]

    tensors: dict[str, np.ndarray] = {}
    try:
        for entry in header["tensors"]:
            start, nbytes = entry["offset"], entry["nbytes"]
            if start + nbytes > len(payload) or entry["dtype"] not in SUPPORTED_DTYPES:
                raise CheckpointError(f"tensor {entry['name']} out of bounds or bad dtype")
            dtype = np.dtype(entry["dtype"]).newbyteorder("<")
            array = np.frombuffer(payload[start:start + nbytes], dtype=dtype)
            tensors[entry["name"]] = array.reshape(entry["shape"]).astype(entry["dtype"])
        return Checkpoint(
            kind=header["kind"],
            tensors=tensors,
            config=header["config"],
            network=header["network"],
            space=header["space"],
            schedule=header["schedule"],
            marginals=header["marginals"],
            node_histogram=header.get("node_histogram", []),
            metadata=header.get("metadata", {}),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"malformed checkpoint header: {e}") from e


def save_checkpoint(path: str | os.PathLike, ckpt: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(ckpt))
    return path


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    """Read and verify a checkpoint file.

    Raises:
        CheckpointError: unreadable or corrupt file.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data)
