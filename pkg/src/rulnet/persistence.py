"""RULM checkpoint format.

Layout::

    b"RULM"                      magic
    u32 little-endian            format version
    u32 little-endian            header length in bytes
    header                       UTF-8 JSON: architecture, normalization,
                                 train_config_digest, tensors directory
                                 [{name, dims, offset}] with offsets relative
                                 to the start of the payload section
    payload                      little-endian float64, row-major, in
                                 directory order
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .network import ModelArchitecture
from .numerics import Params
from .preprocess import NormalizationStats

MAGIC = b"RULM"
FORMAT_VERSION = 1
_LE_F64 = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    architecture: ModelArchitecture
    params: Params
    normalization: NormalizationStats
    train_config_digest: str = ""
    format_version: int = FORMAT_VERSION
    cap: int = 130


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _validate_shapes(arch: ModelArchitecture, params: Params) -> None:
    expected = arch.param_shapes()
    unknown = set(params) - set(expected)
    if unknown:
        raise CheckpointError(f"unknown tensor name(s): {sorted(unknown)}")
    for name, shape in expected.items():
        if name not in params:
            raise CheckpointError(f"missing tensor {name!r}")
        if tuple(params[name].shape) != shape:
            raise CheckpointError(f"shape mismatch for {name!r}: {params[name].shape} vs {shape}")


def to_bytes(ckpt: Checkpoint) -> bytes:
    _validate_shapes(ckpt.architecture, ckpt.params)
    directory = []
    payloads = []
    offset = 0
    for name in ckpt.architecture.param_shapes():
        data = np.ascontiguousarray(ckpt.params[name], dtype=_LE_F64).tobytes()
        directory.append({"name": name, "dims": list(ckpt.params[name].shape), "offset": offset})
        payloads.append(data)
        offset += len(data)
    header = json.dumps({
        "architecture": ckpt.architecture.to_dict(),
        "normalization": json.loads(ckpt.normalization.to_json()),
        "train_config_digest": ckpt.train_config_digest,
        "cap": ckpt.cap,
        "tensors": directory,
    }).encode("utf-8")
    return b"".join([MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header, *payloads])


def from_bytes(blob: bytes) -> Checkpoint:
    if len(blob) < 12 or blob[:4] != MAGIC:
        raise CheckpointError("not a checkpoint")
    version, header_len = struct.unpack_from("<II", blob, 4)
    if version > FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format version {version} is newer than supported {FORMAT_VERSION}")
    if len(blob) < 12 + header_len:
        raise CheckpointError("truncated payload (header)")
    try:
        header = json.loads(blob[12:12 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt header: {exc}") from None

    arch = ModelArchitecture.from_dict(header["architecture"])
    stats = NormalizationStats(np.array(header["normalization"]["min"], dtype=np.float64),
                               np.array(header["normalization"]["max"], dtype=np.float64))
    expected = arch.param_shapes()
    body = memoryview(blob)[12 + header_len:]
    params: Params = {}
    for entry in header["tensors"]:
        name = entry["name"]
        if name not in expected:
            raise CheckpointError(f"unknown tensor name {name!r}")
        dims = tuple(entry["dims"])
        if dims != expected[name]:
            raise CheckpointError(f"shape mismatch for {name!r}: {dims} vs {expected[name]}")
        count = int(np.prod(dims))
        start = entry["offset"]
        end = start + count * _LE_F64.itemsize
        if end > len(body):
            raise CheckpointError("truncated payload")
        arr = np.frombuffer(body[start:end], dtype=_LE_F64).astype(np.float64).reshape(dims)
        params[name] = arr
    _validate_shapes(arch, params)
    return Checkpoint(arch, params, stats, header.get("train_config_digest", ""), version,
                      header.get("cap", 130))


def save_checkpoint(ckpt: Checkpoint, destination: str | Path | BinaryIO) -> bytes:
    blob = to_bytes(ckpt)
    if hasattr(destination, "write"):
        destination.write(blob)
    else:
        Path(destination).write_bytes(blob)
    return blob


def load_checkpoint(source: str | Path | BinaryIO | bytes) -> Checkpoint:
    if isinstance(source, (bytes, bytearray)):
        return from_bytes(bytes(source))
    if hasattr(source, "read"):
        return from_bytes(source.read())
    return from_bytes(Path(source).read_bytes())
