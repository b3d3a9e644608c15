"""
TRCK tensor container.

Layout (little-endian)::

    magic "TRCK" | version u32 | descriptor length u32 + UTF-8 text |
    epoch u32 | tensor count u32 |
    per tensor: name length u32 + UTF-8, rank u32, extents u32 x rank, float32 data

Model checkpoints, autoencoders and detectors all use this container; only the
descriptor text differs.
"""

import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Union

import numpy as np
import torch

from trajguard.constants import CONTAINER_MAGIC, CONTAINER_VERSION
from trajguard.exceptions import (
    BadMagicError,
    CheckpointError,
    TruncatedCheckpointError,
    VersionMismatchError,
)

_U32 = struct.Struct("<I")
_F32 = np.dtype("<f4")


@dataclass
class Container:
    """Decoded container contents"""

    descriptor: str
    epoch: int
    tensors: Dict[str, torch.Tensor] = field(default_factory=OrderedDict)


def encode_container(descriptor: str, epoch: int, tensors: Dict[str, torch.Tensor]) -> bytes:
    """Encode tensors (cast to float32) in insertion order."""
    parts = [CONTAINER_MAGIC, _U32.pack(CONTAINER_VERSION)]
    text = descriptor.encode("utf-8")
    parts += [_U32.pack(len(text)), text, _U32.pack(epoch), _U32.pack(len(tensors))]
    for name, tensor in tensors.items():
        encoded = name.encode("utf-8")
        array = tensor.detach().cpu().numpy().astype(_F32, copy=False)
        parts += [_U32.pack(len(encoded)), encoded, _U32.pack(array.ndim)]
        parts += [_U32.pack(extent) for extent in array.shape]
        parts.append(np.ascontiguousarray(array).tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        end = self.offset + size
        if end > len(self.data):
            raise TruncatedCheckpointError(
                f"file ends at byte {len(self.data)} while reading {what} "
                f"(needs {end})"
            )
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]


def decode_container(data: bytes) -> Container:
    """
    Decode container bytes.

    Raises:
        BadMagicError: wrong leading bytes
        VersionMismatchError: unsupported format version
        TruncatedCheckpointError: content shorter than declared
        CheckpointError: trailing garbage or undecodable text
    """
    if data[:4] != CONTAINER_MAGIC:
        if len(data) < 4:
            raise TruncatedCheckpointError(f"file is only {len(data)} bytes long")
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {CONTAINER_MAGIC!r}")
    reader = _Reader(data)
    reader.take(4, "magic")
    version = reader.u32("version")
    if version != CONTAINER_VERSION:
        raise VersionMismatchError(f"format version {version}, supported {CONTAINER_VERSION}")

    try:
        descriptor = reader.take(reader.u32("descriptor length"), "descriptor").decode("utf-8")
        epoch = reader.u32("epoch")
        count = reader.u32("tensor count")
        tensors: Dict[str, torch.Tensor] = OrderedDict()
        for index in range(count):
            name = reader.take(reader.u32(f"tensor {index} name length"), "tensor name").decode("utf-8")
            rank = reader.u32(f"{name} rank")
            shape = tuple(reader.u32(f"{name} extent") for _ in range(rank))
            size = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = reader.take(size * _F32.itemsize, f"{name} data")
            array = np.frombuffer(raw, dtype=_F32).reshape(shape).astype(np.float32)
            tensors[name] = torch.from_numpy(array)
    except UnicodeDecodeError as e:
        raise CheckpointError(f"undecodable text in container: {e}") from e

    if reader.offset != len(data):
        raise CheckpointError(f"{len(data) - reader.offset} trailing bytes after last tensor")
    return Container(descriptor=descriptor, epoch=epoch, tensors=tensors)


def write_container(
    path: Union[str, Path], descriptor: str, epoch: int, tensors: Dict[str, torch.Tensor]
) -> Path:
    """
    Write a container file.

    Raises:
        CheckpointError: the file cannot be written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_container(descriptor, epoch, tensors))
    except OSError as e:
        raise CheckpointError(f"Cannot write {path}: {e}") from e
    return path


def read_container(path: Union[str, Path]) -> Container:
    """Read and decode a container file."""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read {path}: {e}") from e
    return decode_container(data)
