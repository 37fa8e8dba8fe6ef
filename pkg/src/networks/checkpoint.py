"""CKPT named-tensor checkpoint format.

Layout (little-endian)::

    magic       4s   b"CKPT"
    version     u16
    meta bytes  u32  length of the metadata block
    count       u32  number of tensors
    metadata         utf-8 ``key=value`` lines
    per tensor:
        name length u16, name (utf-8), ndim u8, dims u32 * ndim,
        width u8 (4 or 8), payload float32 or float64 * prod(dims)

float64 arrays keep eight bytes per value and everything else is written as
float32. Network weights default to float32; Adam moment buffers are float64,
so a resumed optimizer matches the saved one exactly.

Tensor names carry the network they belong to (``generator.``,
``discriminator.``, ``cascade.``) and optimizer buffers live under
``adam.<network>.m.`` / ``adam.<network>.v.``.
"""

from __future__ import annotations

import dataclasses
import logging
import struct
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TypeVar, get_type_hints

import numpy as np

from src.networks.params import ParameterSet
from src.tensor.optim import AdamState

logger = logging.getLogger(__name__)

MAGIC = b"CKPT"
FORMAT_VERSION = 2
HEADER = struct.Struct("<4sHII")
ENTRY_NAME = struct.Struct("<H")
ENTRY_NDIM = struct.Struct("<B")
ENTRY_WIDTH = struct.Struct("<B")
PAYLOAD_DTYPES = {4: "<f4", 8: "<f8"}

ArchT = TypeVar("ArchT")


class CheckpointError(ValueError):
    """Unreadable checkpoint file."""


class IncompatibleCheckpointError(CheckpointError):
    """Checkpoint tensors do not match the network they are loaded into."""

    def __init__(self, offenders: list[str]) -> None:
        self.offenders = offenders
        super().__init__(f"incompatible checkpoint tensors: {', '.join(offenders)}")


@dataclass
class Checkpoint:
    metadata: dict[str, str] = field(default_factory=dict)
    tensors: dict[str, np.ndarray] = field(default_factory=dict)

    def with_prefix(self, prefix: str) -> dict[str, np.ndarray]:
        """Tensors under ``prefix.`` with the prefix stripped."""
        start = len(prefix) + 1
        return {
            name[start:]: value
            for name, value in self.tensors.items()
            if name.startswith(prefix + ".")
        }

    def _moments(self, network: str, which: str) -> dict[str, np.ndarray]:
        prefix = f"adam.{network}.{which}"
        return {k: v.astype(np.float64) for k, v in self.with_prefix(prefix).items()}

    def adam_state(self, network: str) -> AdamState | None:
        if f"adam.{network}.t" not in self.metadata:
            return None
        meta = self.metadata
        try:
            return AdamState(
                lr=float(meta[f"adam.{network}.lr"]),
                beta1=float(meta[f"adam.{network}.beta1"]),
                beta2=float(meta[f"adam.{network}.beta2"]),
                epsilon=float(meta[f"adam.{network}.epsilon"]),
                t=int(meta[f"adam.{network}.t"]),
                m=self._moments(network, "m"),
                v=self._moments(network, "v"),
            )
        except KeyError as exc:
            raise CheckpointError(f"checkpoint metadata lacks {exc.args[0]}") from None


# -- raw format -------------------------------------------------------------------------


def write_checkpoint(path: Path, ckpt: Checkpoint) -> None:
    meta = "".join(f"{k}={v}\n" for k, v in ckpt.metadata.items()).encode("utf-8")
    chunks = [HEADER.pack(MAGIC, FORMAT_VERSION, len(meta), len(ckpt.tensors)), meta]
    for name, value in ckpt.tensors.items():
        encoded = name.encode("utf-8")
        array = np.ascontiguousarray(value, dtype="<f8" if value.dtype == np.float64 else "<f4")
        chunks.append(ENTRY_NAME.pack(len(encoded)) + encoded)
        chunks.append(ENTRY_NDIM.pack(array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(ENTRY_WIDTH.pack(array.itemsize))
        chunks.append(array.tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    logger.info("Saved checkpoint with %d tensors to %s", len(ckpt.tensors), path)


class _Reader:
    def __init__(self, raw: bytes, path: Path) -> None:
        self.raw = raw
        self.offset = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.raw):
            raise CheckpointError(f"{self.path}: truncated at byte {self.offset}")
        chunk = self.raw[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple[Any, ...]:
        return fmt.unpack(self.take(fmt.size))


def read_checkpoint(path: Path) -> Checkpoint:
    reader = _Reader(Path(path).read_bytes(), path)
    magic, version, meta_len, count = reader.unpack(HEADER)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: checkpoint version {version} not supported")

    metadata: dict[str, str] = {}
    for line in reader.take(meta_len).decode("utf-8").splitlines():
        key, sep, value = line.partition("=")
        if not sep:
            raise CheckpointError(f"{path}: malformed metadata line {line!r}")
        metadata[key] = value

    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack(ENTRY_NAME)
        name = reader.take(name_len).decode("utf-8")
        (ndim,) = reader.unpack(ENTRY_NDIM)
        dims = struct.unpack(f"<{ndim}I", reader.take(4 * ndim))
        size = int(np.prod(dims, dtype=np.int64))
        (width,) = reader.unpack(ENTRY_WIDTH)
        if width not in PAYLOAD_DTYPES:
            raise CheckpointError(f"{path}: tensor {name!r} has unsupported width {width}")
        payload = reader.take(width * size)
        array = np.frombuffer(payload, dtype=PAYLOAD_DTYPES[width])
        tensors[name] = array.astype(np.float32 if width == 4 else np.float64).reshape(dims)
    if reader.offset != len(reader.raw):
        raise CheckpointError(f"{path}: {len(reader.raw) - reader.offset} bytes of trailing data")
    return Checkpoint(metadata, tensors)


# -- architecture metadata --------------------------------------------------------------


def encode_architecture(arch: Any) -> dict[str, str]:
    encoded = {}
    for f in dataclasses.fields(arch):
        value = getattr(arch, f.name)
        if isinstance(value, tuple):
            text = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            text = "1" if value else "0"
        else:
            text = str(value)
        encoded[f"arch.{f.name}"] = text
    return encoded


def decode_architecture(cls: type[ArchT], metadata: Mapping[str, str]) -> ArchT:
    hints = get_type_hints(cls)
    kwargs: dict[str, Any] = {}
    for f in dataclasses.fields(cls):  # type: ignore[arg-type]
        key = f"arch.{f.name}"
        if key not in metadata:
            raise CheckpointError(f"checkpoint metadata lacks {key}")
        raw, hint = metadata[key], hints[f.name]
        if hint is bool:
            kwargs[f.name] = raw == "1"
        elif hint is int:
            kwargs[f.name] = int(raw)
        elif hint is float:
            kwargs[f.name] = float(raw)
        else:
            kwargs[f.name] = tuple(int(v) for v in raw.split(",") if v)
    return cls(**kwargs)


# -- bundling networks ------------------------------------------------------------------


def bundle(
    family: str,
    arch: Any,
    networks: Mapping[str, ParameterSet],
    config_hash: str,
    adam: Mapping[str, AdamState] | None = None,
) -> Checkpoint:
    """Collect named networks, architecture and optimizer state into a Checkpoint."""
    metadata = {"family": family, "config_hash": config_hash, **encode_architecture(arch)}
    tensors: dict[str, np.ndarray] = {}
    for network, params in networks.items():
        for name, tensor in params.items():
            tensors[f"{network}.{name}"] = tensor.data
    for network, state in (adam or {}).items():
        metadata[f"adam.{network}.t"] = str(state.t)
        metadata[f"adam.{network}.lr"] = repr(state.lr)
        metadata[f"adam.{network}.beta1"] = repr(state.beta1)
        metadata[f"adam.{network}.beta2"] = repr(state.beta2)
        metadata[f"adam.{network}.epsilon"] = repr(state.epsilon)
        for name in sorted(state.m):
            tensors[f"adam.{network}.m.{name}"] = state.m[name]
            tensors[f"adam.{network}.v.{name}"] = state.v[name]
    return Checkpoint(metadata, tensors)


def check_config_hash(ckpt: Checkpoint, config_hash: str | None) -> None:
    stored = ckpt.metadata.get("config_hash")
    if config_hash is not None and stored != config_hash:
        logger.warning(
            "Checkpoint config hash %s does not match the current config %s",
            (stored or "<none>")[:12],
            config_hash[:12],
        )


def restore(params: ParameterSet, ckpt: Checkpoint, network: str) -> None:
    """Load ``network.*`` tensors into ``params``, all or nothing."""
    stored = ckpt.with_prefix(network)
    offenders = []
    for name, tensor in params.items():
        if name not in stored:
            offenders.append(f"{network}.{name} (missing)")
        elif stored[name].shape != tensor.shape:
            offenders.append(
                f"{network}.{name} (shape {stored[name].shape}, expected {tensor.shape})"
            )
    if offenders:
        raise IncompatibleCheckpointError(offenders)
    params.load_arrays({name: stored[name] for name in params})
