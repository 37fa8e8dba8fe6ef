"""CINE binary file format.

Layout (little-endian)::

    magic      4s   b"CINE"
    version    u16  1
    frames     u32
    height     u32
    width      u32
    type code  u16  1 = float32
    spacing    f32  mm / pixel
    payload    T*H*W float32, frame-major then row-major
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.models.cine import CineSequence

logger = logging.getLogger(__name__)

MAGIC = b"CINE"
FORMAT_VERSION = 1
TYPE_FLOAT32 = 1
HEADER = struct.Struct("<4sHIIIHf")  # 24 bytes


class CineFormatError(ValueError):
    """Unreadable CINE file."""

    code = 0


class BadMagicError(CineFormatError):
    code = 1


class TruncatedPayloadError(CineFormatError):
    code = 2


class VersionMismatchError(CineFormatError):
    code = 3


@dataclass(frozen=True)
class CineFileHeader:
    frames: int
    height: int
    width: int
    pixel_spacing: float = 1.0
    version: int = FORMAT_VERSION
    type_code: int = TYPE_FLOAT32

    @property
    def payload_bytes(self) -> int:
        return self.frames * self.height * self.width * 4

    def pack(self) -> bytes:
        return HEADER.pack(
            MAGIC, self.version, self.frames, self.height, self.width,
            self.type_code, self.pixel_spacing,
        )

    @classmethod
    def unpack(cls, raw: bytes) -> CineFileHeader:
        if len(raw) < HEADER.size:
            raise TruncatedPayloadError(
                f"file holds {len(raw)} bytes, shorter than the {HEADER.size}-byte header"
            )
        magic, version, frames, height, width, type_code, spacing = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
        if version != FORMAT_VERSION:
            raise VersionMismatchError(
                f"format version {version} not supported (expected {FORMAT_VERSION})"
            )
        if type_code != TYPE_FLOAT32:
            raise CineFormatError(f"unsupported scalar type code {type_code}")
        return cls(frames, height, width, spacing, version, type_code)


def write_cine(path: Path, seq: CineSequence) -> None:
    header = CineFileHeader(seq.num_frames, seq.height, seq.width, seq.pixel_spacing)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = np.ascontiguousarray(seq.frames, dtype="<f4").tobytes()
    path.write_bytes(header.pack() + payload)
    logger.info("Wrote %d frames (%dx%d) to %s", seq.num_frames, seq.height, seq.width, path)


def read_cine(path: Path) -> CineSequence:
    raw = Path(path).read_bytes()
    header = CineFileHeader.unpack(raw)
    payload = raw[HEADER.size :]
    if len(payload) < header.payload_bytes:
        raise TruncatedPayloadError(
            f"{path}: payload has {len(payload)} bytes, header promises {header.payload_bytes}"
        )
    if len(payload) > header.payload_bytes:
        raise CineFormatError(
            f"{path}: {len(payload) - header.payload_bytes} bytes of trailing data"
        )
    frames = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    frames = frames.reshape(header.frames, header.height, header.width)
    return CineSequence(frames, pixel_spacing=float(header.pixel_spacing))
