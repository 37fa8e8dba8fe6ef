"""8-bit PGM (P5) export for visual inspection."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from src.models.cine import CineSequence

logger = logging.getLogger(__name__)


def to_gray8(frame: np.ndarray) -> np.ndarray:
    """[0, 1] intensities to uint8 with round-half-up; values outside are clipped."""
    scaled = np.clip(frame.astype(np.float64), 0.0, 1.0) * 255.0
    return np.floor(scaled + 0.5).astype(np.uint8)


def write_pgm(path: Path, frame: np.ndarray) -> None:
    if frame.ndim != 2:
        raise ValueError(f"PGM export needs a 2D frame, got shape {frame.shape}")
    height, width = frame.shape
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(f"P5\n{width} {height}\n255\n".encode("ascii") + to_gray8(frame).tobytes())


def export_frames(
    seq: CineSequence, pgm_dir: Path, frames: Iterable[int] | None = None
) -> list[Path]:
    """Write the selected frames (all by default) as ``frame_NNN.pgm``."""
    indices = list(range(seq.num_frames)) if frames is None else list(frames)
    bad = [i for i in indices if not 0 <= i < seq.num_frames]
    if bad:
        raise ValueError(f"frame indices {bad} outside [0, {seq.num_frames})")
    written = []
    for i in indices:
        path = pgm_dir / f"frame_{i:03d}.pgm"
        write_pgm(path, seq.frames[i])
        written.append(path)
    logger.info("Exported %d PGM frames to %s", len(written), pgm_dir)
    return written
