"""Degraded/clean training windows cut from clean cine sequences."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from src.data.preprocess import normalize_crop
from src.kspace.degrade import degrade_sequence
from src.models.cine import CineSequence
from src.models.config import TrainConfig, TrainMode

logger = logging.getLogger(__name__)

CASCADE_WINDOW = 3
INTERP_CENTER = 3


@dataclass
class TrainingPair:
    degraded: np.ndarray  # (L, H, W)
    clean: np.ndarray  # (L, H, W)


def window_length(config: TrainConfig) -> int:
    """Frames per sample: three for the cascade, ``seq_length`` otherwise."""
    return CASCADE_WINDOW if config.mode is TrainMode.CASCADE else config.seq_length


def make_training_pairs(
    sequences: Sequence[CineSequence], config: TrainConfig
) -> list[TrainingPair]:
    """Crop and normalize each clean sequence, degrade it, then cut non-overlapping windows."""
    length = window_length(config)
    pairs = []
    for seq in sequences:
        if seq.num_frames < length:
            raise ValueError(
                f"sequence of {seq.num_frames} frames is shorter than the window {length}"
            )
        clean = normalize_crop(seq, config.frame_size)
        degraded = degrade_sequence(
            clean,
            mode=config.degrade_mode,
            n_mix=config.n_mix,
            keep_fraction=config.keep_fraction,
            n_spokes=config.n_spokes,
        )
        for start in range(0, seq.num_frames - length + 1, length):
            window = slice(start, start + length)
            pairs.append(TrainingPair(degraded.frames[window].copy(), clean.frames[window].copy()))
    if not pairs:
        raise ValueError("no training windows could be cut from the dataset")
    logger.info("Built %d training windows of %d frames", len(pairs), length)
    return pairs


def stack(pairs: Sequence[TrainingPair], indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(degraded, clean) batches of shape (B, L, H, W)."""
    degraded = np.stack([pairs[i].degraded for i in indices])
    clean = np.stack([pairs[i].clean for i in indices])
    return degraded, clean


def interpolation_inputs(window: np.ndarray) -> np.ndarray:
    """Drop the center of (B, 7, H, W) windows, giving (B, 6, H, W)."""
    if window.shape[1] != 2 * INTERP_CENTER + 1:
        raise ValueError(f"interpolation windows have 7 frames, got {window.shape[1]}")
    return np.delete(window, INTERP_CENTER, axis=1)
