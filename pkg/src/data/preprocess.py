"""Cropping, intensity normalization and the erase/paste pair used for inpainting."""

from __future__ import annotations

import numpy as np

from src.models.cine import CineSequence

Origin = tuple[int, int]  # (top, left)


def normalize_crop(seq: CineSequence, crop: int) -> CineSequence:
    """Central crop x crop patch, min-max normalized over the whole sequence.

    A constant sequence maps to all zeros.
    """
    T, H, W = seq.frames.shape
    if crop < 1 or crop > min(H, W):
        raise ValueError(f"crop {crop} does not fit frames of {H}x{W}")
    top, left = (H - crop) // 2, (W - crop) // 2
    patch = seq.frames[:, top : top + crop, left : left + crop].astype(np.float64)
    lo, hi = float(patch.min()), float(patch.max())
    if hi > lo:
        patch = (patch - lo) / (hi - lo)
    else:
        patch = np.zeros_like(patch)
    return CineSequence(patch.astype(np.float32), pixel_spacing=seq.pixel_spacing)


def erase_box(height: int, width: int, cx: int, cy: int, size: int) -> Origin:
    """Top-left corner of the size x size box centered on (cx, cy), bounds-checked."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"erase size must be a positive odd number, got {size}")
    top, left = cy - size // 2, cx - size // 2
    if top < 0 or left < 0 or top + size > height or left + size > width:
        raise ValueError(
            f"{size}x{size} box at center ({cx}, {cy}) leaves the {height}x{width} image"
        )
    return top, left


def erase_region(
    img: np.ndarray, cx: int, cy: int, size: int = 15
) -> tuple[np.ndarray, np.ndarray, Origin]:
    """Zero a size x size box; returns (erased copy, original patch, origin)."""
    if img.ndim != 2:
        raise ValueError(f"erase_region needs a 2D image, got shape {img.shape}")
    top, left = erase_box(img.shape[0], img.shape[1], cx, cy, size)
    patch = img[top : top + size, left : left + size].copy()
    erased = img.copy()
    erased[top : top + size, left : left + size] = 0
    return erased, patch, (top, left)


def paste_region(img: np.ndarray, patch: np.ndarray, origin: Origin) -> np.ndarray:
    top, left = origin
    h, w = patch.shape
    if top < 0 or left < 0 or top + h > img.shape[0] or left + w > img.shape[1]:
        raise ValueError(f"patch {patch.shape} at {origin} leaves image {img.shape}")
    out = img.copy()
    out[top : top + h, left : left + w] = patch
    return out


def random_erase_center(
    height: int, width: int, size: int, rng: np.random.Generator
) -> tuple[int, int]:
    """Uniform in-bounds (cx, cy) for a size x size erase box."""
    half = size // 2
    if size > min(height, width):
        raise ValueError(f"erase size {size} exceeds image {height}x{width}")
    cx = int(rng.integers(half, width - half))
    cy = int(rng.integers(half, height - half))
    return cx, cy
