"""Synthetic beating-heart cine phantoms.

A phantom is a myocardial ring (outer ellipse minus blood pool) whose blood
pool contracts sinusoidally over the cardiac period. It stands in for
clinical short-axis cines at desk scale.
"""

from __future__ import annotations

import dataclasses
import logging
import math

import numpy as np

from src.models.cine import CineSequence
from src.models.config import PhantomParams

logger = logging.getLogger(__name__)


def _check_fits(p: PhantomParams) -> None:
    if p.outer_a >= p.width / 2 or p.outer_b >= p.height / 2:
        raise ValueError(
            f"outer ellipse ({p.outer_a}, {p.outer_b}) does not fit a "
            f"{p.height}x{p.width} image"
        )
    if p.wall <= 0 or p.wall >= min(p.outer_a, p.outer_b):
        raise ValueError(
            f"wall thickness {p.wall} must be in (0, {min(p.outer_a, p.outer_b)})"
        )


def contraction(p: PhantomParams, t: int) -> float:
    """Blood-pool scale factor at frame t, 1 at end-diastole."""
    phase = math.fmod(t + p.phase_offset, p.period)
    return 1.0 - p.amplitude * math.sin(math.pi * phase / p.period) ** 2


def phantom_generate(p: PhantomParams) -> CineSequence:
    """Render ``p.frames`` phantom frames, bit-deterministic for fixed params."""
    _check_fits(p)
    y = np.arange(p.height, dtype=np.float64)[:, None] - (p.height - 1) / 2
    x = np.arange(p.width, dtype=np.float64)[None, :] - (p.width - 1) / 2
    outer = (x / p.outer_a) ** 2 + (y / p.outer_b) ** 2 <= 1.0

    frames = np.empty((p.frames, p.height, p.width), dtype=np.float64)
    for t in range(p.frames):
        scale = contraction(p, t)
        inner_a = (p.outer_a - p.wall) * scale
        inner_b = (p.outer_b - p.wall) * scale
        inner = (x / inner_a) ** 2 + (y / inner_b) ** 2 <= 1.0
        frame = np.full((p.height, p.width), p.background)
        frame[outer] = p.myocardium
        frame[inner] = p.blood
        frames[t] = frame

    if p.noise_sigma > 0:
        rng = np.random.default_rng(p.seed)
        frames += rng.normal(0.0, p.noise_sigma, size=frames.shape)
    np.clip(frames, 0.0, 1.0, out=frames)
    return CineSequence(frames.astype(np.float32), pixel_spacing=p.pixel_spacing)


def phantom_dataset(base: PhantomParams, count: int, seed: int) -> list[CineSequence]:
    """``count`` phantoms with jittered anatomy, contraction, phase and noise seed."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    sequences = []
    for _ in range(count):
        outer_a = base.outer_a * rng.uniform(0.85, 1.0)
        outer_b = base.outer_b * rng.uniform(0.85, 1.0)
        params = dataclasses.replace(
            base,
            outer_a=outer_a,
            outer_b=outer_b,
            wall=min(base.wall, 0.45 * min(outer_a, outer_b)),
            amplitude=float(np.clip(base.amplitude * rng.uniform(0.7, 1.3), 0.0, 0.49)),
            phase_offset=float(rng.uniform(0.0, base.period)),
            seed=int(rng.integers(2**31)),
        )
        sequences.append(phantom_generate(params))
    logger.info("Generated %d phantom sequences of %d frames", count, base.frames)
    return sequences
