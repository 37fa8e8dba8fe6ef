"""k-space sampling patterns: row selection, multi-frame row mixing,
central low-pass retention and golden-angle radial masks.

Rows are frequency-encoding lines of the centered spectrum.
"""

from __future__ import annotations

import math
from collections.abc import Collection, Sequence

import numpy as np

from src.models.cine import KSpaceArray, SamplingMask

GOLDEN_ANGLE_DEG = 180.0 * (math.sqrt(5.0) - 1.0) / 2.0  # ~111.246 degrees


def _check_rows(rows: Collection[int], height: int) -> list[int]:
    rows = [int(r) for r in rows]
    if not rows:
        raise ValueError("at least one k-space row must be selected")
    bad = sorted(r for r in rows if not 0 <= r < height)
    if bad:
        raise ValueError(f"rows {bad} outside [0, {height})")
    if len(set(rows)) != len(rows):
        dupes = sorted({r for r in rows if rows.count(r) > 1})
        raise ValueError(f"duplicate rows {dupes}")
    return rows


def row_mask(height: int, width: int, rows: Collection[int]) -> SamplingMask:
    keep = np.zeros((height, width), dtype=bool)
    keep[_check_rows(rows, height), :] = True
    return SamplingMask(keep)


def select_lines(k: KSpaceArray, rows: Collection[int]) -> KSpaceArray:
    """Keep the listed rows of ``k``, zero the rest."""
    return k.masked(row_mask(k.height, k.width, rows))


def block_assignment(height: int, n_frames: int) -> list[range]:
    """Contiguous equal row blocks in frame order; the remainder goes to the last frame.

    With an odd frame count the middle block lands on the middle frame.
    """
    if n_frames < 1:
        raise ValueError(f"need at least one frame, got {n_frames}")
    if height < n_frames:
        raise ValueError(f"cannot give each of {n_frames} frames a row out of {height}")
    block = height // n_frames
    starts = [i * block for i in range(n_frames)]
    ends = starts[1:] + [height]
    return [range(s, e) for s, e in zip(starts, ends, strict=True)]


def mix_kspace(
    frames_k: Sequence[KSpaceArray], assignment: Sequence[Collection[int]]
) -> KSpaceArray:
    """Assemble one spectrum taking each row from the frame it is assigned to.

    ``assignment[i]`` lists the rows contributed by ``frames_k[i]``; together
    they must cover every row exactly once.
    """
    if not frames_k or len(frames_k) % 2 == 0:
        raise ValueError(f"mixing needs an odd number (2N+1) of frames, got {len(frames_k)}")
    if len(assignment) != len(frames_k):
        raise ValueError(
            f"assignment has {len(assignment)} row sets for {len(frames_k)} frames"
        )
    shape = frames_k[0].values.shape
    if any(f.values.shape != shape for f in frames_k):
        raise ValueError("all mixed spectra must share one shape")

    height = shape[0]
    owner = np.full(height, -1, dtype=np.int64)
    for frame, rows in enumerate(assignment):
        for r in rows:
            if not 0 <= r < height:
                raise ValueError(f"row {r} outside [0, {height})")
            if owner[r] >= 0:
                raise ValueError(f"row {r} assigned to frames {owner[r]} and {frame}")
            owner[r] = frame
    uncovered = np.flatnonzero(owner < 0)
    if uncovered.size:
        raise ValueError(f"rows {uncovered.tolist()} are not assigned to any frame")

    stacked = np.stack([f.values for f in frames_k])
    mixed = stacked[owner, np.arange(height), :]
    return KSpaceArray(mixed)


def central_rows(height: int, keep_fraction: float) -> range:
    if not 0 < keep_fraction <= 1:
        raise ValueError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    # rounding first keeps 0.25 * 16 from becoming 4.000000001 -> 5
    n = max(1, math.ceil(round(keep_fraction * height, 9)))
    start = height // 2 - n // 2
    return range(start, start + n)


def lowpass_zero_pad(k: KSpaceArray, keep_fraction: float) -> KSpaceArray:
    """Keep the central ceil(keep_fraction * H) rows around DC, zero-fill the rest."""
    return select_lines(k, central_rows(k.height, keep_fraction))


def spoke_angles(n_spokes: int, first_spoke: int = 0) -> np.ndarray:
    """Angles in degrees, in [0, 180), of spokes first_spoke .. first_spoke + n_spokes - 1."""
    if n_spokes < 1:
        raise ValueError(f"n_spokes must be >= 1, got {n_spokes}")
    index = np.arange(first_spoke, first_spoke + n_spokes, dtype=np.float64)
    return np.mod(index * GOLDEN_ANGLE_DEG, 180.0)


def _round_half_away(values: np.ndarray) -> np.ndarray:
    return (np.sign(values) * np.floor(np.abs(values) + 0.5)).astype(np.int64)


def golden_angle_mask(
    height: int, width: int, n_spokes: int, first_spoke: int = 0
) -> SamplingMask:
    """Union of diametric spokes through the DC sample at golden-angle increments.

    Each spoke marks the pixel nearest the ideal line at every unit radius
    step r = -R..R, so spokes are point-symmetric about the center.
    """
    cy, cx = height // 2, width // 2
    radius = math.ceil(math.hypot(height, width) / 2)
    r = np.arange(-radius, radius + 1, dtype=np.float64)
    keep = np.zeros((height, width), dtype=bool)
    for theta in np.deg2rad(spoke_angles(n_spokes, first_spoke)):
        xs = cx + _round_half_away(r * math.cos(theta))
        ys = cy + _round_half_away(r * math.sin(theta))
        inside = (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height)
        keep[ys[inside], xs[inside]] = True
    return SamplingMask(keep)
