"""Simulated motion-blurred / undersampled cine frames."""

from __future__ import annotations

import logging
from collections.abc import Callable, Collection, Sequence

import numpy as np

from src.kspace.fourier import dft2, idft2
from src.kspace.sampling import block_assignment, golden_angle_mask, lowpass_zero_pad, mix_kspace
from src.models.cine import CineSequence, KSpaceArray
from src.models.config import DegradeMode

logger = logging.getLogger(__name__)

AssignmentPolicy = Callable[[int, int], Sequence[Collection[int]]]


def window_indices(center: int, n_mix: int, num_frames: int) -> list[int]:
    """Frame indices center-N .. center+N clamped to [0, T - 1]."""
    return [min(max(center + j, 0), num_frames - 1) for j in range(-n_mix, n_mix + 1)]


def degrade_sequence(
    seq: CineSequence,
    mode: DegradeMode | str = DegradeMode.CARTESIAN_MIX,
    n_mix: int = 0,
    keep_fraction: float = 1.0,
    n_spokes: int = 16,
    assignment_policy: AssignmentPolicy = block_assignment,
) -> CineSequence:
    """Degrade every frame of ``seq``.

    cartesian_mix: rows of the spectra of frames l-N..l+N are mixed, the
    central ``keep_fraction`` of rows is kept, and the result is transformed
    back. radial: frame t keeps the golden-angle spokes
    t*n_spokes .. (t+1)*n_spokes - 1. Output frames are clipped to [0, 1].
    """
    mode = DegradeMode(mode)
    if not seq.is_normalized():
        raise ValueError("degrade_sequence expects frames normalized to [0, 1]")
    T, H, W = seq.frames.shape
    spectra: list[KSpaceArray] = [dft2(frame) for frame in seq.frames]
    out = np.empty_like(seq.frames)

    if mode is DegradeMode.CARTESIAN_MIX:
        if n_mix < 0:
            raise ValueError(f"n_mix must be >= 0, got {n_mix}")
        window = 2 * n_mix + 1
        if T < window:
            raise ValueError(
                f"cartesian mixing with N={n_mix} needs at least {window} frames, got {T}"
            )
        assignment = assignment_policy(H, window)
        for t in range(T):
            mixed = mix_kspace([spectra[i] for i in window_indices(t, n_mix, T)], assignment)
            out[t] = idft2(lowpass_zero_pad(mixed, keep_fraction), real_input=False)
    else:
        for t in range(T):
            mask = golden_angle_mask(H, W, n_spokes, first_spoke=t * n_spokes)
            out[t] = idft2(spectra[t].masked(mask), real_input=False)

    np.clip(out, 0.0, 1.0, out=out)
    logger.debug("Degraded %d frames (%s, N=%d)", T, mode.value, n_mix)
    return CineSequence(out, pixel_spacing=seq.pixel_spacing)
