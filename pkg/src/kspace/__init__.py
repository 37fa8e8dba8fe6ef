from src.kspace.degrade import degrade_sequence, window_indices
from src.kspace.fourier import dft2, idft2
from src.kspace.sampling import (
    GOLDEN_ANGLE_DEG,
    block_assignment,
    central_rows,
    golden_angle_mask,
    lowpass_zero_pad,
    mix_kspace,
    select_lines,
    spoke_angles,
)

__all__ = [
    "GOLDEN_ANGLE_DEG",
    "block_assignment",
    "central_rows",
    "degrade_sequence",
    "dft2",
    "golden_angle_mask",
    "idft2",
    "lowpass_zero_pad",
    "mix_kspace",
    "select_lines",
    "spoke_angles",
    "window_indices",
]
