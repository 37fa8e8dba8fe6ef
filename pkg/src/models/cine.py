"""Image-domain and k-space containers shared by every stage."""

from dataclasses import dataclass

import numpy as np


@dataclass
class CineSequence:
    """T frames of H×W real intensities (one slice across cardiac phases)."""

    frames: np.ndarray  # (T, H, W), float32
    pixel_spacing: float = 1.0  # mm/pixel, informational

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 3:
            raise ValueError(f"CineSequence needs (T, H, W) frames, got shape {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise ValueError("CineSequence needs at least one frame")
        if not np.issubdtype(self.frames.dtype, np.floating):
            self.frames = self.frames.astype(np.float32)

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def height(self) -> int:
        return int(self.frames.shape[1])

    @property
    def width(self) -> int:
        return int(self.frames.shape[2])

    def is_normalized(self) -> bool:
        return bool(self.frames.min() >= 0.0 and self.frames.max() <= 1.0)


@dataclass
class KSpaceArray:
    """Centered 2D spectrum: DC sits at (H // 2, W // 2)."""

    values: np.ndarray  # (H, W), complex

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError(f"KSpaceArray needs a 2D array, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("KSpaceArray values must be finite")

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    def masked(self, mask: "SamplingMask") -> "KSpaceArray":
        if mask.keep.shape != self.values.shape:
            raise ValueError(
                f"mask shape {mask.keep.shape} does not match k-space shape {self.values.shape}"
            )
        return KSpaceArray(np.where(mask.keep, self.values, 0).astype(self.values.dtype))


@dataclass
class SamplingMask:
    """Boolean keep-flags over a k-space grid."""

    keep: np.ndarray  # (H, W), bool

    def __post_init__(self) -> None:
        self.keep = np.asarray(self.keep, dtype=bool)
        if self.keep.ndim != 2:
            raise ValueError(f"SamplingMask needs a 2D array, got shape {self.keep.shape}")
        if not self.keep.any():
            raise ValueError("SamplingMask must keep at least one k-space sample")

    @property
    def sampled_fraction(self) -> float:
        return float(self.keep.mean())
