"""Centered, unitary 2D Fourier transforms between image space and k-space."""

from __future__ import annotations

import logging

import numpy as np

from src.models.cine import KSpaceArray

logger = logging.getLogger(__name__)

IMAG_TOLERANCE = 1e-5


def _complex_dtype(real_dtype: np.dtype) -> type[np.complexfloating]:
    return np.complex64 if real_dtype == np.float32 else np.complex128


def dft2(image: np.ndarray) -> KSpaceArray:
    """Orthonormal 2D DFT with the DC term moved to (H // 2, W // 2).

    float32 images give complex64 spectra, anything else complex128.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"dft2 needs a 2D image, got shape {image.shape}")
    if image.shape[0] < 2 or image.shape[1] < 2:
        raise ValueError(f"dft2 needs an image of at least 2x2, got {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValueError("dft2: image contains non-finite values")
    dtype = _complex_dtype(image.dtype)
    spectrum = np.fft.fftshift(np.fft.fft2(image, norm="ortho"))
    return KSpaceArray(spectrum.astype(dtype))


def idft2(k: KSpaceArray, real_input: bool = True) -> np.ndarray:
    """Inverse of ``dft2``, returning the real part.

    With ``real_input`` the spectrum is asserted to come from a real image:
    an imaginary residue of ``IMAG_TOLERANCE`` or more raises. Spectra that
    were masked asymmetrically (line mixing, radial masks) pass
    ``real_input=False`` and simply drop the imaginary part.
    """
    image = np.fft.ifft2(np.fft.ifftshift(k.values), norm="ortho")
    residue = float(np.abs(image.imag).max())
    if real_input and residue >= IMAG_TOLERANCE:
        raise ValueError(
            f"idft2: imaginary residue {residue:.3g} exceeds {IMAG_TOLERANCE} "
            "for a spectrum expected to come from a real image"
        )
    real_dtype = np.float32 if k.values.dtype == np.complex64 else np.float64
    return image.real.astype(real_dtype)
