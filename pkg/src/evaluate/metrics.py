"""Full-reference image quality metrics for [0, 1] frames."""

from __future__ import annotations

import logging
import math
from functools import lru_cache

import numpy as np
from scipy.ndimage import correlate

from src.models.cine import CineSequence
from src.models.report import MetricReport

logger = logging.getLogger(__name__)

WINDOW = 11
SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DATA_RANGE = 1.0


@lru_cache(maxsize=4)
def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    g /= g.sum()
    return np.outer(g, g)


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"frames differ in shape: {a.shape} and {b.shape}")
    if a.ndim != 2:
        raise ValueError(f"metrics compare 2D frames, got shape {a.shape}")


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity over the window-interior of the frame.

    Local statistics use an 11x11 Gaussian (sigma 1.5) with reflected
    borders; the 5-pixel margin is excluded from the mean.
    """
    _check_pair(a, b)
    if min(a.shape) < WINDOW:
        raise ValueError(f"SSIM needs frames of at least {WINDOW}x{WINDOW}, got {a.shape}")
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    w = gaussian_window()
    c1 = (K1 * DATA_RANGE) ** 2
    c2 = (K2 * DATA_RANGE) ** 2

    mu_a = correlate(a, w, mode="reflect")
    mu_b = correlate(b, w, mode="reflect")
    mu_ab = mu_a * mu_b
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    var_a = correlate(a * a, w, mode="reflect") - mu_aa
    var_b = correlate(b * b, w, mode="reflect") - mu_bb
    cov = correlate(a * b, w, mode="reflect") - mu_ab

    # 2x is written as x + x so identical inputs give exactly 1
    numerator = (mu_ab + mu_ab + c1) * (cov + cov + c2)
    denominator = (mu_aa + mu_bb + c1) * (var_a + var_b + c2)
    m = WINDOW // 2
    ssim_map = (numerator / denominator)[m:-m, m:-m]
    return float(ssim_map.mean())


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """10 log10(1 / MSE) in dB; identical frames give math.inf."""
    _check_pair(a, b)
    diff = a.astype(np.float64) - b.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DATA_RANGE**2 / mse)


def evaluate(clean: CineSequence, test: CineSequence) -> MetricReport:
    if clean.frames.shape != test.frames.shape:
        raise ValueError(
            f"clean {clean.frames.shape} and test {test.frames.shape} sequences differ"
        )
    report = MetricReport()
    for reference, candidate in zip(clean.frames, test.frames, strict=True):
        report.ssim.append(ssim(reference, candidate))
        report.psnr.append(psnr(reference, candidate))
    logger.info(
        "SSIM %.4f±%.4f, PSNR %.3f±%.3f dB over %d frames",
        report.ssim_mean, report.ssim_sd, report.psnr_mean, report.psnr_sd, clean.num_frames,
    )
    return report


def neighbor_average(prev: np.ndarray, nxt: np.ndarray) -> np.ndarray:
    """Pixelwise mean of the frames either side of a gap."""
    _check_pair(prev, nxt)
    return ((prev.astype(np.float64) + nxt.astype(np.float64)) / 2).astype(prev.dtype)


def neighbor_baseline(seq: CineSequence) -> CineSequence:
    """Frames 1..T-2 predicted as the average of their neighbors."""
    if seq.num_frames < 3:
        raise ValueError(f"the neighbor baseline needs at least 3 frames, got {seq.num_frames}")
    frames = [
        neighbor_average(seq.frames[t - 1], seq.frames[t + 1])
        for t in range(1, seq.num_frames - 1)
    ]
    return CineSequence(np.stack(frames), pixel_spacing=seq.pixel_spacing)


def error_map(pred: np.ndarray, truth: np.ndarray) -> np.ndarray:
    _check_pair(pred, truth)
    return np.abs(pred.astype(np.float64) - truth.astype(np.float64))
