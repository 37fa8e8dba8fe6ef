"""Tests for the SSIM/PSNR metrics module."""

import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.evaluate import error_map, evaluate, neighbor_average, neighbor_baseline, psnr, ssim
from src.evaluate.metrics import gaussian_window
from src.models.cine import CineSequence
from src.models.report import MetricReport


def _naive_ssim(a: np.ndarray, b: np.ndarray) -> float:
    """SSIM averaged over the pixels whose whole 11x11 window lies inside the frame."""
    w = gaussian_window()
    c1, c2 = 0.01**2, 0.03**2
    values = []
    for i in range(5, a.shape[0] - 5):
        for j in range(5, a.shape[1] - 5):
            pa = a[i - 5 : i + 6, j - 5 : j + 6]
            pb = b[i - 5 : i + 6, j - 5 : j + 6]
            mu_a, mu_b = float((w * pa).sum()), float((w * pb).sum())
            var_a = float((w * pa * pa).sum()) - mu_a**2
            var_b = float((w * pb * pb).sum()) - mu_b**2
            cov = float((w * pa * pb).sum()) - mu_a * mu_b
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
            values.append(num / den)
    return float(np.mean(values))


def _constant_frames(*values: float, size: int = 16) -> CineSequence:
    return CineSequence(np.stack([np.full((size, size), v) for v in values]))


class TestSSIM:
    """Test structural similarity."""

    def test_identical_frames(self) -> None:
        """A frame compared with itself scores exactly 1."""
        a = np.random.default_rng(0).uniform(size=(24, 20))
        assert ssim(a, a) == 1.0

    def test_complement_scores_low(self) -> None:
        """A half-black half-white frame against its negative is nearly dissimilar."""
        a = np.zeros((32, 32))
        a[:, 16:] = 1.0
        assert ssim(a, 1.0 - a) < 0.1

    def test_symmetric(self) -> None:
        rng = np.random.default_rng(1)
        a, b = rng.uniform(size=(16, 16)), rng.uniform(size=(16, 16))
        assert ssim(a, b) == pytest.approx(ssim(b, a), rel=1e-12)

    def test_matches_naive_windows(self) -> None:
        """Interior-only mean means border handling never enters the score."""
        rng = np.random.default_rng(2)
        a = rng.uniform(size=(18, 17))
        b = np.clip(a + rng.normal(scale=0.1, size=a.shape), 0, 1)
        assert ssim(a, b) == pytest.approx(_naive_ssim(a, b), abs=1e-10)

    def test_window_is_normalized(self) -> None:
        w = gaussian_window()
        assert w.shape == (11, 11)
        assert w.sum() == pytest.approx(1.0)
        assert w[5, 5] == w.max()

    def test_small_frame_rejected(self) -> None:
        with pytest.raises(ValueError, match="at least 11x11"):
            ssim(np.zeros((10, 20)), np.zeros((10, 20)))

    def test_shape_mismatch_rejected(self) -> None:
        with pytest.raises(ValueError, match="differ in shape"):
            ssim(np.zeros((12, 12)), np.zeros((12, 13)))


class TestPSNR:
    """Test peak signal-to-noise ratio."""

    def test_uniform_offset(self) -> None:
        """An MSE of 0.01 is 10 * log10(1 / 0.01) = 20 dB."""
        a = np.full((8, 8), 0.5)
        assert psnr(a, a + 0.1) == pytest.approx(20.0)

    def test_identical_is_infinite(self) -> None:
        a = np.random.default_rng(3).uniform(size=(4, 4))
        assert psnr(a, a) == math.inf

    def test_float32_inputs(self) -> None:
        a = np.zeros((4, 4), dtype=np.float32)
        assert psnr(a, a + np.float32(0.01)) == pytest.approx(40.0, abs=1e-4)

    def test_needs_2d_frames(self) -> None:
        with pytest.raises(ValueError, match="2D"):
            psnr(np.zeros((2, 4, 4)), np.zeros((2, 4, 4)))


class TestEvaluate:
    """Test sequence-level evaluation and the metric report."""

    def test_mean_and_population_sd(self) -> None:
        """Frames at 20 dB and 30 dB aggregate to 25 +/- 5 dB."""
        clean = _constant_frames(0.0, 0.0)
        test = _constant_frames(0.1, math.sqrt(0.001))
        report = evaluate(clean, test)
        assert report.psnr == pytest.approx([20.0, 30.0], abs=1e-4)
        assert report.psnr_mean == pytest.approx(25.0, abs=1e-4)
        assert report.psnr_sd == pytest.approx(5.0, abs=1e-4)

    def test_perfect_reconstruction(self) -> None:
        seq = CineSequence(np.random.default_rng(4).uniform(size=(3, 16, 16)))
        report = evaluate(seq, seq)
        assert report.ssim == [1.0, 1.0, 1.0]
        assert report.ssim_sd == 0.0
        assert report.infinite_psnr_frames == 3
        assert report.psnr_mean == math.inf

    def test_infinite_frames_left_out_of_psnr_aggregates(self) -> None:
        report = MetricReport(ssim=[1.0, 0.9], psnr=[math.inf, 20.0])
        assert report.psnr_mean == 20.0
        assert report.psnr_sd == 0.0
        assert report.infinite_psnr_frames == 1

    def test_shape_mismatch_rejected(self) -> None:
        with pytest.raises(ValueError, match="differ"):
            evaluate(_constant_frames(0.0, 0.0), _constant_frames(0.0))

    def test_csv(self, tmp_path: Path) -> None:
        """One row per frame, then mean and sd rows."""
        report = MetricReport(ssim=[1.0, 0.5], psnr=[30.0, 20.0])
        path = tmp_path / "out" / "metrics.csv"
        report.write_csv(path)
        frame = pd.read_csv(path, dtype={"frame": str})
        assert frame["frame"].tolist() == ["0", "1", "mean", "sd"]
        assert frame["ssim"].tolist() == [1.0, 0.5, 0.75, 0.25]
        assert frame["psnr"].tolist() == [30.0, 20.0, 25.0, 5.0]


class TestBaselines:
    """Test neighbor averaging and error maps."""

    def test_neighbor_average(self) -> None:
        prev, nxt = np.full((2, 2), 0.2), np.full((2, 2), 0.6)
        np.testing.assert_allclose(neighbor_average(prev, nxt), 0.4)

    def test_baseline_on_linear_ramp(self) -> None:
        """Frames changing linearly in time are predicted exactly by their neighbors."""
        seq = _constant_frames(0.0, 0.1, 0.2, 0.3, 0.4)
        baseline = neighbor_baseline(seq)
        assert baseline.num_frames == 3
        np.testing.assert_allclose(baseline.frames, seq.frames[1:-1], atol=1e-7)

    def test_baseline_needs_three_frames(self) -> None:
        with pytest.raises(ValueError, match="at least 3 frames"):
            neighbor_baseline(_constant_frames(0.0, 1.0))

    def test_error_map(self) -> None:
        pred = np.array([[0.2, 0.9]])
        truth = np.array([[0.5, 0.4]])
        np.testing.assert_allclose(error_map(pred, truth), [[0.3, 0.5]])
