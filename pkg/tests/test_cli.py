"""Tests for the command-line runner."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.data.cine_io import read_cine, write_cine
from src.models.cine import CineSequence
from src.models.config import TrainConfig
from src.pipeline.run import SEED_ENV, UsageError, cli_main, resolve_seed


def _write_sequence(path: Path, seed: int = 0, frames: int = 3, size: int = 16) -> Path:
    rng = np.random.default_rng(seed)
    write_cine(path, CineSequence(rng.uniform(size=(frames, size, size)).astype(np.float32)))
    return path


def _small_config(tmp_path: Path, **overrides: object) -> Path:
    fields: dict[str, object] = {
        "epochs": 1,
        "batch_size": 1,
        "seq_length": 3,
        "n_mix": 1,
        "frame_size": 16,
        "width_divisor": 16,
        "checkpoint_dir": str(tmp_path / "checkpoints"),
    }
    config = TrainConfig(**{**fields, **overrides})  # type: ignore[arg-type]
    path = tmp_path / "small.cfg"
    config.to_file(path)
    return path


class TestExitCodes:
    def test_help(self, capsys: pytest.CaptureFixture[str]) -> None:
        assert cli_main(["--help"]) == 0
        assert "simulate" in capsys.readouterr().out

    def test_unknown_flag(self) -> None:
        assert cli_main(["eval", "--bogus"]) == 1

    def test_missing_command_argument(self) -> None:
        assert cli_main(["deblur", "--in", "x.cine"]) == 1

    def test_missing_input_is_runtime_error(self, tmp_path: Path) -> None:
        clean = _write_sequence(tmp_path / "clean.cine")
        assert cli_main(["eval", "--clean", str(clean), "--test", str(tmp_path / "no.cine")]) == 2

    def test_bad_frame_list(self, tmp_path: Path) -> None:
        source = _write_sequence(tmp_path / "seq.cine")
        argv = ["export", "--in", str(source), "--frames", "0,x", "--pgm-dir", str(tmp_path)]
        assert cli_main(argv) == 1


class TestSeed:
    """--seed beats the environment, which beats the default of 0."""

    def test_flag_wins(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv(SEED_ENV, "7")
        assert resolve_seed(5) == 5

    def test_environment(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.setenv(SEED_ENV, "7")
        assert resolve_seed(None) == 7

    def test_default(self, monkeypatch: pytest.MonkeyPatch) -> None:
        monkeypatch.delenv(SEED_ENV, raising=False)
        assert resolve_seed(None) == 0

    def test_bad_environment_value(
        self, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        monkeypatch.setenv(SEED_ENV, "abc")
        with pytest.raises(UsageError, match=SEED_ENV):
            resolve_seed(None)
        argv = ["simulate", "--size", "16", "--out", str(tmp_path / "d.cine")]
        assert cli_main(argv) == 1

    def test_same_seed_same_phantom(self, tmp_path: Path) -> None:
        for name in ("a", "b"):
            argv = ["simulate", "--size", "16", "--frames", "4", "--n-mix", "1", "--seed", "3",
                    "--out", str(tmp_path / f"{name}.cine")]
            assert cli_main(argv) == 0
        a, b = read_cine(tmp_path / "a.cine"), read_cine(tmp_path / "b.cine")
        np.testing.assert_array_equal(a.frames, b.frames)


class TestEval:
    def test_identical_sequences(
        self, tmp_path: Path, capsys: pytest.CaptureFixture[str]
    ) -> None:
        seq = _write_sequence(tmp_path / "seq.cine")
        csv = tmp_path / "metrics.csv"
        assert cli_main(["eval", "--clean", str(seq), "--test", str(seq), "--csv", str(csv)]) == 0
        assert "SSIM 1.000000" in capsys.readouterr().out
        frame = pd.read_csv(csv, dtype={"frame": str})
        assert frame["frame"].tolist() == ["0", "1", "2", "mean", "sd"]
        assert frame["ssim"].iloc[:3].tolist() == [1.0, 1.0, 1.0]

    def test_neighbor_baseline_scores_interior(self, tmp_path: Path) -> None:
        seq = _write_sequence(tmp_path / "seq.cine", frames=5)
        csv = tmp_path / "baseline.csv"
        argv = ["eval", "--clean", str(seq), "--test", str(seq), "--csv", str(csv),
                "--baseline", "neighbor"]
        assert cli_main(argv) == 0
        assert len(pd.read_csv(csv)) == 3 + 2


class TestSimulateAndExport:
    def test_simulate_writes_clean_and_degraded(self, tmp_path: Path) -> None:
        out = tmp_path / "degraded.cine"
        argv = ["simulate", "--size", "16", "--frames", "6", "--n-mix", "1", "--out", str(out)]
        assert cli_main(argv) == 0
        degraded, clean = read_cine(out), read_cine(tmp_path / "degraded_clean.cine")
        assert degraded.frames.shape == clean.frames.shape == (6, 16, 16)
        assert not np.allclose(degraded.frames, clean.frames)

    def test_radial_mode(self, tmp_path: Path) -> None:
        out = tmp_path / "radial.cine"
        argv = ["simulate", "--size", "16", "--frames", "3", "--mode", "radial",
                "--spokes", "8", "--out", str(out)]
        assert cli_main(argv) == 0
        assert read_cine(out).num_frames == 3

    def test_export_with_error_maps(self, tmp_path: Path) -> None:
        source = _write_sequence(tmp_path / "seq.cine", seed=1)
        reference = _write_sequence(tmp_path / "ref.cine", seed=2)
        pgm_dir = tmp_path / "pgm"
        argv = ["export", "--in", str(source), "--frames", "0,2", "--pgm-dir", str(pgm_dir),
                "--reference", str(reference)]
        assert cli_main(argv) == 0
        assert sorted(p.name for p in pgm_dir.iterdir()) == [
            "error_000.pgm", "error_002.pgm", "frame_000.pgm", "frame_002.pgm"
        ]

    def test_export_reference_shape_mismatch(self, tmp_path: Path) -> None:
        source = _write_sequence(tmp_path / "seq.cine")
        reference = _write_sequence(tmp_path / "ref.cine", frames=4)
        argv = ["export", "--in", str(source), "--pgm-dir", str(tmp_path / "pgm"),
                "--reference", str(reference)]
        assert cli_main(argv) == 2


class TestEndToEnd:
    """Simulate, train briefly, deblur and score on a tiny phantom."""

    def test_recurrent_smoke(self, tmp_path: Path) -> None:
        degraded = tmp_path / "degraded.cine"
        clean = tmp_path / "degraded_clean.cine"
        ckpt = tmp_path / "gen.ckpt"
        deblurred = tmp_path / "deblurred.cine"

        assert cli_main(["simulate", "--size", "16", "--frames", "6", "--n-mix", "1",
                         "--out", str(degraded)]) == 0
        assert cli_main(["train", "--mode", "recurrent", "--config", str(_small_config(tmp_path)),
                         "--data", str(clean), "--iterations", "1", "--out", str(ckpt)]) == 0
        assert ckpt.exists()
        assert (tmp_path / "gen.ckpt.log.csv").exists()

        assert cli_main(["deblur", "--ckpt", str(ckpt), "--in", str(degraded),
                         "--out", str(deblurred)]) == 0
        assert read_cine(deblurred).frames.shape == (6, 16, 16)
        assert cli_main(["eval", "--clean", str(clean), "--test", str(deblurred)]) == 0

    def test_deblur_rejects_interpolation_checkpoint(self, tmp_path: Path) -> None:
        ckpt = tmp_path / "interp.ckpt"
        config = _small_config(tmp_path, seq_length=7)
        assert cli_main(["train", "--mode", "interp", "--config", str(config),
                         "--iterations", "1", "--out", str(ckpt)]) == 0

        source = _write_sequence(tmp_path / "seq.cine", frames=4)
        assert cli_main(["deblur", "--ckpt", str(ckpt), "--in", str(source),
                         "--out", str(tmp_path / "x.cine")]) == 2
        out = tmp_path / "doubled.cine"
        assert cli_main(["interpolate", "--ckpt", str(ckpt), "--in", str(source),
                         "--out", str(out)]) == 0
        assert read_cine(out).num_frames == 7
