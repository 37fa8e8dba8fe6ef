"""Command-line runner. Ties together simulation, training, inference, evaluation and export."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import NoReturn

import numpy as np
from dotenv import load_dotenv

from src.models.cine import CineSequence
from src.models.config import DegradeMode, PhantomParams, TrainConfig, TrainMode

logger = logging.getLogger(__name__)

RAW_DIR = Path("data/raw")
PROCESSED_DIR = Path("data/processed")
CHECKPOINT_DIR = Path("data/checkpoints")

SEED_ENV = "CINE_DEBLUR_SEED"
LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

TRAIN_MODES = {
    "recurrent": TrainMode.RECURRENT_GAN,
    "cascade": TrainMode.CASCADE,
    "interp": TrainMode.INTERPOLATION,
}
PHANTOM_COUNT = 4


class UsageError(Exception):
    """Bad command-line usage; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def resolve_seed(flag: int | None) -> int:
    """--seed wins over the environment, which wins over 0."""
    if flag is not None:
        return flag
    raw = os.environ.get(SEED_ENV)
    if raw is None or not raw.strip():
        return 0
    try:
        return int(raw)
    except ValueError as e:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from e


def phantom_params(size: int, frames: int, seed: int) -> PhantomParams:
    """Default phantom anatomy scaled to a size x size field of view."""
    scale = size / 32
    return PhantomParams(
        height=size, width=size, frames=frames,
        outer_a=10.0 * scale, outer_b=9.0 * scale, wall=3.0 * scale, seed=seed,
    )


def _ensure_normalized(seq: CineSequence) -> CineSequence:
    from src.data.preprocess import normalize_crop

    if seq.is_normalized():
        return seq
    logger.warning("Input intensities fall outside [0, 1]; min-max normalizing")
    return normalize_crop(seq, min(seq.height, seq.width))


# -- stages -----------------------------------------------------------------------------


def run_simulate(
    out: Path,
    source: Path | None = None,
    frames: int = 8,
    size: int = 32,
    mode: DegradeMode = DegradeMode.CARTESIAN_MIX,
    n_mix: int = 2,
    keep: float = 0.25,
    spokes: int = 16,
    seed: int = 0,
    clean_out: Path | None = None,
) -> CineSequence:
    """Degrade a cine (or a generated phantom) and write it as a CINE file.

    Returns:
        The degraded sequence. The clean input is written to ``clean_out``
        (default ``<out stem>_clean.cine``).
    """
    from src.data.cine_io import read_cine, write_cine
    from src.data.phantom import phantom_generate
    from src.kspace.degrade import degrade_sequence

    if source is not None:
        clean = _ensure_normalized(read_cine(source))
        logger.info("Simulating from %s (%d frames)", source, clean.num_frames)
    else:
        clean = phantom_generate(phantom_params(size, frames, seed))
        logger.info("Simulating from a %dx%d phantom of %d frames", size, size, frames)

    degraded = degrade_sequence(clean, mode=mode, n_mix=n_mix, keep_fraction=keep, n_spokes=spokes)
    write_cine(out, degraded)
    write_cine(clean_out or out.with_name(f"{out.stem}_clean.cine"), clean)
    return degraded


def run_train(
    mode: TrainMode,
    out: Path,
    config_path: Path | None = None,
    data: Path | None = None,
    iterations: int | None = None,
    seed: int = 0,
    fine_tune_from: Path | None = None,
    feature_ckpt: Path | None = None,
) -> Path:
    """Train (or fine-tune) one model family and save its checkpoint and log.

    Returns:
        Path of the written checkpoint. The training log goes next to it as
        ``<checkpoint>.log.csv``.
    """
    from src.data.cine_io import read_cine
    from src.data.phantom import phantom_dataset
    from src.losses.feature import FeatureNet
    from src.train import (
        fine_tune,
        save_checkpoint,
        train_cascade,
        train_interpolation,
        train_recurrent_gan,
    )
    from src.train.pairs import window_length

    config = TrainConfig.from_file(config_path) if config_path else TrainConfig()
    overrides: dict[str, object] = {"mode": mode, "seed": seed}
    if iterations is not None:
        overrides["max_iterations"] = iterations
    config = dataclasses.replace(config, **overrides)

    if data is not None:
        sequences = [read_cine(data)]
    elif config.dataset_path:
        sequences = [read_cine(Path(config.dataset_path))]
    else:
        frames = max(16, 2 * window_length(config), 2 * config.n_mix + 1)
        base = phantom_params(config.frame_size, frames, seed)
        sequences = phantom_dataset(base, PHANTOM_COUNT, seed)
    sequences = [_ensure_normalized(s) for s in sequences]

    feature_net = (
        FeatureNet.from_checkpoint(feature_ckpt, config.feature_config()) if feature_ckpt else None
    )
    if fine_tune_from is not None:
        result = fine_tune(config, fine_tune_from, sequences, feature_net)
    elif mode is TrainMode.CASCADE:
        result = train_cascade(config, sequences, feature_net)
    elif mode is TrainMode.INTERPOLATION:
        result = train_interpolation(config, sequences, feature_net)
    else:
        result = train_recurrent_gan(config, sequences, feature_net)

    save_checkpoint(out, result)
    result.log.write_csv(out.with_name(out.name + ".log.csv"))
    logger.info("Training finished after %d iterations", result.iterations)
    return out


def _fit_frames(seq: CineSequence, size: int) -> CineSequence:
    from src.data.preprocess import normalize_crop

    if (seq.height, seq.width) == (size, size):
        return seq
    logger.info("Cropping %dx%d frames to %d", seq.height, seq.width, size)
    return normalize_crop(seq, size)


def run_deblur(ckpt: Path, source: Path, out: Path) -> CineSequence:
    """Apply a trained deblurring generator (or cascade) to every frame of a cine."""
    from src.data.cine_io import read_cine, write_cine
    from src.kspace.degrade import window_indices
    from src.networks.cascade import super_resolve
    from src.networks.recurrent import deblur_sequence
    from src.train import load_checkpoint

    model = load_checkpoint(ckpt)
    seq = _ensure_normalized(read_cine(source))
    if model.cascade is not None:
        triples = [
            [seq.frames[i] for i in window_indices(t, 1, seq.num_frames)]
            for t in range(seq.num_frames)
        ]
        frames = [super_resolve(triple, model.cascade) for triple in triples]
        result = CineSequence(np.stack(frames).astype(np.float32), pixel_spacing=seq.pixel_spacing)
    else:
        assert model.generator is not None
        if model.generator.arch.in_frames != 1:
            raise ValueError(f"{ckpt} holds an interpolation model; use the interpolate command")
        result = deblur_sequence(_fit_frames(seq, model.generator.arch.frame_size), model.generator)
    write_cine(out, result)
    return result


def run_interpolate(ckpt: Path, source: Path, out: Path) -> CineSequence:
    """Double the temporal resolution: 2T - 1 frames with predictions between originals.

    The frame between t and t + 1 is predicted from frames t - 2 .. t and
    t + 1 .. t + 3, clamped to the sequence.
    """
    from src.data.cine_io import read_cine, write_cine
    from src.networks.recurrent import interpolate_frame
    from src.tensor.graph import Tensor
    from src.train import load_checkpoint

    model = load_checkpoint(ckpt)
    if model.generator is None or model.generator.arch.in_frames != 2:
        raise ValueError(f"{ckpt} does not hold a frame interpolation model")
    gen = model.generator
    seq = _fit_frames(_ensure_normalized(read_cine(source)), gen.arch.frame_size)
    T = seq.num_frames

    frames = [seq.frames[0]]
    for t in range(T - 1):
        picks = [min(max(i, 0), T - 1) for i in (t - 2, t - 1, t, t + 1, t + 2, t + 3)]
        window = Tensor(seq.frames[picks][None].astype(gen.params.dtype))
        predicted = interpolate_frame(window, gen).data[0, 0]
        frames.extend([np.clip(predicted, 0.0, 1.0).astype(np.float32), seq.frames[t + 1]])
    result = CineSequence(np.stack(frames), pixel_spacing=seq.pixel_spacing)
    write_cine(out, result)
    logger.info("Interpolated %d frames to %d", T, result.num_frames)
    return result


def run_eval(
    clean: Path, test: Path, csv: Path | None = None, baseline: str | None = None
) -> float:
    """Per-frame SSIM/PSNR of ``test`` against ``clean``.

    With ``baseline="neighbor"`` the interior frames of ``test`` are replaced
    by the average of their neighbors and scored against the clean interior.

    Returns:
        Mean SSIM.
    """
    from src.data.cine_io import read_cine
    from src.evaluate.metrics import evaluate, neighbor_baseline

    reference, candidate = read_cine(clean), read_cine(test)
    if baseline == "neighbor":
        candidate = neighbor_baseline(candidate)
        reference = CineSequence(reference.frames[1:-1], pixel_spacing=reference.pixel_spacing)
    report = evaluate(reference, candidate)
    if csv is not None:
        report.write_csv(csv)
        logger.info("Wrote metrics for %d frames to %s", len(report.ssim), csv)
    print(
        f"SSIM {report.ssim_mean:.6f} ± {report.ssim_sd:.6f}  "
        f"PSNR {report.psnr_mean:.6f} ± {report.psnr_sd:.6f} dB"
    )
    return report.ssim_mean


def _parse_frames(raw: str | None) -> list[int] | None:
    if raw is None or not raw.strip():
        return None
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as e:
        raise UsageError(f"--frames expects comma-separated indices, got {raw!r}") from e


def run_export(
    source: Path, pgm_dir: Path, frames: list[int] | None = None, reference: Path | None = None
) -> list[Path]:
    """Write frames as 8-bit PGM; with ``reference`` also write absolute error maps."""
    from src.data.cine_io import read_cine
    from src.data.export import export_frames, write_pgm
    from src.evaluate.metrics import error_map

    seq = read_cine(source)
    written = export_frames(seq, pgm_dir, frames)
    if reference is not None:
        truth = read_cine(reference)
        if truth.frames.shape != seq.frames.shape:
            raise ValueError(f"reference {truth.frames.shape} does not match {seq.frames.shape}")
        for i in frames if frames is not None else range(seq.num_frames):
            path = pgm_dir / f"error_{i:03d}.pgm"
            write_pgm(path, error_map(seq.frames[i], truth.frames[i]))
            written.append(path)
    return written


# -- argument parsing -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cine-deblur", description="Cine MRI deblurring pipeline")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="Degrade a phantom or an input cine")
    source = simulate.add_mutually_exclusive_group()
    source.add_argument("--in", dest="source", type=Path, help="Clean input CINE file")
    source.add_argument("--phantom", action="store_true", help="Generate a phantom (default)")
    simulate.add_argument("--out", type=Path, default=RAW_DIR / "degraded.cine")
    simulate.add_argument("--clean-out", type=Path, default=None)
    simulate.add_argument("--frames", type=int, default=8)
    simulate.add_argument("--size", type=int, default=32)
    simulate.add_argument(
        "--mode", choices=[m.value for m in DegradeMode], default=DegradeMode.CARTESIAN_MIX.value
    )
    simulate.add_argument("--n-mix", type=int, default=2, help="Frames mixed either side (N)")
    simulate.add_argument("--keep", type=float, default=0.25, help="Central k-space row fraction")
    simulate.add_argument("--spokes", type=int, default=16, help="Radial spokes per frame")
    simulate.add_argument("--seed", type=int, default=None)

    train = commands.add_parser("train", help="Train a model family")
    train.add_argument("--mode", choices=sorted(TRAIN_MODES), default="recurrent")
    train.add_argument("--config", type=Path, default=None, help="key=value config file")
    train.add_argument("--data", type=Path, default=None, help="Clean training CINE file")
    train.add_argument("--out", type=Path, default=None, help="Checkpoint path")
    train.add_argument("--iterations", type=int, default=None, help="Cap on total iterations")
    train.add_argument("--fine-tune-from", type=Path, default=None)
    train.add_argument("--feature-ckpt", type=Path, default=None)
    train.add_argument("--seed", type=int, default=None)

    for name, help_text in (
        ("deblur", "Deblur a cine with a trained checkpoint"),
        ("interpolate", "Insert predicted frames between every pair of frames"),
    ):
        cmd = commands.add_parser(name, help=help_text)
        cmd.add_argument("--ckpt", type=Path, required=True)
        cmd.add_argument("--in", dest="source", type=Path, required=True)
        cmd.add_argument("--out", type=Path, required=True)

    ev = commands.add_parser("eval", help="SSIM/PSNR of a test cine against a clean cine")
    ev.add_argument("--clean", type=Path, required=True)
    ev.add_argument("--test", type=Path, required=True)
    ev.add_argument("--csv", type=Path, default=None)
    ev.add_argument("--baseline", choices=["neighbor"], default=None)

    export = commands.add_parser("export", help="Write frames as PGM images")
    export.add_argument("--in", dest="source", type=Path, required=True)
    export.add_argument("--frames", default=None, help="Comma-separated frame indices")
    export.add_argument("--pgm-dir", type=Path, default=PROCESSED_DIR / "pgm")
    export.add_argument("--reference", type=Path, default=None, help="Clean cine for error maps")
    return parser


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "simulate":
        run_simulate(
            args.out, args.source, args.frames, args.size, DegradeMode(args.mode),
            args.n_mix, args.keep, args.spokes, resolve_seed(args.seed), args.clean_out,
        )
    elif args.command == "train":
        mode = TRAIN_MODES[args.mode]
        out = args.out or CHECKPOINT_DIR / f"{mode.value}.ckpt"
        run_train(
            mode, out, args.config, args.data, args.iterations, resolve_seed(args.seed),
            args.fine_tune_from, args.feature_ckpt,
        )
    elif args.command == "deblur":
        run_deblur(args.ckpt, args.source, args.out)
    elif args.command == "interpolate":
        run_interpolate(args.ckpt, args.source, args.out)
    elif args.command == "eval":
        run_eval(args.clean, args.test, args.csv, args.baseline)
    elif args.command == "export":
        run_export(args.source, args.pgm_dir, _parse_frames(args.frames), args.reference)


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Run one command. Exit codes: 0 success, 1 usage error, 2 runtime error."""
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=logging.INFO, format=LOG_FORMAT)
    logging.getLogger().setLevel(logging.DEBUG if args.verbose else logging.INFO)

    try:
        _dispatch(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.error("%s failed: %s", args.command, e)
        logger.debug("Traceback", exc_info=True)
        return 2
    return 0


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
