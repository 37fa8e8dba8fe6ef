"""Typed configuration objects.

Every config is a dataclass that validates itself on construction. Training
configs are stored on disk as flat ``key=value`` text (read with
python-dotenv) so they diff cleanly and can be hashed into checkpoints.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass
import sys
from enum import Enum
from pathlib import Path
from typing import Any, get_type_hints

from dotenv import dotenv_values

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:  # pragma: no cover - backport of enum.StrEnum for Python 3.10

    class StrEnum(str, Enum):
        def __str__(self) -> str:
            return str(self.value)

        def __format__(self, format_spec: str) -> str:
            return str(self.value).__format__(format_spec)

        @staticmethod
        def _generate_next_value_(
            name: str, start: int, count: int, last_values: list[Any]
        ) -> str:
            return name.lower()


class TrainMode(StrEnum):
    """Which network family and objective a training run uses."""

    RECURRENT_GAN = "recurrent_gan"
    CASCADE = "cascade"
    INTERPOLATION = "interpolation"


class DegradeMode(StrEnum):
    CARTESIAN_MIX = "cartesian_mix"
    RADIAL = "radial"


def _scaled(widths: tuple[int, ...], divisor: int) -> tuple[int, ...]:
    return tuple(max(1, w // divisor) for w in widths)


@dataclass
class PhantomParams:
    """Beating-heart phantom: two concentric ellipses (myocardium around blood pool)."""

    height: int = 32
    width: int = 32
    frames: int = 8
    outer_a: float = 10.0  # semi-axis along x, pixels
    outer_b: float = 9.0  # semi-axis along y, pixels
    wall: float = 3.0
    amplitude: float = 0.3  # fraction of the blood-pool radius lost at end-systole
    period: int = 8  # frames per cardiac cycle
    phase_offset: float = 0.0  # frames
    blood: float = 0.9
    myocardium: float = 0.45
    background: float = 0.1
    noise_sigma: float = 0.0
    pixel_spacing: float = 1.5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.amplitude < 0.5:
            raise ValueError(f"amplitude must be in [0, 0.5), got {self.amplitude}")
        if self.period < 2:
            raise ValueError(f"period must be >= 2 frames, got {self.period}")
        if self.frames < 1:
            raise ValueError(f"frames must be >= 1, got {self.frames}")
        for name in ("blood", "myocardium", "background"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} intensity must be in [0, 1], got {value}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass
class LossConfig:
    """Weights of the training objectives."""

    lambda_per: float = 0.1
    lambda_gp: float = 10.0
    alpha: float = 1.0
    beta: float = 0.01
    scales: int = 3
    steps: int = 3

    def __post_init__(self) -> None:
        for name in ("lambda_per", "lambda_gp", "alpha", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.scales < 1 or self.steps < 1:
            raise ValueError("scales and steps must be >= 1")


@dataclass
class FeatureNetConfig:
    """Frozen feature extractor used by every perceptual loss."""

    channels: tuple[int, ...] = (16, 16, 32, 32, 64, 64, 64, 128, 128, 128)
    taps: tuple[int, ...] = (2, 4, 7, 10)  # 1-based layer indices
    seed: int = 2024

    def __post_init__(self) -> None:
        if not self.taps or any(t < 1 or t > len(self.channels) for t in self.taps):
            raise ValueError(f"tap layers {self.taps} outside 1..{len(self.channels)}")

    def scaled(self, divisor: int) -> FeatureNetConfig:
        return dataclasses.replace(self, channels=_scaled(self.channels, divisor))


@dataclass
class RecurrentArchitecture:
    """Channel plan of the ConvLSTM encoder-decoder generator and its critic."""

    frame_size: int = 100
    in_frames: int = 1  # 2 for the interpolation variant (frames either side of the gap)
    lstm_channels: tuple[int, ...] = (32, 64, 128)
    encoder_channels: tuple[int, ...] = (32, 32, 64, 64, 128, 128, 128)
    decoder_channels: tuple[int, ...] = (128, 128, 64, 64, 32, 32)
    encoder_kernels: tuple[int, ...] = (3, 5, 7)
    critic_channels: tuple[int, ...] = (64, 64, 128, 128, 256, 256)
    critic_hidden: int = 1024
    use_convlstm: bool = True
    multi_scale: bool = True

    def __post_init__(self) -> None:
        if len(self.lstm_channels) != 3:
            raise ValueError("the ConvLSTM branches have exactly three layers")
        if len(self.encoder_channels) != 7 or len(self.decoder_channels) != 6:
            raise ValueError("the encoder has seven blocks and the decoder seven layers")
        if len(self.critic_channels) != 6:
            raise ValueError("the discriminator has six convolution layers")
        if self.frame_size % 4:
            raise ValueError(f"frame_size must be divisible by 4, got {self.frame_size}")
        if any(k % 2 == 0 for k in self.encoder_kernels):
            raise ValueError(f"encoder kernels must be odd, got {self.encoder_kernels}")
        if self.in_frames not in (1, 2):
            raise ValueError(f"in_frames must be 1 or 2, got {self.in_frames}")

    def scaled(self, divisor: int) -> RecurrentArchitecture:
        return dataclasses.replace(
            self,
            lstm_channels=_scaled(self.lstm_channels, divisor),
            encoder_channels=_scaled(self.encoder_channels, divisor),
            decoder_channels=_scaled(self.decoder_channels, divisor),
            critic_channels=_scaled(self.critic_channels, divisor),
            critic_hidden=max(1, self.critic_hidden // divisor),
        )


@dataclass
class CascadeArchitecture:
    """Channel plan of the transformer and synthesis networks."""

    growth: int = 16
    dense_layers: int = 6
    patch_size: int = 15
    scales: int = 3
    steps: int = 3
    front_channels: tuple[int, ...] = (32, 32, 64, 64, 128, 128)
    back_channels: tuple[int, ...] = (128, 128, 64, 64, 32, 32)

    def __post_init__(self) -> None:
        if self.dense_layers < 2:
            raise ValueError("a dense sub-network needs at least two layers")
        if self.patch_size % 2 == 0:
            raise ValueError(f"patch_size must be odd, got {self.patch_size}")
        if self.scales < 1 or self.steps < 1:
            raise ValueError("scales and steps must be >= 1")

    def scaled(self, divisor: int) -> CascadeArchitecture:
        return dataclasses.replace(
            self,
            growth=max(1, self.growth // divisor),
            front_channels=_scaled(self.front_channels, divisor),
            back_channels=_scaled(self.back_channels, divisor),
        )


RECURRENT_EPOCHS = 50


@dataclass
class TrainConfig:
    """All hyperparameters of a training run.

    ``epochs`` left unset means the mode's own schedule: 50 epochs for the
    recurrent generators, both cascade phases (``2 * transformer_phase_epochs``)
    for the cascade.
    """

    mode: TrainMode = TrainMode.RECURRENT_GAN
    epochs: int | None = None
    batch_size: int = 2
    lr: float = 1e-4
    fine_tune_lr: float = 2e-5
    fine_tune_epochs: int = 10
    seq_length: int = 7
    n_mix: int = 7
    keep_fraction: float = 0.25
    degrade_mode: DegradeMode = DegradeMode.CARTESIAN_MIX
    n_spokes: int = 16
    lambda_per: float = 0.1
    lambda_gp: float = 10.0
    transformer_phase_epochs: int = 30
    alpha_major: float = 1.0
    alpha_minor: float = 0.01
    n_critic: int = 1
    seed: int = 0
    frame_size: int = 32
    width_divisor: int = 1
    max_iterations: int = 0  # 0 = no cap
    checkpoint_interval: int = 0  # epochs; 0 = only the final checkpoint
    checkpoint_dir: str = "data/checkpoints"
    dataset_path: str = ""

    def __post_init__(self) -> None:
        self.mode = TrainMode(self.mode)
        self.degrade_mode = DegradeMode(self.degrade_mode)
        if self.lr <= 0 or self.fine_tune_lr <= 0:
            raise ValueError("learning rates must be > 0")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.seq_length < 1:
            raise ValueError(f"seq_length must be >= 1, got {self.seq_length}")
        if self.n_mix < 0:
            raise ValueError(f"n_mix must be >= 0, got {self.n_mix}")
        if not 0 < self.keep_fraction <= 1:
            raise ValueError(f"keep_fraction must be in (0, 1], got {self.keep_fraction}")
        if (self.epochs is not None and self.epochs < 0) or self.fine_tune_epochs < 0:
            raise ValueError("epoch counts must be >= 0")
        if self.n_critic < 1:
            raise ValueError(f"n_critic must be >= 1, got {self.n_critic}")
        if self.width_divisor < 1:
            raise ValueError(f"width_divisor must be >= 1, got {self.width_divisor}")
        if self.mode is TrainMode.INTERPOLATION and self.seq_length != 7:
            raise ValueError("interpolation training cuts 6-frame inputs from 7-frame windows")
        if self.transformer_phase_epochs < 0:
            raise ValueError("transformer_phase_epochs must be >= 0")

    @property
    def total_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        if self.mode is TrainMode.CASCADE:
            return 2 * self.transformer_phase_epochs
        return RECURRENT_EPOCHS

    def loss_weights(self, epoch: int) -> tuple[float, float]:
        """(alpha, beta) for a 1-based epoch of the two-phase cascade schedule."""
        if epoch <= self.transformer_phase_epochs:
            return self.alpha_major, self.alpha_minor
        return self.alpha_minor, self.alpha_major

    def loss_config(self, epoch: int = 1) -> LossConfig:
        alpha, beta = self.loss_weights(epoch)
        return LossConfig(
            lambda_per=self.lambda_per, lambda_gp=self.lambda_gp, alpha=alpha, beta=beta
        )

    def recurrent_architecture(self) -> RecurrentArchitecture:
        in_frames = 2 if self.mode is TrainMode.INTERPOLATION else 1
        arch = RecurrentArchitecture(frame_size=self.frame_size, in_frames=in_frames)
        return arch.scaled(self.width_divisor)

    def cascade_architecture(self) -> CascadeArchitecture:
        return CascadeArchitecture().scaled(self.width_divisor)

    def feature_config(self) -> FeatureNetConfig:
        return FeatureNetConfig().scaled(self.width_divisor)

    # -- flat key=value persistence -------------------------------------------------

    def to_lines(self) -> list[str]:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name}={value.value if isinstance(value, StrEnum) else value}")
        return lines

    def config_hash(self) -> str:
        """SHA-256 over the canonical key=value rendering."""
        return hashlib.sha256("\n".join(self.to_lines()).encode("utf-8")).hexdigest()

    def to_file(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.to_lines()) + "\n", encoding="utf-8")

    @classmethod
    def from_mapping(cls, values: dict[str, str | None]) -> TrainConfig:
        hints = get_type_hints(cls)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        kwargs: dict[str, Any] = {}
        for name, raw in values.items():
            if raw is None:
                raise ValueError(f"config key {name!r} has no value")
            kwargs[name] = _coerce(raw, hints[name], name)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: Path) -> TrainConfig:
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        return cls.from_mapping(dict(dotenv_values(path)))


def _coerce(raw: str, target: Any, name: str) -> Any:
    raw = raw.strip()
    if target == (int | None):
        if raw in ("", "None"):
            return None
        target = int
    try:
        if target is bool:
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if target is int:
            return int(raw)
        if target is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        if isinstance(target, type) and issubclass(target, StrEnum):
            return target(raw)
    except ValueError as e:
        raise ValueError(f"config key {name!r}: cannot parse {raw!r}") from e
    return raw
