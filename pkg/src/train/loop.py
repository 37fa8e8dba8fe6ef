"""Shared training machinery: results, batching, checkpoints and the non-finite abort."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from src.models.config import CascadeArchitecture, RecurrentArchitecture, TrainConfig
from src.models.report import TrainLog
from src.networks.cascade import CascadeWeights
from src.networks.checkpoint import (
    Checkpoint,
    CheckpointError,
    bundle,
    check_config_hash,
    decode_architecture,
    read_checkpoint,
    restore,
    write_checkpoint,
)
from src.networks.recurrent import DiscriminatorWeights, GeneratorWeights
from src.tensor.graph import NonFiniteError
from src.tensor.optim import AdamState

logger = logging.getLogger(__name__)

RECURRENT = "recurrent"
CASCADE = "cascade"


class NonFiniteLossError(FloatingPointError):
    """A loss went NaN/inf; a diagnostic checkpoint was written first."""

    def __init__(self, message: str, checkpoint: Path) -> None:
        super().__init__(f"{message} (diagnostic checkpoint: {checkpoint})")
        self.checkpoint = checkpoint


@dataclass
class TrainResult:
    config: TrainConfig
    log: TrainLog
    generator: GeneratorWeights | None = None
    discriminator: DiscriminatorWeights | None = None
    cascade: CascadeWeights | None = None
    adam: dict[str, AdamState] = field(default_factory=dict)
    iterations: int = 0

    @property
    def family(self) -> str:
        return CASCADE if self.cascade is not None else RECURRENT

    def to_checkpoint(self) -> Checkpoint:
        if self.cascade is not None:
            return bundle(
                CASCADE,
                self.cascade.arch,
                {"cascade": self.cascade.params},
                self.config.config_hash(),
                self.adam,
            )
        if self.generator is None or self.discriminator is None:
            raise ValueError("a recurrent result needs both generator and discriminator")
        return bundle(
            RECURRENT,
            self.generator.arch,
            {"generator": self.generator.params, "discriminator": self.discriminator.params},
            self.config.config_hash(),
            self.adam,
        )


def save_checkpoint(path: Path, result: TrainResult) -> Path:
    write_checkpoint(path, result.to_checkpoint())
    return path


@dataclass
class LoadedModel:
    family: str
    checkpoint: Checkpoint
    generator: GeneratorWeights | None = None
    discriminator: DiscriminatorWeights | None = None
    cascade: CascadeWeights | None = None
    adam: dict[str, AdamState] = field(default_factory=dict)


def _stored_adam(ckpt: Checkpoint, networks: tuple[str, ...]) -> dict[str, AdamState]:
    states = {network: ckpt.adam_state(network) for network in networks}
    return {network: state for network, state in states.items() if state is not None}


def load_checkpoint(path: Path, config_hash: str | None = None) -> LoadedModel:
    """Rebuild the networks and optimizer states stored in a checkpoint."""
    ckpt = read_checkpoint(path)
    check_config_hash(ckpt, config_hash)
    family = ckpt.metadata.get("family")
    if family == CASCADE:
        cascade_arch = decode_architecture(CascadeArchitecture, ckpt.metadata)
        cascade = CascadeWeights.initialize(cascade_arch, 0)
        restore(cascade.params, ckpt, "cascade")
        return LoadedModel(family, ckpt, cascade=cascade, adam=_stored_adam(ckpt, (CASCADE,)))
    if family == RECURRENT:
        arch = decode_architecture(RecurrentArchitecture, ckpt.metadata)
        generator = GeneratorWeights.initialize(arch, 0)
        discriminator = DiscriminatorWeights.initialize(arch, 0)
        restore(generator.params, ckpt, "generator")
        restore(discriminator.params, ckpt, "discriminator")
        return LoadedModel(
            family, ckpt, generator=generator, discriminator=discriminator,
            adam=_stored_adam(ckpt, ("generator", "discriminator")),
        )
    raise CheckpointError(f"{path}: unknown model family {family!r}")


def epoch_batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Seeded shuffle of range(n) split into batches; the last one may be short."""
    order = rng.permutation(n)
    return [order[i : i + batch_size] for i in range(0, n, batch_size)]


class Trainer:
    """Bookkeeping shared by every training loop: iteration cap, checkpoints, NaN abort."""

    def __init__(self, config: TrainConfig, log: TrainLog) -> None:
        self.config = config
        self.log = log
        self.iterations = 0
        self.checkpoint_dir = Path(config.checkpoint_dir)

    @property
    def exhausted(self) -> bool:
        cap = self.config.max_iterations
        return cap > 0 and self.iterations >= cap

    def check_finite(self, name: str, value: float, epoch: int, result: TrainResult) -> None:
        if math.isfinite(value):
            return
        path = self.checkpoint_dir / (
            f"{self.config.mode.value}_nonfinite_e{epoch:03d}_i{self.iterations:06d}.ckpt"
        )
        save_checkpoint(path, result)
        logger.error("%s became %s at epoch %d; wrote %s", name, value, epoch, path)
        raise NonFiniteLossError(f"{name} is {value} at epoch {epoch}", path)

    @contextmanager
    def guard(self, name: str, epoch: int, result: TrainResult) -> Iterator[None]:
        """Turn NaN/inf raised by an op inside the block into the checkpointed abort."""
        try:
            yield
        except NonFiniteError as exc:
            logger.error("%s during %s", exc, name)
            self.check_finite(name, math.nan, epoch, result)

    def end_epoch(self, epoch: int, result: TrainResult) -> None:
        interval = self.config.checkpoint_interval
        if interval > 0 and epoch % interval == 0:
            path = self.checkpoint_dir / f"{self.config.mode.value}_epoch{epoch:03d}.ckpt"
            save_checkpoint(path, result)
