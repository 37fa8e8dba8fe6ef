"""Resume a trained checkpoint on a new dataset at the fine-tuning learning rate."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

from src.losses.feature import FeatureNet
from src.models.cine import CineSequence
from src.models.config import TrainConfig, TrainMode
from src.networks.checkpoint import check_config_hash, read_checkpoint, restore
from src.tensor.optim import AdamState
from src.train.cascade import build_cascade, run_cascade
from src.train.loop import TrainResult
from src.train.pairs import make_training_pairs
from src.train.recurrent_gan import build_recurrent, run_recurrent

logger = logging.getLogger(__name__)


def fine_tune(
    config: TrainConfig,
    checkpoint: Path,
    data: Sequence[CineSequence],
    feature_net: FeatureNet | None = None,
) -> TrainResult:
    """Load weights into the architecture ``config`` describes and keep training.

    Adam restarts from empty moment buffers at ``fine_tune_lr`` for
    ``fine_tune_epochs``. Missing or mis-shaped tensors raise
    IncompatibleCheckpointError naming every offender.
    """
    ckpt = read_checkpoint(checkpoint)
    check_config_hash(ckpt, config.config_hash())
    pairs = make_training_pairs(data, config)
    feature_net = feature_net or FeatureNet(config.feature_config())
    logger.info(
        "Fine-tuning %s from %s for %d epochs at lr %g",
        config.mode.value, checkpoint, config.fine_tune_epochs, config.fine_tune_lr,
    )

    if config.mode is TrainMode.CASCADE:
        weights = build_cascade(config)
        restore(weights.params, ckpt, "cascade")
        return run_cascade(
            config, pairs, weights, AdamState(lr=config.fine_tune_lr),
            config.fine_tune_epochs, feature_net,
        )

    gen, disc = build_recurrent(config)
    restore(gen.params, ckpt, "generator")
    restore(disc.params, ckpt, "discriminator")
    return run_recurrent(
        config, pairs, gen, disc,
        AdamState(lr=config.fine_tune_lr), AdamState(lr=config.fine_tune_lr),
        config.fine_tune_epochs, feature_net,
    )
