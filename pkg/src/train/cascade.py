"""Two-phase end-to-end training of the transformer + synthesis cascade."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np

from src.data.preprocess import erase_box, random_erase_center
from src.losses.feature import FeatureNet
from src.losses.objectives import (
    inpaint_loss,
    multiscale_loss,
    multistep_loss,
    synthesis_loss,
    total_cascade_loss,
    transformer_loss,
)
from src.models.cine import CineSequence
from src.models.config import TrainConfig, TrainMode
from src.models.report import TrainLog
from src.networks.cascade import CascadeOutput, CascadeWeights, cascade_forward
from src.tensor.graph import Graph, Tensor
from src.tensor.optim import AdamState, adam_step
from src.train.log import log_epoch
from src.train.loop import Trainer, TrainResult, epoch_batches
from src.train.pairs import TrainingPair, make_training_pairs, stack

logger = logging.getLogger(__name__)

CASCADE_COLUMNS = ["alpha", "beta", "inpaint", "multistep", "transformer", "synthesis", "total"]


def build_cascade(config: TrainConfig) -> CascadeWeights:
    return CascadeWeights.initialize(config.cascade_architecture(), config.seed)


def cascade_objective(
    out: CascadeOutput, hr: np.ndarray, feature_net: FeatureNet, alpha: float, beta: float
) -> tuple[Tensor, dict[str, float]]:
    """Total loss for one batch plus its logged components.

    ``hr`` is the (B, 3, H, W) clean triple: each transformer's inpainted
    patch is compared with its own clean frame, every warp and the
    synthesis output with the clean center frame.
    """
    top, left = out.origin
    size = out.patches[0].shape[-1]
    target = Tensor(hr[:, 1:2])
    inpaint, steps, transformers = [], [], []
    for j, (patch, warps) in enumerate(zip(out.patches, out.warps, strict=True)):
        true_patch = Tensor(hr[:, j : j + 1, top : top + size, left : left + size])
        inp = inpaint_loss(patch, true_patch, feature_net)
        step = multistep_loss(
            [multiscale_loss(scale_warps, target, feature_net) for scale_warps in warps]
        )
        inpaint.append(inp)
        steps.append(step)
        transformers.append(transformer_loss(inp, step))
    syn = synthesis_loss(out.sr, target, feature_net)
    total = total_cascade_loss(transformers, syn, alpha, beta)
    parts = {
        "alpha": alpha,
        "beta": beta,
        "inpaint": float(sum(t.item() for t in inpaint)),
        "multistep": float(sum(t.item() for t in steps)),
        "transformer": float(sum(t.item() for t in transformers)),
        "synthesis": syn.item(),
        "total": total.item(),
    }
    return total, parts


def run_cascade(
    config: TrainConfig,
    pairs: Sequence[TrainingPair],
    weights: CascadeWeights,
    adam: AdamState,
    epochs: int,
    feature_net: FeatureNet,
) -> TrainResult:
    rng = np.random.default_rng(config.seed)
    log = TrainLog(list(CASCADE_COLUMNS))
    result = TrainResult(config, log, cascade=weights, adam={"cascade": adam})
    trainer = Trainer(config, log)
    size = weights.arch.patch_size

    for epoch in range(1, epochs + 1):
        alpha, beta = config.loss_weights(epoch)
        for batch in epoch_batches(len(pairs), config.batch_size, rng):
            if trainer.exhausted:
                break
            lr_frames, hr_frames = stack(pairs, batch)
            height, width = lr_frames.shape[2:]
            cx, cy = random_erase_center(height, width, size, rng)
            origin = erase_box(height, width, cx, cy, size)
            with trainer.guard("cascade loss", epoch, result), Graph() as graph:
                out = cascade_forward(Tensor(lr_frames), weights, origin)
                total, parts = cascade_objective(out, hr_frames, feature_net, alpha, beta)
            trainer.check_finite("cascade loss", parts["total"], epoch, result)
            grads = graph.backward(total)
            adam_step(weights.params.tensors, grads.select(weights.params.items()), adam)
            trainer.iterations += 1
            log.append(epoch, trainer.iterations, **parts)
        log_epoch(log, epoch)
        trainer.end_epoch(epoch, result)
        if trainer.exhausted:
            logger.info("Stopping after %d iterations", trainer.iterations)
            break

    result.iterations = trainer.iterations
    return result


def train_cascade(
    config: TrainConfig,
    data: Sequence[CineSequence],
    feature_net: FeatureNet | None = None,
) -> TrainResult:
    """Transformer-heavy (alpha >> beta) epochs first, then synthesis-heavy ones."""
    if config.mode is not TrainMode.CASCADE:
        raise ValueError(f"config mode is {config.mode.value}, expected cascade")
    pairs = make_training_pairs(data, config)
    return run_cascade(
        config, pairs, build_cascade(config), AdamState(lr=config.lr), config.total_epochs,
        feature_net or FeatureNet(config.feature_config()),
    )
