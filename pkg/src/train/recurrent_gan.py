"""WGAN-GP training of the bidirectional ConvLSTM generator.

Each iteration takes ``n_critic`` critic steps on the current generator's
output, then one generator step against the updated critic. Only the
network being stepped is tracked by the graph, so the other one never
changes. The deblurring mode scores every frame of a window; the
interpolation mode scores only the predicted missing center.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from functools import partial

import numpy as np

from src.losses.feature import FeatureNet, feature_loss
from src.losses.objectives import (
    discriminator_loss,
    generator_gan_loss,
    gradient_penalty,
    interpolation_loss,
)
from src.models.cine import CineSequence
from src.models.config import TrainConfig, TrainMode
from src.models.report import TrainLog
from src.networks.recurrent import (
    DiscriminatorWeights,
    GeneratorWeights,
    discriminator_forward,
    generator_forward,
    interpolate_frame,
)
from src.tensor import ops
from src.tensor.graph import Graph, Tensor
from src.tensor.optim import AdamState, adam_step
from src.train.log import log_epoch
from src.train.loop import Trainer, TrainResult, epoch_batches
from src.train.pairs import (
    INTERP_CENTER,
    TrainingPair,
    interpolation_inputs,
    make_training_pairs,
    stack,
)

logger = logging.getLogger(__name__)

RECURRENT_COLUMNS = ["wasserstein", "perceptual", "g_loss", "d_loss"]


def build_recurrent(config: TrainConfig) -> tuple[GeneratorWeights, DiscriminatorWeights]:
    arch = config.recurrent_architecture()
    return (
        GeneratorWeights.initialize(arch, config.seed),
        DiscriminatorWeights.initialize(arch, config.seed + 1),
    )


def _frames(batch: np.ndarray) -> list[np.ndarray]:
    """(B, L, H, W) -> L arrays of (B, 1, H, W)."""
    return [batch[:, t : t + 1] for t in range(batch.shape[1])]


def _generate(gen: GeneratorWeights, inputs: np.ndarray, interpolation: bool) -> Tensor:
    x = Tensor(inputs)
    return interpolate_frame(x, gen) if interpolation else generator_forward(x, gen)


def critic_update(
    gen: GeneratorWeights,
    disc: DiscriminatorWeights,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
    adam: AdamState,
    rng: np.random.Generator,
    trainer: Trainer,
    result: TrainResult,
    epoch: int,
    interpolation: bool,
) -> tuple[float, float]:
    """One critic step; returns (Wasserstein estimate, critic loss)."""
    eps = rng.uniform(0.0, 1.0, size=(targets.shape[1], targets.shape[0]))
    critic = partial(discriminator_forward, w=disc)

    with trainer.guard("discriminator loss", epoch, result):
        fake = _generate(gen, inputs, interpolation).data
        reals, fakes = _frames(targets), _frames(fake)
        with Graph() as graph:
            d_real = [critic(Tensor(r)) for r in reals]
            d_fake = [critic(Tensor(f)) for f in fakes]
            penalties = [
                gradient_penalty(critic, Tensor(r), Tensor(f), eps[i], config.lambda_gp)
                for i, (r, f) in enumerate(zip(reals, fakes, strict=True))
            ]
            loss = discriminator_loss(d_real, d_fake, penalties)

    wasserstein = float(np.mean([d.data.mean() for d in d_fake])) - float(
        np.mean([d.data.mean() for d in d_real])
    )
    d_loss = loss.item()
    trainer.check_finite("discriminator loss", d_loss, epoch, result)
    grads = graph.backward(loss)
    adam_step(disc.params.tensors, grads.select(disc.params.items()), adam)
    return wasserstein, d_loss


def generator_update(
    gen: GeneratorWeights,
    disc: DiscriminatorWeights,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainConfig,
    adam: AdamState,
    feature_net: FeatureNet,
    trainer: Trainer,
    result: TrainResult,
    epoch: int,
    interpolation: bool,
) -> tuple[float, float]:
    """One generator step; returns (summed perceptual loss, generator loss)."""
    guard = trainer.guard("generator loss", epoch, result)
    with guard, disc.params.frozen(), Graph() as graph:
        out = _generate(gen, inputs, interpolation)
        outputs = [ops.channel_slice(out, t, t + 1) for t in range(out.shape[1])]
        scores = [discriminator_forward(o, disc) for o in outputs]
        distance = interpolation_loss if interpolation else feature_loss
        perceptual = [
            distance(o, Tensor(t), feature_net)
            for o, t in zip(outputs, _frames(targets), strict=True)
        ]
        loss = generator_gan_loss(scores, perceptual, config.lambda_per)

    g_loss = loss.item()
    trainer.check_finite("generator loss", g_loss, epoch, result)
    grads = graph.backward(loss)
    adam_step(gen.params.tensors, grads.select(gen.params.items()), adam)
    return float(sum(p.item() for p in perceptual)), g_loss


def run_recurrent(
    config: TrainConfig,
    pairs: Sequence[TrainingPair],
    gen: GeneratorWeights,
    disc: DiscriminatorWeights,
    adam_g: AdamState,
    adam_d: AdamState,
    epochs: int,
    feature_net: FeatureNet,
) -> TrainResult:
    interpolation = gen.arch.in_frames == 2
    rng = np.random.default_rng(config.seed)
    log = TrainLog(list(RECURRENT_COLUMNS))
    result = TrainResult(
        config, log, generator=gen, discriminator=disc,
        adam={"generator": adam_g, "discriminator": adam_d},
    )
    trainer = Trainer(config, log)

    for epoch in range(1, epochs + 1):
        for batch in epoch_batches(len(pairs), config.batch_size, rng):
            if trainer.exhausted:
                break
            degraded, clean = stack(pairs, batch)
            if interpolation:
                inputs = interpolation_inputs(degraded)
                targets = clean[:, INTERP_CENTER : INTERP_CENTER + 1]
            else:
                inputs, targets = degraded, clean
            for _ in range(config.n_critic):
                wasserstein, d_loss = critic_update(
                    gen, disc, inputs, targets, config, adam_d, rng, trainer, result, epoch,
                    interpolation,
                )
            perceptual, g_loss = generator_update(
                gen, disc, inputs, targets, config, adam_g, feature_net, trainer, result, epoch,
                interpolation,
            )
            trainer.iterations += 1
            log.append(
                epoch, trainer.iterations,
                wasserstein=wasserstein, perceptual=perceptual, g_loss=g_loss, d_loss=d_loss,
            )
            logger.debug(
                "epoch %d iter %d: W=%.5f perceptual=%.5f", epoch, trainer.iterations,
                wasserstein, perceptual,
            )
        log_epoch(log, epoch)
        trainer.end_epoch(epoch, result)
        if trainer.exhausted:
            logger.info("Stopping after %d iterations", trainer.iterations)
            break

    result.iterations = trainer.iterations
    return result


def _check_mode(config: TrainConfig, expected: TrainMode) -> None:
    if config.mode is not expected:
        raise ValueError(f"config mode is {config.mode.value}, expected {expected.value}")


def train_recurrent_gan(
    config: TrainConfig,
    data: Sequence[CineSequence],
    feature_net: FeatureNet | None = None,
) -> TrainResult:
    """Train the deblurring generator and critic from freshly initialized weights."""
    _check_mode(config, TrainMode.RECURRENT_GAN)
    pairs = make_training_pairs(data, config)
    gen, disc = build_recurrent(config)
    return run_recurrent(
        config, pairs, gen, disc, AdamState(lr=config.lr), AdamState(lr=config.lr),
        config.total_epochs, feature_net or FeatureNet(config.feature_config()),
    )


def train_interpolation(
    config: TrainConfig,
    data: Sequence[CineSequence],
    feature_net: FeatureNet | None = None,
) -> TrainResult:
    """Train the generator to predict the center of 7-frame windows from the other six."""
    _check_mode(config, TrainMode.INTERPOLATION)
    pairs = make_training_pairs(data, config)
    gen, disc = build_recurrent(config)
    return run_recurrent(
        config, pairs, gen, disc, AdamState(lr=config.lr), AdamState(lr=config.lr),
        config.total_epochs, feature_net or FeatureNet(config.feature_config()),
    )
