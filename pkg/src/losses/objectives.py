"""Training objectives of the cascade and the recurrent WGAN-GP models."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

import numpy as np

from src.losses.feature import FeatureNet, feature_loss
from src.tensor import ops
from src.tensor.graph import Graph, Tensor, current_graph

logger = logging.getLogger(__name__)

Critic = Callable[[Tensor], Tensor]

GP_DIFF_STEP = 1e-2


def _sum_scalars(values: Sequence[Tensor]) -> Tensor:
    total = values[0]
    for v in values[1:]:
        total = total + v
    return total


# -- cascade ------------------------------------------------------------------------------


def inpaint_loss(pred_patch: Tensor, true_patch: Tensor, net: FeatureNet) -> Tensor:
    if pred_patch.shape != true_patch.shape:
        raise ValueError(
            f"inpainting patches differ in size: {pred_patch.shape} and {true_patch.shape}"
        )
    return feature_loss(pred_patch, true_patch, net)


def pooled_targets(hr: Tensor, scales: int) -> list[Tensor]:
    """hr at scales 1, 1/2, 1/4, ... by repeated 2x2 average pooling."""
    levels = [hr]
    for _ in range(scales - 1):
        levels.append(ops.pool2d(levels[-1], "avg", 2, 2))
    return levels


def multiscale_loss(warps: Sequence[Tensor], hr: Tensor, net: FeatureNet) -> Tensor:
    """Sum over scales of feature_loss(warp_k, hr pooled k - 1 times)."""
    if not warps:
        raise ValueError("multiscale_loss needs at least one warp")
    targets = pooled_targets(hr, len(warps))
    for k, (warp, target) in enumerate(zip(warps, targets, strict=True)):
        if warp.shape != target.shape:
            raise ValueError(f"scale {k + 1} warp is {warp.shape}, pooled target {target.shape}")
    return _sum_scalars([feature_loss(w, t, net) for w, t in zip(warps, targets, strict=True)])


def multistep_loss(step_losses: Sequence[Tensor]) -> Tensor:
    """Mean of the per-step multi-scale losses."""
    if not step_losses:
        raise ValueError("multistep_loss needs at least one step")
    return _sum_scalars(step_losses) * (1.0 / len(step_losses))


def transformer_loss(inp: Tensor, step: Tensor) -> Tensor:
    return inp + step


def synthesis_loss(sr: Tensor, hr: Tensor, net: FeatureNet) -> Tensor:
    return feature_loss(sr, hr, net)


def total_cascade_loss(
    transformer_losses: Sequence[Tensor], syn: Tensor, alpha: float, beta: float
) -> Tensor:
    """alpha * (sum of the three transformer losses) + beta * synthesis loss."""
    if len(transformer_losses) != 3:
        raise ValueError(f"expected 3 transformer losses, got {len(transformer_losses)}")
    return _sum_scalars(transformer_losses) * alpha + syn * beta


# -- WGAN-GP ------------------------------------------------------------------------------


def generator_gan_loss(
    d_scores: Sequence[Tensor], feature_losses: Sequence[Tensor], lambda_per: float
) -> Tensor:
    """-sum_l mean(D(G(x_l))) + lambda_per * sum_l feature_loss_l."""
    if not d_scores or len(d_scores) != len(feature_losses):
        raise ValueError(
            "need one critic score batch per feature loss, "
            f"got {len(d_scores)} and {len(feature_losses)}"
        )
    adversarial = _sum_scalars([ops.mean(s) for s in d_scores])
    return ops.negative(adversarial) + _sum_scalars(feature_losses) * lambda_per


def discriminator_loss(
    d_real: Sequence[Tensor], d_fake: Sequence[Tensor], penalties: Sequence[Tensor]
) -> Tensor:
    """sum_l [mean(D(fake_l)) - mean(D(real_l)) + penalty_l]."""
    if not (len(d_real) == len(d_fake) == len(penalties)) or not d_real:
        raise ValueError("discriminator_loss needs equally many real, fake and penalty terms")
    terms = [
        ops.mean(fake) - ops.mean(real) + pen
        for real, fake, pen in zip(d_real, d_fake, penalties, strict=True)
    ]
    return _sum_scalars(terms)


def interpolate_inputs(real: np.ndarray, fake: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Per-sample eps * real + (1 - eps) * fake."""
    if real.shape != fake.shape:
        raise ValueError(f"real {real.shape} and fake {fake.shape} differ")
    eps = np.asarray(eps, dtype=real.dtype).reshape((-1,) + (1,) * (real.ndim - 1))
    if np.any(eps < 0) or np.any(eps > 1):
        raise ValueError("eps must lie in [0, 1]")
    return eps * real + (1 - eps) * fake


def gradient_penalty(
    critic: Critic,
    real: Tensor,
    fake: Tensor,
    eps: np.ndarray | float,
    lambda_gp: float = 10.0,
) -> Tensor:
    """lambda_gp * mean over the batch of (||grad_x D(x~)|| - 1)^2.

    The input gradient comes from a nested graph. Its value is exact. When
    an outer graph is recording, the penalty's gradient with respect to the
    critic parameters is carried by a central difference of D along
    the normalized input gradient, which approximates the Hessian-vector
    product to O(GP_DIFF_STEP^2).
    """
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), (real.shape[0],))
    mixed = interpolate_inputs(real.data, fake.data, eps)

    point = Tensor(mixed, requires_grad=True)
    with Graph() as inner:
        score = ops.sum(critic(point))
    grad = inner.backward(score)[point].astype(np.float64)
    if not np.all(np.isfinite(grad)):
        raise ValueError("critic input gradient is not finite")

    batch = grad.shape[0]
    axes = tuple(range(1, grad.ndim))
    norms = np.sqrt(np.sum(grad * grad, axis=axes))
    value = lambda_gp * float(np.mean((norms - 1.0) ** 2))
    penalty = np.asarray(value, dtype=real.dtype)

    if current_graph() is None:
        return Tensor(penalty)

    safe = np.where(norms > 0, norms, 1.0).reshape((-1,) + (1,) * len(axes))
    direction = (grad / safe).astype(real.dtype)
    coef = (2.0 * lambda_gp * (norms - 1.0) / batch).reshape(batch, 1).astype(real.dtype)
    h = GP_DIFF_STEP
    upper = critic(Tensor(mixed + h * direction))
    lower = critic(Tensor(mixed - h * direction))
    surrogate = ops.sum(ops.multiply(coef / (2 * h), upper - lower))
    return ops.with_surrogate_gradient(penalty, surrogate)


def interpolation_loss(pred_center: Tensor, true_center: Tensor, net: FeatureNet) -> Tensor:
    """Perceptual distance on the predicted missing frame only."""
    return feature_loss(pred_center, true_center, net)
