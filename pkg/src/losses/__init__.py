from src.losses.feature import FeatureNet, feature_loss
from src.losses.objectives import (
    discriminator_loss,
    generator_gan_loss,
    gradient_penalty,
    inpaint_loss,
    interpolation_loss,
    multiscale_loss,
    multistep_loss,
    synthesis_loss,
    total_cascade_loss,
    transformer_loss,
)

__all__ = [
    "FeatureNet",
    "discriminator_loss",
    "feature_loss",
    "generator_gan_loss",
    "gradient_penalty",
    "inpaint_loss",
    "interpolation_loss",
    "multiscale_loss",
    "multistep_loss",
    "synthesis_loss",
    "total_cascade_loss",
    "transformer_loss",
]
