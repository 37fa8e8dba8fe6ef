"""Frozen convolutional feature extractor behind every perceptual loss."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from src.models.config import FeatureNetConfig
from src.networks.checkpoint import read_checkpoint, restore
from src.networks.params import ParameterSet, apply_conv
from src.tensor import ops
from src.tensor.graph import DEFAULT_DTYPE, Tensor

logger = logging.getLogger(__name__)


class FeatureNet:
    """Ten same-size 3x3 convolutions with ReLU; features are tapped after selected layers.

    The weights are seeded and never trainable, so a given config always
    measures the same distance.
    """

    def __init__(
        self, config: FeatureNetConfig | None = None, dtype: type[np.floating] = DEFAULT_DTYPE
    ) -> None:
        self.config = config or FeatureNetConfig()
        self.params = ParameterSet(self.config.seed, dtype, trainable=False)
        cin = 1
        for layer, cout in enumerate(self.config.channels, start=1):
            self.params.conv(f"conv{layer}", cin, cout, 3)
            cin = cout

    @classmethod
    def from_checkpoint(cls, path: Path, config: FeatureNetConfig | None = None) -> FeatureNet:
        """Swap in externally trained weights stored under ``feature.`` in a CKPT file."""
        net = cls(config)
        restore(net.params, read_checkpoint(path), "feature")
        logger.info("Loaded feature extractor weights from %s", path)
        return net

    def features(self, x: Tensor) -> list[Tensor]:
        taps = set(self.config.taps)
        tapped = []
        for layer in range(1, len(self.config.channels) + 1):
            x = apply_conv(self.params, f"conv{layer}", x)
            if layer in taps:
                tapped.append(x)
        return tapped


def feature_loss(a: Tensor, b: Tensor, net: FeatureNet) -> Tensor:
    """Sum over tapped layers of the mean squared feature difference."""
    if a.shape != b.shape:
        raise ValueError(f"feature_loss compares equal shapes, got {a.shape} and {b.shape}")
    total: Tensor | None = None
    for fa, fb in zip(net.features(a), net.features(b), strict=True):
        term = ops.mean(ops.square(fa - fb))
        total = term if total is None else total + term
    assert total is not None
    return total
