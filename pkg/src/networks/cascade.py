"""Transformer + synthesis cascade for three-frame super-resolution.

Each of the three transformers (previous, current, next frame) inpaints an
erased patch of its frame and then regresses the frame onto the target
(current) frame with a multi-scale, multi-step transformation sub-network.
The synthesis network fuses the three transformed frames into the
super-resolved center frame.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from src.models.config import CascadeArchitecture
from src.networks.params import ParameterSet, apply_conv
from src.tensor import ops
from src.tensor.graph import DEFAULT_DTYPE, Tensor

logger = logging.getLogger(__name__)

TRANSFORMER_ROLES = ("prev", "cur", "next")
RECURSIONS = 2


@dataclass
class ScalePyramid:
    """A frame at scales 1, 1/2, 1/4, ... built by 2x2 average pooling."""

    levels: list[Tensor]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("a scale pyramid needs at least one level")
        base_h, base_w = self.levels[0].shape[-2:]
        for k, level in enumerate(self.levels):
            expected = (base_h // 2**k, base_w // 2**k)
            if level.shape[-2:] != expected:
                raise ValueError(
                    f"pyramid level {k} is {level.shape[-2:]}, expected {expected}"
                )

    def __len__(self) -> int:
        return len(self.levels)

    def __getitem__(self, k: int) -> Tensor:
        return self.levels[k]


def build_pyramid(x: Tensor, scales: int) -> ScalePyramid:
    height, width = x.shape[-2:]
    factor = 2 ** (scales - 1)
    if height % factor or width % factor:
        raise ValueError(f"{height}x{width} frames cannot be halved {scales - 1} times")
    levels = [x]
    for _ in range(scales - 1):
        levels.append(ops.pool2d(levels[-1], "avg", 2, 2))
    return ScalePyramid(levels)


# -- weights ----------------------------------------------------------------------------


def _register_dense_block(
    params: ParameterSet, prefix: str, cin: int, arch: CascadeArchitecture
) -> None:
    for layer in range(1, arch.dense_layers + 1):
        width = cin + arch.growth * (layer - 1)
        cout = 1 if layer == arch.dense_layers else arch.growth
        params.conv(f"{prefix}.l{layer}", width, cout, 3)


def _register_recursive_block(params: ParameterSet, prefix: str, cin: int, channels: int) -> None:
    if cin != channels:
        params.conv(f"{prefix}.entry", cin, channels, 3)
    params.conv(f"{prefix}.a", channels, channels, 3)
    params.conv(f"{prefix}.b", channels, channels, 3)


@dataclass
class CascadeWeights:
    arch: CascadeArchitecture
    params: ParameterSet

    @classmethod
    def initialize(
        cls, arch: CascadeArchitecture, seed: int, dtype: type[np.floating] = DEFAULT_DTYPE
    ) -> CascadeWeights:
        params = ParameterSet(seed, dtype)
        for role in TRANSFORMER_ROLES:
            _register_dense_block(params, f"transformer.{role}.inpaint", 1, arch)
            _register_dense_block(params, f"transformer.{role}.transform", 2, arch)
        cin = 1
        for index, channels in enumerate(arch.front_channels, start=1):
            _register_recursive_block(params, f"synthesis.front{index}", cin, channels)
            cin = channels
        cin *= len(TRANSFORMER_ROLES)
        for index, channels in enumerate(arch.back_channels, start=1):
            _register_recursive_block(params, f"synthesis.back{index}", cin, channels)
            cin = channels
        params.conv("synthesis.head", cin, 1, 3)
        logger.debug("Cascade initialized with %d parameters", params.count())
        return cls(arch, params)


# -- building blocks --------------------------------------------------------------------


def dense_subnet(params: ParameterSet, prefix: str, x: Tensor, layers: int) -> Tensor:
    """Densely connected stack: layer k sees the block input and every earlier output.

    The last layer emits one linear channel.
    """
    outputs: list[Tensor] = []
    for layer in range(1, layers + 1):
        inp = ops.concat([x, *outputs], axis=1)
        out = apply_conv(params, f"{prefix}.l{layer}", inp, relu=layer < layers)
        outputs.append(out)
    return outputs[-1]


def recursive_block(params: ParameterSet, prefix: str, x: Tensor) -> Tensor:
    if f"{prefix}.entry.w" in params:
        x = apply_conv(params, f"{prefix}.entry", x)
    for _ in range(RECURSIONS):
        x = apply_conv(params, f"{prefix}.a", x)
        x = apply_conv(params, f"{prefix}.b", x)
    return x


# -- transformer ------------------------------------------------------------------------


def inpaint_forward(
    erased: Tensor,
    origin: tuple[int, int] | None,
    w: CascadeWeights,
    role: str = "cur",
) -> tuple[Tensor, Tensor]:
    """(predicted patch, erased image with the patch pasted back at ``origin``)."""
    if origin is None:
        raise ValueError("inpainting needs the erase origin (top, left)")
    top, left = origin
    size = w.arch.patch_size
    full = dense_subnet(w.params, f"transformer.{role}.inpaint", erased, w.arch.dense_layers)
    patch = ops.crop(full, top, left, size, size)
    return patch, ops.paste(erased, patch, top, left)


def transform_multiscale(
    adjacent: ScalePyramid, target: ScalePyramid, w: CascadeWeights, role: str = "cur"
) -> list[Tensor]:
    """One warp estimate per scale; every branch uses the same weights."""
    if len(adjacent) != len(target):
        raise ValueError(f"pyramids have {len(adjacent)} and {len(target)} levels")
    warps = []
    for adj, tgt in zip(adjacent.levels, target.levels, strict=True):
        if adj.shape != tgt.shape:
            raise ValueError(f"adjacent level {adj.shape} does not match target level {tgt.shape}")
        x = ops.concat([adj, tgt], axis=1)
        warps.append(
            dense_subnet(w.params, f"transformer.{role}.transform", x, w.arch.dense_layers)
        )
    return warps


def transform_multistep(
    adjacent: Tensor, target: Tensor, w: CascadeWeights, steps: int | None = None, role: str = "cur"
) -> list[list[Tensor]]:
    """Per-step multi-scale warps; step s > 1 starts from step s - 1's full-scale warp."""
    steps = w.arch.steps if steps is None else steps
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    target_pyramid = build_pyramid(target, w.arch.scales)
    results: list[list[Tensor]] = []
    current = adjacent
    for _ in range(steps):
        warps = transform_multiscale(build_pyramid(current, w.arch.scales), target_pyramid, w, role)
        results.append(warps)
        current = warps[0]
    return results


# -- synthesis --------------------------------------------------------------------------


def synthesis_forward(
    warped_prev: Tensor, processed_cur: Tensor, warped_next: Tensor, w: CascadeWeights
) -> Tensor:
    """Fuse three aligned frames into one; the front half is shared across inputs."""
    if not warped_prev.shape == processed_cur.shape == warped_next.shape:
        raise ValueError(
            "synthesis inputs differ in shape: "
            f"{warped_prev.shape}, {processed_cur.shape}, {warped_next.shape}"
        )
    front = len(w.arch.front_channels)
    features = []
    for x in (warped_prev, processed_cur, warped_next):
        for index in range(1, front + 1):
            x = recursive_block(w.params, f"synthesis.front{index}", x)
        features.append(x)
    y = ops.concat(features, axis=1)
    for index in range(1, len(w.arch.back_channels) + 1):
        y = recursive_block(w.params, f"synthesis.back{index}", y)
    return apply_conv(w.params, "synthesis.head", y, relu=False)


# -- full cascade -----------------------------------------------------------------------


@dataclass
class CascadeOutput:
    """Everything the cascade objective needs from one forward pass."""

    sr: Tensor
    patches: list[Tensor]  # per transformer, (N, 1, p, p)
    origin: tuple[int, int]
    warps: list[list[list[Tensor]]]  # [transformer][step][scale]
    transformed: list[Tensor]  # final full-scale output per transformer


def erase(frame: np.ndarray, origin: tuple[int, int], size: int) -> np.ndarray:
    top, left = origin
    out = frame.copy()
    out[..., top : top + size, left : left + size] = 0
    return out


def cascade_forward(
    frames: Tensor, w: CascadeWeights, origin: tuple[int, int] | None = None
) -> CascadeOutput:
    """Run the cascade on (N, 3, H, W) consecutive low-resolution frames.

    The erase box defaults to the image center.
    """
    if frames.ndim != 4 or frames.shape[1] != 3:
        raise ValueError(f"the cascade takes (N, 3, H, W) frame triples, got {frames.shape}")
    height, width = frames.shape[2:]
    size = w.arch.patch_size
    if origin is None:
        origin = ((height - size) // 2, (width - size) // 2)
    target = ops.channel_slice(frames, 1, 2)

    patches, warps, transformed = [], [], []
    for index, role in enumerate(TRANSFORMER_ROLES):
        frame = ops.channel_slice(frames, index, index + 1)
        erased = Tensor(erase(frame.data, origin, size))
        patch, reassembled = inpaint_forward(erased, origin, w, role)
        steps = transform_multistep(reassembled, target, w, role=role)
        patches.append(patch)
        warps.append(steps)
        transformed.append(steps[-1][0])

    sr = synthesis_forward(transformed[0], transformed[1], transformed[2], w)
    return CascadeOutput(sr, patches, origin, warps, transformed)


def super_resolve(frames: Sequence[np.ndarray], w: CascadeWeights) -> np.ndarray:
    """Inference on one triple of (H, W) frames; the result is clipped to [0, 1]."""
    if len(frames) != 3:
        raise ValueError(f"the cascade takes exactly 3 frames, got {len(frames)}")
    x = Tensor(np.stack(frames)[None].astype(w.params.dtype))
    return np.clip(cascade_forward(x, w).sr.data[0, 0], 0.0, 1.0)
