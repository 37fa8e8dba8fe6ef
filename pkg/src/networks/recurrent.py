"""Bidirectional ConvLSTM encoder-decoder generator and its Wasserstein critic.

Every frame of a cine sequence is deblurred by a multi-scale convolutional
encoder-decoder. A forward and a backward three-layer ConvLSTM branch run
over the whole sequence; their hidden states for the frame are concatenated
into the encoder after blocks 1, 3 and 5. The decoder takes skips from
blocks 2, 4 and 6 and starts from block 7.

All spatial operations are stride 1, so ConvLSTM states, encoder features
and the output share the frame's height and width. The decoder predicts a
correction added to its input frame (for interpolation, to the mean of the
two frames beside the gap); its last layer starts at a small scale so an
untrained generator is close to the identity.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Literal

import numpy as np

from src.models.cine import CineSequence
from src.models.config import RecurrentArchitecture
from src.networks.params import ParameterSet, apply_conv, apply_deconv, apply_dense
from src.tensor import ops
from src.tensor.graph import DEFAULT_DTYPE, Tensor

logger = logging.getLogger(__name__)

Direction = Literal["forward", "backward"]

LSTM_KERNEL = 3
CRITIC_POOL_AFTER = (2, 4)
ENCODER_TAPS = {1: 0, 3: 1, 5: 2}  # encoder block -> ConvLSTM layer index concatenated after it
DECODER_SKIPS = {1: 6, 3: 4, 5: 2}  # deconv layer -> encoder block concatenated after it
OUTPUT_INIT_SCALE = 1e-2


# -- ConvLSTM ---------------------------------------------------------------------------


@dataclass
class ConvLSTMState:
    c: Tensor
    h: Tensor

    @classmethod
    def zeros(
        cls, batch: int, channels: int, height: int, width: int, dtype: type
    ) -> ConvLSTMState:
        shape = (batch, channels, height, width)
        return cls(Tensor(np.zeros(shape, dtype=dtype)), Tensor(np.zeros(shape, dtype=dtype)))


@dataclass
class ConvLSTMLayer:
    """One layer's weights: input/hidden convolutions, peepholes and biases per gate."""

    w_xi: Tensor
    w_hi: Tensor
    w_ci: Tensor
    b_i: Tensor
    w_xf: Tensor
    w_hf: Tensor
    w_cf: Tensor
    b_f: Tensor
    w_xc: Tensor
    w_hc: Tensor
    b_c: Tensor
    w_xo: Tensor
    w_ho: Tensor
    w_co: Tensor
    b_o: Tensor

    @property
    def channels(self) -> int:
        return self.w_hi.shape[0]

    @staticmethod
    def register(params: ParameterSet, prefix: str, cin: int, channels: int, size: int) -> None:
        k = LSTM_KERNEL
        for gate in "ifco":
            params.uniform(f"{prefix}.w_x{gate}", (channels, cin, k, k), cin * k * k)
            params.uniform(f"{prefix}.w_h{gate}", (channels, channels, k, k), channels * k * k)
            if gate != "c":
                # peepholes are Hadamard maps over one state
                params.uniform(f"{prefix}.w_c{gate}", (1, channels, size, size), channels * k * k)
            params.zeros(f"{prefix}.b_{gate}", (channels,))

    @classmethod
    def from_params(cls, params: ParameterSet, prefix: str) -> ConvLSTMLayer:
        names = [f.name for f in cls.__dataclass_fields__.values()]
        return cls(**{name: params[f"{prefix}.{name}"] for name in names})


def convlstm_step(x: Tensor, state: ConvLSTMState | None, layer: ConvLSTMLayer) -> ConvLSTMState:
    """One time step::

        i = sigmoid(W_xi * x + W_hi * h + W_ci o c_prev + b_i)
        f = sigmoid(W_xf * x + W_hf * h + W_cf o c_prev + b_f)
        c = f o c_prev + i o tanh(W_xc * x + W_hc * h + b_c)
        o = sigmoid(W_xo * x + W_ho * h + W_co o c + b_o)
        h = o o tanh(c)

    ``*`` is a same-size convolution, ``o`` the Hadamard product. A ``None``
    state is the all-zero initial state.
    """
    if x.ndim != 4:
        raise ValueError(f"ConvLSTM input must be (N, C, H, W), got {x.shape}")
    n, _, height, width = x.shape
    if layer.w_ci.shape[2:] != (height, width):
        raise ValueError(
            f"ConvLSTM input is {height}x{width} but peepholes are {layer.w_ci.shape[2:]}"
        )
    if state is None:
        state = ConvLSTMState.zeros(n, layer.channels, height, width, x.dtype.type)
    if state.c.shape != (n, layer.channels, height, width) or state.h.shape != state.c.shape:
        raise ValueError(
            f"ConvLSTM state {state.c.shape}/{state.h.shape} does not fit input {x.shape}"
        )

    pad = LSTM_KERNEL // 2

    def gate_input(w_x: Tensor, w_h: Tensor, b: Tensor) -> Tensor:
        return ops.add(ops.conv2d(x, w_x, b, pad=pad), ops.conv2d(state.h, w_h, pad=pad))

    i = ops.sigmoid(gate_input(layer.w_xi, layer.w_hi, layer.b_i) + layer.w_ci * state.c)
    f = ops.sigmoid(gate_input(layer.w_xf, layer.w_hf, layer.b_f) + layer.w_cf * state.c)
    c = f * state.c + i * ops.tanh(gate_input(layer.w_xc, layer.w_hc, layer.b_c))
    o = ops.sigmoid(gate_input(layer.w_xo, layer.w_ho, layer.b_o) + layer.w_co * c)
    h = o * ops.tanh(c)
    return ConvLSTMState(c, h)


def run_branch(
    frames: Sequence[Tensor], direction: Direction, layers: Sequence[ConvLSTMLayer]
) -> list[list[Tensor]]:
    """Hidden outputs of every layer for every frame, in frame order.

    The backward branch consumes frames last to first; its outputs are
    reversed back so index t always refers to frame t.
    """
    if not frames:
        raise ValueError("a ConvLSTM branch needs at least one frame")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown branch direction {direction!r}")
    order = list(frames) if direction == "forward" else list(reversed(frames))

    states: list[ConvLSTMState | None] = [None] * len(layers)
    outputs: list[list[Tensor]] = []
    for frame in order:
        x = frame
        hidden = []
        for index, layer in enumerate(layers):
            state = convlstm_step(x, states[index], layer)
            states[index] = state
            hidden.append(state.h)
            x = state.h
        outputs.append(hidden)
    return outputs if direction == "forward" else outputs[::-1]


# -- generator --------------------------------------------------------------------------


def encoder_input_widths(arch: RecurrentArchitecture) -> list[int]:
    """Input channel count of each of the seven encoder blocks."""
    widths = [arch.in_frames]
    for block in range(1, 7):
        width = arch.encoder_channels[block - 1]
        if arch.use_convlstm and block in ENCODER_TAPS:
            width += 2 * arch.lstm_channels[ENCODER_TAPS[block]]
        widths.append(width)
    return widths


def decoder_input_widths(arch: RecurrentArchitecture) -> list[int]:
    """Input channel count of each of the seven deconvolution layers."""
    enc, dec = arch.encoder_channels, arch.decoder_channels
    widths = [enc[6]]
    for layer in range(1, 7):
        width = dec[layer - 1]
        if layer in DECODER_SKIPS:
            width += enc[DECODER_SKIPS[layer] - 1]
        widths.append(width)
    return widths


@dataclass
class GeneratorWeights:
    arch: RecurrentArchitecture
    params: ParameterSet

    @classmethod
    def initialize(
        cls, arch: RecurrentArchitecture, seed: int, dtype: type[np.floating] = DEFAULT_DTYPE
    ) -> GeneratorWeights:
        params = ParameterSet(seed, dtype)
        size = arch.frame_size
        if arch.use_convlstm:
            for direction in ("forward", "backward"):
                cin = 1
                for layer, channels in enumerate(arch.lstm_channels, start=1):
                    ConvLSTMLayer.register(params, f"{direction}.lstm{layer}", cin, channels, size)
                    cin = channels
        kernels = arch.encoder_kernels if arch.multi_scale else arch.encoder_kernels[:1]
        for block, (cin, cout) in enumerate(
            zip(encoder_input_widths(arch), arch.encoder_channels, strict=True), start=1
        ):
            for k in kernels:
                params.conv(f"enc{block}.k{k}", cin, cout, k)
        outputs = [*arch.decoder_channels, 1]
        for layer, (cin, cout) in enumerate(
            zip(decoder_input_widths(arch), outputs, strict=True), start=1
        ):
            scale = OUTPUT_INIT_SCALE if layer == len(outputs) else 1.0
            params.deconv(f"dec{layer}", cin, cout, 3, scale)
        logger.debug("Generator initialized with %d parameters", params.count())
        return cls(arch, params)

    def lstm_layers(self, direction: Direction) -> list[ConvLSTMLayer]:
        return [
            ConvLSTMLayer.from_params(self.params, f"{direction}.lstm{layer}")
            for layer in range(1, len(self.arch.lstm_channels) + 1)
        ]

    @property
    def kernels(self) -> tuple[int, ...]:
        return self.arch.encoder_kernels if self.arch.multi_scale else self.arch.encoder_kernels[:1]


def _encoder_block(w: GeneratorWeights, block: int, x: Tensor) -> Tensor:
    """Sum of the block's parallel kernels, then ReLU."""
    total = None
    for k in w.kernels:
        out = apply_conv(w.params, f"enc{block}.k{k}", x, relu=False)
        total = out if total is None else total + out
    assert total is not None
    return ops.relu(total)


def encode_decode(
    w: GeneratorWeights,
    x: Tensor,
    forward_hidden: Sequence[Tensor] | None,
    backward_hidden: Sequence[Tensor] | None,
) -> Tensor:
    """Correction for one frame from the encoder-decoder, given its ConvLSTM hidden states."""
    features: dict[int, Tensor] = {}
    for block in range(1, 8):
        x = _encoder_block(w, block, x)
        features[block] = x
        if block in ENCODER_TAPS and forward_hidden is not None and backward_hidden is not None:
            layer = ENCODER_TAPS[block]
            x = ops.concat([x, forward_hidden[layer], backward_hidden[layer]], axis=1)

    y = features[7]
    for layer in range(1, 8):
        y = apply_deconv(w.params, f"dec{layer}", y, relu=layer < 7)
        if layer in DECODER_SKIPS:
            y = ops.concat([y, features[DECODER_SKIPS[layer]]], axis=1)
    return y


def _check_frames(w: GeneratorWeights, seq: Tensor) -> None:
    size = w.arch.frame_size
    if seq.ndim != 4 or seq.shape[2:] != (size, size):
        raise ValueError(f"generator expects (N, T, {size}, {size}) input, got {seq.shape}")


def _split_frames(seq: Tensor) -> list[Tensor]:
    return [ops.channel_slice(seq, t, t + 1) for t in range(seq.shape[1])]


def generator_forward(seq: Tensor, w: GeneratorWeights) -> Tensor:
    """Deblur every frame of a (N, T, H, W) sequence; output has the input's shape."""
    if w.arch.in_frames != 1:
        raise ValueError("these weights are the interpolation variant; use interpolate_frame")
    _check_frames(w, seq)
    frames = _split_frames(seq)
    forward = backward = None
    if w.arch.use_convlstm:
        forward = run_branch(frames, "forward", w.lstm_layers("forward"))
        backward = run_branch(frames, "backward", w.lstm_layers("backward"))
    outputs = [
        frame
        + encode_decode(
            w,
            frame,
            forward[t] if forward is not None else None,
            backward[t] if backward is not None else None,
        )
        for t, frame in enumerate(frames)
    ]
    return ops.concat(outputs, axis=1)


INTERP_INPUT_FRAMES = 6


def interpolate_frame(seq6: Tensor, w: GeneratorWeights) -> Tensor:
    """Predict the missing center of a 7-frame window from the other six, shape (N, 1, H, W).

    The encoder sees the two frames either side of the gap. The forward
    branch runs over frames 0..2 and the backward branch over 5..3; only
    each branch's last state is used.
    """
    if w.arch.in_frames != 2:
        raise ValueError("frame interpolation needs weights built with in_frames=2")
    _check_frames(w, seq6)
    if seq6.shape[1] != INTERP_INPUT_FRAMES:
        raise ValueError(f"interpolation takes exactly 6 frames, got {seq6.shape[1]}")
    frames = _split_frames(seq6)
    forward = backward = None
    if w.arch.use_convlstm:
        forward = run_branch(frames[:3], "forward", w.lstm_layers("forward"))[-1]
        backward = run_branch(frames[3:], "backward", w.lstm_layers("backward"))[0]
    x = ops.channel_slice(seq6, 2, 4)
    base = (frames[2] + frames[3]) * 0.5
    return base + encode_decode(w, x, forward, backward)


def deblur_sequence(seq: CineSequence, w: GeneratorWeights) -> CineSequence:
    """Inference on a whole cine; predictions are clipped to [0, 1]."""
    x = Tensor(seq.frames[None].astype(w.params.dtype))
    out = generator_forward(x, w).data[0]
    return CineSequence(np.clip(out, 0.0, 1.0).astype(np.float32), pixel_spacing=seq.pixel_spacing)


# -- critic -----------------------------------------------------------------------------


@dataclass
class DiscriminatorWeights:
    arch: RecurrentArchitecture
    params: ParameterSet

    @classmethod
    def initialize(
        cls, arch: RecurrentArchitecture, seed: int, dtype: type[np.floating] = DEFAULT_DTYPE
    ) -> DiscriminatorWeights:
        params = ParameterSet(seed, dtype)
        cin = 1
        for layer, cout in enumerate(arch.critic_channels, start=1):
            params.conv(f"conv{layer}", cin, cout, 3)
            cin = cout
        reduced = arch.frame_size // 2 ** len(CRITIC_POOL_AFTER)
        params.dense("fc1", cin * reduced * reduced, arch.critic_hidden)
        params.dense("fc2", arch.critic_hidden, 1)
        logger.debug("Discriminator initialized with %d parameters", params.count())
        return cls(arch, params)


def discriminator_forward(img: Tensor, w: DiscriminatorWeights) -> Tensor:
    """Critic score per image: (N, 1, S, S) -> (N, 1), no output activation."""
    size = w.arch.frame_size
    if img.ndim != 4 or img.shape[1:] != (1, size, size):
        raise ValueError(f"discriminator expects (N, 1, {size}, {size}) input, got {img.shape}")
    x = img
    for layer in range(1, len(w.arch.critic_channels) + 1):
        x = apply_conv(w.params, f"conv{layer}", x)
        if layer in CRITIC_POOL_AFTER:
            x = ops.pool2d(x, "max", 2, 2)
    x = apply_dense(w.params, "fc1", ops.flatten(x))
    return apply_dense(w.params, "fc2", x, relu=False)
