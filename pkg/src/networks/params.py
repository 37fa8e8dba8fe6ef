"""Named parameter collections with seeded initialization."""

from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from contextlib import contextmanager

import numpy as np

from src.tensor import ops
from src.tensor.graph import DEFAULT_DTYPE, Tensor

logger = logging.getLogger(__name__)


class ParameterSet:
    """Ordered ``name -> Tensor`` map.

    Weights are drawn uniformly from [-s, s] with s = 1 / sqrt(fan_in) in
    registration order, so one seed always yields the same network. Biases
    start at zero.
    """

    def __init__(self, seed: int, dtype: type[np.floating] = DEFAULT_DTYPE, trainable: bool = True):
        self._rng = np.random.default_rng(seed)
        self.dtype = dtype
        self.trainable = trainable
        self.tensors: dict[str, Tensor] = {}

    def _register(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.tensors:
            raise ValueError(f"parameter {name!r} registered twice")
        tensor = Tensor(data.astype(self.dtype), requires_grad=self.trainable)
        self.tensors[name] = tensor
        return tensor

    def uniform(
        self, name: str, shape: tuple[int, ...], fan_in: int, scale: float = 1.0
    ) -> Tensor:
        bound = scale / math.sqrt(fan_in)
        return self._register(name, self._rng.uniform(-bound, bound, size=shape))

    def zeros(self, name: str, shape: tuple[int, ...]) -> Tensor:
        return self._register(name, np.zeros(shape))

    def conv(self, name: str, cin: int, cout: int, k: int) -> None:
        self.uniform(f"{name}.w", (cout, cin, k, k), cin * k * k)
        self.zeros(f"{name}.b", (cout,))

    def deconv(self, name: str, cin: int, cout: int, k: int, scale: float = 1.0) -> None:
        self.uniform(f"{name}.w", (cin, cout, k, k), cin * k * k, scale)
        self.zeros(f"{name}.b", (cout,))

    def dense(self, name: str, din: int, dout: int) -> None:
        self.uniform(f"{name}.w", (din, dout), din)
        self.zeros(f"{name}.b", (dout,))

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.tensors[name]
        except KeyError:
            raise KeyError(f"no parameter named {name!r}") from None

    def __contains__(self, name: object) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self.tensors.items())

    def count(self) -> int:
        """Total number of scalar parameters."""
        return sum(t.size for t in self.tensors.values())

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.tensors.items()}

    @contextmanager
    def frozen(self) -> Iterator[None]:
        """Exclude these parameters from gradient tracking inside the block."""
        previous = {name: t.requires_grad for name, t in self.tensors.items()}
        for tensor in self.tensors.values():
            tensor.requires_grad = False
        try:
            yield
        finally:
            for name, tensor in self.tensors.items():
                tensor.requires_grad = previous[name]

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Overwrite values in place; callers check compatibility first."""
        for name, value in arrays.items():
            self[name].data = value.astype(self.dtype).reshape(self[name].shape)


# -- layer application ---------------------------------------------------------------


def apply_conv(params: ParameterSet, name: str, x: Tensor, relu: bool = True) -> Tensor:
    """Same-size convolution (odd kernel, stride 1, pad k // 2)."""
    w = params[f"{name}.w"]
    out = ops.conv2d(x, w, params[f"{name}.b"], stride=1, pad=w.shape[2] // 2)
    return ops.relu(out) if relu else out


def apply_deconv(params: ParameterSet, name: str, x: Tensor, relu: bool = True) -> Tensor:
    w = params[f"{name}.w"]
    out = ops.conv_transpose2d(x, w, params[f"{name}.b"], stride=1, pad=w.shape[2] // 2)
    return ops.relu(out) if relu else out


def apply_dense(params: ParameterSet, name: str, x: Tensor, relu: bool = True) -> Tensor:
    out = ops.dense(x, params[f"{name}.w"], params[f"{name}.b"])
    return ops.relu(out) if relu else out
