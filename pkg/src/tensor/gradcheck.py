"""Central finite-difference oracles for the autodiff engine."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from src.tensor.graph import Graph, Tensor


def numerical_gradient(
    fn: Callable[[], float],
    array: np.ndarray,
    h: float = 1e-5,
    indices: Sequence[tuple[int, ...]] | None = None,
) -> np.ndarray:
    """d fn / d array by central differences, perturbing ``array`` in place.

    With ``indices`` only those entries are perturbed; the rest stay zero.
    """
    grad = np.zeros(array.shape, dtype=np.float64)
    entries = indices if indices is not None else list(np.ndindex(array.shape))
    for index in entries:
        original = array[index]
        array[index] = original + h
        upper = fn()
        array[index] = original - h
        lower = fn()
        array[index] = original
        grad[index] = (upper - lower) / (2 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / scale


def check_gradients(
    build_loss: Callable[[], Tensor],
    wrt: Sequence[Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative error between backward() and finite differences over ``wrt``.

    ``build_loss`` must rebuild the scalar loss from the current tensor values
    each call. ``max_entries`` caps how many entries per tensor are checked.
    """
    with Graph() as graph:
        loss = build_loss()
    grads = graph.backward(loss)

    def evaluate() -> float:
        return build_loss().item()

    rng = np.random.default_rng(seed)
    worst = 0.0
    for tensor in wrt:
        indices: list[tuple[int, ...]] | None = None
        analytic = grads[tensor].astype(np.float64)
        if max_entries is not None and tensor.size > max_entries:
            flat = rng.choice(tensor.size, size=max_entries, replace=False)
            indices = [tuple(int(i) for i in np.unravel_index(f, tensor.shape)) for f in flat]
            mask = np.zeros(tensor.shape, dtype=bool)
            for index in indices:
                mask[index] = True
            analytic = np.where(mask, analytic, 0.0)
        numeric = numerical_gradient(evaluate, tensor.data, h=h, indices=indices)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
