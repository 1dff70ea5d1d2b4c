"""Finite-difference verification of the analytic gradients.

Symmetric differences around each parameter coordinate are compared
with the backward pass, with a relative error floored at 1e-6 so
hinge-flat (all-zero) cases compare cleanly. The numeric derivative is
the Richardson extrapolation of two central quotients, (4*D(eps/2) -
D(eps)) / 3: a bare central quotient at eps = 1e-3 carries O(eps^2)
truncation error that exceeds the tolerance on near-zero-gradient
coordinates, while the extrapolated stencil is O(eps^4). The comparison
machinery is generic over named tensors so it can also validate itself
on closed-form fixtures that have nothing to do with the encoder.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError
from .model import EncoderParams, cosine_embedding_loss, encoder_forward, loss_and_backward

REL_ERROR_FLOOR = 1e-6


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_ERROR_FLOOR)


def central_difference_check(
    loss_fn: Callable[[], float],
    tensors: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    epsilon: float,
    coordinates: list[tuple[str, int]] | None = None,
) -> float:
    """Max relative error between ``analytic`` and central differences of
    ``loss_fn``, perturbing the given (tensor name, flat index) coordinates
    in place (all coordinates when none are given)."""
    if coordinates is None:
        coordinates = [
            (name, flat) for name, t in tensors.items() for flat in range(t.size)
        ]
    worst = 0.0
    for name, flat in coordinates:
        tensor = tensors[name].reshape(-1)
        original = tensor[flat]

        def quotient(step: float) -> float:
            tensor[flat] = original + step
            loss_plus = loss_fn()
            tensor[flat] = original - step
            loss_minus = loss_fn()
            tensor[flat] = original
            return (loss_plus - loss_minus) / (2.0 * step)

        numeric = (4.0 * quotient(epsilon / 2.0) - quotient(epsilon)) / 3.0
        worst = max(worst, relative_error(analytic[name].reshape(-1)[flat], numeric))
    return worst


@dataclass(frozen=True)
class GradCheckSample:
    token_ids: tuple[int, ...]
    target_feature: np.ndarray
    y: int
    margin: float = 0.0


def grad_check(
    params: EncoderParams,
    sample: GradCheckSample,
    epsilon: float = 1e-3,
    max_coordinates: int | None = None,
    seed: int = 0,
) -> float:
    """Max relative error of the analytic gradient over parameter coordinates.

    Runs in float64 copies of the parameters so the difference quotient is
    limited by truncation error, not 32-bit rounding. ``max_coordinates``
    caps the check at a random subsample (never below 200); by default
    every coordinate is checked.
    """
    if not 1e-4 <= epsilon <= 1e-2:
        raise ConfigError(f"epsilon {epsilon} outside [1e-4, 1e-2]")
    params64 = params.astype(np.float64)
    target = np.asarray(sample.target_feature, dtype=np.float64)
    token_ids = list(sample.token_ids)

    _, grads = loss_and_backward(params64, token_ids, target, sample.y, sample.margin)
    vocab_size, word_dim = params64.word_embeddings.shape
    analytic = {
        "word_embeddings": grads.dense_embeddings(vocab_size, word_dim, np.float64),
        "rnn_input_weights": grads.rnn_input_weights,
        "rnn_recurrent_weights": grads.rnn_recurrent_weights,
        "rnn_bias": grads.rnn_bias,
        "proj_weights": grads.proj_weights,
        "proj_bias": grads.proj_bias,
    }
    tensors = params64.tensors()

    coordinates = None
    total = sum(t.size for t in tensors.values())
    if max_coordinates is not None and total > max(max_coordinates, 200):
        budget = max(max_coordinates, 200)
        rng = np.random.default_rng(seed)
        flat_space = []
        for name, tensor in tensors.items():
            flat_space.extend((name, flat) for flat in range(tensor.size))
        chosen = rng.choice(total, size=budget, replace=False)
        coordinates = [flat_space[int(i)] for i in chosen]

    def loss_fn() -> float:
        embedding, _ = encoder_forward(params64, token_ids)
        return cosine_embedding_loss(embedding, target, sample.y, sample.margin)

    return central_difference_check(loss_fn, tensors, analytic, epsilon, coordinates)
