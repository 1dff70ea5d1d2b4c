"""Language-encoder numerics: forward pass, cosine losses, exact gradients.

The encoder is an embedding lookup feeding a single recurrent layer
(Elman tanh by default, a GRU-style gated cell as an option) whose final
hidden state is projected to the image-feature dimension. Gradients are
hand-derived reverse-mode backpropagation through time; the image side
is a frozen constant and never receives gradients.

All trainable tensors are float32. Every function here preserves the
dtype of the parameters it is given, so the gradient checker can rerun
the exact same code in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DataError, NumericalError

CELL_ELMAN = "elman"
CELL_GATED = "gated"
CELLS = (CELL_ELMAN, CELL_GATED)

TENSOR_NAMES = (
    "word_embeddings",
    "rnn_input_weights",
    "rnn_recurrent_weights",
    "rnn_bias",
    "proj_weights",
    "proj_bias",
)


class Dims(NamedTuple):
    vocab_size: int
    word_dim: int
    hidden_dim: int
    out_dim: int


@dataclass
class EncoderParams:
    """All trainable tensors. Gated cells stack their z/r/candidate blocks
    along the first axis of the recurrent tensors (3h rows)."""

    word_embeddings: np.ndarray
    rnn_input_weights: np.ndarray
    rnn_recurrent_weights: np.ndarray
    rnn_bias: np.ndarray
    proj_weights: np.ndarray
    proj_bias: np.ndarray
    cell: str = CELL_ELMAN

    @property
    def dims(self) -> Dims:
        return Dims(
            vocab_size=self.word_embeddings.shape[0],
            word_dim=self.word_embeddings.shape[1],
            hidden_dim=self.rnn_recurrent_weights.shape[1],
            out_dim=self.proj_weights.shape[0],
        )

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in TENSOR_NAMES}

    def astype(self, dtype) -> "EncoderParams":
        return EncoderParams(
            *(getattr(self, name).astype(dtype) for name in TENSOR_NAMES),
            cell=self.cell,
        )

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            *(getattr(self, name).copy() for name in TENSOR_NAMES), cell=self.cell
        )

    def validate(self) -> None:
        gates = 1 if self.cell == CELL_ELMAN else 3
        _, d_w, h, _ = self.dims
        expected = {
            "word_embeddings": (self.word_embeddings.shape[0], d_w),
            "rnn_input_weights": (gates * h, d_w),
            "rnn_recurrent_weights": (gates * h, h),
            "rnn_bias": (gates * h,),
            "proj_weights": (self.proj_weights.shape[0], h),
            "proj_bias": (self.proj_weights.shape[0],),
        }
        for name, shape in expected.items():
            actual = getattr(self, name).shape
            if actual != shape:
                raise DataError(f"{name} has shape {actual}, expected {shape}")
        for name, tensor in self.tensors().items():
            if not np.isfinite(tensor).all():
                raise DataError(f"{name} contains non-finite values")


def init_params(dims: Dims, seed: int, cell: str = CELL_ELMAN) -> EncoderParams:
    """Uniform(-a, a) weights with a = 1/sqrt(fan_in) per tensor, zero biases."""
    if cell not in CELLS:
        raise ConfigError(f"unknown cell {cell!r}; expected one of {CELLS}")
    if min(dims) < 1:
        raise DataError(f"all dims must be >= 1, got {dims}")
    vocab_size, d_w, h, out = dims
    gates = 1 if cell == CELL_ELMAN else 3
    rng = np.random.default_rng(seed)

    def uniform(rows, cols, fan_in):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, (rows, cols)).astype(np.float32)

    return EncoderParams(
        word_embeddings=uniform(vocab_size, d_w, d_w),
        rnn_input_weights=uniform(gates * h, d_w, d_w),
        rnn_recurrent_weights=uniform(gates * h, h, h),
        rnn_bias=np.zeros(gates * h, dtype=np.float32),
        proj_weights=uniform(out, h, h),
        proj_bias=np.zeros(out, dtype=np.float32),
        cell=cell,
    )


def frozen_unknown_vector(seed: int, pseudo_id: int, word_dim: int, dtype=np.float32):
    """The fixed, untrained embedding used for out-of-vocabulary tokens under
    the hashed-random policy. Same (seed, pseudo_id) always yields the same
    vector, at the scale of freshly initialized rows."""
    rng = np.random.default_rng([seed, pseudo_id])
    bound = 1.0 / np.sqrt(word_dim)
    return rng.uniform(-bound, bound, word_dim).astype(dtype)


def input_vectors(
    params: EncoderParams, token_ids: list[int], unk_seed: int | None = None
) -> np.ndarray:
    vocab_size, d_w = params.word_embeddings.shape
    rows = np.empty((len(token_ids), d_w), dtype=params.word_embeddings.dtype)
    for t, token_id in enumerate(token_ids):
        if 0 <= token_id < vocab_size:
            rows[t] = params.word_embeddings[token_id]
        elif token_id >= vocab_size and unk_seed is not None:
            rows[t] = frozen_unknown_vector(
                unk_seed, token_id, d_w, dtype=params.word_embeddings.dtype
            )
        else:
            raise DataError(
                f"token id {token_id} outside embedding table of {vocab_size} rows "
                "and no unknown-token seed supplied"
            )
    return rows


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    expx = np.exp(x[~positive])
    out[~positive] = expx / (1.0 + expx)
    return out


@dataclass
class ForwardCache:
    """Everything the backward pass needs: inputs, the h_0..h_T trajectory and,
    for the gated cell, the per-step gate activations."""

    token_ids: tuple[int, ...]
    inputs: np.ndarray
    hidden: np.ndarray
    embedding: np.ndarray
    gates: dict[str, np.ndarray] | None = None


def encoder_forward(
    params: EncoderParams, token_ids: list[int], unk_seed: int | None = None
) -> tuple[np.ndarray, ForwardCache]:
    """Run the recurrence over the token sequence and project the final
    hidden state. Returns the command embedding and the backward cache."""
    if len(token_ids) == 0:
        raise DataError("cannot encode an empty token sequence")
    x = input_vectors(params, token_ids, unk_seed)
    steps = len(token_ids)
    h_dim = params.rnn_recurrent_weights.shape[1]
    hidden = np.zeros((steps + 1, h_dim), dtype=x.dtype)
    gates = None

    if params.cell == CELL_ELMAN:
        w_in, w_rec, bias = (
            params.rnn_input_weights,
            params.rnn_recurrent_weights,
            params.rnn_bias,
        )
        for t in range(steps):
            hidden[t + 1] = np.tanh(w_in @ x[t] + w_rec @ hidden[t] + bias)
    elif params.cell == CELL_GATED:
        w_z, w_r, w_n = np.split(params.rnn_input_weights, 3, axis=0)
        u_z, u_r, u_n = np.split(params.rnn_recurrent_weights, 3, axis=0)
        b_z, b_r, b_n = np.split(params.rnn_bias, 3)
        gates = {
            "update": np.zeros((steps, h_dim), dtype=x.dtype),
            "reset": np.zeros((steps, h_dim), dtype=x.dtype),
            "candidate": np.zeros((steps, h_dim), dtype=x.dtype),
        }
        for t in range(steps):
            h_prev = hidden[t]
            z = _sigmoid(w_z @ x[t] + u_z @ h_prev + b_z)
            r = _sigmoid(w_r @ x[t] + u_r @ h_prev + b_r)
            n = np.tanh(w_n @ x[t] + u_n @ (r * h_prev) + b_n)
            gates["update"][t] = z
            gates["reset"][t] = r
            gates["candidate"][t] = n
            hidden[t + 1] = (1.0 - z) * n + z * h_prev
    else:
        raise ConfigError(f"unknown cell {params.cell!r}")

    embedding = params.proj_weights @ hidden[steps] + params.proj_bias
    cache = ForwardCache(
        token_ids=tuple(token_ids),
        inputs=x,
        hidden=hidden,
        embedding=embedding,
        gates=gates,
    )
    return embedding, cache


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DataError("cosine similarity undefined for zero-norm vectors")
    value = float(np.dot(a, b)) / (norm_a * norm_b)
    if value != value or norm_a != norm_a or norm_b != norm_b:
        raise NumericalError("non-finite values in cosine similarity")
    return min(1.0, max(-1.0, value))


def cosine_embedding_loss(
    x1: np.ndarray, x2: np.ndarray, y: int, margin: float = 0.0
) -> float:
    """1 - cos for positive pairs; hinge max(0, cos - margin) for negatives."""
    if y not in (1, -1):
        raise DataError(f"label must be +1 or -1, got {y}")
    if not -1.0 <= margin <= 1.0:
        raise ConfigError(f"margin must lie in [-1, 1], got {margin}")
    cos = cosine_similarity(x1, x2)
    if y == 1:
        return 1.0 - cos
    return max(0.0, cos - margin)


@dataclass
class Gradients:
    """Parameter gradients; embedding rows are kept sparse (touched ids only)."""

    embedding_rows: dict[int, np.ndarray]
    rnn_input_weights: np.ndarray
    rnn_recurrent_weights: np.ndarray
    rnn_bias: np.ndarray
    proj_weights: np.ndarray
    proj_bias: np.ndarray

    @classmethod
    def zeros_like(cls, params: EncoderParams) -> "Gradients":
        return cls(
            embedding_rows={},
            rnn_input_weights=np.zeros_like(params.rnn_input_weights),
            rnn_recurrent_weights=np.zeros_like(params.rnn_recurrent_weights),
            rnn_bias=np.zeros_like(params.rnn_bias),
            proj_weights=np.zeros_like(params.proj_weights),
            proj_bias=np.zeros_like(params.proj_bias),
        )

    def add_(self, other: "Gradients") -> None:
        for row, grad in other.embedding_rows.items():
            if row in self.embedding_rows:
                self.embedding_rows[row] = self.embedding_rows[row] + grad
            else:
                self.embedding_rows[row] = grad.copy()
        self.rnn_input_weights += other.rnn_input_weights
        self.rnn_recurrent_weights += other.rnn_recurrent_weights
        self.rnn_bias += other.rnn_bias
        self.proj_weights += other.proj_weights
        self.proj_bias += other.proj_bias

    def scale_(self, factor: float) -> None:
        for row in self.embedding_rows:
            self.embedding_rows[row] = self.embedding_rows[row] * factor
        self.rnn_input_weights *= factor
        self.rnn_recurrent_weights *= factor
        self.rnn_bias *= factor
        self.proj_weights *= factor
        self.proj_bias *= factor

    def dense_embeddings(self, vocab_size: int, word_dim: int, dtype) -> np.ndarray:
        dense = np.zeros((vocab_size, word_dim), dtype=dtype)
        for row, grad in self.embedding_rows.items():
            dense[row] += grad
        return dense

    def is_finite(self) -> bool:
        tensors = [
            self.rnn_input_weights,
            self.rnn_recurrent_weights,
            self.rnn_bias,
            self.proj_weights,
            self.proj_bias,
            *self.embedding_rows.values(),
        ]
        return all(np.isfinite(t).all() for t in tensors)


def loss_and_backward(
    params: EncoderParams,
    token_ids: list[int],
    target_feature: np.ndarray,
    y: int,
    margin: float = 0.0,
    unk_seed: int | None = None,
) -> tuple[float, Gradients]:
    """Cosine embedding loss and its exact gradients w.r.t. every trainable
    tensor. The target feature is a constant: no gradient flows into it.
    Hinge-inactive negatives return a zero gradient."""
    embedding, cache = encoder_forward(params, token_ids, unk_seed)
    out_dim = params.proj_bias.shape[0]
    if target_feature.shape != (out_dim,):
        raise DataError(
            f"target feature has shape {target_feature.shape}, expected ({out_dim},)"
        )
    loss = cosine_embedding_loss(embedding, target_feature, y, margin)
    grads = Gradients.zeros_like(params)
    cos = cosine_similarity(embedding, target_feature)
    if y == -1 and cos <= margin:
        return loss, grads
    d_loss_d_cos = -1.0 if y == 1 else 1.0

    norm_e = np.linalg.norm(embedding)
    norm_f = np.linalg.norm(target_feature)
    # d cos / d e = f_hat / ||e|| - cos * e / ||e||^2  (always orthogonal to e)
    d_cos_d_e = target_feature / (norm_e * norm_f) - cos * embedding / (norm_e**2)
    delta_e = (d_loss_d_cos * d_cos_d_e).astype(embedding.dtype)

    final_h = cache.hidden[len(token_ids)]
    grads.proj_weights += np.outer(delta_e, final_h)
    grads.proj_bias += delta_e
    delta_h = params.proj_weights.T @ delta_e

    if params.cell == CELL_ELMAN:
        _elman_backward(params, cache, delta_h, grads)
    else:
        _gated_backward(params, cache, delta_h, grads)
    return loss, grads


def _accumulate_embedding_row(
    grads: Gradients, params: EncoderParams, token_id: int, delta_x: np.ndarray
) -> None:
    # frozen unknown embeddings (ids >= vocab size) receive no gradient
    if token_id >= params.word_embeddings.shape[0]:
        return
    if token_id in grads.embedding_rows:
        grads.embedding_rows[token_id] = grads.embedding_rows[token_id] + delta_x
    else:
        grads.embedding_rows[token_id] = delta_x


def _elman_backward(
    params: EncoderParams, cache: ForwardCache, delta_h: np.ndarray, grads: Gradients
) -> None:
    w_in, w_rec = params.rnn_input_weights, params.rnn_recurrent_weights
    for t in range(len(cache.token_ids) - 1, -1, -1):
        h_t = cache.hidden[t + 1]
        delta_a = delta_h * (1.0 - h_t * h_t)
        grads.rnn_input_weights += np.outer(delta_a, cache.inputs[t])
        grads.rnn_recurrent_weights += np.outer(delta_a, cache.hidden[t])
        grads.rnn_bias += delta_a
        _accumulate_embedding_row(grads, params, cache.token_ids[t], w_in.T @ delta_a)
        delta_h = w_rec.T @ delta_a


def _gated_backward(
    params: EncoderParams, cache: ForwardCache, delta_h: np.ndarray, grads: Gradients
) -> None:
    h_dim = params.rnn_recurrent_weights.shape[1]
    w_z, w_r, w_n = np.split(params.rnn_input_weights, 3, axis=0)
    u_z, u_r, u_n = np.split(params.rnn_recurrent_weights, 3, axis=0)
    gw = grads.rnn_input_weights
    gu = grads.rnn_recurrent_weights
    gb = grads.rnn_bias
    for t in range(len(cache.token_ids) - 1, -1, -1):
        h_prev = cache.hidden[t]
        x_t = cache.inputs[t]
        z = cache.gates["update"][t]
        r = cache.gates["reset"][t]
        n = cache.gates["candidate"][t]

        delta_n = delta_h * (1.0 - z)
        delta_z = delta_h * (h_prev - n)
        delta_h_prev = delta_h * z

        delta_a_n = delta_n * (1.0 - n * n)
        gw[2 * h_dim :] += np.outer(delta_a_n, x_t)
        gu[2 * h_dim :] += np.outer(delta_a_n, r * h_prev)
        gb[2 * h_dim :] += delta_a_n
        delta_rh = u_n.T @ delta_a_n
        delta_r = delta_rh * h_prev
        delta_h_prev = delta_h_prev + delta_rh * r

        delta_a_z = delta_z * z * (1.0 - z)
        gw[:h_dim] += np.outer(delta_a_z, x_t)
        gu[:h_dim] += np.outer(delta_a_z, h_prev)
        gb[:h_dim] += delta_a_z
        delta_h_prev = delta_h_prev + u_z.T @ delta_a_z

        delta_a_r = delta_r * r * (1.0 - r)
        gw[h_dim : 2 * h_dim] += np.outer(delta_a_r, x_t)
        gu[h_dim : 2 * h_dim] += np.outer(delta_a_r, h_prev)
        gb[h_dim : 2 * h_dim] += delta_a_r
        delta_h_prev = delta_h_prev + u_r.T @ delta_a_r

        delta_x = w_z.T @ delta_a_z + w_r.T @ delta_a_r + w_n.T @ delta_a_n
        _accumulate_embedding_row(grads, params, cache.token_ids[t], delta_x)
        delta_h = delta_h_prev


def param_norms(params: EncoderParams) -> dict[str, float]:
    """Per-tensor L2 norms, for the per-epoch debug dump."""
    return {name: float(np.linalg.norm(t)) for name, t in params.tensors().items()}
