"""Adam with bias correction, hand-implemented.

    m <- b1*m + (1-b1)*g        v <- b2*v + (1-b2)*g^2
    m_hat = m/(1-b1^t)          v_hat = v/(1-b2^t)
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)

Word-embedding gradients arrive as sparse rows; only touched rows and
their moment slots are updated (lazy Adam), while the step counter is
global.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .model import EncoderParams, Gradients

DENSE_TENSORS = (
    "rnn_input_weights",
    "rnn_recurrent_weights",
    "rnn_bias",
    "proj_weights",
    "proj_bias",
)


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(
        cls,
        params: EncoderParams,
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ) -> "AdamState":
        state = cls(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)
        for name, tensor in params.tensors().items():
            state.m[name] = np.zeros_like(tensor)
            state.v[name] = np.zeros_like(tensor)
        return state


def adam_step(params: EncoderParams, grads: Gradients, state: AdamState) -> None:
    """One in-place update. Non-finite gradients abort before any mutation."""
    if not grads.is_finite():
        raise NumericalError("non-finite gradient passed to adam_step")
    state.t += 1
    correct1 = 1.0 - state.beta1**state.t
    correct2 = 1.0 - state.beta2**state.t

    for name in DENSE_TENSORS:
        grad = getattr(grads, name)
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        update = (m / correct1) / (np.sqrt(v / correct2) + state.epsilon)
        getattr(params, name)[...] -= state.lr * update

    if grads.embedding_rows:
        m = state.m["word_embeddings"]
        v = state.v["word_embeddings"]
        table = params.word_embeddings
        for row in sorted(grads.embedding_rows):
            grad = grads.embedding_rows[row]
            m[row] *= state.beta1
            m[row] += (1.0 - state.beta1) * grad
            v[row] *= state.beta2
            v[row] += (1.0 - state.beta2) * grad * grad
            update = (m[row] / correct1) / (np.sqrt(v[row] / correct2) + state.epsilon)
            table[row] -= state.lr * update
