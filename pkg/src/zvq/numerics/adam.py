"""Adam optimizer with bias-corrected moment estimates."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError, TapeError
from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter first/second moments plus the shared step counter."""

    learning_rate: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, learning_rate: float = 4e-4, beta1: float = 0.9,
                   beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        state = cls(learning_rate, beta1, beta2, epsilon)
        for name, p in params.items():
            state.first_moment[name] = np.zeros_like(p.data)
            state.second_moment[name] = np.zeros_like(p.data)
        return state


def adam_step(params: dict[str, Tensor], state: AdamState) -> None:
    """Apply one in-place Adam update to every parameter.

    Every parameter must carry a gradient and match the shape of its moment
    buffers. A zero gradient leaves the parameter bit-identical (the update
    term is exactly zero) while its moments still decay.
    """
    state.step_count += 1
    t = state.step_count
    bc1 = np.float32(1.0 - state.beta1 ** t)
    bc2 = np.float32(1.0 - state.beta2 ** t)
    lr = np.float32(state.learning_rate)
    b1 = np.float32(state.beta1)
    b2 = np.float32(state.beta2)
    eps = np.float32(state.epsilon)
    for name, p in params.items():
        if p.grad is None:
            raise TapeError(f"adam_step: parameter {name!r} has no gradient")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or m.shape != p.data.shape:
            raise ShapeError(f"adam_step: state for {name!r} does not match "
                             f"parameter shape {p.data.shape}")
        g = p.grad
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
