"""Adam optimizer over the nested parameter structure used by network.py."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: list = field(default_factory=list)
    second_moment: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, learning_rate=1e-3, beta1=0.9, beta2=0.999, epsilon=1e-8):
        m = [None if p is None else {k: np.zeros_like(v) for k, v in p.items()} for p in params]
        v = [None if p is None else {k: np.zeros_like(a) for k, a in p.items()} for p in params]
        return cls(learning_rate, beta1, beta2, epsilon, 0, m, v)


def adam_step(params, grads, state: AdamState):
    """One in-place Adam update with bias correction; increments state.step."""
    state.step += 1
    t = state.step
    lr = state.learning_rate * np.sqrt(1.0 - state.beta2**t) / (1.0 - state.beta1**t)
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p is None:
            continue
        for key in p:
            m[key] *= state.beta1
            m[key] += (1.0 - state.beta1) * g[key]
            v[key] *= state.beta2
            v[key] += (1.0 - state.beta2) * g[key] * g[key]
            p[key] -= lr * m[key] / (np.sqrt(v[key]) + state.epsilon)
    return params, state
