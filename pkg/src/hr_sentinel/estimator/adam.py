"""Adam with bias correction, operating in place on a model's parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hr_sentinel.estimator.network import EstimatorModel


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray], beta1=0.9, beta2=0.999, epsilon=1e-8) -> AdamState:
        return cls(
            {n: np.zeros_like(p) for n, p in params.items()},
            {n: np.zeros_like(p) for n, p in params.items()},
            0,
            beta1,
            beta2,
            epsilon,
        )

    @classmethod
    def for_model(cls, model: EstimatorModel) -> AdamState:
        cfg = model.config
        return cls.zeros_like(model.params, cfg.beta1, cfg.beta2, cfg.epsilon)


def adam_update(
    params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState, lr: float
) -> None:
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != weight shape {w.shape}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        w -= (lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(w.dtype, copy=False)


def adam_step(
    model: EstimatorModel, grads: dict[str, np.ndarray], state: AdamState, lr: float | None = None
) -> tuple[EstimatorModel, AdamState]:
    """One Adam step; the model's arrays and ``state`` are updated in place."""
    adam_update(model.params, grads, state, model.config.learning_rate if lr is None else lr)
    return model, state
