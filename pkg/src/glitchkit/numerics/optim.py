"""Adam optimizer with bias correction."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import UsageError


@dataclass
class AdamState:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state):
    """Apply one Adam update in place to ``params`` (a list of Tensors).

    ``grads`` aligns with ``params``; a ``None`` entry is treated as a zero
    gradient. Moment buffers are created lazily on the first step.
    """
    if len(params) != len(grads):
        raise UsageError(f"adam_step: {len(params)} params but {len(grads)} grads")
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    elif len(state.m) != len(params):
        raise UsageError(f"adam_step: state tracks {len(state.m)} params, got {len(params)}")
    state.step += 1
    t = state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape or state.m[i].shape != p.shape:
            raise UsageError(f"adam_step: shape mismatch for param {i}: {list(p.shape)} vs grad {list(g.shape)}")
        dt = p.dtype.type
        m = state.m[i] = dt(state.beta1) * state.m[i] + dt(1 - state.beta1) * g
        v = state.v[i] = dt(state.beta2) * state.v[i] + dt(1 - state.beta2) * (g * g)
        m_hat = m / dt(1 - state.beta1 ** t)
        v_hat = v / dt(1 - state.beta2 ** t)
        p.data = (p.data - dt(state.learning_rate) * m_hat / (np.sqrt(v_hat) + dt(state.epsilon))).astype(p.dtype)
    return params, state
