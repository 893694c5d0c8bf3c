"""Adam with bias correction; moment buffers live alongside the weights."""

from dataclasses import dataclass, field

import numpy as np

from microstack import kernels


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_params(cls, params, lr, beta1=0.9, beta2=0.999, epsilon=1e-8):
        state = cls(lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)
        state.m = [np.zeros_like(t.data) for t in params]
        state.v = [np.zeros_like(t.data) for t in params]
        return state

    def step(self, params, grads):
        """One update, in place on the parameter arrays."""
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise ValueError("params/grads do not match optimizer state")
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for tensor, g, m, v in zip(params, grads, self.m, self.v):
            kernels.adam_update(
                tensor.data.ravel(),
                np.ascontiguousarray(g).ravel(),
                m.ravel(),
                v.ravel(),
                self.lr,
                self.beta1,
                self.beta2,
                self.epsilon,
                bc1,
                bc2,
            )


def adam_step(state, params, grads):
    state.step(params, grads)
    return params
