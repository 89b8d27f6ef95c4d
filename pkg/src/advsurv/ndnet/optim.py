"""Adam optimizer with bias-corrected moment estimates."""
from __future__ import annotations

import numpy as np

from .autograd import NonFiniteError, Parameter, grad_of


class Adam:
    """Standard Adam update applied in place to a fixed parameter list.

    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), where m_hat and v_hat
    are the bias-corrected first and second moment estimates.
    """

    def __init__(
        self,
        params: list[Parameter],
        lr: float = 3e-4,
        beta1: float = 0.9,
        beta2: float = 0.99,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for i, p in enumerate(self.params):
            g = grad_of(p)
            if not np.all(np.isfinite(g)):
                raise NonFiniteError(f"non-finite gradient for parameter {p.name!r}")
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            m_hat = self.m[i] / (1 - b1**self.t)
            v_hat = self.v[i] / (1 - b2**self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state(self) -> dict:
        out = {"adam.t": np.array([float(self.t)])}
        for i, p in enumerate(self.params):
            out[f"adam.m.{p.name}"] = self.m[i]
            out[f"adam.v.{p.name}"] = self.v[i]
        return out

    def load_state(self, state: dict) -> None:
        self.t = int(state["adam.t"][0])
        for i, p in enumerate(self.params):
            self.m[i] = np.array(state[f"adam.m.{p.name}"], dtype=np.float64)
            self.v[i] = np.array(state[f"adam.v.{p.name}"], dtype=np.float64)
