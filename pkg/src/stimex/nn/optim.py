"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from stimex.nn.tensor import Parameter


class Adam:
    def __init__(
        self,
        params: list[Parameter],
        lr: float = 0.003,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ValueError("parameter names must be unique")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {p.name: np.zeros_like(p.data) for p in self.params}
        self.v = {p.name: np.zeros_like(p.data) for p in self.params}

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        for p in self.params:
            if not p.trainable:
                continue
            grad = p.grad
            if grad is None:
                grad = np.zeros_like(p.data)
            if grad.shape != p.data.shape:
                raise ValueError(
                    f"gradient shape {grad.shape} does not match parameter "
                    f"{p.name!r} of shape {p.data.shape}"
                )
            m = self.m[p.name] = self.beta1 * self.m[p.name] + (1 - self.beta1) * grad
            v = self.v[p.name] = self.beta2 * self.v[p.name] + (1 - self.beta2) * grad**2
            m_hat = m / (1 - self.beta1**self.t)
            v_hat = v / (1 - self.beta2**self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
