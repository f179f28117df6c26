"""Recurrent encoder, self-attention, dropout and linear projection."""

from __future__ import annotations

import numpy as np

from stimex.nn.tensor import Parameter, Tensor, concat, stack


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


class Lstm:
    """Single-direction LSTM cell applied over a sequence.

    Gates are ordered (input, forget, cell, output) in the packed weight
    matrices; the forget-gate bias is initialized to 1.
    """

    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.hidden_dim = hidden_dim
        self.w_x = Parameter(f"{name}.w_x", glorot_uniform(rng, input_dim, 4 * hidden_dim))
        self.w_h = Parameter(f"{name}.w_h", glorot_uniform(rng, hidden_dim, 4 * hidden_dim))
        bias = np.zeros(4 * hidden_dim)
        bias[hidden_dim : 2 * hidden_dim] = 1.0
        self.bias = Parameter(f"{name}.bias", bias)

    def parameters(self) -> list[Parameter]:
        return [self.w_x, self.w_h, self.bias]

    def states(self, xs: Tensor, reverse: bool = False) -> list[Tensor]:
        """Hidden state per position, indexed by original position."""
        n = xs.shape[0]
        if n == 0:
            raise ValueError("cannot encode an empty sequence")
        hd = self.hidden_dim
        xw = xs @ self.w_x  # (n, 4h) in one shot
        h = Tensor(np.zeros(hd))
        c = Tensor(np.zeros(hd))
        out: list[Tensor | None] = [None] * n
        order = range(n - 1, -1, -1) if reverse else range(n)
        for t in order:
            pre = xw[t] + h @ self.w_h + self.bias
            i = pre[0:hd].sigmoid()
            f = pre[hd : 2 * hd].sigmoid()
            g = pre[2 * hd : 3 * hd].tanh()
            o = pre[3 * hd : 4 * hd].sigmoid()
            c = f * c + i * g
            h = o * c.tanh()
            out[t] = h
        return out  # type: ignore[return-value]


class BiLstm:
    def __init__(self, name: str, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.fwd = Lstm(f"{name}.fwd", input_dim, hidden_dim, rng)
        self.bwd = Lstm(f"{name}.bwd", input_dim, hidden_dim, rng)

    def parameters(self) -> list[Parameter]:
        return self.fwd.parameters() + self.bwd.parameters()

    def run(self, xs: Tensor) -> tuple[list[Tensor], list[Tensor]]:
        return self.fwd.states(xs), self.bwd.states(xs, reverse=True)

    def __call__(self, xs: Tensor) -> Tensor:
        f, b = self.run(xs)
        return concat([stack(f), stack(b)], axis=1)  # (n, 2h)


def attention(h: Tensor, include_self: bool = True) -> Tensor:
    """Dot-product self-attention: each row becomes ``[h_i ; sum_j a_ij h_j]``.

    Weights are a softmax over scores against every position, including
    ``j = i`` by default.  With a single position the context equals the
    input regardless of ``include_self``.
    """
    n = h.shape[0]
    scores = h @ h.T
    if not include_self and n > 1:
        mask = np.where(np.eye(n, dtype=bool), -np.inf, 0.0)
        scores = scores + Tensor(mask)
    weights = scores.softmax(axis=1)
    return concat([h, weights @ h], axis=1)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: scales kept activations by 1/(1-p) during training."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    mask = (rng.random(x.shape) >= p) / (1.0 - p)
    return x * Tensor(mask)


class Linear:
    def __init__(self, name: str, input_dim: int, output_dim: int, rng: np.random.Generator):
        self.weight = Parameter(f"{name}.weight", glorot_uniform(rng, input_dim, output_dim))
        self.bias = Parameter(f"{name}.bias", np.zeros(output_dim))

    def parameters(self) -> list[Parameter]:
        return [self.weight, self.bias]

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


def cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Negative log-softmax of the target logit."""
    if not 0 <= target < logits.shape[-1]:
        raise ValueError(f"target {target} out of range for {logits.shape[-1]} classes")
    return logits.logsumexp() - logits[target]
