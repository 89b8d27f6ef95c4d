"""Dense MLP building blocks: linear layers with optional additive noise
channels, batch normalization, inverted dropout and Xavier initialization."""
from __future__ import annotations

import numpy as np

from .autograd import Parameter, Tensor


def xavier_init(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw in +-sqrt(6 / (rows + cols))."""
    if rows <= 0 or cols <= 0:
        raise ValueError("dimensions must be positive")
    bound = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, size=(rows, cols))


def dropout(x: Tensor, keep_prob: float, train: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: mask and rescale by 1/keep_prob in train mode,
    identity in inference mode."""
    if not 0.0 < keep_prob <= 1.0:
        raise ValueError("keep_prob must be in (0, 1]")
    if not train or keep_prob == 1.0:
        return x
    mask = (rng.uniform(size=x.data.shape) < keep_prob) / keep_prob
    return x * Tensor(mask)


class DenseLayer:
    """Affine map y = x W^T + eps W_noise^T + b with an optional activation.

    `W` is (out, in); the optional noise weights are (out, noise_dim) and are
    used only when a noise draw is passed to the call.
    """

    def __init__(
        self,
        in_dim: int,
        out_dim: int,
        rng: np.random.Generator,
        activation: str = "relu",
        noise_dim: int = 0,
        name: str = "dense",
    ):
        if activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {activation!r}")
        self.activation = activation
        self.weight = Parameter(xavier_init(out_dim, in_dim, rng), f"{name}.W")
        self.bias = Parameter(np.zeros(out_dim), f"{name}.b")
        self.noise_weight = (
            Parameter(xavier_init(out_dim, noise_dim, rng), f"{name}.Wn")
            if noise_dim > 0
            else None
        )
        self.noise_dim = noise_dim

    def __call__(self, x: Tensor, noise: Tensor | None = None) -> Tensor:
        out = x @ self.weight.transpose()
        if noise is not None:
            if self.noise_weight is None:
                raise ValueError("layer has no noise channel")
            out = out + noise @ self.noise_weight.transpose()
        out = out + self.bias
        if self.activation == "relu":
            out = out.relu()
        return out

    def parameters(self) -> list:
        params = [self.weight, self.bias]
        if self.noise_weight is not None:
            params.append(self.noise_weight)
        return params


class BatchNormLayer:
    """Per-feature normalization with learned scale/shift.

    Train mode normalizes by batch statistics (biased variance) and updates
    running statistics; inference mode uses the frozen running statistics.
    `momentum` is the fraction of the old running value retained per update.
    """

    def __init__(self, dim: int, momentum: float = 0.9, eps: float = 1e-5, name: str = "bn"):
        self.scale = Parameter(np.ones(dim), f"{name}.scale")
        self.shift = Parameter(np.zeros(dim), f"{name}.shift")
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        if train:
            mu = x.mean(axis=0)
            centered = x - mu
            var = (centered * centered).mean(axis=0)
            normalized = centered / (var + self.eps).sqrt()
            m = self.momentum
            self.running_mean = m * self.running_mean + (1 - m) * mu.data
            self.running_var = m * self.running_var + (1 - m) * var.data
        else:
            normalized = (x - Tensor(self.running_mean)) / Tensor(
                np.sqrt(self.running_var + self.eps)
            )
        return normalized * self.scale + self.shift

    def parameters(self) -> list:
        return [self.scale, self.shift]

    def state(self) -> dict:
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def load_state(self, state: dict) -> None:
        self.running_mean = np.array(state["running_mean"], dtype=np.float64)
        self.running_var = np.array(state["running_var"], dtype=np.float64)


class MLP:
    """Stack of DenseLayer blocks with optional batch norm and dropout.

    With no hidden sizes this is the identity on the input features; the
    caller attaches whatever output head it needs.
    """

    def __init__(
        self,
        in_dim: int,
        hidden: list[int],
        rng: np.random.Generator,
        batch_norm: bool = True,
        dropout_keep: float = 1.0,
        name: str = "mlp",
    ):
        self.layers: list[DenseLayer] = []
        self.norms: list[BatchNormLayer | None] = []
        self.dropout_keep = dropout_keep
        self.out_dim = in_dim
        prev = in_dim
        for i, width in enumerate(hidden):
            self.layers.append(
                DenseLayer(prev, width, rng, activation="identity", name=f"{name}.{i}")
            )
            self.norms.append(BatchNormLayer(width, name=f"{name}.{i}.bn") if batch_norm else None)
            prev = width
            self.out_dim = width

    def __call__(
        self, x: Tensor, train: bool, dropout_rng: np.random.Generator | None = None
    ) -> Tensor:
        h = x
        for layer, norm in zip(self.layers, self.norms):
            h = layer(h)
            if norm is not None:
                h = norm(h, train)
            h = h.relu()
            if train and self.dropout_keep < 1.0:
                h = dropout(h, self.dropout_keep, train, dropout_rng)
        return h

    def parameters(self) -> list:
        params = []
        for layer, norm in zip(self.layers, self.norms):
            params.extend(layer.parameters())
            if norm is not None:
                params.extend(norm.parameters())
        return params

    def norm_layers(self) -> list:
        return [n for n in self.norms if n is not None]
