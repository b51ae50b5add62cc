"""Linear layers and element-wise activations with hand-derived backward passes."""

from typing import Optional

import numpy as np

from diffcore.matrix import DimensionError, Matrix, StateError, as_matrix, ensure_finite
from rng import RngState

ACTIVATIONS = {"relu", "tanh"}


class LinearLayer:
    """Affine map x·W + b with gradient accumulators and momentum buffers."""

    def __init__(self, weight: Matrix, bias: np.ndarray, name: str = "") -> None:
        self.weight = as_matrix(weight, "weight").copy()
        self.bias = np.asarray(bias, dtype=np.float64).reshape(-1).copy()
        if self.bias.shape[0] != self.weight.shape[1]:
            raise DimensionError(
                f"bias of length {self.bias.shape[0]} does not match weight {self.weight.shape}"
            )
        self.name = name
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self.velocity_weight = np.zeros_like(self.weight)
        self.velocity_bias = np.zeros_like(self.bias)
        self._input: Optional[Matrix] = None

    @classmethod
    def initialized(
        cls, din: int, dout: int, rng: RngState, gain: float = 2.0, name: str = ""
    ) -> "LinearLayer":
        """Gaussian weights with variance gain/din and zero bias."""
        weight = rng.standard_normal((din, dout)) * np.sqrt(gain / din)
        return cls(weight, np.zeros(dout), name=name)

    @property
    def din(self) -> int:
        return self.weight.shape[0]

    @property
    def dout(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: Matrix) -> Matrix:
        return linear_forward(x, self)

    def backward(self, grad_out: Matrix) -> Matrix:
        return linear_backward(grad_out, self)

    def zero_grad(self) -> None:
        self.grad_weight.fill(0.0)
        self.grad_bias.fill(0.0)
        self._input = None

    def copy(self) -> "LinearLayer":
        """Independent copy of parameters and optimizer buffers (no cached input)."""
        clone = LinearLayer(self.weight, self.bias, name=self.name)
        clone.grad_weight = self.grad_weight.copy()
        clone.grad_bias = self.grad_bias.copy()
        clone.velocity_weight = self.velocity_weight.copy()
        clone.velocity_bias = self.velocity_bias.copy()
        return clone


def linear_forward(x: Matrix, layer: LinearLayer) -> Matrix:
    x = as_matrix(x)
    if x.shape[1] != layer.weight.shape[0]:
        raise DimensionError(
            f"cannot apply layer {layer.name or '<unnamed>'}: input {x.shape} "
            f"vs weight {layer.weight.shape}"
        )
    layer._input = x
    out = x @ layer.weight + layer.bias
    return ensure_finite(out, f"linear output {layer.name}")


def linear_backward(grad_out: Matrix, layer: LinearLayer) -> Matrix:
    if layer._input is None:
        raise StateError(
            f"backward called on layer {layer.name or '<unnamed>'} without a forward pass"
        )
    grad_out = as_matrix(grad_out, "grad_out")
    x = layer._input
    if grad_out.shape != (x.shape[0], layer.weight.shape[1]):
        raise DimensionError(
            f"grad_out {grad_out.shape} does not match layer output "
            f"{(x.shape[0], layer.weight.shape[1])}"
        )
    layer.grad_weight += x.T @ grad_out
    layer.grad_bias += grad_out.sum(axis=0)
    return grad_out @ layer.weight.T


def activation(x: Matrix, kind: str) -> Matrix:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "tanh":
        return np.tanh(x)
    raise ValueError(f"unknown activation '{kind}', expected one of {sorted(ACTIVATIONS)}")


def activation_grad(x: Matrix, kind: str) -> Matrix:
    """Element-wise derivative of the activation evaluated at x."""
    if kind == "relu":
        return (x > 0.0).astype(np.float64)
    if kind == "tanh":
        return 1.0 - np.tanh(x) ** 2
    raise ValueError(f"unknown activation '{kind}', expected one of {sorted(ACTIVATIONS)}")


class Activation:
    """Stateful wrapper caching its input for the backward pass."""

    def __init__(self, kind: str) -> None:
        if kind not in ACTIVATIONS:
            raise ValueError(f"unknown activation '{kind}', expected one of {sorted(ACTIVATIONS)}")
        self.kind = kind
        self._input: Optional[Matrix] = None

    def forward(self, x: Matrix) -> Matrix:
        self._input = x
        return activation(x, self.kind)

    def backward(self, grad_out: Matrix) -> Matrix:
        if self._input is None:
            raise StateError(f"backward called on {self.kind} activation without a forward pass")
        return grad_out * activation_grad(self._input, self.kind)
