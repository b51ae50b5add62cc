"""Optimizers updating LinearLayer parameters from their accumulated gradients."""

from abc import ABC, abstractmethod
from typing import Dict, Iterable, Tuple

import numpy as np

from diffcore.layers import LinearLayer


def sgd_momentum_step(
    layer: LinearLayer, lr: float, momentum: float, weight_decay: float = 0.0
) -> None:
    """v <- momentum*v + g; theta <- theta - lr*v; accumulators zeroed.

    Weight decay is coupled: g includes weight_decay*theta for the weights (not bias).
    """
    grad_w = layer.grad_weight
    if weight_decay:
        grad_w = grad_w + weight_decay * layer.weight
    layer.velocity_weight *= momentum
    layer.velocity_weight += grad_w
    layer.velocity_bias *= momentum
    layer.velocity_bias += layer.grad_bias
    layer.weight -= lr * layer.velocity_weight
    layer.bias -= lr * layer.velocity_bias
    layer.zero_grad()


class Optimizer(ABC):
    """Abstract optimizer over a fixed list of layers."""

    def __init__(self, layers: Iterable[LinearLayer], lr: float, weight_decay: float = 0.0):
        self.layers = list(layers)
        self.lr = lr
        self.weight_decay = weight_decay

    @abstractmethod
    def step(self) -> None:
        """Apply one update to every registered layer and zero its gradients."""
        pass

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()


class SGDMomentum(Optimizer):
    def __init__(
        self,
        layers: Iterable[LinearLayer],
        lr: float,
        momentum: float = 0.9,
        weight_decay: float = 0.0,
    ):
        super().__init__(layers, lr, weight_decay)
        self.momentum = momentum

    def step(self) -> None:
        for layer in self.layers:
            sgd_momentum_step(layer, self.lr, self.momentum, self.weight_decay)


class Adam(Optimizer):
    """Adam with coupled L2 weight decay; moments keyed by layer position."""

    def __init__(
        self,
        layers: Iterable[LinearLayer],
        lr: float,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.0,
    ):
        super().__init__(layers, lr, weight_decay)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self._moments: Dict[int, Dict[str, np.ndarray]] = {}

    def _state(self, idx: int, layer: LinearLayer) -> Dict[str, np.ndarray]:
        if idx not in self._moments:
            self._moments[idx] = {
                "m_w": np.zeros_like(layer.weight),
                "v_w": np.zeros_like(layer.weight),
                "m_b": np.zeros_like(layer.bias),
                "v_b": np.zeros_like(layer.bias),
            }
        return self._moments[idx]

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for idx, layer in enumerate(self.layers):
            state = self._state(idx, layer)
            grad_w = layer.grad_weight
            if self.weight_decay:
                grad_w = grad_w + self.weight_decay * layer.weight
            for key, param, grad in (("w", layer.weight, grad_w), ("b", layer.bias, layer.grad_bias)):
                m = state[f"m_{key}"]
                v = state[f"v_{key}"]
                m *= self.beta1
                m += (1.0 - self.beta1) * grad
                v *= self.beta2
                v += (1.0 - self.beta2) * grad ** 2
                param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            layer.zero_grad()


def build_optimizer(
    name: str,
    layers: Iterable[LinearLayer],
    lr: float,
    momentum: float,
    weight_decay: float,
) -> Optimizer:
    if name == "sgd":
        return SGDMomentum(layers, lr, momentum=momentum, weight_decay=weight_decay)
    if name == "adam":
        return Adam(layers, lr, weight_decay=weight_decay)
    raise ValueError(f"unknown optimizer '{name}', expected 'sgd' or 'adam'")
