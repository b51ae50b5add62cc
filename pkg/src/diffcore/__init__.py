"""Minimal deterministic differentiable core."""

from diffcore.matrix import (
    DimensionError,
    Matrix,
    NonFiniteError,
    StateError,
    as_matrix,
)
from diffcore.layers import (
    ACTIVATIONS,
    Activation,
    LinearLayer,
    activation,
    activation_grad,
    linear_backward,
    linear_forward,
)
from diffcore.losses import (
    CrossEntropy,
    label_entropy,
    log_softmax,
    softmax,
    softmax_cross_entropy,
    symmetric_kl,
    true_label_log_probs,
)
from diffcore.gaussian import (
    GaussianPosterior,
    kl_std_normal,
    kl_std_normal_backward,
    reparam_backward,
    reparam_sample,
)
from diffcore.optim import Adam, Optimizer, SGDMomentum, build_optimizer, sgd_momentum_step
from diffcore.gradcheck import grad_check, relative_error

__all__ = [
    "ACTIVATIONS",
    "Activation",
    "Adam",
    "CrossEntropy",
    "DimensionError",
    "GaussianPosterior",
    "LinearLayer",
    "Matrix",
    "NonFiniteError",
    "Optimizer",
    "SGDMomentum",
    "StateError",
    "activation",
    "activation_grad",
    "as_matrix",
    "build_optimizer",
    "grad_check",
    "kl_std_normal",
    "kl_std_normal_backward",
    "label_entropy",
    "linear_backward",
    "linear_forward",
    "log_softmax",
    "relative_error",
    "reparam_backward",
    "reparam_sample",
    "sgd_momentum_step",
    "softmax",
    "softmax_cross_entropy",
    "symmetric_kl",
    "true_label_log_probs",
]
