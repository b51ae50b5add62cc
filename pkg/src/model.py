"""Multimodal classifier: per-modality encoders with Gaussian latents, unimodal
heads and a shared fusion head over the concatenated latents.

  x_m -> [Linear, act] x len(encoder_dims) -> (mu_m, logvar_m) -> z_m
  z_m -> unimodal head -> K logits
  concat(z_0..z_{M-1}) -> Linear -> act -> Linear -> K logits
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from diffcore import (
    Activation,
    GaussianPosterior,
    LinearLayer,
    Matrix,
    reparam_backward,
    reparam_sample,
)
from diffcore.matrix import DimensionError
from modulation import GradientBundle
from rng import RngState

logger = logging.getLogger(__name__)

# substream used for weight initialization
INIT_STREAM = 0x1417
# gain of the log-variance head; keeps the initial posterior close to unit variance
LOGVAR_GAIN = 0.01
# gain of the mean head; starts the posterior means near the unit prior scale
MU_GAIN = 0.1


class ModalityBranch:
    """Encoder, posterior heads and unimodal classifier of one modality."""

    def __init__(
        self,
        index: int,
        input_dim: int,
        encoder_dims: Sequence[int],
        latent_dim: int,
        num_classes: int,
        activation: str,
        rng: RngState,
    ) -> None:
        self.index = index
        self.encoder: List[LinearLayer] = []
        self.acts: List[Activation] = []
        width = input_dim
        for i, out in enumerate(encoder_dims):
            self.encoder.append(LinearLayer.initialized(width, out, rng, name=f"m{index}.enc{i}"))
            self.acts.append(Activation(activation))
            width = out
        self.mu = LinearLayer.initialized(width, latent_dim, rng, gain=MU_GAIN, name=f"m{index}.mu")
        self.logvar = LinearLayer.initialized(
            width, latent_dim, rng, gain=LOGVAR_GAIN, name=f"m{index}.logvar"
        )
        self.head = LinearLayer.initialized(latent_dim, num_classes, rng, gain=1.0, name=f"m{index}.head")

    def body_layers(self) -> List[LinearLayer]:
        return self.encoder + [self.mu, self.logvar]

    def layers(self) -> List[LinearLayer]:
        return self.body_layers() + [self.head]

    def encode(self, x: Matrix) -> GaussianPosterior:
        h = x
        for layer, act in zip(self.encoder, self.acts):
            h = act.forward(layer.forward(h))
        return GaussianPosterior(self.mu.forward(h), self.logvar.forward(h))

    def backward_encoder(self, grad_mu: Matrix, grad_logvar: Matrix) -> None:
        g = self.mu.backward(grad_mu) + self.logvar.backward(grad_logvar)
        for layer, act in zip(reversed(self.encoder), reversed(self.acts)):
            g = layer.backward(act.backward(g))


class FusionHead:
    """Shared classifier over the concatenated latents; exposes its hidden layer."""

    def __init__(self, hidden: LinearLayer, out: LinearLayer, activation: str) -> None:
        self.hidden = hidden
        self.out = out
        self.act = Activation(activation)

    @classmethod
    def initialized(
        cls, input_dim: int, hidden_dim: int, num_classes: int, activation: str, rng: RngState
    ) -> "FusionHead":
        hidden = LinearLayer.initialized(input_dim, hidden_dim, rng, name="fusion.hidden")
        out = LinearLayer.initialized(hidden_dim, num_classes, rng, gain=1.0, name="fusion.out")
        return cls(hidden, out, activation)

    def layers(self) -> List[LinearLayer]:
        return [self.hidden, self.out]

    def forward(self, z: Matrix) -> Tuple[Matrix, Matrix]:
        """Returns (hidden representation, logits)."""
        h = self.act.forward(self.hidden.forward(z))
        return h, self.out.forward(h)

    def backward(self, grad_logits: Matrix) -> Matrix:
        return self.hidden.backward(self.act.backward(self.out.backward(grad_logits)))

    def copy(self) -> "FusionHead":
        return FusionHead(self.hidden.copy(), self.out.copy(), self.act.kind)


@dataclass
class ForwardPass:
    posteriors: List[GaussianPosterior]
    # reparameterization noise per modality; None for deterministic passes
    noise: List[Optional[Matrix]]
    latents: List[Matrix]
    unimodal_logits: List[Matrix]
    fusion_hidden: Matrix
    fusion_logits: Matrix
    mask: Optional[int] = None

    @property
    def num_modalities(self) -> int:
        return len(self.latents)


@dataclass
class ModelSpec:
    input_dims: List[int]
    num_classes: int
    encoder_dims: List[int] = field(default_factory=lambda: [64, 32])
    latent_dim: int = 16
    fusion_hidden: int = 32
    activation: str = "relu"
    seed: int = 0

    @classmethod
    def from_config(cls, config, input_dims: Sequence[int], num_classes: int) -> "ModelSpec":
        return cls(
            input_dims=list(input_dims),
            num_classes=num_classes,
            encoder_dims=list(config.encoder_dims),
            latent_dim=config.latent_dim,
            fusion_hidden=config.fusion_hidden,
            activation=config.activation,
            seed=config.seed,
        )


class CALModel:
    """All trainable state of a run. Parameter count is fixed by the ModelSpec."""

    def __init__(self, spec: ModelSpec) -> None:
        if len(spec.input_dims) < 2:
            raise ValueError(f"need at least two modalities, got {len(spec.input_dims)}")
        self.spec = spec
        rng = RngState(spec.seed, stream=INIT_STREAM)
        self.branches = [
            ModalityBranch(
                m, d, spec.encoder_dims, spec.latent_dim, spec.num_classes, spec.activation, rng
            )
            for m, d in enumerate(spec.input_dims)
        ]
        self.fusion = FusionHead.initialized(
            spec.latent_dim * len(spec.input_dims),
            spec.fusion_hidden,
            spec.num_classes,
            spec.activation,
            rng,
        )

    @property
    def num_modalities(self) -> int:
        return len(self.branches)

    @property
    def num_classes(self) -> int:
        return self.spec.num_classes

    def layers(self) -> List[LinearLayer]:
        out: List[LinearLayer] = []
        for branch in self.branches:
            out.extend(branch.layers())
        return out + self.fusion.layers()

    def zero_grad(self) -> None:
        for layer in self.layers():
            layer.zero_grad()

    def concat_latents(self, latents: Sequence[Matrix], mask: Optional[int] = None) -> Matrix:
        blocks = [np.zeros_like(z) if m == mask else z for m, z in enumerate(latents)]
        return np.concatenate(blocks, axis=1)

    def forward(
        self, xs: Sequence[Matrix], rng: Optional[RngState] = None, mask: Optional[int] = None
    ) -> ForwardPass:
        """Full forward pass.

        With rng the latents are reparameterized samples; without it they are
        the posterior means. mask zeroes that modality's latent at the fusion
        input only; unimodal heads always see their own latent.
        """
        if len(xs) != self.num_modalities:
            raise DimensionError(f"got {len(xs)} feature blocks for {self.num_modalities} modalities")
        if mask is not None and not 0 <= mask < self.num_modalities:
            raise ValueError(f"mask {mask} is not a modality index")
        posteriors, noise, latents, uni = [], [], [], []
        for branch, x in zip(self.branches, xs):
            post = branch.encode(x)
            if rng is None:
                z, eps = post.mu, None
            else:
                z, eps = reparam_sample(post, rng, return_noise=True)
            posteriors.append(post)
            noise.append(eps)
            latents.append(z)
            uni.append(branch.head.forward(z))
        hidden, logits = self.fusion.forward(self.concat_latents(latents, mask))
        return ForwardPass(posteriors, noise, latents, uni, hidden, logits, mask)

    def backward(
        self,
        fp: ForwardPass,
        grad_fusion_logits: Matrix,
        grad_unimodal_logits: Sequence[Matrix],
        grad_mu: Optional[Sequence[Matrix]] = None,
        grad_logvar: Optional[Sequence[Matrix]] = None,
    ) -> None:
        """Accumulate parameter gradients for one forward pass.

        grad_mu/grad_logvar are direct loss gradients on the posterior
        parameters (the compression term), added to what flows back through z.
        """
        g_concat = self.fusion.backward(grad_fusion_logits)
        width = self.spec.latent_dim
        for m, branch in enumerate(self.branches):
            g_z = branch.head.backward(grad_unimodal_logits[m])
            if m != fp.mask:
                g_z = g_z + g_concat[:, m * width:(m + 1) * width]
            post = fp.posteriors[m]
            if fp.noise[m] is None:
                g_mu, g_lv = g_z, np.zeros_like(g_z)
            else:
                g_mu, g_lv = reparam_backward(g_z, post, fp.noise[m])
            if grad_mu is not None:
                g_mu = g_mu + grad_mu[m]
            if grad_logvar is not None:
                g_lv = g_lv + grad_logvar[m]
            branch.backward_encoder(g_mu, g_lv)

    def collect_gradients(self, include_heads: bool = True) -> GradientBundle:
        """Group gradients into per-modality blocks and the shared fusion block.

        include_heads places each unimodal head in its modality's block; otherwise
        the heads are treated as shared and left unmodulated.
        """
        bundle = GradientBundle(modality=[{} for _ in self.branches], shared={})
        for m, branch in enumerate(self.branches):
            for layer in branch.body_layers():
                _put(bundle.modality[m], layer)
            _put(bundle.modality[m] if include_heads else bundle.shared, branch.head)
        for layer in self.fusion.layers():
            _put(bundle.shared, layer)
        return bundle

    def assign_gradients(self, bundle: GradientBundle) -> None:
        grads: Dict[str, np.ndarray] = dict(bundle.shared)
        for block in bundle.modality:
            grads.update(block)
        for layer in self.layers():
            layer.grad_weight[...] = grads[f"{layer.name}.weight"]
            layer.grad_bias[...] = grads[f"{layer.name}.bias"]

    def parameter_checksum(self) -> str:
        digest = hashlib.sha256()
        for layer in self.layers():
            digest.update(layer.name.encode("utf-8"))
            digest.update(np.ascontiguousarray(layer.weight).tobytes())
            digest.update(np.ascontiguousarray(layer.bias).tobytes())
        return digest.hexdigest()

    def parameter_count(self) -> int:
        return sum(layer.weight.size + layer.bias.size for layer in self.layers())

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {"spec": np.array(json.dumps(self.spec.__dict__, sort_keys=True))}
        for layer in self.layers():
            arrays[f"{layer.name}.weight"] = layer.weight
            arrays[f"{layer.name}.bias"] = layer.bias
        with open(path, "wb") as handle:
            np.savez(handle, **arrays)
        logger.info(f"Saved model ({self.parameter_count()} parameters) to {path}")
        return path


def _put(block: Dict[str, np.ndarray], layer: LinearLayer) -> None:
    block[f"{layer.name}.weight"] = layer.grad_weight.copy()
    block[f"{layer.name}.bias"] = layer.grad_bias.copy()


def load_model(path) -> CALModel:
    with np.load(path, allow_pickle=False) as data:
        spec = ModelSpec(**json.loads(str(data["spec"])))
        model = CALModel(spec)
        for layer in model.layers():
            layer.weight[...] = data[f"{layer.name}.weight"]
            layer.bias[...] = data[f"{layer.name}.bias"]
    logger.info(f"Loaded model from {path}")
    return model
