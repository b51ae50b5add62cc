"""Synthetic multimodal datasets with controllable imbalance and noise attacks.

Each modality m has its own class means drawn once from N(0, s_m^2 I); a
sample of class c draws x^(m) ~ N(mean_m[c], within_std^2 I). Signal strength
s_m = 0 makes the modality pure noise.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from diffcore.matrix import Matrix
from rng import RngState

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
NOISE_SCOPE_SPLITS = {
    "test_only": ("test",),
    # val is carved from the training pool, so it shares the training corruption
    "train_and_test": ("train", "val", "test"),
}


@dataclass(frozen=True)
class DatasetSpec:
    classes: int = 4
    dims: Sequence[int] = (8, 8)
    strengths: Sequence[float] = (2.0, 0.5)
    within_std: float = 3.0
    n_train: int = 2000
    n_val: int = 500
    n_test: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "strengths", tuple(float(s) for s in self.strengths))
        errors = []
        if self.classes < 2:
            errors.append("classes must be at least 2")
        if len(self.dims) < 2:
            errors.append("at least two modalities are required")
        if len(self.strengths) != len(self.dims):
            errors.append(f"{len(self.strengths)} strengths for {len(self.dims)} modalities")
        if any(d <= 0 for d in self.dims):
            errors.append("modality dimensions must be positive")
        if any(s < 0.0 for s in self.strengths):
            errors.append("signal strengths must be non-negative")
        if not self.within_std > 0.0:
            errors.append("within_std must be positive")
        if min(self.n_train, self.n_val, self.n_test) <= 0:
            errors.append("every split needs at least one sample")
        if errors:
            raise ValueError("invalid dataset spec: " + "; ".join(errors))

    @property
    def num_modalities(self) -> int:
        return len(self.dims)

    def split_size(self, name: str) -> int:
        return {"train": self.n_train, "val": self.n_val, "test": self.n_test}[name]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["strengths"] = list(self.strengths)
        return d


@dataclass(frozen=True)
class NoiseSpec:
    kind: str
    epsilon: float
    scope: str = "test_only"
    modalities: Sequence[int] = ()
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "modalities", tuple(int(m) for m in self.modalities))
        if self.kind not in ("gaussian", "salt_pepper"):
            raise ValueError(f"unknown noise kind '{self.kind}'")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.scope not in NOISE_SCOPE_SPLITS:
            raise ValueError(
                f"unknown noise scope '{self.scope}', expected one of {sorted(NOISE_SCOPE_SPLITS)}"
            )

    def targets(self, num_modalities: int) -> List[int]:
        return list(self.modalities) if self.modalities else list(range(num_modalities))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["modalities"] = list(self.modalities)
        return d


@dataclass
class Split:
    """One split: a feature block per modality plus labels, in shared row order."""

    features: List[Matrix]
    labels: np.ndarray

    def __post_init__(self) -> None:
        n = self.labels.shape[0]
        for m, block in enumerate(self.features):
            if block.shape[0] != n:
                raise ValueError(f"modality {m} has {block.shape[0]} rows for {n} labels")

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, idx: np.ndarray) -> "Split":
        return Split([block[idx] for block in self.features], self.labels[idx])

    def with_block(self, modality: int, block: Matrix) -> "Split":
        features = list(self.features)
        features[modality] = block
        return Split(features, self.labels)


@dataclass
class MultimodalDataset:
    spec: DatasetSpec
    splits: Dict[str, Split]
    noise: List[NoiseSpec] = field(default_factory=list)

    def __getitem__(self, name: str) -> Split:
        return self.splits[name]

    @property
    def num_modalities(self) -> int:
        return self.spec.num_modalities

    @property
    def num_classes(self) -> int:
        return self.spec.classes

    def provenance(self) -> dict:
        """Everything needed to regenerate this dataset byte for byte."""
        return {"spec": self.spec.to_dict(), "noise": [n.to_dict() for n in self.noise]}


def generate_dataset(spec: DatasetSpec) -> MultimodalDataset:
    rng = RngState(spec.seed)
    means = [
        rng.standard_normal((spec.classes, d)) * s
        for d, s in zip(spec.dims, spec.strengths)
    ]
    splits = {}
    for name in SPLITS:
        n = spec.split_size(name)
        labels = rng.integers(spec.classes, n)
        features = [
            means[m][labels] + spec.within_std * rng.standard_normal((n, d))
            for m, d in enumerate(spec.dims)
        ]
        splits[name] = Split(features, labels)
    logger.info(
        f"Generated dataset K={spec.classes} dims={list(spec.dims)} "
        f"strengths={list(spec.strengths)} seed={spec.seed}"
    )
    return MultimodalDataset(spec, splits)


def inject_gaussian_noise(
    X: Matrix, epsilon: float, rng: RngState, reference: Optional[Matrix] = None
) -> Matrix:
    """X + (epsilon/10) * sigma_col * N(0, 1); sigma_col from the reference (train) block."""
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    if epsilon == 0.0:
        return X.copy()
    ref = X if reference is None else reference
    sigma = ref.std(axis=0)
    return X + (epsilon / 10.0) * sigma * rng.standard_normal(X.shape)


def inject_salt_pepper(
    X: Matrix, epsilon: float, rng: RngState, reference: Optional[Matrix] = None
) -> Matrix:
    """Replace entries with the column min (pepper) or max (salt), each w.p. epsilon/200."""
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    if epsilon == 0.0:
        return X.copy()
    ref = X if reference is None else reference
    p = epsilon / 100.0
    u = rng.uniform(X.shape)
    low = np.broadcast_to(ref.min(axis=0), X.shape)
    high = np.broadcast_to(ref.max(axis=0), X.shape)
    out = X.copy()
    pepper = u < p / 2.0
    salt = (u >= p / 2.0) & (u < p)
    out[pepper] = low[pepper]
    out[salt] = high[salt]
    return out


def apply_noise(dataset: MultimodalDataset, noise: NoiseSpec) -> MultimodalDataset:
    """Corrupt the splits and modalities named by the noise spec.

    Column statistics come from the clean training block; untouched blocks are
    shared with the input dataset.
    """
    inject = inject_gaussian_noise if noise.kind == "gaussian" else inject_salt_pepper
    targets = noise.targets(dataset.num_modalities)
    for m in targets:
        if not 0 <= m < dataset.num_modalities:
            raise ValueError(f"noise targets modality {m}, dataset has {dataset.num_modalities}")
    splits = dict(dataset.splits)
    for split_idx, name in enumerate(SPLITS):
        if name not in NOISE_SCOPE_SPLITS[noise.scope]:
            continue
        split = splits[name]
        for m in targets:
            rng = RngState(noise.seed, stream=1 + 1000 * split_idx + m)
            block = inject(split.features[m], noise.epsilon, rng, reference=dataset["train"].features[m])
            split = split.with_block(m, block)
        splits[name] = split
    logger.info(
        f"Applied {noise.kind} noise eps={noise.epsilon} scope={noise.scope} modalities={targets}"
    )
    return replace(dataset, splits=splits, noise=list(dataset.noise) + [noise])


def spec_from_config(config) -> DatasetSpec:
    return DatasetSpec(
        classes=config.classes,
        dims=config.dims,
        strengths=config.strengths,
        within_std=config.within_std,
        n_train=config.n_train,
        n_val=config.n_val,
        n_test=config.n_test,
        seed=config.data_seed,
    )


def noise_from_config(config) -> Optional[NoiseSpec]:
    if config.noise == "none":
        return None
    scope = "test_only" if config.noise_scope == "test" else "train_and_test"
    return NoiseSpec(
        kind=config.noise,
        epsilon=config.epsilon,
        scope=scope,
        modalities=config.noise_modalities,
        seed=config.noise_seed,
    )
