"""Shared feature extractor, fault classifier and domain discriminator.

The three networks are plain affine stacks built on linalg primitives. Forward
helpers come in two flavors: the public ones return only outputs, while the
``*_forward`` / ``*_backward`` pairs carry explicit caches so a training step
can push gradients through any composition of the three networks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .linalg import (
    ShapeError,
    activation,
    activation_backward,
    affine_backward,
    affine_forward,
    softmax_rows,
)

_ACTIVATIONS = ("relu", "sigmoid", "linear")


@dataclass(frozen=True)
class ArchSpec:
    """Network shape shared by extractor, classifier and discriminator.

    The extractor maps ``input_dim`` through ``extractor_hidden`` widths to
    ``feature_dim``, applying ``extractor_activation`` after every layer. The
    classifier is a single affine map ``feature_dim -> num_classes`` followed
    by a row softmax. The discriminator maps ``feature_dim`` through
    ``discriminator_hidden`` to one sigmoid unit that scores P(source).
    """

    input_dim: int
    num_classes: int
    extractor_hidden: tuple[int, ...] = (64,)
    feature_dim: int = 32
    discriminator_hidden: tuple[int, ...] = (16,)
    extractor_activation: str = "relu"
    discriminator_activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "extractor_hidden", tuple(int(w) for w in self.extractor_hidden))
        object.__setattr__(
            self, "discriminator_hidden", tuple(int(w) for w in self.discriminator_hidden)
        )
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.feature_dim < 1:
            raise ValueError(f"feature_dim must be >= 1, got {self.feature_dim}")
        if any(w < 1 for w in self.extractor_hidden + self.discriminator_hidden):
            raise ValueError("hidden widths must all be >= 1")
        for kind in (self.extractor_activation, self.discriminator_activation):
            if kind not in _ACTIVATIONS:
                raise ValueError(f"unknown activation kind: {kind!r}")


@dataclass(frozen=True)
class ModelParams:
    """Weights of the three networks as tuples of (w, b) pairs.

    Treated as an immutable value: optimizer steps build a new instance
    rather than updating arrays in place.
    """

    extractor: tuple[tuple[np.ndarray, np.ndarray], ...]
    classifier: tuple[tuple[np.ndarray, np.ndarray], ...]
    discriminator: tuple[tuple[np.ndarray, np.ndarray], ...]

    def arrays(self) -> Iterator[np.ndarray]:
        """Yield every weight and bias array in a fixed traversal order."""
        for group in (self.extractor, self.classifier, self.discriminator):
            for w, b in group:
                yield w
                yield b


def _glorot_layer(rng: np.random.Generator, fan_in: int, fan_out: int):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
    b = np.zeros(fan_out)
    return w, b


def _layer_dims(arch: ArchSpec):
    extractor = list(
        zip(
            (arch.input_dim,) + arch.extractor_hidden,
            arch.extractor_hidden + (arch.feature_dim,),
        )
    )
    classifier = [(arch.feature_dim, arch.num_classes)]
    discriminator = list(
        zip(
            (arch.feature_dim,) + arch.discriminator_hidden,
            arch.discriminator_hidden + (1,),
        )
    )
    return extractor, classifier, discriminator


def init_params(arch: ArchSpec, seed: int) -> ModelParams:
    """Glorot-uniform weights and zero biases, fully determined by the seed."""
    rng = np.random.default_rng(seed)
    ext_dims, cls_dims, dis_dims = _layer_dims(arch)
    extractor = tuple(_glorot_layer(rng, fi, fo) for fi, fo in ext_dims)
    classifier = tuple(_glorot_layer(rng, fi, fo) for fi, fo in cls_dims)
    discriminator = tuple(_glorot_layer(rng, fi, fo) for fi, fo in dis_dims)
    return ModelParams(extractor, classifier, discriminator)


def glorot_limit(fan_in: int, fan_out: int) -> float:
    """Bound of the uniform initialization for one layer."""
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def _extractor_kinds(arch: ArchSpec):
    return (arch.extractor_activation,) * (len(arch.extractor_hidden) + 1)


def _discriminator_kinds(arch: ArchSpec):
    return (arch.discriminator_activation,) * len(arch.discriminator_hidden) + ("sigmoid",)


def _stack_forward(x, layers, kinds):
    caches = []
    h = x
    for (w, b), kind in zip(layers, kinds):
        z = affine_forward(h, w, b)
        caches.append((h, z))
        h = activation(kind, z)
    return h, caches


def _stack_backward(upstream, layers, kinds, caches):
    grads = [None] * len(layers)
    g = upstream
    for i in reversed(range(len(layers))):
        w, _ = layers[i]
        h, z = caches[i]
        gz = activation_backward(kinds[i], g, z)
        g, dw, db = affine_backward(gz, h, w)
        grads[i] = (dw, db)
    return g, tuple(grads)


def extractor_forward(x: np.ndarray, arch: ArchSpec, params: ModelParams):
    """Features plus the cache needed by extractor_backward."""
    if x.shape[1] != arch.input_dim:
        raise ShapeError(f"input has {x.shape[1]} columns, extractor expects {arch.input_dim}")
    return _stack_forward(x, params.extractor, _extractor_kinds(arch))


def extractor_backward(upstream, arch: ArchSpec, params: ModelParams, cache):
    """Gradients w.r.t. extractor input and parameters."""
    return _stack_backward(upstream, params.extractor, _extractor_kinds(arch), cache)


def classifier_forward(features: np.ndarray, arch: ArchSpec, params: ModelParams):
    """Class probabilities plus the feature cache for the backward pass."""
    (w, b) = params.classifier[0]
    logits = affine_forward(features, w, b)
    return softmax_rows(logits), features


def classifier_backward(grad_logits, params: ModelParams, cache):
    """Gradients given dL/dlogits (the combined softmax cross-entropy form)."""
    (w, _) = params.classifier[0]
    dfeatures, dw, db = affine_backward(grad_logits, cache, w)
    return dfeatures, ((dw, db),)


def discriminator_forward(features: np.ndarray, arch: ArchSpec, params: ModelParams):
    """Per-sample probability of source-domain membership plus cache."""
    out, caches = _stack_forward(features, params.discriminator, _discriminator_kinds(arch))
    return out[:, 0], caches


def discriminator_backward(grad_probs, arch: ArchSpec, params: ModelParams, cache):
    """Gradients given dL/dprob for the sigmoid output column."""
    upstream = np.asarray(grad_probs, dtype=np.float64).reshape(-1, 1)
    return _stack_backward(upstream, params.discriminator, _discriminator_kinds(arch), cache)


def extract_features(x: np.ndarray, arch: ArchSpec, params: ModelParams) -> np.ndarray:
    """Forward-only feature extraction."""
    return extractor_forward(x, arch, params)[0]


def classify(features: np.ndarray, arch: ArchSpec, params: ModelParams) -> np.ndarray:
    """Forward-only class probabilities, rows summing to one."""
    return classifier_forward(features, arch, params)[0]


def discriminate(features: np.ndarray, arch: ArchSpec, params: ModelParams) -> np.ndarray:
    """Forward-only domain probabilities; the sigmoid clamp keeps them off 0 and 1."""
    return discriminator_forward(features, arch, params)[0]


def predict(x: np.ndarray, arch: ArchSpec, params: ModelParams):
    """Predicted class and confidence per row; argmax ties go to the lowest index."""
    probs = classify(extract_features(x, arch, params), arch, params)
    labels = probs.argmax(axis=1)
    return labels, probs[np.arange(len(probs)), labels]


def map_params(fn, *trees: ModelParams) -> ModelParams:
    """Apply fn across corresponding arrays of one or more ModelParams trees."""

    def _zip_group(groups):
        return tuple(
            (fn(*(layer[0] for layer in layers)), fn(*(layer[1] for layer in layers)))
            for layers in zip(*groups)
        )

    return ModelParams(
        _zip_group([t.extractor for t in trees]),
        _zip_group([t.classifier for t in trees]),
        _zip_group([t.discriminator for t in trees]),
    )


def zeros_like_params(params: ModelParams) -> ModelParams:
    """A ModelParams tree of zero arrays matching params."""
    return map_params(np.zeros_like, params)


def params_equal(a: ModelParams, b: ModelParams) -> bool:
    """Exact elementwise equality of two parameter trees."""
    return all(np.array_equal(x, y) for x, y in zip(a.arrays(), b.arrays()))
