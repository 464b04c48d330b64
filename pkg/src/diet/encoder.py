"""Multilayer-perceptron encoder with hand-derived backpropagation.

Hidden layers use ReLU, the output layer is linear, and gradients are exact
reverse-mode derivatives of the forward pass.  The 1/batch factor of the
training loss lives in the loss gradient, so ``backward`` is the plain chain
rule applied to whatever upstream gradient it receives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SpecError
from .numeric import Matrix, as_matrix, matmul, relu_backward, relu_forward
from .rng import stream


@dataclass
class MlpEncoder:
    """Weights are (out, in) matrices; biases are (out,) vectors."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def feature_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list, alternating weight/bias per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


@dataclass
class ForwardCache:
    """Per-layer inputs, pre-activations, and ReLU masks from one forward pass."""

    layer_inputs: list[np.ndarray]  # h_0 = x_batch, h_1, ..., h_{L-1}
    pre_activations: list[np.ndarray]  # one per hidden layer
    masks: list[np.ndarray]  # one 0/1 mask per hidden layer
    batch_size: int


@dataclass
class EncoderGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def init_encoder(layer_dims, seed: int) -> MlpEncoder:
    """He-style init: weights ~ N(0, 2/fan_in), biases zero; deterministic in seed."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise SpecError(f"need at least [input, output] dims, got {dims}")
    if any(d < 1 for d in dims):
        raise SpecError(f"all layer dims must be >= 1, got {dims}")
    weights, biases = [], []
    for layer, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        gen = stream(seed, "enc_init", layer)
        weights.append(gen.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpEncoder(dims, weights, biases)


def forward(enc: MlpEncoder, x_batch: Matrix) -> tuple[Matrix, ForwardCache]:
    """Map a (B, D) batch to (B, K) features, recording the backward cache."""
    x_batch = as_matrix(x_batch, "x_batch")
    if x_batch.shape[1] != enc.input_dim:
        raise DimensionError(
            f"input dim {x_batch.shape[1]} != encoder input {enc.input_dim}"
        )
    layer_inputs = [x_batch]
    pre_activations = []
    masks = []
    h = x_batch
    for layer in range(enc.n_layers):
        z = matmul(h, enc.weights[layer].T) + enc.biases[layer]
        if layer < enc.n_layers - 1:
            pre_activations.append(z)
            h, mask = relu_forward(z)
            masks.append(mask)
            layer_inputs.append(h)
        else:
            h = z
    return h, ForwardCache(layer_inputs, pre_activations, masks, x_batch.shape[0])


def backward(
    enc: MlpEncoder, cache: ForwardCache, grad_features: Matrix
) -> tuple[EncoderGrads, Matrix]:
    """Exact reverse-mode gradients; returns (parameter grads, grad wrt input)."""
    if grad_features.shape != (cache.batch_size, enc.feature_dim):
        raise DimensionError(
            f"grad_features shape {grad_features.shape} != "
            f"({cache.batch_size}, {enc.feature_dim})"
        )
    grad_w = [None] * enc.n_layers
    grad_b = [None] * enc.n_layers
    g = grad_features
    for layer in range(enc.n_layers - 1, -1, -1):
        grad_w[layer] = matmul(g.T, cache.layer_inputs[layer])
        grad_b[layer] = g.sum(axis=0)
        g = matmul(g, enc.weights[layer])
        if layer > 0:
            g = relu_backward(g, cache.masks[layer - 1])
    return EncoderGrads(grad_w, grad_b), g
