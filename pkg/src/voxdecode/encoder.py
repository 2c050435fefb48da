"""Trainable voxel-to-embedding MLP with exact reverse-mode gradients.

Layers are fully connected with ReLU between them and no activation on the
output.  Weights are stored as (fan_out, fan_in) matrices.  Forward and
backward are pure functions of the parameters, so concurrent evaluation
against a frozen parameter snapshot is safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .errors import ConfigError, ShapeError


@dataclass
class EncoderParams:
    """Weights and biases of the voxel decoder MLP."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self):
        dims = self.layer_dims
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ConfigError(f"layer_dims must be >= 2 positive entries, got {dims}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError("need one weight matrix and bias per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (dims[l + 1], dims[l])
            if w.shape != expected:
                raise ShapeError(f"layer {l}: weight shape {w.shape}, expected {expected}")
            if b.shape != (dims[l + 1],):
                raise ShapeError(f"layer {l}: bias shape {b.shape}")
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation!r}")

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            activation=self.activation,
        )


def init_params(layer_dims: list[int], seed: int) -> EncoderParams:
    """He-initialized weights (std sqrt(2/fan_in)), zero biases."""
    if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
        raise ConfigError(f"layer_dims must be >= 2 positive entries, got {layer_dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(rng.standard_normal((fan_out, fan_in)) * std)
        biases.append(np.zeros(fan_out))
    return EncoderParams(layer_dims=list(layer_dims), weights=weights, biases=biases)


def _forward_trace(params: EncoderParams, x: np.ndarray) -> list[np.ndarray]:
    """Activations after each layer, starting with the input batch."""
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w.T + b
        if l < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return acts


def mlp_forward(params: EncoderParams, voxels: np.ndarray) -> np.ndarray:
    """Map a (batch, voxel_dim) array to (batch, embed_dim) embeddings."""
    x = np.asarray(voxels, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != params.input_dim:
        raise ShapeError(
            f"input width {x.shape[1]} does not match encoder input {params.input_dim}"
        )
    out = _forward_trace(params, x)[-1]
    return out[0] if squeeze else out


def mlp_backward(
    params: EncoderParams, voxels: np.ndarray, upstream_grad: np.ndarray
) -> tuple[tuple[list[np.ndarray], list[np.ndarray]], np.ndarray]:
    """Exact gradients of sum(forward(voxels) * upstream_grad).

    Returns ((weight_grads, bias_grads), input_grads).  The ReLU
    subgradient at 0 is taken as 0.
    """
    x = np.asarray(voxels, dtype=np.float64)
    g = np.asarray(upstream_grad, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if g.ndim == 1:
        g = g[None, :]
    if x.shape[1] != params.input_dim:
        raise ShapeError(f"input width {x.shape[1]} != {params.input_dim}")
    if g.shape != (x.shape[0], params.output_dim):
        raise ShapeError(
            f"upstream grad shape {g.shape} != ({x.shape[0]}, {params.output_dim})"
        )

    acts = _forward_trace(params, x)
    n_layers = len(params.weights)
    w_grads = [np.zeros_like(w) for w in params.weights]
    b_grads = [np.zeros_like(b) for b in params.biases]

    delta = g
    for l in range(n_layers - 1, -1, -1):
        w_grads[l] = delta.T @ acts[l]
        b_grads[l] = delta.sum(axis=0)
        delta = delta @ params.weights[l]
        if l > 0:
            delta = delta * (acts[l] > 0.0)
    return (w_grads, b_grads), delta


def save_checkpoint(path: str | Path, params: EncoderParams) -> None:
    formats.write_ndwt(path, params.weights, params.biases)


def load_checkpoint(path: str | Path) -> EncoderParams:
    weights, biases = formats.read_ndwt(path)
    if not weights:
        raise ShapeError(f"{path}: checkpoint has no layers")
    layer_dims = [weights[0].shape[1]] + [w.shape[0] for w in weights]
    return EncoderParams(layer_dims=layer_dims, weights=weights, biases=biases)
