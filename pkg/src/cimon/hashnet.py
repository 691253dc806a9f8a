"""Trainable hashing head: a small fully-connected network with ReLU hidden
layers and an identity output, tanh-relaxed during training and sign-binarized
for inference. Gradients are exact (hand-derived backprop), parameters live in
float64, and updates use SGD with momentum.

Checkpoint format (little-endian): magic ``CIMM`` | u32 number of layer dims |
that many u64 dims | per layer, weight matrix row-major float64 then bias
float64. Round-trips bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CacheMismatch, MalformedHeader, NonFiniteActivation, ShapeMismatch

MODEL_MAGIC = b"CIMM"


@dataclass
class HashModel:
    layer_dims: list
    weights: list   # per layer, (fan_in, fan_out) float64
    biases: list    # per layer, (fan_out,) float64

    @property
    def code_length(self) -> int:
        return self.layer_dims[-1]

    @property
    def feature_dim(self) -> int:
        return self.layer_dims[0]


@dataclass
class ForwardCache:
    inputs: list     # activations entering each layer (inputs[0] is X)
    preacts: list    # pre-activations per layer
    relaxed: np.ndarray


@dataclass
class OptimState:
    velocity_w: list
    velocity_b: list
    learning_rate: float
    momentum: float


def init_model(d: int, hidden, code_length: int, seed=0) -> HashModel:
    """Glorot-uniform weights, zero biases, deterministic given seed."""
    if d < 1:
        raise ValueError("feature dim must be >= 1")
    if code_length < 1:
        raise ValueError("code length must be >= 1")
    dims = [int(d), *[int(h) for h in hidden], int(code_length)]
    if any(h < 1 for h in dims):
        raise ValueError("all layer dims must be >= 1")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return HashModel(dims, weights, biases)


def _forward(model: HashModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.feature_dim:
        raise ShapeMismatch(
            f"input has shape {X.shape}, model expects (*, {model.feature_dim})"
        )
    inputs = [X]
    preacts = []
    a = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W + b
        preacts.append(z)
        if not np.isfinite(z).all():
            raise NonFiniteActivation(f"layer {i} produced non-finite values")
        a = np.maximum(z, 0.0) if i < last else z
        if i < last:
            inputs.append(a)
    return inputs, preacts


def forward_relaxed(model: HashModel, X):
    """tanh-relaxed codes in (-1, 1) plus a cache for the backward pass."""
    inputs, preacts = _forward(model, X)
    V = np.tanh(preacts[-1])
    return V, ForwardCache(inputs, preacts, V)


def backward(model: HashModel, cache: ForwardCache, dloss_dv):
    """Exact parameter gradients for a scalar loss with dLoss/dV = ``dloss_dv``.

    Includes the tanh Jacobian (1 - v^2); returns (weight grads, bias grads)
    aligned with the model's layers.
    """
    dloss_dv = np.asarray(dloss_dv, dtype=np.float64)
    if len(cache.inputs) != len(model.weights) or dloss_dv.shape != cache.relaxed.shape:
        raise CacheMismatch("cache does not match model/gradient shapes")
    for a, W in zip(cache.inputs, model.weights):
        if a.shape[1] != W.shape[0]:
            raise CacheMismatch("cache activations do not match model layers")
    d_w = [None] * len(model.weights)
    d_b = [None] * len(model.weights)
    delta = dloss_dv * (1.0 - cache.relaxed**2)
    for i in range(len(model.weights) - 1, -1, -1):
        d_w[i] = cache.inputs[i].T @ delta
        d_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (cache.preacts[i - 1] > 0)
    return d_w, d_b


def encode(model: HashModel, X) -> np.ndarray:
    """Binary codes sign(G(X)) in {-1, +1} as int8; sign(0) = +1."""
    _, preacts = _forward(model, X)
    return np.where(preacts[-1] >= 0.0, 1, -1).astype(np.int8)


def init_optim(model: HashModel, learning_rate: float, momentum: float) -> OptimState:
    if learning_rate <= 0:
        raise ValueError("learning_rate must be > 0")
    if not 0 <= momentum < 1:
        raise ValueError("momentum must be in [0, 1)")
    return OptimState(
        [np.zeros_like(w) for w in model.weights],
        [np.zeros_like(b) for b in model.biases],
        learning_rate,
        momentum,
    )


def sgd_momentum_step(model: HashModel, state: OptimState, grads):
    """v <- momentum*v + g; p <- p - lr*v (in place). Returns (model, state)."""
    d_w, d_b = grads
    if len(d_w) != len(model.weights) or len(d_b) != len(model.biases):
        raise ShapeMismatch("gradient count does not match model layers")
    for i, (gw, gb) in enumerate(zip(d_w, d_b)):
        if gw.shape != model.weights[i].shape or gb.shape != model.biases[i].shape:
            raise ShapeMismatch(f"gradient shape mismatch at layer {i}")
        state.velocity_w[i] = state.momentum * state.velocity_w[i] + gw
        state.velocity_b[i] = state.momentum * state.velocity_b[i] + gb
        model.weights[i] -= state.learning_rate * state.velocity_w[i]
        model.biases[i] -= state.learning_rate * state.velocity_b[i]
    return model, state


def save_checkpoint(path, model: HashModel):
    chunks = [MODEL_MAGIC, struct.pack("<I", len(model.layer_dims))]
    chunks.append(struct.pack(f"<{len(model.layer_dims)}Q", *model.layer_dims))
    for W, b in zip(model.weights, model.biases):
        chunks.append(np.ascontiguousarray(W, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> HashModel:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != MODEL_MAGIC:
        raise MalformedHeader("not a model checkpoint")
    (n_dims,) = struct.unpack_from("<I", data, 4)
    if n_dims < 2:
        raise MalformedHeader(f"need at least 2 layer dims, got {n_dims}")
    offset = 8
    if len(data) < offset + 8 * n_dims:
        raise ShapeMismatch("checkpoint truncated in dims block")
    dims = list(struct.unpack_from(f"<{n_dims}Q", data, offset))
    offset += 8 * n_dims
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        need = 8 * (fan_in * fan_out + fan_out)
        if len(data) < offset + need:
            raise ShapeMismatch("checkpoint truncated in parameter block")
        W = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(W.reshape(fan_in, fan_out).copy())
        biases.append(b.copy())
    if len(data) != offset:
        raise ShapeMismatch(f"{len(data) - offset} trailing bytes after payload")
    return HashModel(dims, weights, biases)
