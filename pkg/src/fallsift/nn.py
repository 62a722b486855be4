"""Minimal dense-network engine: forward pass, analytic backprop, Adam.

Shared by the contrastive embedder and the fall detector. Hidden layers use
ReLU; the final layer is linear (callers apply sigmoid or distance math on
top). The ReLU derivative at exactly 0 is taken as 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError


@dataclass
class MlpParams:
    """Weights (out, in) and biases (out,) for a stack of dense layers."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ShapeError("weights/biases layer count mismatch")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"inconsistent layer shapes {w.shape} / {b.shape}")

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim,) + tuple(w.shape[0] for w in self.weights)

    def copy(self) -> "MlpParams":
        return MlpParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )

    def allclose(self, other: "MlpParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights)) and all(
            np.array_equal(a, b) for a, b in zip(self.biases, other.biases)
        )


def init_mlp(layer_sizes: tuple[int, ...], rng: np.random.Generator) -> MlpParams:
    """Scaled uniform fan-in init: W ~ U(+-sqrt(3/fan_in)), zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        bound = np.sqrt(3.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpParams(weights=weights, biases=biases)


def forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Batched forward pass (ReLU hiddens, linear output).

    Returns the (batch, out) output and the activation cache for backward.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != params.input_dim:
        raise ShapeError(f"input dim {x.shape[1]} != network input dim {params.input_dim}")
    cache = [x]
    a = x
    last = params.n_layers - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        cache.append(z)
        a = z if k == last else np.maximum(z, 0.0)
    out = a[0] if squeeze else a
    return out, cache


def backward(params: MlpParams, cache: list, delta_out: np.ndarray) -> tuple[list, list]:
    """Backprop ``delta_out`` (dL/d_output, incl. any batch-mean factor).

    Returns per-layer (grad_w, grad_b) lists matching ``params``.
    """
    grads_w = [None] * params.n_layers
    grads_b = [None] * params.n_layers
    delta = np.asarray(delta_out, dtype=np.float64)
    if delta.ndim == 1:
        delta = delta[None, :]
    x = cache[0]
    for k in range(params.n_layers - 1, -1, -1):
        a_prev = x if k == 0 else np.maximum(cache[k], 0.0)
        grads_w[k] = delta.T @ a_prev
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k]) * (cache[k] > 0.0)
    return grads_w, grads_b


@dataclass
class AdamState:
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params: MlpParams) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in params.weights],
            v_w=[np.zeros_like(w) for w in params.weights],
            m_b=[np.zeros_like(b) for b in params.biases],
            v_b=[np.zeros_like(b) for b in params.biases],
        )


def adam_step(
    params: MlpParams,
    grads_w: list,
    grads_b: list,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    frozen_layers: frozenset[int] = frozenset(),
) -> None:
    """One Adam update in place; layers in ``frozen_layers`` stay bit-exact."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for k in range(params.n_layers):
        if k in frozen_layers:
            continue
        for grad, m, v, target in (
            (grads_w[k], state.m_w[k], state.v_w[k], params.weights[k]),
            (grads_b[k], state.m_b[k], state.v_b[k], params.biases[k]),
        ):
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            target -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def iter_batches(n: int, batch_size: int, rng: np.random.Generator):
    """Yield shuffled index batches covering all n samples."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]
