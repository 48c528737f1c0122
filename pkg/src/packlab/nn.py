"""Minimal dense network stack: activations, Xavier init, exact reverse-mode
gradients, summed cross-entropy, and Adam.

Hand-rolled on numpy so every gradient is inspectable and runs are exactly
reproducible.  Layer widths here are tiny (tens of units), so plain float64
matmuls are more than fast enough and stability beats speed throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("selu", "tanh", "relu", "softmax", "identity")

# Self-normalizing constants for SeLU.
SELU_LAMBDA = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

# Predictions are clamped from below inside the log; the loss is undefined
# at exactly zero.
XENT_CLAMP = 1e-12


@dataclass
class DenseLayer:
    """Fully connected layer y = act(W x + b) with W of shape (out, in)."""

    weights: np.ndarray
    bias: np.ndarray
    activation: str

    def __post_init__(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("bias shape must match weight rows")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


def as_generator(rng: np.random.Generator | int) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def xavier_init(out_dim: int, in_dim: int, rng: np.random.Generator | int) -> np.ndarray:
    """Xavier-uniform weights on [-L, L], L = sqrt(6 / (in + out))."""
    if out_dim < 1 or in_dim < 1:
        raise ValueError("layer dimensions must be >= 1")
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return as_generator(rng).uniform(-limit, limit, size=(out_dim, in_dim))


def make_layer(
    in_dim: int, out_dim: int, activation: str, rng: np.random.Generator | int
) -> DenseLayer:
    """Xavier-initialized weights, zero bias."""
    return DenseLayer(xavier_init(out_dim, in_dim, rng), np.zeros(out_dim), activation)


def activate(x: np.ndarray, kind: str) -> np.ndarray:
    """Elementwise activation; softmax normalizes along the last axis with
    max-subtraction for stability.  Rejects non-finite input."""
    z = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError(f"non-finite input to activation {kind!r}")
    if kind == "identity":
        return z.copy()
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "selu":
        return np.where(z > 0.0, SELU_LAMBDA * z, SELU_LAMBDA * SELU_ALPHA * np.expm1(z))
    if kind == "softmax":
        shifted = z - np.max(z, axis=-1, keepdims=True)
        e = np.exp(shifted)
        return e / np.sum(e, axis=-1, keepdims=True)
    raise ValueError(f"unknown activation {kind!r}")


def forward(
    layers: list[DenseLayer], x: np.ndarray
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray, np.ndarray]]]:
    """Run a (batch, in) array through the layers.

    Returns the final activation and a tape of (input, pre-activation,
    post-activation) per layer for the backward pass.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"input must be 2-D (batch, features), got shape {a.shape}")
    tape = []
    for layer in layers:
        if a.shape[1] != layer.in_dim:
            raise ValueError(
                f"dimension mismatch: input has {a.shape[1]} features, "
                f"layer expects {layer.in_dim}"
            )
        z = a @ layer.weights.T + layer.bias
        post = activate(z, layer.activation)
        tape.append((a, z, post))
        a = post
    return a, tape


def cross_entropy(preds: np.ndarray, targets: np.ndarray) -> float:
    """Summed (not averaged) cross-entropy -sum targets * log preds."""
    p = np.asarray(preds, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: preds {p.shape} vs targets {t.shape}")
    return float(-np.sum(t * np.log(np.maximum(p, XENT_CLAMP))))


def _delta_to_dz(kind: str, z: np.ndarray, a: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Convert dL/d(post-activation) to dL/d(pre-activation)."""
    if kind == "identity":
        return delta
    if kind == "relu":
        return delta * (z > 0.0)
    if kind == "tanh":
        return delta * (1.0 - a * a)
    if kind == "selu":
        return delta * np.where(z > 0.0, SELU_LAMBDA, SELU_LAMBDA * SELU_ALPHA * np.exp(z))
    if kind == "softmax":
        # Full softmax Jacobian: dz = a * (delta - <delta, a>) rowwise.
        inner = np.sum(delta * a, axis=-1, keepdims=True)
        return a * (delta - inner)
    raise ValueError(f"unknown activation {kind!r}")


def _backward_from_dz(
    layers: list[DenseLayer],
    tape: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
    dz_last: np.ndarray,
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    delta = None
    dz = dz_last
    for i in range(len(layers) - 1, -1, -1):
        x_in, z, a = tape[i]
        if i < len(layers) - 1:
            dz = _delta_to_dz(layers[i].activation, z, a, delta)
        grads[i] = (dz.T @ x_in, np.sum(dz, axis=0))
        delta = dz @ layers[i].weights
    return grads, delta


def backward(
    layers: list[DenseLayer],
    tape: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
    grad_output: np.ndarray,
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Exact reverse-mode gradients given dL/d(final activation).

    Returns ((dW, db) per layer, dL/d(input)); the input gradient is what
    lets a decoder's loss flow back through a perturbed center.
    """
    if len(tape) != len(layers):
        raise ValueError("tape does not match layers")
    g = np.asarray(grad_output, dtype=np.float64)
    x_in, z, a = tape[-1]
    if g.shape != a.shape:
        raise ValueError(f"stale tape: grad shape {g.shape} vs output {a.shape}")
    dz_last = _delta_to_dz(layers[-1].activation, z, a, g)
    return _backward_from_dz(layers, tape, dz_last)


def xent_backward(
    layers: list[DenseLayer],
    tape: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
    targets: np.ndarray,
) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Backward pass for softmax output + summed cross-entropy, using the
    fused pre-activation gradient (preds - targets)."""
    if len(tape) != len(layers):
        raise ValueError("tape does not match layers")
    if layers[-1].activation != "softmax":
        raise ValueError("fused cross-entropy backward requires a softmax final layer")
    preds = tape[-1][2]
    t = np.asarray(targets, dtype=np.float64)
    if t.shape != preds.shape:
        raise ValueError(f"stale tape: targets {t.shape} vs preds {preds.shape}")
    return _backward_from_dz(layers, tape, preds - t)


@dataclass
class AdamState:
    """Per-parameter moment accumulators plus step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: list[np.ndarray], learning_rate: float) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        t=0,
        learning_rate=learning_rate,
    )


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """Bias-corrected Adam update, applied to the parameter arrays in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads, and state must have matching lengths")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correct1 = 1.0 - b1**state.t
    correct2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.learning_rate * (m / correct1) / (np.sqrt(v / correct2) + state.eps)
    return params, state


def layer_to_dict(layer: DenseLayer) -> dict:
    return {
        "activation": layer.activation,
        "weights": layer.weights.tolist(),
        "bias": layer.bias.tolist(),
    }


def layer_from_dict(d: dict) -> DenseLayer:
    return DenseLayer(
        weights=np.asarray(d["weights"], dtype=np.float64),
        bias=np.asarray(d["bias"], dtype=np.float64),
        activation=d["activation"],
    )


def adam_to_dict(state: AdamState) -> dict:
    return {
        "t": state.t,
        "learning_rate": state.learning_rate,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "eps": state.eps,
        "m": [m.tolist() for m in state.m],
        "v": [v.tolist() for v in state.v],
    }


def adam_from_dict(d: dict) -> AdamState:
    return AdamState(
        m=[np.asarray(m, dtype=np.float64) for m in d["m"]],
        v=[np.asarray(v, dtype=np.float64) for v in d["v"]],
        t=int(d["t"]),
        learning_rate=float(d["learning_rate"]),
        beta1=float(d["beta1"]),
        beta2=float(d["beta2"]),
        eps=float(d["eps"]),
    )
