"""Three-layer ReLU MLP with softmax cross-entropy.

Inputs are row batches X of shape (B, d):
h1 = relu(X W1 + b1), h2 = relu(h1 W2 + b2), logits = h2 W3 + b3.
Dropout masks are inverted-dropout multipliers applied after each ReLU.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import derive_seed, make_rng


@dataclass
class MlpParams:
    weights: list  # W1 (d, w1), W2 (w1, w2), W3 (w2, classes)
    biases: list

    def __post_init__(self):
        self.weights = [np.asarray(W, dtype=np.float64) for W in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.weights) != 3 or len(self.biases) != 3:
            raise ValueError("an MLP has three weight matrices and three biases")
        for j, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"layer {j + 1}: weight {W.shape} and bias {b.shape} do not match")
            if j and W.shape[0] != self.weights[j - 1].shape[1]:
                raise ValueError(f"layer {j + 1} input {W.shape[0]} != previous output {self.weights[j - 1].shape[1]}")

    @property
    def widths(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    @classmethod
    def init(cls, d: int, w1: int, w2: int, n_classes: int, seed) -> "MlpParams":
        """He-normal weights and zero biases."""
        dims = (d, w1, w2, n_classes)
        weights = [make_rng(derive_seed(seed, j)).standard_normal((dims[j], dims[j + 1])) * np.sqrt(2.0 / dims[j])
                   for j in range(3)]
        return cls(weights, [np.zeros(v) for v in dims[1:]])

    def copy(self) -> "MlpParams":
        return MlpParams([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list:
        return self.weights + self.biases


@dataclass
class Grads:
    weights: list
    biases: list
    loss: float


def _batch(params: MlpParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != params.weights[0].shape[0]:
        raise ValueError(f"input shape {X.shape} does not match input width {params.weights[0].shape[0]}")
    return X


def mlp_forward(params: MlpParams, X, masks=None):
    """(h1, h2, logits) for a batch; ``masks`` is None or (mask1, mask2)."""
    X = _batch(params, X)
    W1, W2, W3 = params.weights
    b1, b2, b3 = params.biases
    h1 = np.maximum(X @ W1 + b1, 0.0)
    if masks is not None:
        h1 = h1 * masks[0]
    h2 = np.maximum(h1 @ W2 + b2, 0.0)
    if masks is not None:
        h2 = h2 * masks[1]
    return h1, h2, h2 @ W3 + b3


def predict(params: MlpParams, X) -> np.ndarray:
    """Argmax class; np.argmax picks the lowest index on ties."""
    return np.argmax(mlp_forward(params, X)[2], axis=1)


def log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels) -> float:
    return float(-np.mean(log_softmax(logits)[np.arange(len(labels)), labels]))


def mlp_backward(params: MlpParams, X, labels, masks=None) -> Grads:
    """Gradients of the mean softmax cross-entropy over the batch."""
    X = _batch(params, X)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n_classes = params.weights[2].shape[1]
    if labels.shape != (X.shape[0],) or labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels must be {X.shape[0]} integers in [0, {n_classes})")
    W1, W2, W3 = params.weights
    b1, b2 = params.biases[:2]
    a1 = X @ W1 + b1
    h1 = np.maximum(a1, 0.0)
    m1 = masks[0] if masks is not None else 1.0
    h1d = h1 * m1
    a2 = h1d @ W2 + b2
    h2 = np.maximum(a2, 0.0)
    m2 = masks[1] if masks is not None else 1.0
    h2d = h2 * m2
    logits = h2d @ W3 + params.biases[2]
    logp = log_softmax(logits)
    B = X.shape[0]
    rows = np.arange(B)
    loss = float(-np.mean(logp[rows, labels]))
    d3 = np.exp(logp)
    d3[rows, labels] -= 1.0
    d3 /= B
    gW3 = h2d.T @ d3
    gb3 = d3.sum(axis=0)
    d2 = (d3 @ W3.T) * m2 * (a2 > 0)
    gW2 = h1d.T @ d2
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ W2.T) * m1 * (a1 > 0)
    gW1 = X.T @ d1
    gb1 = d1.sum(axis=0)
    return Grads([gW1, gW2, gW3], [gb1, gb2, gb3], loss)


def label_agreement(params: MlpParams, inputs_a, inputs_b) -> float:
    """Fraction of paired inputs given the same argmax class."""
    A = np.atleast_2d(np.asarray(inputs_a, dtype=np.float64))
    B = np.atleast_2d(np.asarray(inputs_b, dtype=np.float64))
    if A.shape[0] != B.shape[0]:
        raise ValueError(f"count mismatch: {A.shape[0]} vs {B.shape[0]}")
    if A.shape[0] == 0:
        raise ValueError("need at least one input pair")
    return float(np.mean(predict(params, A) == predict(params, B)))
