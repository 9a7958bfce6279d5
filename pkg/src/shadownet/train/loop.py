"""Minibatch SGD with optional dropout, SHADOW synthetic batches and the
generative regularizer."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..core import derive_seed, make_rng
from .data import Dataset
from .mlp import MlpParams, cross_entropy, mlp_backward, mlp_forward, predict
from .shadow import SynthOptions, regularizer_grad, shadow_synthesize


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings.

    ``shadow_weight`` scales the loss on synthetic inputs (0 disables
    SHADOW). ``reg_lambdas`` weight the generative regularizer for W1, W2.
    ``dropout_ratio`` is the drop probability of hidden units.
    """

    learning_rate: float = 0.05
    shadow_weight: float = 0.0
    reg_lambdas: tuple = (0.0, 0.0)
    masked_regularizer: bool = False
    dropout_ratio: float = 0.0
    batch_size: int = 100
    epochs: int = 10
    seed: int = 0
    synth: SynthOptions = field(default_factory=SynthOptions)

    def __post_init__(self):
        if self.learning_rate < 0 or self.shadow_weight < 0 or any(v < 0 for v in self.reg_lambdas):
            raise ValueError("learning rate and weights must be nonnegative")
        if not 0.0 <= self.dropout_ratio < 1.0:
            raise ValueError(f"dropout_ratio must lie in [0, 1), got {self.dropout_ratio}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if len(self.reg_lambdas) != 2:
            raise ValueError("reg_lambdas holds one weight per hidden layer (W1, W2)")


@dataclass
class TrainState:
    params: MlpParams
    epoch: int = 0


def _dropout_masks(rng, B: int, widths, ratio: float):
    keep = 1.0 - ratio
    return tuple((rng.random((B, w)) < keep) / keep for w in widths)


def _source(h2, logits, opts: SynthOptions):
    return h2 if opts.source_layer == "h2" else logits


def train_epoch(state: TrainState, data: Dataset, cfg: TrainConfig, seed, val: Dataset | None = None):
    """One pass of minibatch SGD; returns (new_state, metrics).

    Per batch the update is W <- W - lr * (dF/dW - lambda_j * grad log p),
    where F is the cross-entropy on the real batch plus ``shadow_weight``
    times the cross-entropy of synthetic inputs labelled with the current
    prediction. Synthetic inputs and their labels are treated as constants.
    """
    if len(data) == 0:
        raise ValueError("cannot train on an empty dataset")
    params = state.params.copy()
    rng = make_rng(seed)
    order = rng.permutation(len(data))
    widths = params.widths[1:3]
    losses, synth_losses = [], []
    lr = cfg.learning_rate
    for bi, start in enumerate(range(0, len(data), cfg.batch_size)):
        idx = order[start: start + cfg.batch_size]
        X, y = data.inputs[idx], data.labels[idx]
        masks = _dropout_masks(rng, len(idx), widths, cfg.dropout_ratio) if cfg.dropout_ratio > 0 else None
        g = mlp_backward(params, X, y, masks)
        losses.append(g.loss * len(idx))
        gW = [w.copy() for w in g.weights]
        gb = [b.copy() for b in g.biases]
        if cfg.shadow_weight > 0 or any(cfg.reg_lambdas):
            h1, h2, logits = mlp_forward(params, X)
        if cfg.shadow_weight > 0:
            z = np.argmax(logits, axis=1)
            Xs = shadow_synthesize(params, _source(h2, logits, cfg.synth), cfg.synth, derive_seed(seed, bi))
            gs = mlp_backward(params, Xs, z, masks)
            synth_losses.append(gs.loss * len(idx))
            for j in range(3):
                gW[j] += cfg.shadow_weight * gs.weights[j]
                gb[j] += cfg.shadow_weight * gs.biases[j]
        for j, lam in enumerate(cfg.reg_lambdas):
            if lam > 0:
                below, above = (X, h1) if j == 0 else (h1, h2)
                gW[j] -= lam * regularizer_grad(params.weights[j], above, below, cfg.masked_regularizer)
        for j in range(3):
            params.weights[j] -= lr * gW[j]
            params.biases[j] -= lr * gb[j]
    metrics = {"epoch": state.epoch + 1, "train_loss": float(np.sum(losses) / len(data))}
    if synth_losses:
        metrics["synthetic_train_loss"] = float(np.sum(synth_losses) / len(data))
    new_state = TrainState(params, state.epoch + 1)
    if val is not None:
        metrics.update(evaluate(params, val, cfg.synth, derive_seed(seed, 0x5EED)))
    return new_state, metrics


def evaluate(params: MlpParams, data: Dataset, opts: SynthOptions, seed) -> dict:
    """Real error, synthetic error and real/synthetic label agreement.

    The synthetic set is generated from each input's own hidden layer and
    keeps that input's true label.
    """
    _, h2, logits = mlp_forward(params, data.inputs)
    pred = np.argmax(logits, axis=1)
    Xs = shadow_synthesize(params, _source(h2, logits, opts), opts, seed)
    spred = predict(params, Xs)
    return {
        "val_error": float(np.mean(pred != data.labels)),
        "synthetic_val_error": float(np.mean(spred != data.labels)),
        "label_agreement": float(np.mean(pred == spred)),
    }


def train(cfg: TrainConfig, train_data: Dataset, val_data: Dataset, params: MlpParams | None = None,
          hidden=(256, 256)):
    """Run ``cfg.epochs`` epochs; returns (state, history) with epoch 0 logged before training."""
    if params is None:
        params = MlpParams.init(train_data.dim, hidden[0], hidden[1], train_data.n_classes, derive_seed(cfg.seed, 1))
    state = TrainState(params, 0)
    _, _, logits = mlp_forward(params, train_data.inputs)
    history = [dict(epoch=0, train_loss=cross_entropy(logits, train_data.labels),
                    **evaluate(params, val_data, cfg.synth, derive_seed(derive_seed(cfg.seed, 2), 0x5EED)))]
    for e in range(cfg.epochs):
        state, m = train_epoch(state, train_data, cfg, derive_seed(cfg.seed, 100 + e), val_data)
        history.append(m)
    return state, history


__all__ = ["TrainConfig", "TrainState", "train_epoch", "evaluate", "train", "replace"]
