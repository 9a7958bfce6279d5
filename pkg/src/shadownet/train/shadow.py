"""SHADOW synthesis through tied transposed weights, and the generative regularizer."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import make_rng, relu, relu_prime
from .mlp import MlpParams

SOURCES = ("h2", "h3")


@dataclass(frozen=True)
class SynthOptions:
    """How synthetic inputs are generated from a hidden layer.

    ``rescale`` multiplies each generated layer by alpha = 2 / (rows *
    mean(W^2) * keep), the scaling under which W^T r(alpha W h) ~ h for a
    random-like W.
    """

    source_layer: str = "h2"
    sampling: bool = False
    sampling_keep: float = 0.5
    smoothing: bool = False
    image_shape: tuple | None = None
    rescale: bool = True

    def __post_init__(self):
        if self.source_layer not in SOURCES:
            raise ValueError(f"source_layer must be one of {SOURCES}, got {self.source_layer!r}")
        if not 0.0 < self.sampling_keep <= 1.0:
            raise ValueError(f"sampling_keep must lie in (0, 1], got {self.sampling_keep}")
        if self.smoothing and self.image_shape is None:
            raise ValueError("smoothing requires image_shape")
        if self.image_shape is not None and len(self.image_shape) != 3:
            raise ValueError("image_shape is (width, height, channels)")


def generation_scale(W: np.ndarray, keep: float) -> float:
    """alpha = 2 / (rows * mean(W^2) * keep) for generating into W's rows."""
    ms = float(np.mean(W * W))
    return 2.0 / (W.shape[0] * ms * keep) if ms > 0 else 1.0


def shadow_synthesize(params: MlpParams, h_top, opts: SynthOptions, seed) -> np.ndarray:
    """Generate x' from a hidden layer with the net's own (tied) weights.

    For h2: h1 = r(W2 h2), x' = r(W1 h1). For h3 the chain starts with
    h2 = r(W3 h3). Works on a single vector or a row batch.
    """
    H = np.asarray(h_top, dtype=np.float64)
    single = H.ndim == 1
    H = np.atleast_2d(H)
    W1, W2, W3 = params.weights
    chain = [W2, W1] if opts.source_layer == "h2" else [W3, W2, W1]
    if H.shape[1] != chain[0].shape[1]:
        raise ValueError(f"source vector width {H.shape[1]} does not match layer width {chain[0].shape[1]}")
    keep = opts.sampling_keep if opts.sampling else 1.0
    rng = make_rng(seed) if opts.sampling else None
    for W in chain:
        # H @ W.T reads the stored weights through a view, no copy
        H = relu(H @ W.T)
        if opts.rescale:
            H = H * generation_scale(W, keep)
        if opts.sampling and keep < 1.0:
            H = H * (rng.random(H.shape) < keep)
    if opts.smoothing:
        H = np.stack([smooth3x3(row, opts.image_shape) for row in H])
    return H[0] if single else H


def smooth3x3(img, shape) -> np.ndarray:
    """Per-channel 3x3 box filter with edge replication.

    ``img`` is flat with layout (width, height, channels) in row-major order.
    """
    w, h, c = (int(v) for v in shape)
    v = np.asarray(img, dtype=np.float64)
    if v.ndim != 1 or v.size != w * h * c:
        raise ValueError(f"image of length {v.size} does not match shape {(w, h, c)}")
    a = np.pad(v.reshape(w, h, c), ((1, 1), (1, 1), (0, 0)), mode="edge")
    out = np.zeros((w, h, c))
    for dx in range(3):
        for dy in range(3):
            out += a[dx: dx + w, dy: dy + h]
    return (out / 9.0).ravel()


def regularizer_grad(W, h, x, masked_variant: bool = False, subset_T=None) -> np.ndarray:
    """Approximate gradient of log p(x | h) for one generative layer x ~ r(W h).

    Default form: (x - r(Wh) * r'(Wh)) h^T. The masked form
    ((x - r(Wh)) * r'(Wh)) h^T is the exact gradient of -||x - r(Wh)||^2 / 2.
    ``subset_T`` (indices or a 0/1 mask) restricts the residual to T.
    Accepts single vectors or row batches; batches are averaged.
    """
    W = np.asarray(W, dtype=np.float64)
    H = np.atleast_2d(np.asarray(h, dtype=np.float64))
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if W.ndim != 2 or H.shape[1] != W.shape[1] or X.shape[1] != W.shape[0] or H.shape[0] != X.shape[0]:
        raise ValueError(f"shape mismatch: W {W.shape}, h {H.shape}, x {X.shape}")
    Z = H @ W.T
    r, rp = relu(Z), relu_prime(Z)
    R = (X - r) * rp if masked_variant else X - r * rp
    if subset_T is not None:
        T = np.asarray(subset_T)
        sel = np.zeros(W.shape[0])
        if T.dtype == bool or (T.size == W.shape[0] and set(np.unique(T).tolist()) <= {0, 1}):
            sel = T.astype(np.float64)
        else:
            sel[T.astype(np.int64)] = 1.0
        R = R * sel
    return R.T @ H / H.shape[0]
