"""Sampling from the shadow generative model.

A hidden vector h is k-sparse and nonnegative. One layer generates
``x = s_t(relu(alpha * W @ h))`` where ``s_t`` keeps about t coordinates
and ``alpha = 2 / t``. Deep nets chain this from the top layer down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (as_seed, bernoulli_mask, derive_seed, gaussian_matrix, make_rng,
                   matvec, relu, subset_mask)

VALUE_MODES = ("binary", "bounded-random")
DROPOUT_MODES = ("bernoulli", "fixed-subset")
MAX_RESAMPLE = 100


@dataclass(frozen=True)
class HiddenSpec:
    """Distribution of a k-sparse nonnegative hidden vector.

    ``inf_cap_const`` bounds the largest entry by
    ``inf_cap_const * sqrt(ln(max(dim, 3))) * ||h|| / sqrt(sparsity)``.
    """

    dim: int
    sparsity: int
    value_mode: str = "binary"
    inf_cap_const: float = 2.0

    def __post_init__(self):
        if self.dim < 1 or self.sparsity < 1:
            raise ValueError(f"dim and sparsity must be positive, got {self.dim}, {self.sparsity}")
        if self.sparsity > self.dim:
            raise ValueError(f"sparsity {self.sparsity} exceeds dim {self.dim}")
        if self.value_mode not in VALUE_MODES:
            raise ValueError(f"value_mode must be one of {VALUE_MODES}, got {self.value_mode!r}")
        if not self.inf_cap_const > 0:
            raise ValueError(f"inf_cap_const must be positive, got {self.inf_cap_const}")

    def cap(self, norm: float) -> float:
        return self.inf_cap_const * math.sqrt(math.log(max(self.dim, 3))) * norm / math.sqrt(self.sparsity)


@dataclass(frozen=True)
class HiddenVector:
    """A sampled hidden vector with its sorted support."""

    vec: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.vec, dtype=np.float64)
        support = np.asarray(self.support, dtype=np.int64)
        if np.any(vec < 0):
            raise ValueError("hidden vector must be nonnegative")
        if not np.array_equal(np.flatnonzero(vec), support):
            raise ValueError("support must list exactly the nonzero coordinates in order")
        object.__setattr__(self, "vec", vec)
        object.__setattr__(self, "support", support)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vec))


@dataclass(frozen=True)
class DropoutSpec:
    """Noise s_t: i.i.d. Bernoulli(rho) keep, or a uniform kept subset of size t."""

    mode: str
    n: int
    t: int
    rho: float = 1.0

    def __post_init__(self):
        if self.mode not in DROPOUT_MODES:
            raise ValueError(f"dropout mode must be one of {DROPOUT_MODES}, got {self.mode!r}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.mode == "bernoulli":
            if not 0.0 < self.rho <= 1.0:
                raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
            if self.t != round(self.rho * self.n):
                raise ValueError(f"bernoulli mode needs t = round(rho*n) = {round(self.rho * self.n)}, got {self.t}")
        elif not 1 <= self.t <= self.n:
            raise ValueError(f"fixed-subset t must lie in [1, n={self.n}], got {self.t}")
        if self.t < 1:
            raise ValueError("expected kept count t must be at least 1")

    @classmethod
    def bernoulli(cls, rho: float, n: int) -> "DropoutSpec":
        return cls("bernoulli", n, int(round(rho * n)), float(rho))

    @classmethod
    def fixed_subset(cls, t: int, n: int) -> "DropoutSpec":
        return cls("fixed-subset", n, int(t), t / n)

    def mask(self, seed) -> np.ndarray:
        if self.mode == "bernoulli":
            return bernoulli_mask(self.n, self.rho, seed)
        return subset_mask(self.n, self.t, seed)


@dataclass(frozen=True)
class LayerGenSpec:
    """One generative layer R^in_dim -> R^out_dim; alpha defaults to 2/t."""

    out_dim: int
    in_dim: int
    dropout: DropoutSpec
    alpha: float | None = None

    def __post_init__(self):
        if self.out_dim < 1 or self.in_dim < 1:
            raise ValueError("layer dimensions must be positive")
        if self.dropout.n != self.out_dim:
            raise ValueError(f"dropout acts on {self.dropout.n} coordinates, layer outputs {self.out_dim}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 2.0 / self.dropout.t)
        elif not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")


@dataclass
class ShadowNet:
    """Stack of generative weights W_j of shape (n_j, n_{j+1}).

    ``widths`` is n_0..n_l (n_0 is the observed layer), ``sparsities`` the
    kept counts k_0..k_l and ``alphas`` the scalings alpha_j = 2 / k_j.
    """

    weights: list
    widths: tuple
    sparsities: tuple
    alphas: tuple = field(default=())
    mode: str = "bernoulli"

    def __post_init__(self):
        self.weights = [np.asarray(W, dtype=np.float64) for W in self.weights]
        self.widths = tuple(int(v) for v in self.widths)
        self.sparsities = tuple(int(v) for v in self.sparsities)
        depth = len(self.weights)
        if depth < 1:
            raise ValueError("a ShadowNet needs at least one layer")
        if len(self.widths) != depth + 1 or len(self.sparsities) != depth + 1:
            raise ValueError("widths and sparsities need depth + 1 entries")
        for j, W in enumerate(self.weights):
            if W.shape != (self.widths[j], self.widths[j + 1]):
                raise ValueError(f"weights[{j}] has shape {W.shape}, expected {(self.widths[j], self.widths[j + 1])}")
        for k, n in zip(self.sparsities, self.widths):
            if not 1 <= k <= n:
                raise ValueError(f"sparsity {k} not in [1, {n}]")
        if self.mode not in DROPOUT_MODES:
            raise ValueError(f"mode must be one of {DROPOUT_MODES}, got {self.mode!r}")
        if not self.alphas:
            self.alphas = tuple(2.0 / k for k in self.sparsities[:-1])
        self.alphas = tuple(float(a) for a in self.alphas)
        if len(self.alphas) != depth:
            raise ValueError("need one alpha per layer")

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def total_nodes(self) -> int:
        return sum(self.widths)

    @classmethod
    def random(cls, widths, sparsities, seed, mode: str = "bernoulli", alphas=()):
        """Gaussian weights; layer j draws from derive_seed(seed, j)."""
        widths = tuple(widths)
        weights = [gaussian_matrix(widths[j], widths[j + 1], derive_seed(seed, j))
                   for j in range(len(widths) - 1)]
        return cls(weights, widths, tuple(sparsities), tuple(alphas), mode)

    def layer_spec(self, j: int) -> LayerGenSpec:
        """Spec of the map producing layer j from layer j + 1."""
        n, k = self.widths[j], self.sparsities[j]
        drop = DropoutSpec.bernoulli(k / n, n) if self.mode == "bernoulli" else DropoutSpec.fixed_subset(k, n)
        return LayerGenSpec(n, self.widths[j + 1], drop, self.alphas[j])


def sample_hidden(spec: HiddenSpec, seed) -> HiddenVector:
    """Uniform random support of size k; binary or rescaled-uniform values."""
    rng = make_rng(seed)
    k = spec.sparsity
    for _ in range(MAX_RESAMPLE):
        support = np.sort(rng.choice(spec.dim, size=k, replace=False))
        vec = np.zeros(spec.dim)
        if spec.value_mode == "binary":
            vec[support] = 1.0
        else:
            vals = rng.uniform(0.5, 1.5, size=k)
            vec[support] = vals * math.sqrt(k / np.sum(vals * vals))
        if vec.max() <= spec.cap(np.linalg.norm(vec)) * (1 + 1e-12):
            return HiddenVector(vec, support)
    raise ValueError(f"infinity-norm cap violated in {MAX_RESAMPLE} draws; inf_cap_const too small for {spec}")


def _vec(h) -> np.ndarray:
    return h.vec if isinstance(h, HiddenVector) else np.asarray(h, dtype=np.float64)


def generate_layer(W, h, gen: LayerGenSpec, seed) -> np.ndarray:
    """x = s_t(relu(alpha * W @ h)) with the mask drawn from ``seed``."""
    W = np.asarray(W, dtype=np.float64)
    if W.shape != (gen.out_dim, gen.in_dim):
        raise ValueError(f"weight shape {W.shape} does not match layer spec {(gen.out_dim, gen.in_dim)}")
    pre = matvec(W, _vec(h))
    return relu(gen.alpha * pre) * gen.dropout.mask(seed)


def generate_deep(net: ShadowNet, h_top, seed) -> list:
    """Generate downward; returns [h^l, ..., h^1, x] with h^l the input.

    The mask of layer j uses derive_seed(seed, j).
    """
    h = _vec(h_top)
    if h.shape != (net.widths[-1],):
        raise ValueError(f"top vector has shape {h.shape}, net expects ({net.widths[-1]},)")
    out = [h]
    for j in range(net.depth - 1, -1, -1):
        h = generate_layer(net.weights[j], h, net.layer_spec(j), derive_seed(seed, j))
        out.append(h)
    return out


def linear_generate(W, h) -> np.ndarray:
    """Deterministic linear model x = W @ h."""
    return matvec(W, _vec(h))


__all__ = ["HiddenSpec", "HiddenVector", "DropoutSpec", "LayerGenSpec", "ShadowNet",
           "sample_hidden", "generate_layer", "generate_deep", "linear_generate", "as_seed"]


def generate_deep_batch(net: ShadowNet, H_top, seeds) -> list:
    """Row-batched :func:`generate_deep`; row i uses ``seeds[i]``.

    Equal to the per-sample generator up to matmul rounding.
    """
    H = np.atleast_2d(np.asarray(H_top, dtype=np.float64))
    if H.shape[1] != net.widths[-1] or len(seeds) != H.shape[0]:
        raise ValueError("need one seed per row and rows of the top width")
    out = [H]
    for j in range(net.depth - 1, -1, -1):
        spec = net.layer_spec(j)
        masks = np.stack([spec.dropout.mask(derive_seed(s, j)) for s in seeds])
        H = relu(spec.alpha * (H @ net.weights[j].T)) * masks
        out.append(H)
    return out


__all__ += ["generate_deep_batch"]
