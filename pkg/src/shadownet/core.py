"""Seeded randomness, dense products and the ReLU family.

Every random draw in the package flows through an :class:`RngSeed`, which
keys a counter-based Philox generator. Substreams for trials, layers and
workers come from :func:`derive_seed`, so results never depend on call
order or thread scheduling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One round of the splitmix64 finalizer on a 64-bit integer."""
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngSeed:
    """Key of a reproducible random stream: a (master, stream) pair of u64."""

    master: int
    stream: int = 0

    def __post_init__(self):
        for name in ("master", "stream"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
                raise ValueError(f"RngSeed.{name} must be an integer, got {type(v).__name__}")
            if not 0 <= int(v) <= MASK64:
                raise ValueError(f"RngSeed.{name} must fit in 64 unsigned bits, got {v}")
            object.__setattr__(self, name, int(v))


def as_seed(seed) -> RngSeed:
    """Accept an RngSeed or a plain non-negative integer master seed."""
    if isinstance(seed, RngSeed):
        return seed
    return RngSeed(int(seed), 0)


def derive_seed(seed, index: int) -> RngSeed:
    """Deterministic substream ``index`` of ``seed``.

    Both words are remixed so that nearby indices and nearby masters land
    on unrelated keys.
    """
    s = as_seed(seed)
    idx = int(index) & MASK64
    a = splitmix64(s.master ^ splitmix64(s.stream))
    b = splitmix64(a ^ ((idx * _GOLDEN) & MASK64))
    return RngSeed(splitmix64(b ^ s.master), splitmix64(b ^ idx))


def make_rng(seed) -> np.random.Generator:
    """Generator over Philox keyed by the 128-bit (master, stream) pair.

    Normals come from numpy's ziggurat sampler, fixed project-wide.
    """
    s = as_seed(seed)
    key = np.array([s.master, s.stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def relu(v) -> np.ndarray:
    """Elementwise max(v, 0)."""
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def relu_prime(v) -> np.ndarray:
    """Subgradient indicator 1{v > 0}, taking r'(0) = 0."""
    return (np.asarray(v, dtype=np.float64) > 0.0).astype(np.float64)


def gaussian_matrix(rows: int, cols: int, seed) -> np.ndarray:
    """rows x cols matrix of i.i.d. N(0, 1) entries."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix shape must be positive, got ({rows}, {cols})")
    return make_rng(seed).standard_normal((rows, cols))


def bernoulli_mask(n: int, rho: float, seed) -> np.ndarray:
    """Length-n vector of i.i.d. Bernoulli(rho) entries as float 0/1."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    return (make_rng(seed).random(n) < rho).astype(np.float64)


def subset_mask(n: int, t: int, seed) -> np.ndarray:
    """0/1 vector with exactly t ones on a uniformly random subset."""
    if n < 0 or t < 0:
        raise ValueError(f"n and t must be non-negative, got n={n}, t={t}")
    if t > n:
        raise ValueError(f"subset size t={t} exceeds n={n}")
    out = np.zeros(n)
    out[make_rng(seed).choice(n, size=t, replace=False)] = 1.0
    return out


def _check_matrix(W) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {W.shape}")
    return W


def matvec(W, v) -> np.ndarray:
    """W @ v with a shape check."""
    W = _check_matrix(W)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != W.shape[1]:
        raise ValueError(f"dimension mismatch: matrix {W.shape} times vector {v.shape}")
    return W @ v


def matvec_t(W, v) -> np.ndarray:
    """W^T @ v with a shape check."""
    W = _check_matrix(W)
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != W.shape[0]:
        raise ValueError(f"dimension mismatch: transpose of {W.shape} times vector {v.shape}")
    return W.T @ v
