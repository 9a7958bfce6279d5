"""Monte-Carlo estimators for the scalar and single-layer lemmas.

Layer-level estimators condition on a fixed hidden vector h and draw only
the randomness of (W, mask). Only the weight columns that touch supp(h)
and the probed coordinates are sampled, since the others never enter.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..core import derive_seed, make_rng
from ..kernels import quad_g_batch
from ..model import LayerGenSpec, HiddenSpec

CHUNK = 250_000


@dataclass(frozen=True)
class McEstimate:
    """Monte-Carlo mean with its standard error."""

    mean: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("an estimate needs at least 2 samples")
        if self.std_error < 0:
            raise ValueError("std_error must be nonnegative")

    @classmethod
    def from_samples(cls, samples) -> "McEstimate":
        x = np.asarray(samples, dtype=np.float64).ravel()
        return cls(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), int(x.size))

    def within(self, target: float, k_se: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.mean - target) <= k_se * self.std_error + floor


@dataclass(frozen=True)
class TailReport:
    """Quantiles of a per-trial deviation statistic."""

    quantiles: dict
    exceed_fraction: float
    threshold: float
    values: np.ndarray = field(repr=False)

    @property
    def n_trials(self) -> int:
        return int(self.values.size)

    @property
    def median(self) -> float:
        return float(np.median(self.values))


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through (log x, log y)."""

    slope: float
    intercept: float
    r_squared: float
    points: tuple
    std_errors: tuple | None = None

    def __post_init__(self):
        if len(self.points) < 3:
            raise ValueError("a slope fit needs at least 3 points")


def fit_power_law(xs, ys, std_errors=None) -> SlopeFit:
    """Fit log y = slope * log x + intercept."""
    x = np.log(np.asarray(xs, dtype=np.float64))
    y = np.log(np.asarray(ys, dtype=np.float64))
    if x.size < 3 or x.size != y.size:
        raise ValueError("need at least 3 matching (x, y) points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("power-law fit needs positive finite values")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    pts = tuple(zip(x.tolist(), y.tolist()))
    se = tuple(float(s) for s in std_errors) if std_errors is not None else None
    return SlopeFit(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)), pts, se)


# scalar lemmas

@dataclass(frozen=True)
class LemmaExpParams:
    h: float
    sigma: float

    def __post_init__(self):
        if self.h < 0 or not self.sigma > 0:
            raise ValueError(f"need h >= 0 and sigma > 0, got h={self.h}, sigma={self.sigma}")
        if self.sigma < 2 or self.h > math.log(self.sigma):
            warnings.warn(f"(h={self.h}, sigma={self.sigma}) is outside the lemma's regime "
                          "h <= log(sigma), sigma >= 2", stacklevel=2)


@dataclass(frozen=True)
class TwoCorrParams:
    a: float
    b: float
    sigma: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or not self.sigma > 0:
            raise ValueError("need a, b >= 0 and sigma > 0")
        lim = 5 * math.log(self.sigma) if self.sigma > 1 else 0.0
        if self.a > lim or self.b > lim:
            warnings.warn(f"a or b exceeds 5*log(sigma) = {lim:.3g}", stacklevel=2)


@dataclass(frozen=True)
class LemmaHParams:
    r_param: float
    sigma: float

    def __post_init__(self):
        if self.r_param < 0 or not self.sigma > 0:
            raise ValueError("need r_param >= 0 and sigma > 0")
        lim = 10 * math.log(self.sigma) if self.sigma > 1 else 0.0
        if self.r_param > lim:
            warnings.warn(f"r_param exceeds 10*log(sigma) = {lim:.3g}", stacklevel=2)


def _chunks(n: int):
    done = 0
    while done < n:
        size = min(CHUNK, n - done)
        yield size
        done += size


def _mc_scalar(stat, n_samples: int, seed, n_normals: int, min_samples: int) -> np.ndarray:
    if n_samples < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {n_samples}")
    rng = make_rng(seed)
    out = [stat(*rng.standard_normal((n_normals, size))) for size in _chunks(n_samples)]
    return np.concatenate(out)


def mc_lemma_exp(p: LemmaExpParams, n_samples: int, seed) -> McEstimate:
    """E[w relu(w h + xi)] for w ~ N(0,1), xi ~ N(0, sigma^2)."""
    vals = _mc_scalar(lambda w, e: w * np.maximum(w * p.h + p.sigma * e, 0.0), n_samples, seed, 2, 10_000)
    return McEstimate.from_samples(vals)


def mc_second_moment(p: LemmaExpParams, n_samples: int, seed) -> McEstimate:
    """E[w^2 relu(w h + xi)^2]."""
    def stat(w, e):
        r = np.maximum(w * p.h + p.sigma * e, 0.0)
        return (w * r) ** 2
    return McEstimate.from_samples(_mc_scalar(stat, n_samples, seed, 2, 10_000))


class TwoCorrEstimate(tuple):
    """(joint, product, gap) with the gap's delta-method standard error attached."""

    def __new__(cls, joint, product, gap, gap_std_error):
        obj = super().__new__(cls, (joint, product, gap))
        obj.gap_std_error = gap_std_error
        return obj

    joint = property(lambda self: self[0])
    product = property(lambda self: self[1])
    gap = property(lambda self: self[2])


def mc_two_correlation(p: TwoCorrParams, n_samples: int, seed) -> TwoCorrEstimate:
    """E[uv r^2] and E[u r] E[v r] with r = relu(a u + b v + xi), on one sample stream."""
    if n_samples < 100_000:
        raise ValueError(f"need at least 100000 samples, got {n_samples}")
    rng = make_rng(seed)
    sums = np.zeros(3)
    cross = np.zeros((3, 3))
    for size in _chunks(n_samples):
        u, v, e = rng.standard_normal((3, size))
        r = np.maximum(p.a * u + p.b * v + p.sigma * e, 0.0)
        Z = np.stack([u * v * r * r, u * r, v * r])
        sums += Z.sum(axis=1)
        cross += Z @ Z.T
    n = n_samples
    mu = sums / n
    cov = (cross - n * np.outer(mu, mu)) / (n - 1)
    joint = McEstimate(float(mu[0]), float(math.sqrt(cov[0, 0] / n)), n)
    prod = mu[1] * mu[2]
    # delta method for mean(U)*mean(V), plus the second-order var(U)var(V) term
    g = np.array([0.0, mu[2], mu[1]])
    var_prod = float(g @ cov @ g) / n + cov[1, 1] * cov[2, 2] / n ** 2
    product = McEstimate(float(prod), float(math.sqrt(max(var_prod, 0.0))), n)
    gd = np.array([1.0, -mu[2], -mu[1]])
    gap_se = math.sqrt(max(float(gd @ cov @ gd) / n, 0.0))
    return TwoCorrEstimate(joint, product, float(abs(mu[0] - prod)), gap_se)


def eval_G(p: LemmaHParams, z: float, backend=None) -> float:
    """G(z) = int_0^{rz} (rz - y)^2 phi_sigma(y) dy by adaptive Simpson."""
    return float(quad_g_batch(np.array([p.r_param * z]), p.sigma, backend=backend)[0])


def eval_H(p: LemmaHParams, z: float, backend=None) -> float:
    """H(z) = (z^2 - 1) G(z)."""
    return (z * z - 1.0) * eval_G(p, z, backend)


def mc_H(p: LemmaHParams, n_samples: int, seed, backend=None):
    """(E[H(z)], E[|H(z)|]) for z ~ N(0, 1)."""
    if n_samples < 10_000:
        raise ValueError(f"need at least 10000 samples, got {n_samples}")
    if p.r_param == 0:
        zero = McEstimate(0.0, 0.0, n_samples)
        return zero, zero
    rng = make_rng(seed)
    vals = []
    for size in _chunks(n_samples):
        z = rng.standard_normal(size)
        vals.append((z * z - 1.0) * quad_g_batch(p.r_param * z, p.sigma, backend=backend))
    H = np.concatenate(vals)
    return McEstimate.from_samples(H), McEstimate.from_samples(np.abs(H))


# single-layer lemmas

def default_hidden(hidden: HiddenSpec) -> np.ndarray:
    """Fixed conditioning vector: ones on the first k coordinates."""
    h = np.zeros(hidden.dim)
    h[: hidden.sparsity] = 1.0
    return h


def sample_h_hat(layer: LayerGenSpec, h, cols, n_samples: int, seed, batch: int = 512) -> np.ndarray:
    """Draws of (W^T x)[cols] for fresh (W, mask), with x = s_t(relu(alpha W h)).

    Returns an array of shape (n_samples, len(cols)).
    """
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (layer.in_dim,):
        raise ValueError(f"h has shape {h.shape}, layer expects ({layer.in_dim},)")
    K = np.flatnonzero(h)
    cols = np.asarray(cols, dtype=np.int64)
    # weight columns that matter: supp(h) then any probed column outside it
    extra = np.setdiff1d(cols, K)
    used = np.concatenate([K, extra])
    pos = {c: i for i, c in enumerate(used.tolist())}
    sel = np.array([pos[c] for c in cols.tolist()], dtype=np.int64)
    hK = h[K]
    n = layer.out_dim
    out = np.empty((n_samples, cols.size))
    done, b = 0, 0
    while done < n_samples:
        size = min(batch, n_samples - done)
        rng = make_rng(derive_seed(seed, b))
        Wu = rng.standard_normal((size, n, used.size))
        if layer.dropout.mode == "bernoulli":
            mask = rng.random((size, n)) < layer.dropout.rho
        else:
            mask = np.argsort(rng.random((size, n)), axis=1) < layer.dropout.t
        x = np.maximum(layer.alpha * (Wu[:, :, : K.size] @ hK), 0.0) * mask
        out[done: done + size] = np.einsum("snc,sn->sc", Wu[:, :, sel], x)
        done += size
        b += 1
    return out


def _resolve_h(hidden: HiddenSpec, h):
    return default_hidden(hidden) if h is None else np.asarray(h, dtype=np.float64)


def mc_pairwise_cov(layer: LayerGenSpec, hidden: HiddenSpec, i: int, j: int, n_samples: int, seed,
                    h=None) -> McEstimate:
    """Covariance of h_hat_i and h_hat_j over (W, mask), conditioned on h."""
    if i == j:
        raise ValueError("pairwise covariance needs i != j")
    if n_samples < 10_000:
        raise ValueError(f"need at least 10000 samples, got {n_samples}")
    h = _resolve_h(hidden, h)
    if not np.any(h):
        return McEstimate(0.0, 0.0, n_samples)
    S = sample_h_hat(layer, h, [i, j], n_samples, seed)
    D = S - S.mean(axis=0)
    prod = D[:, 0] * D[:, 1]
    n = n_samples
    return McEstimate(float(prod.sum() / (n - 1)), float(prod.std(ddof=1) / math.sqrt(n)), n)


def mc_linear_comb(layer: LayerGenSpec, hidden: HiddenSpec, u, n_samples: int, seed, h=None) -> McEstimate:
    """E[(u_K . (h_hat_K - E h_hat_K))^2] with u supported on K = supp(h)."""
    if n_samples < 10_000:
        raise ValueError(f"need at least 10000 samples, got {n_samples}")
    h = _resolve_h(hidden, h)
    u = np.asarray(u, dtype=np.float64)
    if u.shape != h.shape:
        raise ValueError(f"u has shape {u.shape}, expected {h.shape}")
    K = np.flatnonzero(h)
    off = np.ones(h.size, dtype=bool)
    off[K] = False
    if np.any(u[off] != 0):
        raise ValueError("u must be supported on supp(h)")
    if not np.any(u) or K.size == 0:
        return McEstimate(0.0, 0.0, n_samples)
    S = sample_h_hat(layer, h, K, n_samples, seed)
    q = ((S - S.mean(axis=0)) @ u[K]) ** 2
    return McEstimate.from_samples(q * n_samples / (n_samples - 1))


def variance_check(layer: LayerGenSpec, hidden: HiddenSpec, i: int, n_samples: int, seed, h=None) -> McEstimate:
    """Sample variance of h_hat_i over (W, mask), conditioned on h."""
    if n_samples < 10_000:
        raise ValueError(f"need at least 10000 samples, got {n_samples}")
    h = _resolve_h(hidden, h)
    if not np.any(h):
        return McEstimate(0.0, 0.0, n_samples)
    s = sample_h_hat(layer, h, [i], n_samples, seed)[:, 0]
    d2 = (s - s.mean()) ** 2
    return McEstimate.from_samples(d2 * n_samples / (n_samples - 1))
