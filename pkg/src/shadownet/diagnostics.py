"""Random-like weight diagnostics: entry moments, bias uniformity and the
singular spectrum against the quarter-circle and Marchenko-Pastur laws."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import jacobi_eigvalsh
from .quadrature import adaptive_simpson

UNIFORM_RATIO = 5.0


@dataclass(frozen=True)
class MomentReport:
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    n_entries: int

    @property
    def skew_z(self) -> float:
        """Skewness over its large-sample standard error sqrt(6/n)."""
        return self.skewness / math.sqrt(6.0 / self.n_entries)

    @property
    def kurtosis_z(self) -> float:
        """Excess kurtosis over sqrt(24/n)."""
        return self.excess_kurtosis / math.sqrt(24.0 / self.n_entries)


@dataclass(frozen=True)
class SpectrumReport:
    singular_values_scaled: np.ndarray  # descending, divided by sqrt(max(rows, cols))
    ks_distance: float
    aspect_ratio: float


@dataclass(frozen=True)
class HistogramData:
    bin_edges: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class BiasReport:
    ratio: float
    uniform_like: bool


def weight_moments(W) -> MomentReport:
    """Sample mean, variance, skewness and excess kurtosis (m4/m2^2 - 3).

    Skewness and kurtosis are reported as 0 for a constant input.
    """
    x = np.asarray(W, dtype=np.float64).ravel()
    if x.size < 4:
        raise ValueError(f"need at least 4 entries, got {x.size}")
    mu = float(x.mean())
    d = x - mu
    m2 = float(np.mean(d * d))
    if m2 == 0.0:
        return MomentReport(mu, 0.0, 0.0, 0.0, x.size)
    m3 = float(np.mean(d ** 3))
    m4 = float(np.mean(d ** 4))
    return MomentReport(mu, m2, m3 / m2 ** 1.5, m4 / (m2 * m2) - 3.0, x.size)


def bias_uniformity(b) -> BiasReport:
    """|mean| / std of a bias vector; +inf when std is 0. Uniform-like at ratio >= 5."""
    v = np.asarray(b, dtype=np.float64).ravel()
    if v.size < 2:
        raise ValueError(f"need at least 2 entries, got {v.size}")
    sd = float(v.std())
    ratio = math.inf if sd == 0.0 else abs(float(v.mean())) / sd
    return BiasReport(ratio, ratio >= UNIFORM_RATIO)


def singular_values(W, tol: float = 1e-10, backend=None) -> np.ndarray:
    """Descending singular values from Jacobi on the smaller Gram matrix."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or min(W.shape) < 2:
        raise ValueError(f"need a matrix with at least 2 rows and columns, got shape {W.shape}")
    G = W.T @ W if W.shape[0] >= W.shape[1] else W @ W.T
    G = 0.5 * (G + G.T)
    ev = jacobi_eigvalsh(G, tol=tol, backend=backend)
    return np.sort(np.sqrt(np.maximum(ev, 0.0)))[::-1]


def singular_spectrum(W, tol: float = 1e-10, backend=None) -> SpectrumReport:
    W = np.asarray(W, dtype=np.float64)
    sv = singular_values(W, tol, backend) / math.sqrt(max(W.shape))
    aspect = min(W.shape) / max(W.shape)
    return SpectrumReport(sv, _ks(sv, aspect) if sv.size >= 8 else float("nan"), aspect)


def quarter_circle_cdf(s) -> np.ndarray | float:
    """CDF of the density sqrt(4 - s^2)/pi on [0, 2], clamped outside."""
    s_arr = np.clip(np.asarray(s, dtype=np.float64), 0.0, 2.0)
    out = (s_arr * np.sqrt(4.0 - s_arr * s_arr) / 2.0 + 2.0 * np.arcsin(s_arr / 2.0)) / math.pi
    out = np.clip(out, 0.0, 1.0)
    return float(out) if np.ndim(s) == 0 else out


def _mp_eig_cdf(lam: float, y: float, tol: float) -> float:
    """CDF of the Marchenko-Pastur law (ratio y, unit variance) at eigenvalue lam.

    With lam = a + (b - a)(1 - cos th)/2 the density times d lam becomes
    sqrt(...)^2 terms that stay bounded at both edges.
    """
    a = (1.0 - math.sqrt(y)) ** 2
    b = (1.0 + math.sqrt(y)) ** 2
    if lam <= a:
        return 0.0
    if lam >= b:
        return 1.0
    half = 0.5 * (b - a)

    def integrand(th):
        # sqrt((b-x)(x-a)) = half*sin(th) and dx = half*sin(th) dth
        if a == 0.0:
            # sin^2 / (1 - cos) = 1 + cos removes the 0/0 at th = 0
            return half * (1.0 + math.cos(th)) / (2.0 * math.pi * y)
        x = a + half * (1.0 - math.cos(th))
        return (half * math.sin(th)) ** 2 / (2.0 * math.pi * y * x)

    th_hi = math.acos(min(1.0, max(-1.0, 1.0 - (lam - a) / half)))
    return min(1.0, max(0.0, adaptive_simpson(integrand, 0.0, th_hi, tol)))


def mp_cdf(s, aspect_ratio: float, tol: float = 1e-8):
    """CDF of scaled singular values s = sigma / sqrt(max dim) under Marchenko-Pastur.

    Evaluated as F_MP(s^2) with the eigenvalue law integrated numerically.
    """
    if not 0.0 < aspect_ratio <= 1.0:
        raise ValueError(f"aspect_ratio must lie in (0, 1], got {aspect_ratio}")
    vals = [_mp_eig_cdf(float(v) ** 2 if v > 0 else 0.0, aspect_ratio, tol)
            for v in np.atleast_1d(np.asarray(s, dtype=np.float64))]
    return vals[0] if np.ndim(s) == 0 else np.array(vals)


def reference_cdf(s, aspect_ratio: float):
    if aspect_ratio == 1.0:
        return quarter_circle_cdf(s)
    return mp_cdf(s, aspect_ratio)


def _ks(values, aspect: float) -> float:
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    F = np.asarray(reference_cdf(v, aspect), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def spectrum_ks(report: SpectrumReport) -> float:
    """KS distance between the scaled singular values and the reference law."""
    if report.singular_values_scaled.size < 8:
        raise ValueError("KS distance needs at least 8 singular values")
    return _ks(report.singular_values_scaled, report.aspect_ratio)


def histogram(values, n_bins: int) -> HistogramData:
    """Equal-width bins over [min, max]; the last bin is closed on the right."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("histogram of an empty sample")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        edges = np.linspace(lo - 0.5, hi + 0.5, n_bins + 1)
    else:
        edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, v, side="right") - 1, 0, n_bins - 1)
    return HistogramData(edges, np.bincount(idx, minlength=n_bins).astype(np.int64))
