"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting the environment
variable ``SHADOWNET_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

import numpy as np

from . import _fallback
from .errors import NumericFailure

_kernels = None
if not os.environ.get("SHADOWNET_PURE_PYTHON"):
    try:
        from . import _kernels
    except ImportError:  # extension not built
        _kernels = None

BACKEND = "cython" if _kernels is not None else "python"
_impl = _kernels if _kernels is not None else _fallback


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for default)."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        if _kernels is None:
            raise ImportError("compiled kernels are not available")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def round_robin_schedule(n: int) -> np.ndarray:
    """Pair schedule of the circle method: (rounds, n_pairs, 2), padded with -1.

    Each round holds disjoint pairs and every (p, q), p < q, appears once.
    """
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p >= n or q >= n:
                pairs.append((-1, -1))
            else:
                pairs.append((min(p, q), max(p, q)))
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    return np.array(rounds, dtype=np.int_).reshape(m - 1, m // 2, 2)


def quad_g_batch(a_values, sigma: float, tol: float = 1e-10, max_depth: int = 40, backend=None):
    """Batched adaptive Simpson for G; see the backend modules."""
    return get_backend(backend).quad_g_batch(a_values, float(sigma), float(tol), int(max_depth))


def jacobi_eigvalsh(A, tol: float = 1e-10, max_sweeps: int = 100, backend=None) -> np.ndarray:
    """Eigenvalues of a symmetric matrix by cyclic Jacobi, unsorted.

    Converged when the off-diagonal Frobenius norm is at most tol times
    the full Frobenius norm. Raises NumericFailure after max_sweeps.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12 * (np.abs(A).max() + 1e-300)):
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy()
    sched = np.ascontiguousarray(round_robin_schedule(n))
    diag, sweeps, ok = get_backend(backend).jacobi_sweeps(A, sched, float(tol), int(max_sweeps))
    if not ok:
        raise NumericFailure(f"Jacobi did not converge within {max_sweeps} sweeps (n={n})")
    return diag
