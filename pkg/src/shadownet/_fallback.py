"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Jacobi rotates every disjoint pair of a round at once. Rotations on
disjoint pairs commute, so this matches the sequential compiled loop up
to rounding. The quadrature runs one work-list of intervals for the
whole batch.
"""
import numpy as np

_INV_SQRT_2PI = 0.3989422804014327


def _g_integrand(a, y, sigma):
    u = y / sigma
    return (a - y) ** 2 * (_INV_SQRT_2PI / sigma) * np.exp(-0.5 * u * u)


def quad_g_batch(a_values, sigma: float, tol: float = 1e-10, max_depth: int = 40):
    """G(a) = int_0^a (a - y)^2 phi_sigma(y) dy for each a, signed for a < 0."""
    shape = np.shape(a_values)
    a_all = np.asarray(a_values, dtype=np.float64).ravel()
    out = np.zeros(a_all.size)
    idx = np.flatnonzero(a_all != 0.0)
    a = a_all[idx]
    lo = np.minimum(a, 0.0)
    hi = np.maximum(a, 0.0)
    flo = _g_integrand(a, lo, sigma)
    fhi = _g_integrand(a, hi, sigma)
    fmid = _g_integrand(a, 0.5 * (lo + hi), sigma)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    eps = np.full(idx.size, float(tol))
    depth = np.full(idx.size, int(max_depth))
    while idx.size:
        mid = 0.5 * (lo + hi)
        flm = _g_integrand(a, 0.5 * (lo + mid), sigma)
        frm = _g_integrand(a, 0.5 * (mid + hi), sigma)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - whole
        done = (depth <= 0) | (np.abs(delta) <= 15.0 * eps)
        np.add.at(out, idx[done], (left + right + delta / 15.0)[done])
        go = ~done
        # children: left half then right half
        idx = np.concatenate([idx[go], idx[go]])
        a = np.concatenate([a[go], a[go]])
        lo, hi = np.concatenate([lo[go], mid[go]]), np.concatenate([mid[go], hi[go]])
        flo, fmid, fhi = (np.concatenate([flo[go], fmid[go]]),
                          np.concatenate([flm[go], frm[go]]),
                          np.concatenate([fmid[go], fhi[go]]))
        whole = np.concatenate([left[go], right[go]])
        eps = np.concatenate([eps[go], eps[go]]) * 0.5
        depth = np.concatenate([depth[go], depth[go]]) - 1
    out[a_all < 0.0] *= -1.0
    return out.reshape(shape)


def jacobi_sweeps(A, schedule, tol: float, max_sweeps: int):
    """Diagonalize symmetric A with cyclic Jacobi; returns (diag, sweeps, converged)."""
    a = np.array(A, dtype=np.float64, copy=True)
    n = a.shape[0]
    frob = np.sqrt(np.sum(a * a))
    rounds = []
    for rnd in np.asarray(schedule):
        rnd = rnd[rnd[:, 0] >= 0]
        rounds.append((rnd[:, 0].copy(), rnd[:, 1].copy()))
    offmask = ~np.eye(n, dtype=bool)
    sweep = 0
    while True:
        off = np.sqrt(np.sum(a[offmask] ** 2))
        if off <= tol * frob:
            return np.diagonal(a).copy(), sweep, True
        if sweep >= max_sweeps:
            return np.diagonal(a).copy(), sweep, False
        for P, Q in rounds:
            apq = a[P, Q]
            live = apq != 0.0
            if not live.any():
                continue
            P, Q, apq = P[live], Q[live], apq[live]
            # a negligible pivot overflows theta and yields t = 0, as in the compiled loop
            with np.errstate(over="ignore"):
                theta = (a[Q, Q] - a[P, P]) / (2.0 * apq)
                t = np.sign(theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            colp, colq = a[:, P].copy(), a[:, Q].copy()
            a[:, P] = c * colp - s * colq
            a[:, Q] = s * colp + c * colq
            rowp, rowq = a[P, :].copy(), a[Q, :].copy()
            a[P, :] = c[:, None] * rowp - s[:, None] * rowq
            a[Q, :] = s[:, None] * rowp + c[:, None] * rowq
            a[P, Q] = 0.0
            a[Q, P] = 0.0
        sweep += 1
