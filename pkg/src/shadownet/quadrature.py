"""Scalar adaptive Simpson quadrature for smooth integrands."""
import math


def adaptive_simpson(f, lo: float, hi: float, tol: float = 1e-10, max_depth: int = 40) -> float:
    """Integrate f over [lo, hi] to roughly absolute tolerance ``tol``.

    Uses the Richardson-corrected recursion: a panel is accepted when the
    two half-panel estimates differ from the whole by at most 15*tol, with
    tol halved at every split. Recursion stops at ``max_depth``.
    """
    if lo == hi:
        return 0.0
    if hi < lo:
        return -adaptive_simpson(f, hi, lo, tol, max_depth)
    flo, fhi = f(lo), f(hi)
    mid = 0.5 * (lo + hi)
    fmid = f(mid)
    whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)
    # explicit stack keeps deep refinements off the Python call stack
    total = 0.0
    stack = [(lo, hi, flo, fmid, fhi, whole, tol, max_depth)]
    while stack:
        a, b, fa, fm, fb, s, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        flm = f(0.5 * (a + m))
        frm = f(0.5 * (m + b))
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - s
        if depth <= 0 or math.fabs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((m, b, fm, frm, fb, right, 0.5 * eps, depth - 1))
            stack.append((a, m, fa, flm, fm, left, 0.5 * eps, depth - 1))
    return total
