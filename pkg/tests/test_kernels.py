import numpy as np
import pytest
from scipy.stats import norm

from shadownet import kernels
from shadownet.errors import NumericFailure
from shadownet.kernels import jacobi_eigvalsh, quad_g_batch, round_robin_schedule


def g_closed_form(a, sigma):
    """int_0^a (a-y)^2 phi_sigma(y) dy by integrating the polynomial moments of the Gaussian."""
    P = norm.cdf(a / sigma) - 0.5
    phi0 = norm.pdf(0.0, scale=sigma)
    pa = norm.pdf(a, scale=sigma)
    return a * a * P - 2 * a * sigma ** 2 * (phi0 - pa) + sigma ** 2 * P - sigma ** 2 * a * pa


class TestSchedule:
    @pytest.mark.parametrize("n", [2, 3, 4, 7, 10])
    def test_every_pair_once_and_rounds_disjoint(self, n):
        sched = round_robin_schedule(n)
        pairs = []
        for rnd in sched:
            live = [tuple(p) for p in rnd if p[0] >= 0]
            flat = [i for p in live for i in p]
            assert len(flat) == len(set(flat))
            pairs += live
        assert sorted(pairs) == [(p, q) for p in range(n) for q in range(p + 1, n)]


class TestQuadG:
    @pytest.mark.parametrize("sigma", [1.0, 10.0, 100.0])
    def test_matches_closed_form(self, backend, sigma):
        a = np.linspace(-20, 20, 41)
        g = quad_g_batch(a, sigma, backend=backend)
        np.testing.assert_allclose(g, g_closed_form(a, sigma), rtol=1e-9, atol=1e-9)

    def test_zero_and_sign(self, backend):
        g = quad_g_batch(np.array([0.0, 2.0, -2.0]), 3.0, backend=backend)
        assert g[0] == 0.0 and g[1] > 0 and g[2] < 0

    def test_backends_agree(self):
        if kernels.BACKEND != "cython":
            pytest.skip("compiled kernels not built")
        a = np.random.default_rng(1).normal(0, 5, 500)
        np.testing.assert_allclose(quad_g_batch(a, 7.0, backend="cython"), quad_g_batch(a, 7.0, backend="python"),
                                   rtol=1e-12, atol=1e-14)

    def test_preserves_shape(self, backend):
        assert quad_g_batch(np.ones((3, 2)), 2.0, backend=backend).shape == (3, 2)


class TestJacobi:
    @pytest.mark.parametrize("n", [1, 2, 3, 8, 33])
    def test_matches_numpy(self, backend, n, rng):
        X = rng.standard_normal((n, n))
        A = X @ X.T
        ev = np.sort(jacobi_eigvalsh(A, backend=backend))
        np.testing.assert_allclose(ev, np.linalg.eigvalsh(A), rtol=0, atol=1e-10 * np.abs(A).max())

    def test_diagonal_input(self, backend):
        ev = jacobi_eigvalsh(np.diag([3.0, 1.0, 2.0]), backend=backend)
        np.testing.assert_array_equal(ev, [3.0, 1.0, 2.0])

    def test_backends_agree(self, rng):
        if kernels.BACKEND != "cython":
            pytest.skip("compiled kernels not built")
        X = rng.standard_normal((40, 30))
        A = X.T @ X
        np.testing.assert_allclose(np.sort(jacobi_eigvalsh(A, backend="cython")),
                                   np.sort(jacobi_eigvalsh(A, backend="python")), rtol=1e-12)

    def test_nonconvergence_raises(self, backend, rng):
        X = rng.standard_normal((12, 12))
        with pytest.raises(NumericFailure):
            jacobi_eigvalsh(X @ X.T, tol=1e-300, max_sweeps=1, backend=backend)

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError):
            jacobi_eigvalsh(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            kernels.get_backend("fortran")


def test_env_switch_selects_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, SHADOWNET_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from shadownet import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == "python"
