import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from zbridge import _kernels as K

pytestmark = pytest.mark.skipif(not K.HAS_NUMBA, reason="numba not installed")

finite = st.floats(-50, 50, allow_nan=False)


class TestFlavoursAgree:
    @given(arrays(np.float64, st.integers(1, 300), elements=finite))
    def test_logmeanexp_var(self, logw):
        a, b = K.logmeanexp_var_np(logw), K.logmeanexp_var_nb(logw)
        assert a[0] == pytest.approx(b[0], rel=1e-12, abs=1e-12)
        if np.isfinite(a[1]) or np.isfinite(b[1]):
            assert a[1] == pytest.approx(b[1], rel=1e-9, abs=1e-9)

    @given(arrays(np.float64, st.integers(1, 200), elements=finite),
           arrays(np.float64, st.integers(1, 12), elements=finite),
           st.floats(0.05, 5.0))
    def test_mixture(self, x, c, sigma):
        np.testing.assert_allclose(K.mixture_logpdf_np(x, c, sigma), K.mixture_logpdf_nb(x, c, sigma),
                                   rtol=1e-12, atol=1e-10)

    @given(arrays(np.float64, st.integers(1, 50), elements=st.floats(0, 1)), st.integers(1, 200),
           st.floats(0, 0.999999))
    def test_systematic(self, w, n, frac):
        if w.sum() == 0:
            w = np.ones_like(w)
        w = w / w.sum()
        u0 = frac / n
        np.testing.assert_array_equal(K.systematic_indices_np(w, u0, n), K.systematic_indices_nb(w, u0, n))

    @given(arrays(np.float64, st.integers(1, 100), elements=finite), st.integers(0, 100))
    def test_drift(self, x, t):
        np.testing.assert_allclose(K.kitagawa_drift_np(x, float(t)), K.kitagawa_drift_nb(x, float(t)), rtol=1e-14)

    def test_cumtrapz(self):
        x = np.linspace(-7, 7, 2001)
        y = np.exp(-x * x)
        np.testing.assert_allclose(K.cumtrapz_np(y, x), K.cumtrapz_nb(y, x), rtol=1e-12, atol=1e-15)
        assert K.cumtrapz_nb(y, x)[-1] == pytest.approx(math.sqrt(math.pi), rel=1e-6)


class TestKernelValues:
    def test_logmeanexp_matches_direct(self):
        w = np.array([1.0, 2.0, 3.0, 4.0])
        lm, lv = K.logmeanexp_var(np.log(w))
        assert math.exp(lm) == pytest.approx(2.5)
        assert math.exp(lv) == pytest.approx(np.var(w, ddof=1))

    def test_logmeanexp_all_zero_weights(self):
        assert K.logmeanexp_var(np.full(3, -np.inf)) == (-np.inf, -np.inf)

    def test_logmeanexp_survives_overflow(self):
        lm, _ = K.logmeanexp_var(np.array([1000.0, 1000.0]))
        assert lm == pytest.approx(1000.0)

    def test_single_component_mixture_is_normal(self):
        from scipy.stats import norm

        x = np.linspace(-4, 4, 9)
        np.testing.assert_allclose(K.mixture_logpdf(x, np.array([0.5]), 1.3), norm.logpdf(x, 0.5, 1.3), rtol=1e-13)

    def test_kitagawa_drift_at_zero(self):
        assert K.kitagawa_drift(np.zeros(1), 0.0)[0] == 8.0


def _backend_of(env_value):
    env = dict(os.environ, ZBRIDGE_BACKEND=env_value)
    return subprocess.run([sys.executable, "-c", "import zbridge._kernels as k; print(k.BACKEND)"],
                          env=env, capture_output=True, text=True)


@pytest.mark.parametrize("value", ["numpy", "numba", "NUMPY"])
def test_env_flag_selects_backend(value):
    out = _backend_of(value)
    assert out.returncode == 0
    assert out.stdout.strip() == value.lower()


def test_env_flag_rejects_unknown_backend():
    out = _backend_of("cuda")
    assert out.returncode != 0
    assert "ZBRIDGE_BACKEND" in out.stderr


def test_exported_names_follow_backend():
    suffix = "_nb" if K.BACKEND == "numba" else "_np"
    for name in K._FLAVOURS:
        assert getattr(K, name) is getattr(K, name + suffix)
