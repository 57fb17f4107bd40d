"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The backend is picked once at import time.  Set ``ZBRIDGE_BACKEND=numpy`` to
force the numpy path (also used automatically when numba is missing).  Both
flavours are always importable as ``<name>_np`` / ``<name>_nb`` so tests and
the benchmark can compare them directly.
"""

import math
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


BACKEND = os.environ.get("ZBRIDGE_BACKEND", "numba" if HAS_NUMBA else "numpy").lower()
if BACKEND not in ("numba", "numpy"):
    raise ImportError(f"ZBRIDGE_BACKEND must be 'numba' or 'numpy', got {BACKEND!r}")
if BACKEND == "numba" and not HAS_NUMBA:
    BACKEND = "numpy"

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# log-mean-exp of stage log-weights, plus the variance of the raw weights
# ---------------------------------------------------------------------------

def logmeanexp_var_np(logw):
    """Return ``(log mean exp(logw), log var exp(logw))``.

    The variance is the unbiased sample variance and is returned in log form
    because raw stage weights can overflow.  ``-inf`` entries are zero weights.
    """
    logw = np.asarray(logw, dtype=np.float64)
    n = logw.shape[0]
    m = np.max(logw)
    if not np.isfinite(m):
        return -np.inf, -np.inf
    w = np.exp(logw - m)
    mean = w.mean()
    if n > 1:
        var = np.sum((w - mean) ** 2) / (n - 1)
    else:
        var = 0.0
    log_var = math.log(var) + 2.0 * m if var > 0.0 else -np.inf
    return math.log(mean) + m, log_var


@njit(cache=True)
def logmeanexp_var_nb(logw):
    n = logw.shape[0]
    m = -np.inf
    for i in range(n):
        if logw[i] > m:
            m = logw[i]
    if not np.isfinite(m):
        return -np.inf, -np.inf
    w = np.empty(n)
    s = 0.0
    for i in range(n):
        w[i] = math.exp(logw[i] - m)
        s += w[i]
    mean = s / n
    ss = 0.0
    for i in range(n):
        d = w[i] - mean
        ss += d * d
    var = ss / (n - 1) if n > 1 else 0.0
    log_var = math.log(var) + 2.0 * m if var > 0.0 else -np.inf
    return math.log(mean) + m, log_var


# ---------------------------------------------------------------------------
# equal-weight Gaussian mixture log-density (the filter's hot loop)
# ---------------------------------------------------------------------------

def mixture_logpdf_np(x, centers, sigma):
    x = np.asarray(x, dtype=np.float64)
    z = (x[:, None] - centers[None, :]) / sigma
    a = -0.5 * z * z
    amax = a.max(axis=1)
    lse = amax + np.log(np.exp(a - amax[:, None]).sum(axis=1))
    return lse - math.log(centers.shape[0]) - math.log(sigma) - 0.5 * _LOG_2PI


@njit(cache=True)
def mixture_logpdf_nb(x, centers, sigma):
    n = x.shape[0]
    k = centers.shape[0]
    out = np.empty(n)
    buf = np.empty(k)
    const = -math.log(k) - math.log(sigma) - 0.5 * _LOG_2PI
    inv = 1.0 / sigma
    for i in range(n):
        amax = -np.inf
        for j in range(k):
            z = (x[i] - centers[j]) * inv
            a = -0.5 * z * z
            buf[j] = a
            if a > amax:
                amax = a
        s = 0.0
        for j in range(k):
            s += math.exp(buf[j] - amax)
        out[i] = amax + math.log(s) + const
    return out


# ---------------------------------------------------------------------------
# systematic resampling
# ---------------------------------------------------------------------------

def systematic_indices_np(weights, u0, n):
    positions = u0 + np.arange(n) / n
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right").astype(np.int64)


@njit(cache=True)
def systematic_indices_nb(weights, u0, n):
    m = weights.shape[0]
    out = np.empty(n, dtype=np.int64)
    cum = weights[0]
    i = 0
    for j in range(n):
        pos = u0 + j / n
        while cum <= pos and i < m - 1:
            i += 1
            cum += weights[i]
        out[j] = i
    return out


# ---------------------------------------------------------------------------
# Kitagawa-type drift
# ---------------------------------------------------------------------------

def kitagawa_drift_np(x, t):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x + 25.0 * x / (1.0 + x * x) + 8.0 * np.cos(1.2 * t)


@njit(cache=True)
def kitagawa_drift_nb(x, t):
    out = np.empty(x.shape[0])
    c = 8.0 * math.cos(1.2 * t)
    for i in range(x.shape[0]):
        xi = x[i]
        out[i] = 0.5 * xi + 25.0 * xi / (1.0 + xi * xi) + c
    return out


# ---------------------------------------------------------------------------
# trapezoid cumulative integral on a grid
# ---------------------------------------------------------------------------

def cumtrapz_np(y, x):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(x))
    return out


@njit(cache=True)
def cumtrapz_nb(y, x):
    out = np.empty(y.shape[0])
    out[0] = 0.0
    acc = 0.0
    for i in range(1, y.shape[0]):
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1])
        out[i] = acc
    return out


_FLAVOURS = ("logmeanexp_var", "mixture_logpdf", "systematic_indices", "kitagawa_drift", "cumtrapz")

if BACKEND == "numba":
    logmeanexp_var = logmeanexp_var_nb
    mixture_logpdf = mixture_logpdf_nb
    systematic_indices = systematic_indices_nb
    kitagawa_drift = kitagawa_drift_nb
    cumtrapz = cumtrapz_nb
else:
    logmeanexp_var = logmeanexp_var_np
    mixture_logpdf = mixture_logpdf_np
    systematic_indices = systematic_indices_np
    kitagawa_drift = kitagawa_drift_np
    cumtrapz = cumtrapz_np
