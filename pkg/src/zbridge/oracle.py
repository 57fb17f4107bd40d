"""Ground-truth engine: adaptive 1-D quadrature along the homotopy path.

Only tests, acceptance runs and the ``oracle_*`` CSV columns use this module;
no estimator depends on it.

Infinite ends are mapped to a finite parameter ``u`` via ``x = c + L tan(pi u / 2)``
before adaptive Gauss-Kronrod (G7/K15) bisection.  Integrands are handled in
log form and rescaled by a common offset so that very small or very large
normalisers do not underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .density import DensityPair, HomotopyPath, log_ratio

__all__ = [
    "QuadratureSpec",
    "OracleFailure",
    "integrate",
    "integrate_log",
    "log_z_of_exponent",
    "z_of_exponent",
    "z_of_s",
    "ode_path_check",
    "moment_of_theta",
    "fraction_in_window",
]

# QUADPACK qk15 abscissae / weights (non-negative half; index 7 is the centre)
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_W_K = np.concatenate([_WGK[:-1], _WGK[::-1]])
_W_G = np.zeros(15)
_W_G[[1, 3, 5]] = _WG[:3]
_W_G[[13, 11, 9]] = _WG[:3]
_W_G[7] = _WG[3]


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances and domain for the oracle.

    ``domain`` overrides the pair's support; ``scale`` overrides the tangent
    map's length scale ``L``.
    """

    abs_tol: float = 1e-300
    rel_tol: float = 1e-11
    max_subdivisions: int = 5000
    domain: Optional[tuple] = None
    scale: Optional[float] = None
    initial_intervals: int = 32

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("abs_tol and rel_tol must be > 0")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")


class OracleFailure(RuntimeError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate={estimate!r}, error bound={error!r})")
        self.estimate = estimate
        self.error = error


class _Map:
    """Map between ``x`` on (a, b) and ``u`` on a finite interval."""

    def __init__(self, a: float, b: float, scale: float):
        self.a, self.b, self.L = a, b, scale
        if a >= b:
            raise ValueError(f"empty integration domain ({a}, {b})")
        if math.isinf(a) and math.isinf(b):
            self.kind, self.u_lo, self.u_hi, self.c = "both", -1.0, 1.0, 0.0
        elif math.isinf(b):
            self.kind, self.u_lo, self.u_hi = "upper", 0.0, 1.0
        elif math.isinf(a):
            self.kind, self.u_lo, self.u_hi = "lower", 0.0, 1.0
        else:
            self.kind, self.u_lo, self.u_hi = "finite", a, b

    def x_and_logjac(self, u):
        if self.kind == "finite":
            return u, np.zeros_like(u)
        t = np.tan(0.5 * math.pi * u)
        logjac = math.log(0.5 * math.pi * self.L) - 2.0 * np.log(np.abs(np.cos(0.5 * math.pi * u)))
        if self.kind == "both":
            return self.c + self.L * t, logjac
        if self.kind == "upper":
            return self.a + self.L * t, logjac
        return self.b - self.L * t, logjac

    def u_of_x(self, x: float) -> float:
        if self.kind == "finite":
            return x
        if self.kind == "both":
            return (2.0 / math.pi) * math.atan((x - self.c) / self.L)
        if self.kind == "upper":
            return (2.0 / math.pi) * math.atan((x - self.a) / self.L)
        return (2.0 / math.pi) * math.atan((self.b - x) / self.L)


def _gk15(fun_u, lo, hi):
    """Apply G7/K15 on every interval ``[lo_i, hi_i]`` at once."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    u = mid[:, None] + half[:, None] * _NODES[None, :]
    vals = fun_u(u.ravel()).reshape(u.shape)
    k = half * (vals @ _W_K)
    g = half * (vals @ _W_G)
    return k, np.abs(k - g)


def _adaptive(fun_u, breaks: np.ndarray, spec: QuadratureSpec):
    lo, hi = breaks[:-1].copy(), breaks[1:].copy()
    est, err = _gk15(fun_u, lo, hi)
    n_splits = 0
    while True:
        total = est.sum()
        total_err = err.sum()
        target = max(spec.abs_tol, spec.rel_tol * abs(total))
        if total_err <= target:
            return float(total), float(total_err)
        bad = err > target / err.size
        if not np.any(bad):
            bad = err == err.max()
        n_bad = int(bad.sum())
        if n_splits + n_bad > spec.max_subdivisions:
            raise OracleFailure("quadrature did not converge", float(total), float(total_err))
        n_splits += n_bad
        blo, bhi = lo[bad], hi[bad]
        bmid = 0.5 * (blo + bhi)
        new_lo = np.concatenate([blo, bmid])
        new_hi = np.concatenate([bmid, bhi])
        e2, r2 = _gk15(fun_u, new_lo, new_hi)
        keep = ~bad
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        est = np.concatenate([est[keep], e2])
        err = np.concatenate([err[keep], r2])


def _setup(domain, scale, breakpoints, spec):
    a, b = spec.domain if spec.domain is not None else domain
    L = spec.scale if spec.scale is not None else scale
    mp = _Map(float(a), float(b), float(L))
    n0 = max(1, spec.initial_intervals)
    base = np.linspace(mp.u_lo, mp.u_hi, n0 + 1)
    extra = [mp.u_of_x(x) for x in breakpoints if a < x < b]
    breaks = np.unique(np.concatenate([base, np.asarray(extra, dtype=float)]))
    return mp, breaks


def _log_integrand_u(mp: _Map, log_f):
    def lf(u):
        x, logjac = mp.x_and_logjac(u)
        with np.errstate(invalid="ignore", over="ignore"):
            v = log_f(x) + logjac
        return np.where(np.isnan(v), -np.inf, v)

    return lf


def integrate_log(
    log_f: Callable[[np.ndarray], np.ndarray],
    domain: tuple = (-math.inf, math.inf),
    spec: QuadratureSpec = QuadratureSpec(),
    scale: float = 1.0,
    breakpoints: Sequence[float] = (),
    g: Optional[Callable[[np.ndarray], np.ndarray]] = None,
):
    """Integrate ``g(x) * exp(log_f(x))`` over ``domain``.

    Returns ``(value, abs_error, shift)`` where the true integral is
    ``value * exp(shift)``; ``shift`` is the probe maximum of the log integrand.
    """
    mp, breaks = _setup(domain, scale, breakpoints, spec)
    lf = _log_integrand_u(mp, log_f)
    probe = np.linspace(breaks[0], breaks[-1], 4001)[1:-1]
    probe = np.concatenate([probe, breaks[1:-1]])
    shift = float(np.max(lf(probe))) if probe.size else 0.0
    if not np.isfinite(shift):
        shift = 0.0

    if g is None:
        def fun_u(u):
            return np.exp(lf(u) - shift)
    else:
        def fun_u(u):
            x, _ = mp.x_and_logjac(u)
            return g(x) * np.exp(lf(u) - shift)

    val, err = _adaptive(fun_u, breaks, spec)
    return val, err, shift


def integrate(f, a, b, spec: QuadratureSpec = QuadratureSpec(), scale: float = 1.0, breakpoints=()):
    """Plain adaptive integral of a vectorised ``f`` over ``(a, b)``; returns ``(value, error)``."""
    mp, breaks = _setup((a, b), scale, breakpoints, spec)

    def fun_u(u):
        x, logjac = mp.x_and_logjac(u)
        with np.errstate(over="ignore", invalid="ignore"):
            v = f(x) * np.exp(logjac)
        return np.where(np.isfinite(v), v, 0.0)

    return _adaptive(fun_u, breaks, spec)


def _require_1d(pair: DensityPair):
    if pair.dim != 1:
        raise ValueError("the quadrature oracle is 1-D only")


def _log_theta_fn(pair: DensityPair, beta: float):
    def lf(x):
        if beta == 0.0:
            return pair.log_p(x)
        lr = log_ratio(pair, x)
        lp = pair.log_p(x)
        with np.errstate(invalid="ignore"):
            v = lp + beta * lr
        return np.where(np.isneginf(lp) | np.isneginf(lr), -np.inf, v)

    return lf


def log_z_of_exponent(pair: DensityPair, beta: float, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``log of integral q**beta * p**(1 - beta) dx``.

    ``beta`` may exceed 1; the variance model needs that extension.
    """
    _require_1d(pair)
    val, _, shift = integrate_log(
        _log_theta_fn(pair, float(beta)), pair.support, spec, pair.scale, pair.breakpoints
    )
    return math.log(val) + shift if val > 0 else -math.inf


def z_of_exponent(pair: DensityPair, beta: float, spec: QuadratureSpec = QuadratureSpec()) -> float:
    return math.exp(log_z_of_exponent(pair, beta, spec))


def z_of_s(pair: DensityPair, path: HomotopyPath, s: float, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``Z_{h(s)}`` by quadrature."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    return z_of_exponent(pair, path.h_at(s), spec)


def moment_of_theta(pair: DensityPair, path: HomotopyPath, s: float, g, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``E[g(X)]`` under the normalised ``theta_{h(s)}``."""
    _require_1d(pair)
    lf = _log_theta_fn(pair, path.h_at(s))
    z, _, sh_z = integrate_log(lf, pair.support, spec, pair.scale, pair.breakpoints)
    num, _, sh_n = integrate_log(lf, pair.support, spec, pair.scale, pair.breakpoints, g=g)
    return num / z * math.exp(sh_n - sh_z)


def fraction_in_window(pair: DensityPair, beta: float, lo: float, hi: float,
                       spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Mass of the normalised ``theta`` at exponent ``beta`` inside ``[lo, hi]``."""
    lf = _log_theta_fn(pair, beta)
    z, _, sh_z = integrate_log(lf, pair.support, spec, pair.scale, pair.breakpoints)
    inside, _, sh_i = integrate_log(lf, (lo, hi), QuadratureSpec(rel_tol=spec.rel_tol))
    return inside / z * math.exp(sh_i - sh_z)


def ode_path_check(pair: DensityPair, grid, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Largest defect in ``dZ/ds = <log q/p>_s Z_s`` over the interior of ``grid``.

    The left side is a central difference of quadrature ``Z``; the right side is
    the quadrature of ``log(q/p) q**s p**(1-s)``.  The defect at each point is
    taken relative to the larger of ``|dZ/ds|`` and ``Z_s``.
    """
    _require_1d(pair)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size < 3:
        raise ValueError("grid needs at least 3 points")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    z = np.array([z_of_exponent(pair, s, spec) for s in grid])

    def lr_finite(x):
        v = log_ratio(pair, x)
        return np.where(np.isfinite(v), v, 0.0)

    worst = 0.0
    for i in range(1, grid.size - 1):
        lhs = (z[i + 1] - z[i - 1]) / (grid[i + 1] - grid[i - 1])
        val, _, shift = integrate_log(
            _log_theta_fn(pair, float(grid[i])), pair.support, spec, pair.scale, pair.breakpoints, g=lr_finite
        )
        rhs = val * math.exp(shift)
        denom = max(abs(rhs), z[i])
        worst = max(worst, abs(lhs - rhs) / denom)
    return worst
