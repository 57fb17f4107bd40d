"""Density pairs, homotopy paths and the built-in analytic test cases.

Everything is carried in log space.  A *point set* for a ``dim == 1`` density is
a 1-D array of shape ``(n,)``; for ``dim == K > 1`` it is ``(n, K)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

__all__ = [
    "LogDensity",
    "DensityPair",
    "HomotopyPath",
    "HomotopyDensity",
    "IdentityH",
    "PowerH",
    "TabulatedH",
    "parse_h",
    "as_points",
    "log_unnorm_theta",
    "log_stage_weight",
    "log_ratio",
    "gaussian_pair",
    "bimodal_student_t",
    "rayleigh_posterior",
    "student_t_logpdf",
    "normal_logpdf",
    "estimate_ratio_bound",
    "builtin_densities",
    "make_pair",
]

_LOG_2PI = math.log(2.0 * math.pi)


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a float point set of dimension ``dim``.

    Raises ``ValueError`` on a dimension mismatch.
    """
    x = np.asarray(x, dtype=np.float64)
    if dim == 1:
        if x.ndim == 2 and x.shape[1] == 1:
            return x[:, 0]
        if x.ndim <= 1:
            return np.atleast_1d(x)
        raise ValueError(f"expected 1-D points, got array of shape {x.shape}")
    if x.ndim == 1 and x.shape[0] == dim:
        return x[None, :]
    if x.ndim == 2 and x.shape[1] == dim:
        return x
    raise ValueError(f"expected points of dimension {dim}, got array of shape {x.shape}")


@dataclass(frozen=True)
class LogDensity:
    """A vectorised log-density evaluator on ``R^dim``.

    ``func`` receives a point set and returns one value per point.  NaN results
    are mapped to ``-inf`` so zero-density regions never poison sums.
    """

    func: Callable[[np.ndarray], np.ndarray]
    dim: int = 1

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    def __call__(self, x) -> np.ndarray:
        pts = as_points(x, self.dim)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(self.func(pts), dtype=np.float64)
        return np.where(np.isnan(out), -np.inf, out)


@dataclass(frozen=True)
class DensityPair:
    """Target ``q`` (unnormalised) and reference ``p`` with known ``log Z0``.

    Optional hooks:

    ``log_ratio_fn``
        direct evaluation of ``log q - log p`` (e.g. a log-likelihood), used in
        place of the difference when given.
    ``sample_p``
        ``sample_p(n, rng)`` draws from ``p / Z0``.
    ``sample_theta``
        ``sample_theta(beta, n, rng)`` draws exactly from the normalised
        ``q**beta * p**(1 - beta)``.
    ``support``, ``scale``, ``breakpoints``
        hints for the 1-D quadrature oracle.
    """

    log_q: LogDensity
    log_p: LogDensity
    log_z0: float
    ratio_sup_bound: Optional[float] = None
    name: str = "custom"
    log_ratio_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    sample_p: Optional[Callable] = None
    sample_theta: Optional[Callable] = None
    support: tuple = (-math.inf, math.inf)
    scale: float = 1.0
    breakpoints: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.log_q.dim != self.log_p.dim:
            raise ValueError(f"log_q has dim {self.log_q.dim} but log_p has dim {self.log_p.dim}")
        if not math.isfinite(self.log_z0):
            raise ValueError("log_z0 must be finite")
        if self.ratio_sup_bound is not None:
            if not (math.isfinite(self.ratio_sup_bound) and self.ratio_sup_bound > 0):
                raise ValueError("ratio_sup_bound must be finite and positive")

    @property
    def dim(self) -> int:
        return self.log_q.dim


# ---------------------------------------------------------------------------
# homotopy maps h: [0, 1] -> [0, 1]
# ---------------------------------------------------------------------------

class IdentityH:
    def __call__(self, s):
        return np.asarray(s, dtype=np.float64) * 1.0

    def __repr__(self):
        return "identity"


class PowerH:
    """``h(s) = s**alpha``."""

    def __init__(self, alpha: float):
        if not alpha > 0:
            raise ValueError("alpha must be > 0")
        self.alpha = float(alpha)

    def __call__(self, s):
        return np.power(np.asarray(s, dtype=np.float64), self.alpha)

    def __repr__(self):
        return f"power:{self.alpha:g}"


class TabulatedH:
    """Monotone map given by a table, linearly interpolated.

    Flat stretches are allowed; they give zero stage increments.
    """

    def __init__(self, s_table, h_table):
        s_table = np.asarray(s_table, dtype=np.float64)
        h_table = np.asarray(h_table, dtype=np.float64)
        if s_table.shape != h_table.shape or s_table.ndim != 1 or s_table.size < 2:
            raise ValueError("s_table and h_table must be 1-D arrays of equal length >= 2")
        if s_table[0] != 0.0 or s_table[-1] != 1.0 or np.any(np.diff(s_table) <= 0):
            raise ValueError("s_table must increase strictly from 0 to 1")
        if h_table[0] != 0.0 or h_table[-1] != 1.0 or np.any(np.diff(h_table) < 0):
            raise ValueError("h_table must be non-decreasing from 0 to 1")
        self.s_table = s_table
        self.h_table = h_table

    def __call__(self, s):
        return np.interp(np.asarray(s, dtype=np.float64), self.s_table, self.h_table)

    def __repr__(self):
        return f"tabulated:{len(self.s_table)}"


def parse_h(spec: str):
    """Parse ``"identity"``, ``"power:<alpha>"`` or a bare exponent like ``"2"``."""
    spec = str(spec).strip().lower()
    if spec in ("identity", "s", "linear"):
        return IdentityH()
    if spec.startswith("power:"):
        return PowerH(float(spec.split(":", 1)[1]))
    try:
        return PowerH(float(spec))
    except ValueError:
        raise ValueError(f"unknown homotopy map {spec!r}") from None


@dataclass(frozen=True)
class HomotopyPath:
    """A map ``h`` together with a stage partition ``0 = s_0 < ... < s_M = 1``."""

    h: Callable = field(default_factory=IdentityH)
    stages: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 1.0, 11))
    allow_flat: bool = False

    def __post_init__(self):
        st = np.asarray(self.stages, dtype=np.float64)
        if st.ndim != 1 or st.size < 2:
            raise ValueError("need at least two stage points")
        if st[0] != 0.0 or st[-1] != 1.0:
            raise ValueError("stages must start at exactly 0 and end at exactly 1")
        if np.any(np.diff(st) <= 0):
            raise ValueError("stages must be strictly increasing")
        hv = self.h(st)
        if hv[0] != 0.0 or hv[-1] != 1.0:
            raise ValueError("h must satisfy h(0) = 0 and h(1) = 1")
        dh = np.diff(hv)
        if np.any(dh < 0) or (not self.allow_flat and np.any(dh <= 0)):
            raise ValueError("h must be strictly increasing along the partition")
        object.__setattr__(self, "stages", st)

    @classmethod
    def uniform(cls, M: int, h=None) -> "HomotopyPath":
        if M < 1:
            raise ValueError("M must be >= 1")
        return cls(h=h if h is not None else IdentityH(), stages=np.linspace(0.0, 1.0, M + 1))

    @property
    def M(self) -> int:
        return self.stages.size - 1

    def h_at(self, s) -> float:
        return float(self.h(s))

    def h_values(self) -> np.ndarray:
        return np.asarray(self.h(self.stages), dtype=np.float64)


def _check_s(s):
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")


def _theta_from_logs(lq, lp, hs: float):
    if hs == 0.0:
        return lp
    if hs == 1.0:
        return lq
    with np.errstate(invalid="ignore"):
        out = hs * lq + (1.0 - hs) * lp
    return np.where(np.isneginf(lq) | np.isneginf(lp), -np.inf, out)


def log_unnorm_theta(pair: DensityPair, path: HomotopyPath, s: float, x) -> np.ndarray:
    """``h(s) log q(x) + (1 - h(s)) log p(x)``, exactly ``log p`` at s=0, ``log q`` at s=1."""
    _check_s(s)
    return _theta_from_logs(pair.log_q(x), pair.log_p(x), path.h_at(s))


def log_ratio(pair: DensityPair, x) -> np.ndarray:
    """``log q(x) - log p(x)``, with ``-inf`` where q vanishes."""
    if pair.log_ratio_fn is not None:
        pts = as_points(x, pair.dim)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.asarray(pair.log_ratio_fn(pts), dtype=np.float64)
        return np.where(np.isnan(out), -np.inf, out)
    lq = pair.log_q(x)
    lp = pair.log_p(x)
    with np.errstate(invalid="ignore"):
        out = lq - lp
    return np.where(np.isneginf(lq), -np.inf, np.where(np.isneginf(lp), np.inf, out))


def log_stage_weight(pair: DensityPair, path: HomotopyPath, s: float, s_next: float, x) -> np.ndarray:
    """``(h(s_next) - h(s)) * (log q(x) - log p(x))``."""
    if not 0.0 <= s < s_next <= 1.0:
        raise ValueError(f"need 0 <= s < s_next <= 1, got s={s}, s_next={s_next}")
    dh = path.h_at(s_next) - path.h_at(s)
    lr = log_ratio(pair, x)
    if dh == 0.0:
        return np.zeros_like(lr)
    return dh * lr


@dataclass(frozen=True)
class HomotopyDensity:
    """The intermediate density ``theta_{h(s)}`` known up to ``Z_{h(s)}``."""

    pair: DensityPair
    path: HomotopyPath
    s: float

    def __post_init__(self):
        _check_s(self.s)

    @property
    def exponent(self) -> float:
        return self.path.h_at(self.s)

    def log_unnorm(self, x) -> np.ndarray:
        return log_unnorm_theta(self.pair, self.path, self.s, x)


# ---------------------------------------------------------------------------
# elementary log-densities
# ---------------------------------------------------------------------------

def normal_logpdf(x, mu, sigma):
    z = (x - mu) / sigma
    return -0.5 * z * z - math.log(sigma) - 0.5 * _LOG_2PI


def student_t_logpdf(x, df, loc=0.0, scale=1.0):
    z = (x - loc) / scale
    c = gammaln(0.5 * (df + 1)) - gammaln(0.5 * df) - 0.5 * math.log(df * math.pi) - math.log(scale)
    return c - 0.5 * (df + 1) * np.log1p(z * z / df)


# ---------------------------------------------------------------------------
# built-in pairs
# ---------------------------------------------------------------------------

def gaussian_pair(mu_q=0.0, sigma_q=0.1, mu_p=0.0, sigma_p=0.2) -> DensityPair:
    """Unnormalised Gaussian bump ``q`` against a normalised Gaussian ``p``.

    ``theta`` is Gaussian for every exponent in [0, 1], so an exact sampler is
    attached.  The exact ``sup q/p`` is attached when it is finite.
    """
    mu_q, sigma_q, mu_p, sigma_p = map(float, (mu_q, sigma_q, mu_p, sigma_p))
    if sigma_q <= 0 or sigma_p <= 0:
        raise ValueError("standard deviations must be positive")
    a, b = 1.0 / sigma_q**2, 1.0 / sigma_p**2

    def lq(x):
        return -0.5 * a * (x - mu_q) ** 2

    def lp(x):
        return normal_logpdf(x, mu_p, sigma_p)

    def sample_theta(beta, n, rng):
        prec = beta * a + (1.0 - beta) * b
        if prec <= 0:
            raise ValueError(f"theta is not normalisable at exponent {beta}")
        mean = (beta * a * mu_q + (1.0 - beta) * b * mu_p) / prec
        return rng.normal(mean, 1.0 / math.sqrt(prec), size=n)

    bound = None
    if a > b:
        peak = 0.5 * (a * b / (a - b)) * (mu_q - mu_p) ** 2
        bound = math.exp(0.5 * _LOG_2PI + math.log(sigma_p) + peak)
    elif a == b and mu_q == mu_p:
        bound = math.sqrt(2 * math.pi) * sigma_p

    return DensityPair(
        log_q=LogDensity(lq),
        log_p=LogDensity(lp),
        log_z0=0.0,
        ratio_sup_bound=bound,
        name="gaussian-pair",
        sample_p=lambda n, rng: rng.normal(mu_p, sigma_p, size=n),
        sample_theta=sample_theta,
        scale=max(sigma_q, sigma_p),
        breakpoints=tuple(sorted({mu_q, mu_p})),
        params=dict(mu_q=mu_q, sigma_q=sigma_q, mu_p=mu_p, sigma_p=sigma_p),
    )


def bimodal_student_t(
    heights=(1.0, 0.6),
    means=(-1.0, 2.0),
    sigmas=(0.8, 0.05),
    df=3.0,
    loc=0.0,
    scale=2.0,
    bound_inflation=1.1,
) -> DensityPair:
    """Two Gaussian bumps (one narrow) against a Student-t reference."""
    heights = tuple(float(v) for v in heights)
    means = tuple(float(v) for v in means)
    sigmas = tuple(float(v) for v in sigmas)
    df, loc, scale = float(df), float(loc), float(scale)
    log_h = np.log(heights)

    def lq(x):
        terms = [lh - 0.5 * ((x - m) / s) ** 2 for lh, m, s in zip(log_h, means, sigmas)]
        return np.logaddexp.reduce(np.stack(terms), axis=0)

    def lp(x):
        return student_t_logpdf(x, df, loc, scale)

    proto = DensityPair(LogDensity(lq), LogDensity(lp), 0.0)
    width = 50.0 * scale
    grid_pts = [np.linspace(loc - width, loc + width, 200_001)]
    grid_pts += [np.linspace(m - 6 * s, m + 6 * s, 2001) for m, s in zip(means, sigmas)]
    bound = estimate_ratio_bound(proto, np.concatenate(grid_pts), inflation=bound_inflation)

    return DensityPair(
        log_q=LogDensity(lq),
        log_p=LogDensity(lp),
        log_z0=0.0,
        ratio_sup_bound=bound,
        name="bimodal-vs-student-t",
        sample_p=lambda n, rng: loc + scale * rng.standard_t(df, size=n),
        scale=scale,
        breakpoints=tuple(sorted(means)),
        params=dict(heights=heights, means=means, sigmas=sigmas, df=df, loc=loc, scale=scale),
    )


def rayleigh_posterior(y=0.65, R=0.25, Q=0.2) -> DensityPair:
    """Rayleigh prior ``p`` against prior times Gaussian likelihood ``q``.

    ``q/p`` is the likelihood ``exp(-(x - y)**2 / (2 Q**2))``, bounded by 1.
    """
    y, R, Q = float(y), float(R), float(Q)
    if R <= 0 or Q <= 0:
        raise ValueError("R and Q must be positive")

    def lprior(x):
        # log of x <= 0 is -inf or NaN; LogDensity maps both to -inf
        return np.log(x) - 2 * math.log(R) - 0.5 * x * x / R**2

    def llik(x):
        return -0.5 * (x - y) ** 2 / Q**2

    return DensityPair(
        log_q=LogDensity(lambda x: lprior(x) + llik(x)),
        log_p=LogDensity(lprior),
        log_z0=0.0,
        ratio_sup_bound=1.0,
        name="rayleigh-posterior",
        log_ratio_fn=llik,
        sample_p=lambda n, rng: R * np.sqrt(-2.0 * np.log1p(-rng.random(n))),
        support=(0.0, math.inf),
        scale=R,
        breakpoints=(y,),
        params=dict(y=y, R=R, Q=Q),
    )


def estimate_ratio_bound(pair: DensityPair, grid, inflation: float = 1.1) -> float:
    """Grid estimate of ``sup q/p``, inflated by ``inflation``.

    The caller chooses the grid; nothing is inferred silently.
    """
    grid = np.asarray(grid, dtype=np.float64)
    lr = log_ratio(pair, grid)
    finite = lr[np.isfinite(lr)]
    if np.any(np.isposinf(lr)):
        raise ValueError("q/p is unbounded on the grid (p vanishes where q does not)")
    if finite.size == 0:
        raise ValueError("q/p is zero everywhere on the grid")
    return float(inflation * np.exp(finite.max()))


_BUILTINS = {
    "gaussian-pair": gaussian_pair,
    "bimodal-vs-student-t": bimodal_student_t,
    "rayleigh-posterior": rayleigh_posterior,
}


def builtin_densities() -> dict:
    """Return the catalogue of named pairs at their default parameters."""
    return {name: factory() for name, factory in _BUILTINS.items()}


def make_pair(name: str, **params) -> DensityPair:
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown density pair {name!r}; known: {sorted(_BUILTINS)}") from None
    return factory(**params)
