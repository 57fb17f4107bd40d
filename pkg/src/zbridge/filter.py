"""Bootstrap and homotopy particle filters for 1-D state-space models.

Time is indexed by integer steps ``t = 0, 1, ..., T``; ``x_0`` comes from the
initial distribution and ``y_t`` is observed for ``t >= 1``.  Physical time is
``t * dt``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import log_ndtr, logsumexp

from . import _kernels
from .bayes import BayesProblem, prior_anchored_pair
from .density import HomotopyPath, IdentityH, LogDensity
from .oracle import QuadratureSpec, integrate_log
from .samplers import MetropolisTuning, as_generator, systematic_resample
from .schedule import ScheduleConfig, run_schedule

__all__ = [
    "StateSpaceModel",
    "kitagawa",
    "linear_gaussian",
    "MODELS",
    "make_model",
    "simulate_truth",
    "MixturePrior",
    "FilterTrace",
    "FILTER_COLUMNS",
    "HomotopyFilterConfig",
    "GridCoverageError",
    "PosteriorRecord",
    "bootstrap_pf",
    "homotopy_pf_step",
    "homotopy_pf",
    "kalman_filter",
    "grid_filter",
    "GridFilterResult",
    "rmse",
]

_LOG_2PI = math.log(2.0 * math.pi)
FILTER_COLUMNS = ("t", "time", "truth", "observation", "post_mean", "post_std", "z_bar", "z_oracle",
                  "n_eff", "collapse_flag")


@dataclass(frozen=True)
class StateSpaceModel:
    """``x_t = Q(x_{t-1}, t) + sigma_x w_t``, ``y_t = H(x_t) + sigma_y v_t``.

    ``transition_mean(x, t)`` maps the previous states to the mean of ``x_t``.
    ``observation_std = inf`` stands for a flat likelihood (``pi(y|x) = 1``).
    Zero noise levels are accepted for simulation only.
    """

    transition_mean: Callable[[np.ndarray, int], np.ndarray]
    transition_std: float = 1.0
    observation_fn: Callable[[np.ndarray], np.ndarray] = lambda x: x
    observation_std: float = 1.0
    initial_distribution: tuple = (0.0, 1.0)
    dt: float = 1.0
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.transition_std < 0 or not self.observation_std >= 0:
            raise ValueError("noise levels must be non-negative")
        if self.initial_distribution[1] < 0:
            raise ValueError("initial std must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def flat_likelihood(self) -> bool:
        return math.isinf(self.observation_std)

    def drift(self, x, t: int) -> np.ndarray:
        return np.asarray(self.transition_mean(np.ascontiguousarray(x, dtype=np.float64), t), dtype=np.float64)

    def log_likelihood(self, y: float, x) -> np.ndarray:
        """``log pi(y | x)`` for an array of states."""
        x = np.asarray(x, dtype=np.float64)
        if self.flat_likelihood:
            return np.zeros_like(x)
        r = (y - np.asarray(self.observation_fn(x), dtype=np.float64)) / self.observation_std
        return -0.5 * r * r - math.log(self.observation_std) - 0.5 * _LOG_2PI

    def likelihood_sup(self) -> float:
        return 1.0 if self.flat_likelihood else 1.0 / (math.sqrt(2 * math.pi) * self.observation_std)

    def require_noisy(self):
        if not (self.transition_std > 0 and self.observation_std > 0):
            raise ValueError("filtering needs positive transition and observation noise")


def _kitagawa_mean(x, t):
    # the cosine forcing uses the previous step index
    return _kernels.kitagawa_drift(x, float(t - 1))


def _square_over_20(x):
    return x * x / 20.0


def kitagawa(sigma_x: float = 1.0, sigma_y: float = 1.0, init_mean: float = 0.0, init_std: float = 1.0,
             dt: float = 0.5) -> StateSpaceModel:
    """The classic nonlinear growth benchmark with ``H(x) = x^2 / 20``."""
    return StateSpaceModel(_kitagawa_mean, float(sigma_x), _square_over_20, float(sigma_y),
                           (float(init_mean), float(init_std)), float(dt), "kitagawa",
                           dict(sigma_x=sigma_x, sigma_y=sigma_y, init_mean=init_mean, init_std=init_std, dt=dt))


def linear_gaussian(a: float = 0.9, sigma_x: float = 0.5, sigma_y: float = 0.5, init_mean: float = 0.0,
                    init_std: float = 1.0, dt: float = 1.0) -> StateSpaceModel:
    """``x_t = a x_{t-1} + noise``, ``y_t = x_t + noise``; exact Kalman oracle available."""
    a = float(a)
    return StateSpaceModel(lambda x, t: a * x, float(sigma_x), lambda x: x, float(sigma_y),
                           (float(init_mean), float(init_std)), float(dt), "linear-gaussian",
                           dict(a=a, sigma_x=sigma_x, sigma_y=sigma_y, init_mean=init_mean, init_std=init_std,
                                dt=dt))


MODELS = {"kitagawa": kitagawa, "linear-gaussian": linear_gaussian}


def make_model(name: str, **params) -> StateSpaceModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None
    return factory(**params)


def simulate_truth(model: StateSpaceModel, T: int, rng):
    """Return ``(states, observations)``; ``states[0] = x_0`` and ``observations[0]`` is NaN."""
    if T < 1:
        raise ValueError("T must be >= 1")
    gen = as_generator(rng)
    m0, s0 = model.initial_distribution
    x = np.empty(T + 1)
    y = np.full(T + 1, np.nan)
    x[0] = m0 + s0 * gen.standard_normal()
    for t in range(1, T + 1):
        x[t] = model.drift(x[t - 1: t], t)[0] + model.transition_std * gen.standard_normal()
        obs_noise = 0.0 if model.flat_likelihood else model.observation_std * gen.standard_normal()
        y[t] = float(np.asarray(model.observation_fn(x[t: t + 1]))[0]) + obs_noise
    return x, y


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------

@dataclass
class FilterTrace:
    """Per-step filter output for ``t = 1..T``.

    ``z_bar``/``z_oracle`` are NaN for the bootstrap filter and ``n_eff``/weights
    are NaN/empty for the homotopy filter.
    """

    kind: str
    t: np.ndarray
    dt: float
    observations: np.ndarray
    post_mean: np.ndarray
    post_std: np.ndarray
    particles: list
    z_bar: np.ndarray
    z_oracle: np.ndarray
    n_eff: np.ndarray
    collapse: np.ndarray
    weights: list = field(default_factory=list)
    records: list = field(default_factory=list)
    truth: Optional[np.ndarray] = None

    @property
    def T(self) -> int:
        return int(self.t.size)

    @property
    def n_collapse(self) -> int:
        return int(np.sum(self.collapse))

    def z_ratio(self) -> np.ndarray:
        return self.z_bar / self.z_oracle

    def rows(self):
        truth = self.truth if self.truth is not None else np.full(self.T, np.nan)
        for i in range(self.T):
            yield (int(self.t[i]), float(self.t[i] * self.dt), float(truth[i]), float(self.observations[i]),
                   float(self.post_mean[i]), float(self.post_std[i]), float(self.z_bar[i]),
                   float(self.z_oracle[i]), float(self.n_eff[i]), int(self.collapse[i]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(FILTER_COLUMNS)
            w.writerows(self.rows())


def rmse(trace: FilterTrace, truth) -> float:
    truth = np.asarray(truth, dtype=np.float64)
    if truth.size == trace.T + 1:
        truth = truth[1:]
    return float(np.sqrt(np.mean((trace.post_mean - truth) ** 2)))


def _observations(observations):
    y = np.asarray(observations, dtype=np.float64)
    if y.ndim != 1 or y.size < 1:
        raise ValueError("observations must be a non-empty 1-D array")
    # accept the simulate_truth layout with a leading NaN placeholder
    if np.isnan(y[0]) and y.size > 1:
        y = y[1:]
    if np.any(np.isnan(y)):
        raise ValueError("observations contain NaN")
    return y


def _initial_particles(model, n, gen):
    m0, s0 = model.initial_distribution
    return m0 + s0 * gen.standard_normal(n)


# ---------------------------------------------------------------------------
# bootstrap filter
# ---------------------------------------------------------------------------

def bootstrap_pf(model: StateSpaceModel, observations, n_particles: int, rng, collapse_neff: float = 1.5,
                 truth=None) -> FilterTrace:
    """Sequential importance resampling with systematic resampling every step.

    A step is flagged as collapsed when ``N_eff < collapse_neff`` or when every
    raw weight underflows to zero; in the second case the filter carries on
    with uniform weights.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    model.require_noisy()
    y = _observations(observations)
    gen = as_generator(rng)
    T = y.size
    x = _initial_particles(model, n_particles, gen)
    mean, std, neff, coll = np.empty(T), np.empty(T), np.empty(T), np.zeros(T, dtype=bool)
    parts, wts = [], []
    for i in range(T):
        t = i + 1
        x = model.drift(x, t) + model.transition_std * gen.standard_normal(n_particles)
        logw = model.log_likelihood(y[i], x)
        underflow = not np.any(np.exp(logw) > 0)
        if underflow or not np.all(np.isfinite(logw)):
            w = np.full(n_particles, 1.0 / n_particles)
        else:
            w = np.exp(logw - logsumexp(logw))
            w /= w.sum()
        neff[i] = 1.0 / np.sum(w * w)
        coll[i] = underflow or neff[i] < collapse_neff
        mean[i] = np.sum(w * x)
        std[i] = math.sqrt(max(np.sum(w * (x - mean[i]) ** 2), 0.0))
        parts.append(x.copy())
        wts.append(w)
        x = x[systematic_resample(w, n_particles, gen)]
    nan = np.full(T, np.nan)
    tr = np.asarray(truth, dtype=np.float64) if truth is not None else None
    if tr is not None and tr.size == T + 1:
        tr = tr[1:]
    return FilterTrace("bootstrap", np.arange(1, T + 1), model.dt, y, mean, std, parts, nan, nan.copy(), neff,
                       coll, wts, [], tr)


# ---------------------------------------------------------------------------
# homotopy filter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixturePrior:
    """Equal-weight Gaussian mixture with common ``sigma``."""

    centers: np.ndarray
    sigma: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.centers, dtype=np.float64).ravel()
        if c.size == 0:
            raise ValueError("need at least one center")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "centers", c)

    @property
    def n(self) -> int:
        return self.centers.size

    def logpdf(self, x) -> np.ndarray:
        return _kernels.mixture_logpdf(np.ascontiguousarray(x, dtype=np.float64), self.centers, float(self.sigma))

    def sample(self, n: int, rng) -> np.ndarray:
        gen = as_generator(rng)
        idx = gen.integers(0, self.centers.size, size=n)
        return self.centers[idx] + self.sigma * gen.standard_normal(n)

    def outside_mass(self, lo: float, hi: float) -> float:
        """Exact mixture mass outside ``[lo, hi]``."""
        a = log_ndtr((lo - self.centers) / self.sigma)
        b = log_ndtr((self.centers - hi) / self.sigma)
        return float(np.mean(np.exp(a) + np.exp(b)))

    def envelope(self, n_sigma: float):
        return float(self.centers.min() - n_sigma * self.sigma), float(self.centers.max() + n_sigma * self.sigma)


class GridCoverageError(RuntimeError):
    """The posterior grid could not be made to hold the required share of the mass."""

    def __init__(self, message, t=None, trace=None):
        super().__init__(message)
        self.t = t
        self.trace = trace


@dataclass(frozen=True)
class HomotopyFilterConfig:
    """Per-step homotopy and posterior-grid settings.

    ``coverage`` is the minimum certified share of ``int lik x mixture`` held by
    the grid; the mass outside is bounded by ``sup lik`` times the mixture's
    exact tail mass.  ``inflation`` multiplies ``sigma_x`` on the steps where
    the likelihood mass sits outside the mixture's ``inflate_sigmas`` envelope.
    """

    M: int = 10
    N: int = 500
    h: Callable = field(default_factory=IdentityH)
    sampler: str = "metropolis"
    tuning: MetropolisTuning = MetropolisTuning(burn_in=100)
    grid_sigmas: float = 8.0
    grid_points: int = 257
    grid_tol: float = 1e-6
    grid_max_points: int = 2**18
    coverage: float = 0.999
    max_expansions: int = 4
    inflation: float = 1.0
    inflate_sigmas: float = 6.0
    inflate_share: float = 0.5
    oracle: bool = True

    def __post_init__(self):
        if self.M < 1 or self.N < 2:
            raise ValueError("need M >= 1 and N >= 2")
        if not self.inflation >= 1.0:
            raise ValueError("inflation must be >= 1")
        if not 0 < self.coverage < 1:
            raise ValueError("coverage must lie in (0, 1)")


@dataclass
class PosteriorRecord:
    """Explicit posterior ``lik(y|x) * mixture(x) / z_bar`` for one step."""

    t: int
    y: float
    mixture: MixturePrior
    z_bar: float
    z_se_log: float
    grid: np.ndarray
    grid_mass: float
    log_lik: Callable = field(repr=False)
    inflated: bool = False

    def log_unnorm(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        return self.log_lik(self.y, x) + self.mixture.logpdf(x)

    def density(self, x) -> np.ndarray:
        return np.exp(self.log_unnorm(x)) / self.z_bar

    @property
    def normalization(self) -> float:
        """Grid integral of the constructed posterior; 1 when ``z_bar`` is exact."""
        return self.grid_mass / self.z_bar


def _likelihood_outside(model, mix, y, n_sigma):
    """Share of the likelihood (as a function of x, on a wide probe window) outside the ``n_sigma`` envelope."""
    lo, hi = mix.envelope(n_sigma)
    xs = np.linspace(*mix.envelope(n_sigma + 30.0), 4001)
    lw = model.log_likelihood(y, xs)
    w = np.exp(lw - lw.max())
    inside = (xs >= lo) & (xs <= hi)
    return float(w[~inside].sum() / w.sum())


def _refine(logf, lo, hi, cfg):
    """Uniform grid on ``[lo, hi]`` doubled until the trapezoid mass settles."""
    n = cfg.grid_points
    grid = np.linspace(lo, hi, n)
    lf = logf(grid)
    shift = float(np.max(lf)) if np.any(np.isfinite(lf)) else 0.0
    mass = float(np.trapezoid(np.exp(lf - shift), grid))
    while True:
        n2 = 2 * n - 1
        if n2 > cfg.grid_max_points:
            break
        g2 = np.linspace(lo, hi, n2)
        lf2 = logf(g2)
        s2 = float(np.max(lf2)) if np.any(np.isfinite(lf2)) else 0.0
        m2 = float(np.trapezoid(np.exp(lf2 - s2), g2)) * math.exp(s2 - shift)
        grid, lf, n = g2, lf2, n2
        done = abs(m2 - mass) <= cfg.grid_tol * abs(m2)
        mass = m2
        if done:
            break
    return grid, lf, mass * math.exp(shift)


def homotopy_pf_step(model: StateSpaceModel, prior_samples, y_next: float, t: int,
                     cfg: HomotopyFilterConfig = HomotopyFilterConfig(), rng=None):
    """One homotopy filter step from unweighted samples at ``t - 1`` to ``t``.

    Returns ``(record, z_oracle, new_samples)``; ``z_oracle`` is NaN unless
    ``cfg.oracle``.
    """
    prior_samples = np.ascontiguousarray(prior_samples, dtype=np.float64).ravel()
    if prior_samples.size == 0:
        raise ValueError("prior_samples must be non-empty")
    model.require_noisy()
    gen = as_generator(rng)
    y_next = float(y_next)
    centers = model.drift(prior_samples, t)
    mix = MixturePrior(centers, model.transition_std)
    inflated = False
    if cfg.inflation > 1.0 and not model.flat_likelihood:
        if _likelihood_outside(model, mix, y_next, cfg.inflate_sigmas) > cfg.inflate_share:
            mix = MixturePrior(centers, model.transition_std * cfg.inflation)
            inflated = True

    def log_lik(x):
        return model.log_likelihood(y_next, x)

    problem = BayesProblem(
        log_prior=LogDensity(mix.logpdf),
        log_likelihood=LogDensity(log_lik),
        prior_log_norm=0.0,
        sample_prior=mix.sample,
        likelihood_sup=model.likelihood_sup(),
        scale=mix.sigma,
        breakpoints=tuple(np.unique(np.round(centers, 12))),
        name=f"{model.name}:t={t}",
    )
    path = HomotopyPath.uniform(cfg.M, cfg.h)
    trace = run_schedule(ScheduleConfig(prior_anchored_pair(problem), path, cfg.N, cfg.sampler, gen, cfg.tuning))
    z_bar = trace.z1

    def logf(x):
        return log_lik(x) + mix.logpdf(x)

    n_sig = cfg.grid_sigmas
    for _ in range(cfg.max_expansions + 1):
        lo, hi = mix.envelope(n_sig)
        grid, lf, mass = _refine(logf, lo, hi, cfg)
        tail = model.likelihood_sup() * mix.outside_mass(lo, hi)
        if mass > 0 and mass / (mass + tail) >= cfg.coverage:
            break
        n_sig *= 2.0
    else:
        raise GridCoverageError(
            f"step {t}: grid holds at most {mass / (mass + tail) if mass + tail > 0 else 0.0:.3g} of the mass "
            f"after {cfg.max_expansions} expansions", t)

    # inverse-CDF sampling on the grid
    f = np.exp(lf - np.max(lf))
    cdf = _kernels.cumtrapz(np.ascontiguousarray(f), grid)
    cdf /= cdf[-1]
    new = np.interp(gen.random(prior_samples.size), cdf, grid)

    z_oracle = math.nan
    if cfg.oracle:
        val, _, sh = integrate_log(logf, (-math.inf, math.inf), QuadratureSpec(rel_tol=1e-10), mix.sigma,
                                   tuple(np.unique(np.round(centers, 12))))
        z_oracle = val * math.exp(sh)
    rec = PosteriorRecord(t, y_next, mix, z_bar, trace.log_z1_se(), grid, mass, model.log_likelihood, inflated)
    return rec, z_oracle, new


def _grid_moments(rec: PosteriorRecord):
    f = np.exp(rec.log_unnorm(rec.grid) - np.max(rec.log_unnorm(rec.grid)))
    mass = np.trapezoid(f, rec.grid)
    mean = np.trapezoid(rec.grid * f, rec.grid) / mass
    var = np.trapezoid((rec.grid - mean) ** 2 * f, rec.grid) / mass
    return float(mean), float(math.sqrt(max(var, 0.0)))


def homotopy_pf(model: StateSpaceModel, observations, n_particles: int,
                cfg: HomotopyFilterConfig = HomotopyFilterConfig(), rng=None, truth=None) -> FilterTrace:
    """Iterate ``homotopy_pf_step`` over the observations.

    Posterior moments come from the step's explicit posterior on its grid.
    ``collapse`` marks steps where variance inflation was applied.  A grid
    coverage failure raises ``GridCoverageError`` with the partial trace.
    """
    if n_particles < 1:
        raise ValueError("n_particles must be >= 1")
    y = _observations(observations)
    gen = as_generator(rng)
    T = y.size
    x = _initial_particles(model, n_particles, gen)
    mean, std = np.full(T, np.nan), np.full(T, np.nan)
    zb, zo = np.full(T, np.nan), np.full(T, np.nan)
    infl = np.zeros(T, dtype=bool)
    parts, recs = [], []
    tr = np.asarray(truth, dtype=np.float64) if truth is not None else None
    if tr is not None and tr.size == T + 1:
        tr = tr[1:]

    def build(n_done):
        return FilterTrace("homotopy", np.arange(1, n_done + 1), model.dt, y[:n_done], mean[:n_done],
                           std[:n_done], parts[:n_done], zb[:n_done], zo[:n_done], np.full(n_done, np.nan),
                           infl[:n_done], [], recs[:n_done], None if tr is None else tr[:n_done])

    for i in range(T):
        try:
            rec, z_or, x = homotopy_pf_step(model, x, y[i], i + 1, cfg, gen)
        except GridCoverageError as exc:
            exc.trace = build(i)
            raise
        mean[i], std[i] = _grid_moments(rec)
        zb[i], zo[i] = rec.z_bar, z_or
        infl[i] = rec.inflated
        parts.append(x.copy())
        recs.append(rec)
    return build(T)


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def kalman_filter(a: float, sigma_x: float, sigma_y: float, init_mean: float, init_std: float, observations):
    """Exact filter means and stds for ``x_t = a x_{t-1} + noise``, ``y_t = x_t + noise``."""
    y = _observations(observations)
    m, v = float(init_mean), float(init_std) ** 2
    means, stds = np.empty(y.size), np.empty(y.size)
    for i, yi in enumerate(y):
        m, v = a * m, a * a * v + sigma_x**2
        k = v / (v + sigma_y**2)
        m, v = m + k * (yi - m), (1.0 - k) * v
        means[i], stds[i] = m, math.sqrt(v)
    return means, stds


@dataclass
class GridFilterResult:
    grid: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    log_z: np.ndarray
    densities: np.ndarray

    def sample(self, i: int, n: int, rng) -> np.ndarray:
        """Inverse-CDF draws from the step-``i`` (0-based) filtering density."""
        cdf = _kernels.cumtrapz(np.ascontiguousarray(self.densities[i]), self.grid)
        cdf /= cdf[-1]
        return np.interp(as_generator(rng).random(n), cdf, self.grid)


def grid_filter(model: StateSpaceModel, observations, grid) -> GridFilterResult:
    """Bayes recursion on a fixed grid: predict by quadrature of the Gaussian kernel, then update."""
    model.require_noisy()
    y = _observations(observations)
    g = np.asarray(grid, dtype=np.float64)
    dx = np.gradient(g)
    m0, s0 = model.initial_distribution
    dens = np.exp(-0.5 * ((g - m0) / s0) ** 2) / (math.sqrt(2 * math.pi) * s0)
    dens /= np.sum(dens * dx)
    sx = model.transition_std
    means, stds, lz = np.empty(y.size), np.empty(y.size), np.empty(y.size)
    out = np.empty((y.size, g.size))
    for i, yi in enumerate(y):
        c = model.drift(g, i + 1)
        kern = np.exp(-0.5 * ((g[:, None] - c[None, :]) / sx) ** 2) / (math.sqrt(2 * math.pi) * sx)
        pred = kern @ (dens * dx)
        post = pred * np.exp(model.log_likelihood(yi, g))
        z = np.sum(post * dx)
        lz[i] = math.log(z)
        dens = post / z
        out[i] = dens
        means[i] = np.sum(g * dens * dx)
        stds[i] = math.sqrt(max(np.sum((g - means[i]) ** 2 * dens * dx), 0.0))
    return GridFilterResult(g, means, stds, lz, out)
