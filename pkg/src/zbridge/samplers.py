"""Stage samplers for the homotopy densities, plus systematic resampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .density import DensityPair, HomotopyPath, as_points, log_ratio

__all__ = [
    "RngStream",
    "as_generator",
    "StageEnsemble",
    "MetropolisTuning",
    "UnsupportedSampler",
    "BoundViolation",
    "SamplerExtinction",
    "sample_exact",
    "sample_metropolis",
    "importance_rejection_step",
    "run_sequential_sampler",
    "systematic_resample",
    "ensemble_rows",
]

# slack on sup q/p checks so that the exact bound is not tripped by rounding
_BOUND_SLACK = 1e-12


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream identified by ``(seed, stream)``."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.stream < 0:
            raise ValueError("stream id must be non-negative")

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(self.stream,))))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


class UnsupportedSampler(NotImplementedError):
    """The pair has no exact sampler for the requested stage."""


class BoundViolation(ValueError):
    """A sample had ``q/p`` above the supplied bound ``k``."""

    def __init__(self, witness, ratio, k):
        super().__init__(f"q/p = {ratio!r} exceeds k = {k!r} at x = {witness!r}")
        self.witness = witness
        self.ratio = ratio
        self.k = k


class SamplerExtinction(RuntimeError):
    """Every sample was rejected at some stage."""

    def __init__(self, stage, trace):
        super().__init__(f"sequential sampler went extinct at stage {stage}")
        self.stage = stage
        self.trace = trace


@dataclass
class StageEnsemble:
    """Samples attributed to ``theta_{h(s)}``.

    ``accepted`` always equals ``len(samples)``; ``proposed`` counts the draws
    the stage started from (they differ only for importance-rejection).
    """

    samples: np.ndarray
    s: float
    origin: str
    accepted: int
    proposed: int
    acceptance_rate: Optional[float] = None
    warnings: tuple = ()

    def __post_init__(self):
        if self.accepted != len(self.samples) or self.accepted > self.proposed:
            raise ValueError("ensemble counts are inconsistent")

    def __len__(self):
        return self.accepted


@dataclass(frozen=True)
class MetropolisTuning:
    """Random-walk Metropolis settings.

    ``step_scale=None`` rescales the step to 2.4 x the population standard
    deviation measured over the first half of burn-in.  ``n_chains=None`` runs
    one chain per requested draw.  ``init`` gives chain starting points; by
    default they are drawn from the reference density.
    """

    step_scale: Optional[float] = None
    burn_in: int = 1000
    thinning: int = 5
    n_chains: Optional[int] = None
    init: Optional[np.ndarray] = field(default=None, compare=False)
    min_acceptance: float = 0.01

    def __post_init__(self):
        if self.step_scale is not None and not self.step_scale > 0:
            raise ValueError("step_scale must be > 0")
        if self.burn_in < 0 or self.thinning < 1:
            raise ValueError("burn_in must be >= 0 and thinning >= 1")


def sample_exact(pair: DensityPair, path: HomotopyPath, s: float, n: int, rng) -> StageEnsemble:
    """``n`` independent exact draws from ``theta_{h(s)}``."""
    gen = as_generator(rng)
    beta = path.h_at(s)
    if pair.sample_theta is not None:
        x = pair.sample_theta(beta, n, gen)
    elif beta == 0.0 and pair.sample_p is not None:
        x = pair.sample_p(n, gen)
    else:
        raise UnsupportedSampler(f"pair {pair.name!r} has no exact sampler at h(s)={beta}")
    x = as_points(x, pair.dim)
    return StageEnsemble(x, float(s), "exact", len(x), len(x))


def _initial_points(pair: DensityPair, n: int, gen: np.random.Generator, init):
    if init is not None:
        x = as_points(init, pair.dim)
        if len(x) != n:
            x = x[gen.integers(0, len(x), size=n)]
        return x.copy()
    if pair.sample_p is not None:
        return as_points(pair.sample_p(n, gen), pair.dim)
    shape = (n,) if pair.dim == 1 else (n, pair.dim)
    return np.zeros(shape)


def _chain_target(pair: DensityPair, beta: float):
    """Unnormalised log theta at exponent ``beta``, evaluated as ``log p + beta log(q/p)``.

    Equal to ``log_unnorm_theta`` up to rounding; NaN marks points to reject.
    """
    if beta == 0.0:
        return pair.log_p
    if pair.log_ratio_fn is None:
        if beta == 1.0:
            return pair.log_q
        return lambda x: beta * pair.log_q(x) + (1.0 - beta) * pair.log_p(x)
    lr = pair.log_ratio_fn

    def target(x):
        with np.errstate(invalid="ignore", divide="ignore"):
            return pair.log_p(x) + beta * lr(x)

    return target


def sample_metropolis(pair: DensityPair, path: HomotopyPath, s: float, n: int, rng,
                      tuning: MetropolisTuning = MetropolisTuning()) -> StageEnsemble:
    """Random-walk Metropolis draws targeting ``theta_{h(s)}``.

    Chains run in lock-step (vectorised).  An acceptance rate below
    ``tuning.min_acceptance`` after burn-in is recorded in ``warnings``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    n_chains = tuning.n_chains or n
    per_chain = -(-n // n_chains)
    x = _initial_points(pair, n_chains, gen, tuning.init)

    target = _chain_target(pair, path.h_at(s))
    lt = target(x)
    feature_shape = x.shape[1:]
    if tuning.step_scale is not None:
        step = np.full(feature_shape, tuning.step_scale) if feature_shape else tuning.step_scale
    else:
        sd = x.std(axis=0) if n_chains > 1 else np.ones(feature_shape) * pair.scale
        step = 2.4 * np.where(sd > 0, sd, pair.scale)

    def one_step(x, lt):
        prop = x + step * gen.standard_normal(x.shape)
        lt_prop = target(prop)
        with np.errstate(invalid="ignore"):
            accept = (lt_prop - lt > -gen.standard_exponential(n_chains)) | (np.isneginf(lt) & ~np.isnan(lt_prop))
        mask = accept if x.ndim == 1 else accept[:, None]
        return np.where(mask, prop, x), np.where(accept, lt_prop, lt), int(accept.sum())

    half = tuning.burn_in // 2
    adapt = tuning.step_scale is None
    if adapt:
        count, mean, m2 = 0, np.zeros(feature_shape), np.zeros(feature_shape)
    n_acc = n_tried = 0
    for i in range(tuning.burn_in):
        x, lt, a = one_step(x, lt)
        if i >= half:
            n_acc += a
            n_tried += n_chains
        elif adapt:
            # Chan/Welford merge of the population moments
            bm, bv = x.mean(axis=0), x.var(axis=0)
            tot = count + n_chains
            delta = bm - mean
            mean = mean + delta * n_chains / tot
            m2 = m2 + bv * n_chains + delta**2 * count * n_chains / tot
            count = tot
            if i == half - 1:
                sd = np.sqrt(m2 / count)
                step = 2.4 * np.where(sd > 0, sd, pair.scale)

    n_steps = per_chain * tuning.thinning if per_chain > 1 else 0
    draws = [x] if per_chain == 1 else []
    for i in range(n_steps):
        x, lt, a = one_step(x, lt)
        n_acc += a
        n_tried += n_chains
        if (i + 1) % tuning.thinning == 0:
            draws.append(x)
    rate = n_acc / n_tried if n_tried else None

    samples = np.concatenate(draws, axis=0)[:n] if per_chain > 1 else draws[0][:n]
    warn = ()
    if rate is not None and rate < tuning.min_acceptance:
        warn = (f"degenerate chain: acceptance rate {rate:.4f} < {tuning.min_acceptance}",)
    return StageEnsemble(samples, float(s), "metropolis", len(samples), len(samples), rate, warn)


def importance_rejection_step(pair: DensityPair, path: HomotopyPath, s: float, s_next: float,
                              ensemble: StageEnsemble, k: Optional[float], rng) -> StageEnsemble:
    """Thin ``theta_{h(s)}`` samples to ``theta_{h(s_next)}`` samples.

    Each sample survives iff ``log U <= dh * (log q - log p - log k)``.
    """
    if k is None:
        raise ValueError("k (an upper bound on q/p) is required")
    if not (math.isfinite(k) and k > 0):
        raise ValueError("k must be finite and positive")
    if ensemble.s != s:
        raise ValueError(f"ensemble is attributed to s={ensemble.s}, not s={s}")
    if not s_next > s:
        raise ValueError("s_next must exceed s")
    gen = as_generator(rng)
    x = ensemble.samples
    lr = log_ratio(pair, x)
    log_k = math.log(k)
    if x.shape[0] and np.max(lr) > log_k + _BOUND_SLACK:
        i = int(np.argmax(lr))
        raise BoundViolation(x[i], float(np.exp(lr[i])), k)
    dh = path.h_at(s_next) - path.h_at(s)
    u = gen.random(x.shape[0])
    if dh == 0.0:
        keep = np.ones(x.shape[0], dtype=bool)
    else:
        with np.errstate(divide="ignore"):
            keep = np.log(u) <= dh * np.minimum(lr - log_k, 0.0)
    kept = x[keep]
    return StageEnsemble(kept, float(s_next), "importance-rejection", len(kept), ensemble.accepted)


def run_sequential_sampler(pair: DensityPair, path: HomotopyPath, n0: int, k: Optional[float] = None,
                           rng=None) -> list:
    """Chain importance-rejection over the whole partition.

    Returns the ``M + 1`` ensembles, starting with ``n0`` reference draws.
    """
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if k is None:
        k = pair.ratio_sup_bound
    gen = as_generator(rng)
    first = sample_exact(pair, path, 0.0, n0, gen)
    trace = [first]
    st = path.stages
    for m in range(path.M):
        nxt = importance_rejection_step(pair, path, float(st[m]), float(st[m + 1]), trace[-1], k, gen)
        trace.append(nxt)
        if nxt.accepted == 0:
            raise SamplerExtinction(m + 1, trace)
    return trace


def systematic_resample(weights, n: int, rng) -> np.ndarray:
    """Ancestor indices from one offset ``u ~ U(0, 1/n)`` and strides ``u + j/n``."""
    w = np.ascontiguousarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D vector")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be non-negative and sum to 1 within 1e-12")
    if n < 1:
        raise ValueError("n must be >= 1")
    u0 = as_generator(rng).uniform(0.0, 1.0 / n)
    return _kernels.systematic_indices(w, u0, n)


def ensemble_rows(ensembles):
    """Flatten ensembles to ``(stage, sample_index, coord...)`` rows."""
    for m, ens in enumerate(ensembles):
        pts = ens.samples if ens.samples.ndim == 2 else ens.samples[:, None]
        for i, row in enumerate(pts):
            yield (m, i, *row.tolist())
