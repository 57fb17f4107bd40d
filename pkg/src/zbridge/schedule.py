"""The homotopy schedule estimator of ``log Z1`` and its variance model."""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .density import DensityPair, HomotopyPath, log_stage_weight
from .oracle import QuadratureSpec, log_z_of_exponent, moment_of_theta
from .samplers import (
    MetropolisTuning,
    RngStream,
    SamplerExtinction,
    StageEnsemble,
    UnsupportedSampler,
    as_generator,
    run_sequential_sampler,
    sample_exact,
    sample_metropolis,
)

__all__ = [
    "SAMPLERS",
    "ScheduleConfig",
    "ScheduleTrace",
    "ScheduleError",
    "ErrorModel",
    "EmpiricalError",
    "stage_mu_bar",
    "run_schedule",
    "oracle_schedule",
    "predicted_variance",
    "empirical_variance",
    "TRACE_COLUMNS",
]

SAMPLERS = ("exact", "metropolis", "importance-rejection")
TRACE_COLUMNS = ("m", "s_m", "h_s_m", "log_mu_bar", "log_Z_bar", "stage_weight_variance", "population")


@dataclass(frozen=True)
class ScheduleConfig:
    pair: DensityPair
    path: HomotopyPath
    n_per_stage: int
    sampler: str = "exact"
    rng: RngStream = RngStream(0)
    tuning: MetropolisTuning = MetropolisTuning()
    k: Optional[float] = None

    def __post_init__(self):
        if self.n_per_stage < 2:
            raise ValueError("n_per_stage must be >= 2")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")


@dataclass
class ScheduleTrace:
    """Per-stage audit trail of one schedule run.

    Arrays indexed by stage point have length ``M + 1``; per-stage quantities
    (``log_mu_bar``, ``log_weight_var``) have length ``M``.
    """

    s: np.ndarray
    h_s: np.ndarray
    log_mu_bar: np.ndarray
    log_z_bar: np.ndarray
    log_weight_var: np.ndarray
    population: np.ndarray
    sampler: str
    warnings: list = field(default_factory=list)

    @property
    def M(self) -> int:
        return self.s.size - 1

    @property
    def log_z1(self) -> float:
        return float(self.log_z_bar[-1])

    @property
    def z1(self) -> float:
        return math.exp(self.log_z1)

    def log_z1_se(self) -> float:
        """Delta-method standard error of ``log Z1`` from the stage weights."""
        n = self.population[:-1].astype(float)
        rel = np.exp(self.log_weight_var - 2.0 * self.log_mu_bar)
        return float(math.sqrt(np.sum(rel / n)))

    def rows(self):
        for m in range(self.M + 1):
            if m < self.M:
                lmu = float(self.log_mu_bar[m])
                wvar = float(np.exp(self.log_weight_var[m]))
            else:
                lmu = wvar = math.nan
            yield (m, float(self.s[m]), float(self.h_s[m]), lmu, float(self.log_z_bar[m]), wvar,
                   int(self.population[m]))


class ScheduleError(RuntimeError):
    """A stage failed; ``trace`` holds the stages completed so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def stage_mu_bar(pair: DensityPair, path: HomotopyPath, s: float, s_next: float, ensemble: StageEnsemble):
    """``(log mu_bar, log variance of the stage weights)`` for one stage."""
    if ensemble.accepted == 0:
        raise ValueError("empty ensemble")
    if ensemble.s != s:
        raise ValueError(f"ensemble is attributed to s={ensemble.s}, not s={s}")
    logw = np.ascontiguousarray(log_stage_weight(pair, path, s, s_next, ensemble.samples), dtype=np.float64)
    lm, lv = _kernels.logmeanexp_var(logw)
    return float(lm), float(lv)


def _draw(cfg: ScheduleConfig, s: float, gen) -> StageEnsemble:
    pair, path, n = cfg.pair, cfg.path, cfg.n_per_stage
    if cfg.sampler == "exact":
        return sample_exact(pair, path, s, n, gen)
    if s == 0.0 and pair.sample_p is not None:
        return sample_exact(pair, path, s, n, gen)
    return sample_metropolis(pair, path, s, n, gen, cfg.tuning)


def _partial(cfg, st, hv, log_mu, log_z, log_var, pop, warns):
    m = len(log_mu)
    return ScheduleTrace(st[: m + 1], hv[: m + 1], np.array(log_mu), np.array(log_z), np.array(log_var),
                         np.concatenate([np.array(pop, dtype=np.int64), [0]]), cfg.sampler, list(warns))


def run_schedule(cfg: ScheduleConfig) -> ScheduleTrace:
    """Accumulate ``log Z = log Z0 + sum_m log mu_bar_m`` over the partition."""
    pair, path = cfg.pair, cfg.path
    gen = as_generator(cfg.rng)
    st = path.stages
    hv = path.h_values()
    log_mu, log_var, pop, warns = [], [], [], []
    log_z = [pair.log_z0]

    ensembles = None
    if cfg.sampler == "importance-rejection":
        k = cfg.k if cfg.k is not None else pair.ratio_sup_bound
        try:
            ensembles = run_sequential_sampler(pair, path, cfg.n_per_stage, k, gen)
        except SamplerExtinction as exc:
            ensembles = exc.trace
            for m in range(len(ensembles) - 1):
                lm, lv = stage_mu_bar(pair, path, float(st[m]), float(st[m + 1]), ensembles[m])
                log_mu.append(lm)
                log_var.append(lv)
                pop.append(ensembles[m].accepted)
                log_z.append(log_z[-1] + lm)
            raise ScheduleError(str(exc), _partial(cfg, st, hv, log_mu, log_z, log_var, pop, warns)) from exc

    for m in range(path.M):
        s, s_next = float(st[m]), float(st[m + 1])
        try:
            ens = ensembles[m] if ensembles is not None else _draw(cfg, s, gen)
        except UnsupportedSampler as exc:
            raise ScheduleError(str(exc), _partial(cfg, st, hv, log_mu, log_z, log_var, pop, warns)) from exc
        for w in ens.warnings:
            msg = f"stage {m}: {w}"
            warns.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        lm, lv = stage_mu_bar(pair, path, s, s_next, ens)
        log_mu.append(lm)
        log_var.append(lv)
        pop.append(ens.accepted)
        log_z.append(log_z[-1] + lm)

    final_pop = ensembles[-1].accepted if ensembles is not None else 0
    return ScheduleTrace(
        s=st.copy(), h_s=hv, log_mu_bar=np.array(log_mu), log_z_bar=np.array(log_z),
        log_weight_var=np.array(log_var), population=np.array(pop + [final_pop], dtype=np.int64),
        sampler=cfg.sampler, warnings=warns,
    )


def oracle_schedule(pair: DensityPair, path: HomotopyPath, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """``log Z1`` from the schedule product with every ``mu`` taken by quadrature.

    Each ``mu_m`` is the quadrature expectation of the stage weight under
    ``theta_{h(s_m)}``, not a ratio of precomputed ``Z`` values.
    """
    st = path.stages
    total = pair.log_z0
    for m in range(path.M):
        s, s_next = float(st[m]), float(st[m + 1])

        def weight(x, s=s, s_next=s_next):
            return np.exp(log_stage_weight(pair, path, s, s_next, x))

        total += math.log(moment_of_theta(pair, path, s, weight, spec))
    return total


@dataclass
class ErrorModel:
    """Quadrature-based variance prediction for ``log Z1_bar``.

    ``predicted_var_logZ1`` sums ``(mu_next / mu - 1) / N`` over all ``M``
    stages, i.e. ``(1/N) sum_{m=1}^{M} mu_{s_m}/mu_{s_{m-1}} - M/N``.
    ``printed_var_logZ1`` is the same expression with the ratio sum started at
    ``m = 2``, which drops one stage and can go negative even for ``q = p``.
    """

    mu: np.ndarray
    stage_rel_var: np.ndarray
    stage_clt_var: np.ndarray
    predicted_var_logZ1: float
    printed_var_logZ1: float
    N: int

    @property
    def predicted_negative(self) -> bool:
        return self.predicted_var_logZ1 < 0

    @property
    def printed_negative(self) -> bool:
        return self.printed_var_logZ1 < 0


def predicted_variance(pair: DensityPair, path: HomotopyPath, spec: QuadratureSpec = QuadratureSpec(),
                       N: int = 1000) -> ErrorModel:
    if N < 1:
        raise ValueError("N must be >= 1")
    hv = path.h_values()
    dh = np.diff(hv)
    M = path.M
    lz = np.array([log_z_of_exponent(pair, b, spec) for b in hv])
    # one stage past s=1 (needed for the last stage's weight variance)
    lz_next = np.array([log_z_of_exponent(pair, hv[m] + 2 * dh[m], spec) for m in range(M)])
    log_mu = lz[1:] - lz[:-1]
    rel_var = np.expm1(lz_next + lz[:-1] - 2 * lz[1:])
    mu = np.exp(log_mu)
    clt = mu**2 * rel_var / N
    # mu_{s_m} for m = 0..M; mu_{s_M} uses the one-stage extension past s=1
    log_mu_lattice = np.concatenate([log_mu, [lz_next[-1] - lz[-1]]])
    ratios = np.exp(np.diff(log_mu_lattice))
    predicted = float(np.sum(ratios) / N - M / N)
    printed = float(np.sum(ratios[1:]) / N - M / N)
    return ErrorModel(mu, rel_var, clt, predicted, printed, N)


@dataclass
class EmpiricalError:
    log_z1: np.ndarray
    var_log_z1: float
    mean_abs_error: float
    n_failed: int
    z1_reference: float


def empirical_variance(cfg: ScheduleConfig, replicates: int, z1_true: Optional[float] = None) -> EmpiricalError:
    """Replicate ``run_schedule`` on streams ``cfg.rng.stream + r``.

    Failed replicates are counted and excluded.
    """
    if replicates < 2:
        raise ValueError("replicates must be >= 2")
    if z1_true is None:
        z1_true = math.exp(log_z_of_exponent(cfg.pair, 1.0))
    out, failed = [], 0
    for r in range(replicates):
        rep = dataclasses.replace(cfg, rng=RngStream(cfg.rng.seed, cfg.rng.stream + r))
        try:
            out.append(run_schedule(rep).log_z1)
        except ScheduleError:
            failed += 1
    vals = np.array(out)
    var = float(np.var(vals, ddof=1)) if vals.size > 1 else math.nan
    mae = float(np.mean(np.abs(np.exp(vals) - z1_true))) if vals.size else math.nan
    return EmpiricalError(vals, var, mae, failed, z1_true)
