"""Bayesian evidence through the three homotopy anchorings.

* prior-anchored: ``p = prior``, stage weight ``dh * log likelihood``
* likelihood-anchored: ``p = likelihood in x``, stage weight ``dh * log prior``
* auxiliary: ``p = I``, stage weight ``dh * (log prior + log likelihood - log I)``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import erf

from .density import DensityPair, HomotopyPath, LogDensity, normal_logpdf, student_t_logpdf
from .oracle import QuadratureSpec, integrate_log
from .samplers import MetropolisTuning, RngStream
from .schedule import ScheduleConfig, ScheduleTrace, run_schedule

__all__ = [
    "Auxiliary",
    "BayesProblem",
    "prior_anchored_pair",
    "likelihood_anchored_pair",
    "auxiliary_pair",
    "evidence_prior_anchored",
    "evidence_likelihood_anchored",
    "evidence_auxiliary",
    "oracle_evidence",
    "RayleighZ",
    "rayleigh_zs",
    "rayleigh_zs_closed_form",
    "regularized_gamma_p_neg_half",
    "rayleigh_problem",
    "conjugate_gaussian",
    "conjugate_gaussian_evidence",
]


@dataclass(frozen=True)
class Auxiliary:
    """Reference density ``I`` with known ``log int I dx`` and a sampler."""

    log_density: LogDensity
    log_norm: float
    sample: Optional[Callable] = None


@dataclass(frozen=True)
class BayesProblem:
    """Prior and likelihood (as a function of ``x``, data fixed).

    ``prior_log_norm`` / ``likelihood_log_norm`` are ``None`` when the
    corresponding integral over ``x`` is unknown.
    """

    log_prior: LogDensity
    log_likelihood: LogDensity
    prior_log_norm: Optional[float] = None
    likelihood_log_norm: Optional[float] = None
    auxiliary: Optional[Auxiliary] = None
    sample_prior: Optional[Callable] = None
    sample_likelihood: Optional[Callable] = None
    likelihood_sup: Optional[float] = None
    support: tuple = (-math.inf, math.inf)
    scale: float = 1.0
    breakpoints: tuple = ()
    name: str = "bayes"

    def __post_init__(self):
        if self.log_prior.dim != self.log_likelihood.dim:
            raise ValueError("prior and likelihood dimensions differ")
        if self.prior_log_norm is None and self.likelihood_log_norm is None and self.auxiliary is None:
            raise ValueError("need a proper prior, a proper likelihood or an auxiliary reference")

    def log_joint(self, x):
        return self.log_prior(x) + self.log_likelihood(x)


def _pair(problem, log_p, log_z0, log_ratio_fn, sample_p, bound, tag):
    return DensityPair(
        log_q=LogDensity(problem.log_joint, problem.log_prior.dim),
        log_p=log_p,
        log_z0=log_z0,
        ratio_sup_bound=bound,
        name=f"{problem.name}:{tag}",
        log_ratio_fn=log_ratio_fn,
        sample_p=sample_p,
        support=problem.support,
        scale=problem.scale,
        breakpoints=problem.breakpoints,
    )


def prior_anchored_pair(problem: BayesProblem) -> DensityPair:
    if problem.prior_log_norm is None:
        raise ValueError("prior-anchored route needs a proper prior with known normalisation")
    return _pair(problem, problem.log_prior, problem.prior_log_norm, problem.log_likelihood,
                 problem.sample_prior, problem.likelihood_sup, "prior")


def likelihood_anchored_pair(problem: BayesProblem) -> DensityPair:
    if problem.likelihood_log_norm is None:
        raise ValueError("likelihood-anchored route needs a likelihood with known normalisation in x")
    return _pair(problem, problem.log_likelihood, problem.likelihood_log_norm, problem.log_prior,
                 problem.sample_likelihood, None, "likelihood")


def auxiliary_pair(problem: BayesProblem) -> DensityPair:
    aux = problem.auxiliary
    if aux is None:
        raise ValueError("auxiliary route needs an auxiliary reference density")

    def lr(x):
        return problem.log_joint(x) - aux.log_density(x)

    return _pair(problem, aux.log_density, aux.log_norm, lr, aux.sample, None, "auxiliary")


def _run(pair, path, N, rng, sampler, tuning) -> ScheduleTrace:
    if not isinstance(rng, RngStream):
        rng = RngStream(int(rng))
    return run_schedule(ScheduleConfig(pair, path, N, sampler=sampler, rng=rng, tuning=tuning))


def evidence_prior_anchored(problem: BayesProblem, path: HomotopyPath, N: int, rng,
                            sampler: str = "metropolis", tuning: MetropolisTuning = MetropolisTuning()):
    """Homotopy from the prior to prior x likelihood; ``trace.log_z1`` is the log evidence."""
    return _run(prior_anchored_pair(problem), path, N, rng, sampler, tuning)


def evidence_likelihood_anchored(problem: BayesProblem, path: HomotopyPath, N: int, rng,
                                 sampler: str = "metropolis", tuning: MetropolisTuning = MetropolisTuning()):
    return _run(likelihood_anchored_pair(problem), path, N, rng, sampler, tuning)


def evidence_auxiliary(problem: BayesProblem, path: HomotopyPath, N: int, rng,
                       sampler: str = "metropolis", tuning: MetropolisTuning = MetropolisTuning()):
    return _run(auxiliary_pair(problem), path, N, rng, sampler, tuning)


def oracle_evidence(problem: BayesProblem, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Evidence by quadrature of prior x likelihood (1-D only)."""
    val, _, shift = integrate_log(problem.log_joint, problem.support, spec, problem.scale, problem.breakpoints)
    return val * math.exp(shift)


# ---------------------------------------------------------------------------
# Rayleigh prior / Gaussian likelihood benchmark
# ---------------------------------------------------------------------------

def regularized_gamma_p_neg_half(z):
    """``P(-1/2, z)`` continued through ``gamma(a, z) = (gamma(a+1, z) + z**a e**-z) / a``.

    This reduces to ``erf(sqrt z) + exp(-z) / sqrt(pi z)``.
    """
    z = np.asarray(z, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return erf(np.sqrt(z)) + np.exp(-z) / np.sqrt(np.pi * z)


def _rayleigh_printed(s, y, R, Q):
    if s == 0.0:
        return math.nan
    pref = 0.5 * math.pi * Q * R * y * s / (Q**2 + R**2 * s) ** 1.5
    expo = math.exp(s * y**2 / (2 * (Q**2 + R**2 * s)))
    arg = R**2 * s**2 * y**2 / (2 * (Q**4 + Q**2 * R**2 * s))
    return float(pref * expo * (2.0 - regularized_gamma_p_neg_half(arg)))


def rayleigh_zs_closed_form(s, y=0.65, R=0.25, Q=0.2) -> float:
    """``int_0^inf (x/R^2) e^{-x^2/2R^2} e^{-s(x-y)^2/2Q^2} dx`` by completing the square."""
    a = 1.0 / R**2 + s / Q**2
    b = s * y / Q**2
    c = s * y**2 / Q**2
    m = b / a
    core = math.exp(-0.5 * a * m * m) / a + m * math.sqrt(math.pi / (2 * a)) * (1.0 + math.erf(m * math.sqrt(a / 2)))
    return core * math.exp(0.5 * b * b / a - 0.5 * c) / R**2


@dataclass(frozen=True)
class RayleighZ:
    printed: float
    quadrature: float

    @property
    def rel_discrepancy(self) -> float:
        return abs(self.printed - self.quadrature) / abs(self.quadrature)


def rayleigh_zs(s: float, y: float = 0.65, R: float = 0.25, Q: float = 0.2,
                spec: QuadratureSpec = QuadratureSpec()) -> RayleighZ:
    """Evaluate the incomplete-gamma closed form for ``Z_s`` next to quadrature of the same integrand."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    if R <= 0 or Q <= 0:
        raise ValueError("R and Q must be positive")
    prob = rayleigh_problem(y, R, Q)

    def lf(x):
        return prob.log_prior(x) + s * prob.log_likelihood(x)

    val, _, shift = integrate_log(lf, prob.support, spec, prob.scale, prob.breakpoints)
    return RayleighZ(_rayleigh_printed(float(s), y, R, Q), val * math.exp(shift))


def rayleigh_problem(y: float = 0.65, R: float = 0.25, Q: float = 0.2) -> BayesProblem:
    """Rayleigh(R) prior, likelihood ``exp(-(x - y)^2 / (2 Q^2))``.

    The likelihood integrates to ``sqrt(2 pi) Q`` over x; the auxiliary
    reference is a Student-t(3) centred between prior mode and datum.
    """
    y, R, Q = float(y), float(R), float(Q)

    def lprior(x):
        # log of x <= 0 is -inf or NaN; LogDensity maps both to -inf
        return np.log(x) - 2 * math.log(R) - 0.5 * x * x / R**2

    def llik(x):
        return -0.5 * (x - y) ** 2 / Q**2

    loc, scl = 0.5 * (R + y), max(R, Q)
    aux = Auxiliary(
        LogDensity(lambda x: student_t_logpdf(x, 3.0, loc, scl)),
        0.0,
        lambda n, rng: loc + scl * rng.standard_t(3.0, size=n),
    )
    return BayesProblem(
        log_prior=LogDensity(lprior),
        log_likelihood=LogDensity(llik),
        prior_log_norm=0.0,
        likelihood_log_norm=0.5 * math.log(2 * math.pi) + math.log(Q),
        auxiliary=aux,
        sample_prior=lambda n, rng: R * np.sqrt(-2.0 * np.log1p(-rng.random(n))),
        sample_likelihood=lambda n, rng: rng.normal(y, Q, size=n),
        likelihood_sup=1.0,
        support=(0.0, math.inf),
        scale=R,
        breakpoints=(y,),
        name="rayleigh",
    )


def conjugate_gaussian(m0: float = 0.0, s0: float = 1.0, y: float = 0.8, sigma: float = 0.5,
                       aux_scale: float = 3.0) -> BayesProblem:
    """Normal(m0, s0) prior and Normal(y; x, sigma) likelihood, both proper in x."""
    m0, s0, y, sigma = float(m0), float(s0), float(y), float(sigma)
    aux_sd = aux_scale * max(s0, sigma)
    aux = Auxiliary(
        LogDensity(lambda x: normal_logpdf(x, m0, aux_sd)),
        0.0,
        lambda n, rng: rng.normal(m0, aux_sd, size=n),
    )
    return BayesProblem(
        log_prior=LogDensity(lambda x: normal_logpdf(x, m0, s0)),
        log_likelihood=LogDensity(lambda x: normal_logpdf(y, x, sigma)),
        prior_log_norm=0.0,
        likelihood_log_norm=0.0,
        auxiliary=aux,
        sample_prior=lambda n, rng: rng.normal(m0, s0, size=n),
        sample_likelihood=lambda n, rng: rng.normal(y, sigma, size=n),
        likelihood_sup=1.0 / (math.sqrt(2 * math.pi) * sigma),
        scale=max(s0, sigma),
        breakpoints=tuple(sorted({m0, y})),
        name="conjugate-gaussian",
    )


def conjugate_gaussian_evidence(m0=0.0, s0=1.0, y=0.8, sigma=0.5) -> float:
    """Closed-form marginal ``Normal(y; m0, sqrt(s0^2 + sigma^2))``."""
    return math.exp(normal_logpdf(y, m0, math.sqrt(s0**2 + sigma**2)))
