import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zbridge.density import DensityPair, HomotopyPath, LogDensity, PowerH, bimodal_student_t, gaussian_pair
from zbridge.oracle import log_z_of_exponent
from zbridge.samplers import MetropolisTuning, RngStream, StageEnsemble
from zbridge.schedule import (
    TRACE_COLUMNS,
    ScheduleConfig,
    ScheduleError,
    empirical_variance,
    oracle_schedule,
    predicted_variance,
    run_schedule,
    stage_mu_bar,
)


def _same_pair():
    ld = LogDensity(lambda x: -0.5 * x * x - 0.5 * math.log(2 * math.pi))
    return DensityPair(ld, ld, 0.0, ratio_sup_bound=1.0, sample_p=lambda n, rng: rng.standard_normal(n),
                       name="same")


class TestOracleSchedule:
    @settings(max_examples=15)
    @given(st.integers(1, 12), st.sampled_from([0.5, 1.0, 2.0]))
    def test_telescopes(self, M, alpha):
        pair = gaussian_pair()
        path = HomotopyPath.uniform(M, PowerH(alpha))
        assert oracle_schedule(pair, path) == pytest.approx(log_z_of_exponent(pair, 1.0), abs=1e-9)

    def test_bimodal(self):
        pair = bimodal_student_t()
        assert oracle_schedule(pair, HomotopyPath.uniform(7)) == pytest.approx(math.log(2.0805014679), abs=1e-9)


class TestRunSchedule:
    def test_trace_shapes(self):
        tr = run_schedule(ScheduleConfig(gaussian_pair(), HomotopyPath.uniform(6), 500, rng=RngStream(0)))
        assert tr.M == 6
        assert tr.s.shape == (7,) and tr.log_z_bar.shape == (7,) and tr.log_mu_bar.shape == (6,)
        assert tr.log_z_bar[0] == 0.0
        np.testing.assert_allclose(np.cumsum(tr.log_mu_bar), tr.log_z_bar[1:])
        rows = list(tr.rows())
        assert len(rows) == 7 and len(rows[0]) == len(TRACE_COLUMNS)
        assert math.isnan(rows[-1][3])

    def test_accuracy_exact(self):
        pair = gaussian_pair()
        tr = run_schedule(ScheduleConfig(pair, HomotopyPath.uniform(10), 20_000, rng=RngStream(1)))
        assert abs(tr.log_z1 - log_z_of_exponent(pair, 1.0)) < 4 * tr.log_z1_se()

    def test_metropolis_runs(self):
        pair = gaussian_pair()
        cfg = ScheduleConfig(pair, HomotopyPath.uniform(5), 5000, sampler="metropolis", rng=RngStream(2),
                             tuning=MetropolisTuning(burn_in=100))
        tr = run_schedule(cfg)
        assert tr.z1 == pytest.approx(0.2506628274631, rel=0.05)

    def test_importance_rejection_population(self):
        cfg = ScheduleConfig(gaussian_pair(), HomotopyPath.uniform(5), 5000, sampler="importance-rejection",
                             rng=RngStream(3))
        tr = run_schedule(cfg)
        assert tr.population[0] == 5000
        assert np.all(np.diff(tr.population) <= 0)

    def test_deterministic(self):
        cfg = ScheduleConfig(gaussian_pair(), HomotopyPath.uniform(4), 300, rng=RngStream(4, 2))
        assert run_schedule(cfg).log_z1 == run_schedule(cfg).log_z1

    def test_partial_trace_on_extinction(self):
        cfg = ScheduleConfig(gaussian_pair(), HomotopyPath.uniform(5), 2, sampler="importance-rejection",
                             rng=RngStream(0), k=1e8)
        with pytest.raises(ScheduleError) as exc:
            run_schedule(cfg)
        assert exc.value.trace.M < 5

    def test_unsupported_exact(self):
        pair = DensityPair(LogDensity(lambda x: -x * x), LogDensity(lambda x: -0.5 * x * x), 0.0)
        with pytest.raises(ScheduleError):
            run_schedule(ScheduleConfig(pair, HomotopyPath.uniform(3), 10))

    @pytest.mark.parametrize("kw", [dict(n_per_stage=1), dict(sampler="gibbs")])
    def test_config_validation(self, kw):
        base = dict(pair=gaussian_pair(), path=HomotopyPath.uniform(3), n_per_stage=10)
        base.update(kw)
        with pytest.raises(ValueError):
            ScheduleConfig(**base)

    def test_stage_mu_bar_checks(self):
        pair, path = gaussian_pair(), HomotopyPath.uniform(2)
        with pytest.raises(ValueError, match="attributed"):
            stage_mu_bar(pair, path, 0.0, 0.5, StageEnsemble(np.zeros(3), 0.5, "exact", 3, 3))
        with pytest.raises(ValueError, match="empty"):
            stage_mu_bar(pair, path, 0.0, 0.5, StageEnsemble(np.zeros(0), 0.0, "exact", 0, 0))


class TestErrorModel:
    def test_identical_densities(self):
        em = predicted_variance(_same_pair(), HomotopyPath.uniform(10), N=100)
        assert em.predicted_var_logZ1 == pytest.approx(0.0, abs=1e-12)
        assert em.printed_var_logZ1 == pytest.approx(-1 / 100, rel=1e-9)
        assert em.printed_negative and not em.predicted_negative

    @pytest.mark.parametrize("M", [5, 10, 20])
    def test_predicted_nonnegative(self, M):
        em = predicted_variance(gaussian_pair(), HomotopyPath.uniform(M), N=1000)
        assert em.predicted_var_logZ1 >= 0
        assert em.mu.shape == (M,)

    def test_scales_with_n(self):
        a = predicted_variance(gaussian_pair(), HomotopyPath.uniform(10), N=100)
        b = predicted_variance(gaussian_pair(), HomotopyPath.uniform(10), N=1000)
        assert a.predicted_var_logZ1 == pytest.approx(10 * b.predicted_var_logZ1, rel=1e-9)

    def test_n_validation(self):
        with pytest.raises(ValueError):
            predicted_variance(gaussian_pair(), HomotopyPath.uniform(3), N=0)

    def test_empirical_matches_clt(self):
        pair, path = gaussian_pair(), HomotopyPath.uniform(10)
        emp = empirical_variance(ScheduleConfig(pair, path, 1000, rng=RngStream(11)), 200)
        clt = float(np.sum(predicted_variance(pair, path, N=1000).stage_rel_var) / 1000)
        # sampling sd of a variance from 200 replicates is about 10%
        assert emp.var_log_z1 == pytest.approx(clt, rel=0.35)
        assert emp.n_failed == 0 and emp.log_z1.shape == (200,)

    def test_replicates_validation(self):
        with pytest.raises(ValueError):
            empirical_variance(ScheduleConfig(gaussian_pair(), HomotopyPath.uniform(3), 10), 1)
