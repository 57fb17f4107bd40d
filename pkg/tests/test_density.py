import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zbridge.density import (
    DensityPair,
    HomotopyDensity,
    HomotopyPath,
    IdentityH,
    LogDensity,
    PowerH,
    TabulatedH,
    as_points,
    bimodal_student_t,
    builtin_densities,
    estimate_ratio_bound,
    gaussian_pair,
    log_ratio,
    log_stage_weight,
    log_unnorm_theta,
    make_pair,
    parse_h,
    rayleigh_posterior,
    student_t_logpdf,
)


class TestPoints:
    def test_scalar_becomes_vector(self):
        assert as_points(0.5, 1).shape == (1,)

    def test_column_is_flattened(self):
        assert as_points(np.zeros((4, 1)), 1).shape == (4,)

    def test_single_point_in_k_dims(self):
        assert as_points([1.0, 2.0], 2).shape == (1, 2)

    @pytest.mark.parametrize("x,dim", [(np.zeros((3, 2)), 1), (np.zeros((3, 3)), 2), (np.zeros(3), 2)])
    def test_mismatch(self, x, dim):
        with pytest.raises(ValueError):
            as_points(x, dim)


class TestLogDensity:
    def test_nan_maps_to_minus_inf(self):
        ld = LogDensity(lambda x: np.log(x))
        out = ld(np.array([-1.0, 0.0, 1.0]))
        assert out[0] == -np.inf and out[1] == -np.inf and out[2] == 0.0

    def test_dim_validation(self):
        with pytest.raises(ValueError):
            LogDensity(lambda x: x, dim=0)

    def test_pair_dims_must_match(self):
        with pytest.raises(ValueError):
            DensityPair(LogDensity(lambda x: x[:, 0], 2), LogDensity(lambda x: x), 0.0)

    @pytest.mark.parametrize("bad", [math.inf, math.nan])
    def test_log_z0_finite(self, bad):
        with pytest.raises(ValueError):
            DensityPair(LogDensity(lambda x: x), LogDensity(lambda x: x), bad)

    @pytest.mark.parametrize("bad", [0.0, -1.0, math.inf])
    def test_bound_positive_finite(self, bad):
        with pytest.raises(ValueError):
            DensityPair(LogDensity(lambda x: x), LogDensity(lambda x: x), 0.0, ratio_sup_bound=bad)


class TestHMaps:
    def test_parse(self):
        assert isinstance(parse_h("identity"), IdentityH)
        assert parse_h("power:0.5").alpha == 0.5
        assert parse_h("2").alpha == 2.0
        with pytest.raises(ValueError):
            parse_h("cosine")

    def test_power_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            PowerH(0.0)

    def test_tabulated_interpolates(self):
        h = TabulatedH([0, 0.5, 1], [0, 0.2, 1])
        assert float(h(0.25)) == pytest.approx(0.1)

    @pytest.mark.parametrize("s,h", [([0, 1], [0, 0.5]), ([0.1, 1], [0, 1]), ([0, 0.6, 0.5, 1], [0, 0.1, 0.2, 1]),
                                     ([0, 0.5, 1], [0, 0.6, 0.4])])
    def test_tabulated_validation(self, s, h):
        with pytest.raises(ValueError):
            TabulatedH(s, h)


class TestPath:
    def test_uniform(self):
        p = HomotopyPath.uniform(4)
        np.testing.assert_array_equal(p.stages, [0, 0.25, 0.5, 0.75, 1])
        assert p.M == 4

    @pytest.mark.parametrize("stages", [[0.0, 0.5], [0.1, 1.0], [0.0, 0.5, 0.5, 1.0], [0.0]])
    def test_bad_stages(self, stages):
        with pytest.raises(ValueError):
            HomotopyPath(stages=np.array(stages))

    def test_flat_h_needs_opt_in(self):
        h = TabulatedH([0, 0.5, 1], [0, 0.0, 1])
        with pytest.raises(ValueError):
            HomotopyPath(h, np.array([0.0, 0.25, 0.5, 1.0]))
        p = HomotopyPath(h, np.array([0.0, 0.25, 0.5, 1.0]), allow_flat=True)
        x = np.linspace(-1, 1, 5)
        np.testing.assert_array_equal(log_stage_weight(gaussian_pair(), p, 0.0, 0.25, x), 0.0)

    def test_h_must_hit_endpoints(self):
        with pytest.raises(ValueError):
            HomotopyPath(lambda s: 0.5 * np.asarray(s), np.linspace(0, 1, 3))

    def test_zero_M(self):
        with pytest.raises(ValueError):
            HomotopyPath.uniform(0)


class TestTheta:
    pair = gaussian_pair()
    path = HomotopyPath.uniform(10)
    x = np.linspace(-1, 1, 11)

    def test_endpoints_exact(self):
        np.testing.assert_array_equal(log_unnorm_theta(self.pair, self.path, 0.0, self.x), self.pair.log_p(self.x))
        np.testing.assert_array_equal(log_unnorm_theta(self.pair, self.path, 1.0, self.x), self.pair.log_q(self.x))

    @given(st.floats(0.0, 1.0))
    def test_geometric_mix(self, s):
        lq, lp = self.pair.log_q(self.x), self.pair.log_p(self.x)
        np.testing.assert_allclose(log_unnorm_theta(self.pair, self.path, s, self.x), s * lq + (1 - s) * lp,
                                   rtol=1e-12, atol=1e-12)

    def test_s_out_of_range(self):
        with pytest.raises(ValueError):
            log_unnorm_theta(self.pair, self.path, 1.5, self.x)
        with pytest.raises(ValueError):
            HomotopyDensity(self.pair, self.path, -0.1)

    def test_zero_density_propagates(self):
        pair = rayleigh_posterior()
        out = log_unnorm_theta(pair, self.path, 0.5, np.array([-1.0, 0.3]))
        assert out[0] == -np.inf and np.isfinite(out[1])

    @pytest.mark.parametrize("s,s_next", [(0.5, 0.5), (0.6, 0.5), (-0.1, 0.5), (0.5, 1.1)])
    def test_stage_weight_order(self, s, s_next):
        with pytest.raises(ValueError):
            log_stage_weight(self.pair, self.path, s, s_next, self.x)

    def test_stage_weight_value(self):
        w = log_stage_weight(self.pair, self.path, 0.2, 0.3, self.x)
        lr = self.pair.log_q(self.x) - self.pair.log_p(self.x)
        np.testing.assert_allclose(w, 0.1 * lr, rtol=1e-12)

    def test_log_ratio_fn_preferred(self):
        pair = rayleigh_posterior()
        x = np.array([0.2, 0.65])
        np.testing.assert_allclose(log_ratio(pair, x), -0.5 * (x - 0.65) ** 2 / 0.04)

    def test_exponent(self):
        assert HomotopyDensity(self.pair, HomotopyPath.uniform(4, PowerH(2.0)), 0.5).exponent == 0.25


class TestBuiltins:
    def test_catalogue(self):
        assert set(builtin_densities()) == {"gaussian-pair", "bimodal-vs-student-t", "rayleigh-posterior"}
        with pytest.raises(ValueError, match="unknown density"):
            make_pair("nope")

    def test_gaussian_bound_is_sup(self):
        pair = gaussian_pair(mu_q=0.3)
        x = np.linspace(-3, 3, 200_001)
        sup = np.exp(log_ratio(pair, x)).max()
        assert pair.ratio_sup_bound == pytest.approx(sup, rel=1e-8)

    def test_gaussian_no_bound_when_q_wider(self):
        assert gaussian_pair(sigma_q=0.3, sigma_p=0.2).ratio_sup_bound is None

    def test_gaussian_theta_sampler_moments(self):
        pair = gaussian_pair()
        x = pair.sample_theta(0.5, 200_000, np.random.default_rng(0))
        # precision 0.5 * 100 + 0.5 * 25 = 62.5
        assert x.var() == pytest.approx(1 / 62.5, rel=0.02)
        assert abs(x.mean()) < 0.002

    def test_gaussian_validation(self):
        with pytest.raises(ValueError):
            gaussian_pair(sigma_q=0.0)

    def test_bimodal_bound_covers_ratio(self):
        pair = bimodal_student_t()
        x = np.linspace(-20, 20, 400_001)
        assert np.exp(log_ratio(pair, x)).max() <= pair.ratio_sup_bound
        assert pair.ratio_sup_bound == pytest.approx(7.2827, rel=1e-3)

    def test_student_t_normalised(self):
        from scipy import stats

        x = np.linspace(-5, 5, 7)
        np.testing.assert_allclose(student_t_logpdf(x, 3.0, 0.5, 2.0), stats.t.logpdf(x, 3.0, 0.5, 2.0), rtol=1e-12)

    def test_rayleigh_sampler_scale(self):
        pair = rayleigh_posterior(R=0.25)
        x = pair.sample_p(200_000, np.random.default_rng(1))
        # Rayleigh(R) mean is R sqrt(pi / 2)
        assert x.mean() == pytest.approx(0.25 * math.sqrt(math.pi / 2), rel=0.01)
        assert x.min() >= 0

    def test_rayleigh_validation(self):
        with pytest.raises(ValueError):
            rayleigh_posterior(R=0.0)

    def test_estimate_ratio_bound_errors(self):
        unbounded = DensityPair(LogDensity(lambda x: np.zeros_like(x)),
                                LogDensity(lambda x: np.where(x > 0, 0.0, -np.inf)), 0.0)
        with pytest.raises(ValueError, match="unbounded"):
            estimate_ratio_bound(unbounded, np.linspace(-1, 1, 5))
        zero = DensityPair(LogDensity(lambda x: np.full_like(x, -np.inf)), LogDensity(lambda x: np.zeros_like(x)), 0.0)
        with pytest.raises(ValueError, match="zero"):
            estimate_ratio_bound(zero, np.linspace(-1, 1, 5))
