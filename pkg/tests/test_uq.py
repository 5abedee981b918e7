import numpy as np
import pytest

from kldiv.data import from_continuous
from kldiv.errors import ConfigError, EstimationError, SubsamplingError
from kldiv.kld import KlEstimate, kld_est_bc
from kldiv.uq import (
    SubsampleDistribution,
    SubsamplingConfig,
    ci_from_distribution,
    estimate_convergence_rate,
    subsample_ci,
    subsample_distribution,
)


def mean_difference(x, y):
    return float(x.continuous.mean() - y.continuous.mean())


class TestConfig:
    def test_defaults(self):
        cfg = SubsamplingConfig()
        assert cfg.s == 1000
        assert cfg.b_exponent == pytest.approx(2.0 / 3.0)
        assert cfg.rate_exponent == 0.5
        assert cfg.alpha == 0.05

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"s": 1},
            {"b_exponent": 0.0},
            {"b_exponent": 1.0},
            {"alpha": 0.0},
            {"alpha": 1.0},
            {"rate_exponent": 0.0},
            {"max_failure_frac": 1.0},
            {"seed": -1},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ConfigError):
            SubsamplingConfig(**kwargs)


class TestDistribution:
    def test_subsample_sizes(self):
        rng = np.random.default_rng(0)
        x = from_continuous(rng.standard_normal(500))
        y = from_continuous(rng.standard_normal(700))
        cfg = SubsamplingConfig(s=10, seed=1)
        dist = subsample_distribution(x, y, mean_difference, cfg)
        assert dist.b_x == int(np.ceil(500 ** (2 / 3)))  # 63
        assert dist.b_y == int(np.ceil(700 ** (2 / 3)))  # 79
        assert dist.values.shape == (10,)
        assert dist.failures == 0

    def test_deterministic_and_seed_sensitive(self):
        rng = np.random.default_rng(1)
        x = from_continuous(rng.standard_normal(200))
        y = from_continuous(rng.standard_normal(200))
        d1 = subsample_distribution(x, y, mean_difference, SubsamplingConfig(s=20, seed=5))
        d2 = subsample_distribution(x, y, mean_difference, SubsamplingConfig(s=20, seed=5))
        d3 = subsample_distribution(x, y, mean_difference, SubsamplingConfig(s=20, seed=6))
        assert np.array_equal(d1.values, d2.values)
        assert not np.array_equal(d1.values, d3.values)

    def test_constant_estimator_gives_zero_deviations(self):
        x = from_continuous(np.linspace(0, 1, 100))
        y = from_continuous(np.linspace(0, 1, 100))
        dist = subsample_distribution(x, y, lambda a, b: 7.25, SubsamplingConfig(s=15))
        assert (dist.values == 0.0).all()

    def test_tiny_x_rejected(self):
        # n=1 gives b_x=1, too small to resample
        x = from_continuous([0.5])
        y = from_continuous(np.linspace(0, 1, 50))
        with pytest.raises(ConfigError):
            subsample_distribution(x, y, mean_difference, SubsamplingConfig(s=5))

    def test_theta_hat_override_shifts_deviations(self):
        rng = np.random.default_rng(2)
        x = from_continuous(rng.standard_normal(150))
        y = from_continuous(rng.standard_normal(150))
        cfg = SubsamplingConfig(s=12, seed=3)
        base = subsample_distribution(x, y, mean_difference, cfg, theta_hat=0.0)
        shifted = subsample_distribution(x, y, mean_difference, cfg, theta_hat=1.0)
        tau_b = base.b_x ** cfg.rate_exponent
        np.testing.assert_allclose(shifted.values, base.values - tau_b, rtol=1e-12)

    def test_failed_replicates_counted(self):
        rng = np.random.default_rng(3)
        x = from_continuous(rng.standard_normal(100))
        y = from_continuous(rng.standard_normal(100))

        def flaky(a, b):
            # fails whenever the subsample carries the full sample's minimum
            if np.isclose(a.continuous.min(), x.continuous.min()):
                raise EstimationError("poisoned subsample")
            return mean_difference(a, b)

        cfg = SubsamplingConfig(s=40, seed=7, max_failure_frac=0.9)
        dist = subsample_distribution(x, y, flaky, cfg, theta_hat=0.0)
        assert dist.failures > 0
        assert dist.failures + dist.values.size == 40

    def test_failure_threshold_aborts(self):
        x = from_continuous(np.linspace(0, 1, 100))
        y = from_continuous(np.linspace(0, 1, 100))

        def always_fails(a, b):
            raise EstimationError("nope")

        # theta_hat supplied so only the replicates fail, not the full fit
        with pytest.raises(SubsamplingError) as err:
            subsample_distribution(
                x, y, always_fails, SubsamplingConfig(s=10), theta_hat=0.0
            )
        assert err.value.failures == 10
        assert err.value.total == 10

    def test_full_sample_error_propagates(self):
        x = from_continuous(np.linspace(0, 1, 100))
        y = from_continuous(np.linspace(0, 1, 100))

        def always_fails(a, b):
            raise EstimationError("nope")

        with pytest.raises(EstimationError):
            subsample_distribution(x, y, always_fails, SubsamplingConfig(s=10))

    def test_non_estimation_errors_propagate(self):
        x = from_continuous(np.linspace(0, 1, 100))
        y = from_continuous(np.linspace(0, 1, 100))

        def buggy(a, b):
            raise RuntimeError("unexpected")

        with pytest.raises(RuntimeError):
            subsample_distribution(x, y, buggy, SubsamplingConfig(s=5))


class TestCi:
    def test_interval_arithmetic_frozen_example(self):
        # deviations {-2,-1,0,1,2}, alpha=0.2: the 10%/90% empirical
        # quantiles are -1.6 and 1.6, tau_n = sqrt(400) = 20
        dist = SubsampleDistribution(np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), 20, 20, 0)
        cfg = SubsamplingConfig(s=5, alpha=0.2)
        lo, hi = ci_from_distribution(3.0, dist, 400, cfg)
        assert lo == pytest.approx(3.0 - 1.6 / 20.0, abs=1e-12)
        assert hi == pytest.approx(3.0 + 1.6 / 20.0, abs=1e-12)

    def test_constant_estimator_degenerate_interval(self):
        x = from_continuous(np.linspace(0, 1, 80))
        y = from_continuous(np.linspace(2, 3, 80))
        est = subsample_ci(x, y, lambda a, b: 4.5, SubsamplingConfig(s=25))
        assert est.ci == (4.5, 4.5)
        assert est.value == 4.5

    def test_kl_estimator_passthrough(self):
        rng = np.random.default_rng(4)
        x = from_continuous(rng.standard_normal(120))
        y = from_continuous(rng.standard_normal(140) + 0.5)
        cfg = SubsamplingConfig(s=60, seed=2)
        est = subsample_ci(x, y, lambda a, b: kld_est_bc(a.continuous, b.continuous), cfg)
        assert isinstance(est, KlEstimate)
        assert est.value == kld_est_bc(x.continuous, y.continuous).value
        assert est.ci[0] <= est.ci[1]
        assert est.level == pytest.approx(0.95)
        assert (est.n, est.m) == (120, 140)

    def test_interval_narrows_with_n(self):
        # same deviation distribution, larger n: tau_n grows, interval shrinks
        dist = SubsampleDistribution(np.linspace(-1, 1, 101), 30, 30, 0)
        cfg = SubsamplingConfig(s=101)
        w_small = np.diff(ci_from_distribution(0.0, dist, 100, cfg))[0]
        w_large = np.diff(ci_from_distribution(0.0, dist, 10000, cfg))[0]
        assert w_large == pytest.approx(w_small / 10.0, rel=1e-12)


class TestConvergenceRate:
    def test_sqrt_n_estimator_near_half(self):
        rng = np.random.default_rng(5)
        x = from_continuous(rng.standard_normal(2000))
        y = from_continuous(rng.standard_normal(2000))
        beta = estimate_convergence_rate(
            x, y, mean_difference, b_grid=(50, 100, 200, 400), s=300, seed=0
        )
        assert 0.35 <= beta <= 0.65

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        x = from_continuous(rng.standard_normal(600))
        y = from_continuous(rng.standard_normal(600))
        b1 = estimate_convergence_rate(x, y, mean_difference, (40, 80, 160), 80, seed=9)
        b2 = estimate_convergence_rate(x, y, mean_difference, (40, 80, 160), 80, seed=9)
        assert b1 == b2

    def test_grid_validation(self):
        x = from_continuous(np.linspace(0, 1, 100))
        y = from_continuous(np.linspace(0, 1, 100))
        with pytest.raises(ConfigError):
            estimate_convergence_rate(x, y, mean_difference, (10, 20), 10, seed=0)
        with pytest.raises(ConfigError):
            estimate_convergence_rate(x, y, mean_difference, (20, 10, 40), 10, seed=0)
        with pytest.raises(ConfigError):
            estimate_convergence_rate(x, y, mean_difference, (10, 20, 400), 10, seed=0)

    def test_constant_estimator_degenerate(self):
        x = from_continuous(np.linspace(0, 1, 200))
        y = from_continuous(np.linspace(0, 1, 200))
        with pytest.raises(EstimationError):
            estimate_convergence_rate(x, y, lambda a, b: 1.0, (10, 20, 40), 25, seed=0)
