"""Scalar-channel primitives against closed forms and independent oracles."""

import numpy as np
import pytest

from sccdma.scalar_channel import (LN2, GaussHermite, ScalarChannelTable,
                                   mmse_xi, mutual_info_c, posterior_mean)

# Monte Carlo oracles at s = 1, frozen from a 1e7-sample run
# (standard-normal draws, generator seed 987654321):
#   xi:  mean of (1 - tanh(s + sqrt(s) X))^2
#   C:   mean of ln2 - log1p(exp(-2s - 2 sqrt(s) X))
MC_XI_1 = 0.44967304623342946
MC_XI_1_SE = 0.00025428276908778086
MC_C_1 = 0.33683471511156754
MC_C_1_SE = 0.00017800983672509245


def bayes_posterior_mean(z, s):
    """Two-Gaussian Bayes-rule oracle, written out from the densities."""
    like_p = np.exp(-0.5 * s * (z - 1.0) ** 2)
    like_m = np.exp(-0.5 * s * (z + 1.0) ** 2)
    return (like_p - like_m) / (like_p + like_m)


class TestPosteriorMean:
    def test_zero_snr_returns_prior_mean(self):
        assert posterior_mean(0.7, 0.0) == 0.0

    def test_zero_observation_is_symmetric(self):
        assert posterior_mean(0.0, 5.0) == 0.0

    def test_matches_two_gaussian_oracle_at_reference_point(self):
        assert abs(posterior_mean(1.0, 2.0)
                   - bayes_posterior_mean(1.0, 2.0)) < 1e-12

    def test_matches_two_gaussian_oracle_random(self):
        rng = np.random.default_rng(7)
        z = rng.normal(scale=2.0, size=1000)
        s = rng.uniform(0.01, 20.0, size=1000)
        got = posterior_mean(z, s)
        want = bayes_posterior_mean(z, s)
        assert np.max(np.abs(got - want)) < 1e-12

    def test_odd_and_nondecreasing_in_z(self):
        z = np.linspace(-5, 5, 201)
        vals = posterior_mean(z, 1.7)
        assert np.allclose(vals, -posterior_mean(-z, 1.7))
        assert np.all(np.diff(vals) >= 0)
        assert np.all(np.abs(vals) <= 1.0)


class TestMmse:
    def test_zero_snr_gives_prior_variance(self):
        assert mmse_xi(0.0) == 1.0

    def test_high_snr_vanishes(self):
        assert mmse_xi(1e6) < 1e-6

    def test_monte_carlo_oracle_at_unit_snr(self):
        assert abs(mmse_xi(1.0) - MC_XI_1) < 3 * MC_XI_1_SE

    def test_strictly_decreasing_on_random_pairs(self, table):
        rng = np.random.default_rng(3)
        for _ in range(100):
            s1, s2 = np.sort(rng.uniform(0.0, 30.0, size=2))
            if s2 - s1 < 1e-9:
                continue
            assert mmse_xi(s1) > mmse_xi(s2)

    def test_range(self):
        s = np.linspace(0, 50, 300)
        vals = mmse_xi(s)
        assert np.all((vals >= 0) & (vals <= 1))


class TestMutualInfo:
    def test_zero_snr_carries_nothing(self):
        assert mutual_info_c(0.0) == 0.0

    def test_noiseless_limit_is_ln2(self):
        assert abs(mutual_info_c(1e6) - LN2) < 1e-6

    def test_monte_carlo_oracle_at_unit_snr(self):
        assert abs(mutual_info_c(1.0) - MC_C_1) < 3 * MC_C_1_SE

    def test_nondecreasing_and_bounded(self):
        s = np.linspace(0, 40, 400)
        vals = mutual_info_c(s)
        assert np.all(np.diff(vals) >= -1e-14)
        assert np.all(vals <= LN2 + 1e-15)


class TestGuoShamaiVerdu:
    def test_derivative_identity_on_log_grid(self):
        s = np.logspace(-3, 3, 200)
        h = 1e-4 * s
        dc = (mutual_info_c(s + h) - mutual_info_c(s - h)) / (2 * h)
        assert np.max(np.abs(dc - mmse_xi(s) / 2)) < 1e-6


class TestQuadratureRule:
    def test_weights_normalized(self):
        quad = GaussHermite(64)
        assert abs(quad.weights.sum() - 1.0) < 1e-12

    def test_minimum_node_count_enforced(self):
        with pytest.raises(ValueError):
            GaussHermite(16)

    def test_gaussian_moments(self):
        quad = GaussHermite(64)
        assert abs(quad.expect(lambda x: x)) < 1e-12
        assert abs(quad.expect(lambda x: x * x) - 1.0) < 1e-10


class TestMemoTable:
    def test_interpolation_error_budget(self, table):
        rng = np.random.default_rng(11)
        s = rng.uniform(0.0, table.s_max, 500)
        assert np.max(np.abs(table.xi(s) - mmse_xi(s))) < 1e-8
        assert np.max(np.abs(table.capacity(s) - mutual_info_c(s))) < 1e-8

    def test_closed_form_branches(self, table):
        assert table.xi(0.0) == 1.0
        assert table.capacity(0.0) == 0.0
        assert table.xi(1e7) == 0.0
        assert abs(table.capacity(1e7) - LN2) < 1e-12

    def test_xi_inverse_round_trip(self, table):
        rng = np.random.default_rng(5)
        for s in rng.uniform(0.0, 20.0, 50):
            x = float(table.xi(s))
            assert abs(table.xi_inverse(x) - s) < 1e-7 * max(s, 1.0)

    def test_shared_instance_reused(self, table):
        from sccdma.scalar_channel import default_table
        assert default_table() is table

    def test_small_table_builds(self):
        small = ScalarChannelTable(s_max=4.0, step=1e-2,
                                   quad=GaussHermite(64))
        assert abs(float(small.xi(1.0)) - mmse_xi(1.0)) < 1e-5
