"""Transmission simulator against dense-matrix and statistical oracles."""

import numpy as np
import pytest

from sccdma.ensemble import SystemConfig, sample_coupled, to_factor_graph
from sccdma.errors import DimensionMismatch
from sccdma.system_model import noise_free_output, random_symbols, transmit


class TestTransmit:
    def test_noiseless_single_edge_rows(self):
        # r = 1, W = 0: every chip is one signed symbol over sqrt(cbar)
        cfg = SystemConfig.from_counts(K=4, N=8, r=1, sigma_n_sq=1.0)
        m = sample_coupled(cfg, 0)
        g = to_factor_graph(m)
        b = random_symbols(4, 1, 1)
        blk = transmit(m, b, 0.0, 2, graph=g)
        scale = 1 / np.sqrt(8 / 4)  # cbar = r N / K = 2
        assert np.allclose(np.abs(blk.received), scale)

    def test_all_ones_matches_dense_multiply(self):
        cfg = SystemConfig.from_counts(K=10, N=5, r=4, L=4, W=1, N_init=10,
                                       sigma_n_sq=1.0)
        m = sample_coupled(cfg, 3)
        b = np.ones((10, 4), dtype=np.int8)
        blk = transmit(m, b, 0.0, 9)
        dense = m.dense() @ np.ones(40)
        assert np.allclose(blk.received, dense, atol=1e-12)

    def test_linearity_against_dense_multiply(self):
        cfg = SystemConfig.from_counts(K=16, N=8, r=4, L=4, W=1, N_init=16,
                                       sigma_n_sq=1.0)
        m = sample_coupled(cfg, 5)
        g = to_factor_graph(m)
        dense = m.dense()
        rng = np.random.default_rng(0)
        for _ in range(10):
            x = rng.normal(size=64)
            got = noise_free_output(g, x)
            assert np.allclose(got, dense @ x, atol=1e-12)

    def test_noise_variance_empirical(self):
        cfg = SystemConfig.from_counts(K=8, N=100, r=4, sigma_n_sq=0.37)
        m = sample_coupled(cfg, 1)
        g = to_factor_graph(m)
        b = random_symbols(8, 1, 2)
        clean = noise_free_output(g, b.astype(float).T.reshape(-1))
        draws = []
        n_blocks = 10**5 // 100
        for t in range(n_blocks):
            blk = transmit(m, b, 0.37, 1000 + t, graph=g)
            draws.append(blk.received - clean)
        var = np.var(np.concatenate(draws))
        assert abs(var - 0.37) / 0.37 < 0.02

    def test_per_chip_signal_power_matches_load(self):
        cfg = SystemConfig.from_counts(K=60, N=30, r=6, sigma_n_sq=1.0)
        beta = 2.0
        acc = []
        for t in range(10**4 // 30):
            m = sample_coupled(cfg, 400 + t)
            g = to_factor_graph(m)
            b = random_symbols(60, 1, 800 + t)
            blk = transmit(m, b, 0.0, t, graph=g)
            acc.append(blk.received**2)
        power = np.concatenate(acc)
        se = power.std(ddof=1) / np.sqrt(power.size)
        assert abs(power.mean() - beta) < 3 * se

    def test_dimension_mismatch(self):
        cfg = SystemConfig.from_counts(K=4, N=4, r=2, sigma_n_sq=1.0)
        m = sample_coupled(cfg, 0)
        with pytest.raises(DimensionMismatch):
            transmit(m, np.ones((3, 1)), 1.0, 0)

    def test_deterministic_given_seed(self):
        cfg = SystemConfig.from_counts(K=8, N=4, r=2, sigma_n_sq=0.5)
        m = sample_coupled(cfg, 0)
        b = random_symbols(8, 1, 1)
        blk1 = transmit(m, b, 0.5, 77)
        blk2 = transmit(m, b, 0.5, 77)
        assert np.array_equal(blk1.received, blk2.received)
