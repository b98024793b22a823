"""Coupled DE recursion, fixed points, and monotonicity properties."""

import numpy as np
import pytest

from sccdma.density_evolution import (DEState, de_run, de_step,
                                      initial_state, multiuser_efficiency,
                                      scalar_recursion,
                                      uncoupled_fixed_points)
from sccdma.ensemble import SystemConfig


def loads(beta, beta_init, L, W, sn2=0.1):
    return SystemConfig.from_loads(beta=beta, beta_init=beta_init, L=L, W=W,
                                   sigma_n_sq=sn2)


class TestDeStep:
    def test_one_step_uncoupled_from_zero(self, table):
        cfg = loads(1.3, 1.3, 4, 0, sn2=0.2)
        st = de_step(initial_state(cfg), cfg, table)
        assert np.allclose(st.sir, 1.0 / (0.2 + 1.3), rtol=1e-14)

    def test_one_step_no_interference(self, table):
        cfg = loads(0.0, 0.0, 5, 1, sn2=0.3)
        st = de_step(initial_state(cfg), cfg, table)
        assert np.allclose(st.sir, 1.0 / 0.3, rtol=1e-14)

    def test_matches_independent_recursion_oracle(self, table):
        # second implementation of the coupled equations in plain python
        cfg = loads(1.5, 0.0, 4, 1, sn2=0.1)
        L, W = 4, 1
        beta_l = [0.0, 1.5, 1.5, 1.5]
        sir = [0.0] * L
        oracle_states = []
        for _ in range(3):
            sigma = [0.1 + beta_l[l] / (W + 1)
                     * sum(float(table.xi(sir[(l - w) % L]))
                           for w in range(W + 1)) for l in range(L)]
            sir = [sum(1.0 / sigma[(lp + w) % L] for w in range(W + 1))
                   / (W + 1) for lp in range(L)]
            oracle_states.append(list(sir))
        st = initial_state(cfg)
        for i in range(3):
            st = de_step(st, cfg, table)
            assert np.max(np.abs(st.sir - np.array(oracle_states[i]))) < 1e-12


class TestDeRun:
    def test_uncoupled_equals_scalar_recursion(self, table):
        cfg = loads(1.2, 1.2, 5, 0, sn2=0.1)
        traj = de_run(cfg, max_iters=200, tol=1e-300, table=table)
        scalar = scalar_recursion(1.2, 0.1, 200, table)
        assert np.max(np.abs(traj.final.sir - scalar[-1])) < 1e-14
        # all L copies identical
        assert np.ptp(traj.final.sir) == 0.0

    def test_terminal_state_is_smallest_stable_root(self, table):
        for beta in (0.8, 1.5, 1.99):
            cfg = loads(beta, beta, 3, 0)
            traj = de_run(cfg, max_iters=10**5, tol=1e-12, table=table)
            fps = uncoupled_fixed_points(beta, 0.1, table)
            assert abs(traj.final.sir[0]
                       - fps.smallest_stable) < 1e-6 * fps.smallest_stable

    def test_monotone_and_bounded_random_configs(self, table):
        rng = np.random.default_rng(2)
        for _ in range(30):
            L = int(rng.integers(2, 12))
            W = int(rng.integers(0, min(L, 4)))
            beta = float(rng.uniform(0.1, 2.5))
            beta_init = float(rng.choice([0.0, rng.uniform(0.1, beta)]))
            sn2 = float(rng.uniform(0.05, 1.0))
            cfg = loads(beta, beta_init if W else beta, L, W, sn2)
            st = initial_state(cfg)
            prev = st.sir
            for _ in range(60):
                st = de_step(st, cfg, table)
                assert np.all(st.sir >= prev)
                assert np.all(st.sir <= 1.0 / sn2 + 1e-12)
                assert np.all(st.sigma_sq >= sn2)
                assert np.all(st.sigma_sq
                              <= sn2 + max(beta, beta_init) + 1e-12)
                prev = st.sir

    def test_genie_bracket(self, table):
        cfg = loads(1.5, 0.0, 8, 1)
        lo = initial_state(cfg)
        hi = DEState(sir=np.full(8, 1.0 / 0.1), sigma_sq=np.full(8, np.nan),
                     iteration=0)
        for _ in range(300):
            lo = de_step(lo, cfg, table)
            hi = de_step(hi, cfg, table)
            assert np.all(hi.sir >= lo.sir - 1e-15)
        # both settle to the same fixed point: unique on the reachable set
        assert np.max(np.abs(hi.sir - lo.sir)) < 1e-9

    def test_not_converged_flag(self, table):
        cfg = loads(1.9, 0.0, 16, 1)
        traj = de_run(cfg, max_iters=5, tol=1e-12, table=table)
        assert not traj.converged
        assert traj.iterations == 5

    def test_trajectory_monotone_across_snapshots(self, table):
        cfg = loads(1.7, 0.0, 8, 1)
        traj = de_run(cfg, max_iters=2000, tol=1e-10, table=table,
                      record_every=50)
        for a, b in zip(traj.states, traj.states[1:]):
            assert np.all(b.sir >= a.sir)


class TestUncoupledFixedPoints:
    def test_beta_zero_single_root(self, table):
        fps = uncoupled_fixed_points(0.0, 0.25, table)
        assert len(fps) == 1
        assert fps.roots[0] == pytest.approx(4.0, rel=1e-12)

    def test_bistable_at_high_load(self, table):
        fps = uncoupled_fixed_points(1.99, 0.1, table)
        assert len(fps) == 3
        assert list(fps.stable) == [True, False, True]

    def test_monostable_below_threshold(self, table):
        fps = uncoupled_fixed_points(1.5, 0.1, table)
        assert len(fps) == 1
        assert fps.stable[0]

    def test_residual_captured(self, table):
        fps = uncoupled_fixed_points(1.99, 0.1, table)
        for s in fps.roots:
            assert abs(1.0 / s - 0.1 - 1.99 * float(table.xi(s))) < 1e-10

    def test_grid_scan_oracle_agreement(self, table):
        # independent coarse scan on a linear grid
        beta, sn2 = 1.99, 0.1
        grid = np.linspace(1.0 / (sn2 + beta), 1.0 / sn2, 200001)
        res = 1.0 / grid - sn2 - beta * table.xi(grid)
        flips = np.nonzero(np.sign(res[:-1]) * np.sign(res[1:]) < 0)[0]
        fps = uncoupled_fixed_points(beta, sn2, table)
        assert len(flips) == len(fps)
        for i, root in zip(flips, fps.roots):
            assert grid[i] <= root <= grid[i + 1]


class TestMultiuserEfficiency:
    def test_extremes(self):
        assert np.all(multiuser_efficiency(np.zeros(4), 0.1) == 0.0)
        assert np.allclose(multiuser_efficiency(np.full(4, 10.0), 0.1), 1.0)

    def test_componentwise_product(self):
        sir = np.array([0.0, 2.0, 5.0])
        assert np.allclose(multiuser_efficiency(sir, 0.1),
                           np.array([0.0, 0.2, 0.5]))
