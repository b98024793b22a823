"""Harness: config parsing, determinism, CLI surfaces, exit codes."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sccdma.errors import InvalidConfig
from sccdma.harness.experiments import run_ber, run_de, run_validate_llr
from sccdma.harness.io_utils import (apply_overrides, parse_config_text,
                                     wilson_interval)
from sccdma.harness.rng import matrix_stream, stream


def run_cli(args):
    return subprocess.run([sys.executable, "-m", "sccdma.harness.cli",
                           *args], capture_output=True, text=True)


class TestConfigParsing:
    def test_basic_types(self):
        cfg = parse_config_text(
            "kind = ber\nK = 128\nbeta = 1.5\nmiddle_only = true\n"
            "L_list = 16, 32\n# comment\n")
        assert cfg == {"kind": "ber", "K": 128, "beta": 1.5,
                       "middle_only": True, "L_list": [16, 32]}

    def test_unknown_key_rejected(self):
        with pytest.raises(InvalidConfig):
            parse_config_text("no_such_key = 3\n")

    def test_overrides_win(self):
        cfg = apply_overrides({"beta": 1.0, "K": 4}, ["beta=2.5"])
        assert cfg["beta"] == 2.5 and cfg["K"] == 4

    def test_bad_override_shape(self):
        with pytest.raises(InvalidConfig):
            apply_overrides({}, ["beta:2"])


class TestRngStreams:
    def test_streams_are_independent_and_stable(self):
        a = stream(7, 3, 1).integers(0, 2**32, 4)
        b = stream(7, 3, 1).integers(0, 2**32, 4)
        c = stream(7, 4, 1).integers(0, 2**32, 4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_matrix_stream_reproducible(self):
        g1 = matrix_stream(11, 0).standard_normal(3)
        g2 = matrix_stream(11, 0).standard_normal(3)
        assert np.array_equal(g1, g2)


class TestWilson:
    def test_contains_point_estimate(self):
        p, lo, hi = wilson_interval(7, 1000)
        assert lo < p < hi
        assert 0 <= lo and hi <= 1

    def test_zero_bits(self):
        assert wilson_interval(0, 0) == (0.0, 0.0, 1.0)


class TestRunners:
    def test_ber_noiseless_single_user_is_zero(self, tmp_path):
        cfg = {"K": 4, "r": 2, "beta": 0.5, "sigma_n_sq": 1e-12,
               "iters": 3, "trials": 2, "seed": 1, "plot": False}
        run_ber(cfg, tmp_path)
        rows = (tmp_path / "ber.csv").read_text().splitlines()
        assert rows[1].split(",")[3] == "0"

    def test_ber_deterministic_across_thread_counts(self, tmp_path):
        cfg = {"K": 32, "r": 4, "beta": 1.0, "snr_db": 8.0, "iters": 4,
               "trials": 6, "seed": 9, "plot": False}
        run_ber(cfg, tmp_path / "a", threads=1)
        run_ber(cfg, tmp_path / "b", threads=2)
        assert ((tmp_path / "a" / "ber.csv").read_bytes()
                == (tmp_path / "b" / "ber.csv").read_bytes())

    def test_de_summary_fields(self, tmp_path):
        cfg = {"beta": 1.97, "beta_init": 0.0, "L": 8, "W": 1,
               "snr_db": 10.0, "max_iters": 2000, "plot": False, "seed": 0}
        run_de(cfg, tmp_path)
        summary = json.loads((tmp_path / "de_summary.json").read_text())
        assert summary["converged"] is True
        assert 0 <= summary["eta_middle"] <= 1

    def test_validate_llr_iteration_zero_rows(self, tmp_path):
        cfg = {"K": 64, "r": 4, "beta": 1.0, "snr_db": 10.0, "iters": 2,
               "blocks": 1, "seed": 2, "plot": False}
        run_validate_llr(cfg, tmp_path)
        lines = (tmp_path / "validate_llr.csv").read_text().splitlines()
        first = lines[1].split(",")
        assert first[0] == "0"
        assert float(first[2]) == 0.0 and float(first[4]) == 0.0


class TestCli:
    def test_de_subcommand_outputs(self, tmp_path):
        out = tmp_path / "de"
        res = run_cli(["de", "--out", str(out), "--set", "beta=1.9",
                       "--set", "beta_init=0", "--set", "L=8",
                       "--set", "W=1", "--set", "snr_db=10",
                       "--set", "max_iters=500"])
        assert res.returncode == 0
        assert (out / "de_trajectory.csv").exists()
        assert (out / "de_summary.json").exists()
        assert (out / "de_profile.png").exists()

    def test_no_plot_flag(self, tmp_path):
        out = tmp_path / "de"
        res = run_cli(["de", "--out", str(out), "--no-plot",
                       "--set", "beta=1.5", "--set", "beta_init=1.5",
                       "--set", "L=4", "--set", "W=0",
                       "--set", "snr_db=10", "--set", "max_iters=200"])
        assert res.returncode == 0
        assert not (out / "de_profile.png").exists()

    def test_threshold_empty_grid_succeeds(self, tmp_path):
        out = tmp_path / "thr"
        res = run_cli(["threshold", "--out", str(out),
                       "--set", "snr_db=10"])
        assert res.returncode == 0
        lines = (out / "thresholds.csv").read_text().splitlines()
        assert len(lines) == 1  # header only

    def test_invalid_config_exit_code(self, tmp_path):
        res = run_cli(["ber", "--out", str(tmp_path), "--set", "bogus=1"])
        assert res.returncode == 2

    def test_monostable_exit_code(self, tmp_path):
        res = run_cli(["threshold", "--out", str(tmp_path),
                       "--set", "snr_db=-10", "--set", "include_io=true"])
        assert res.returncode == 3

    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("beta = 1.0\nK = 32\nr = 4\nsnr_db = 8\n"
                       "iters = 2\ntrials = 2\n")
        out = tmp_path / "ber"
        res = run_cli(["ber", "--config", str(cfg), "--out", str(out),
                       "--seed", "5", "--set", "trials=3", "--no-plot"])
        assert res.returncode == 0
        summary = json.loads((out / "ber_summary.json").read_text())
        assert summary["config"]["trials"] == 3
        assert summary["seed"] == 5

    def test_ber_csv_deterministic_via_cli(self, tmp_path):
        args = ["ber", "--seed", "4", "--no-plot", "--set", "K=32",
                "--set", "r=4", "--set", "beta=1.0", "--set", "snr_db=8",
                "--set", "iters=3", "--set", "trials=4"]
        res1 = run_cli(args + ["--out", str(tmp_path / "x"), "--threads", "1"])
        res2 = run_cli(args + ["--out", str(tmp_path / "y"), "--threads", "2"])
        assert res1.returncode == res2.returncode == 0
        assert ((tmp_path / "x" / "ber.csv").read_bytes()
                == (tmp_path / "y" / "ber.csv").read_bytes())

    def test_continuum_profile_outputs(self, tmp_path):
        out = tmp_path / "cont"
        res = run_cli(["continuum", "--out", str(out),
                       "--set", "snr_db=10", "--set", "beta_min=1.9",
                       "--set", "beta_max=2.0", "--set", "beta_steps=3",
                       "--set", "profile=true", "--set", "beta=1.99",
                       "--set", "gamma=0.05"])
        assert res.returncode == 0
        assert (out / "continuum_me.csv").exists()
        assert (out / "continuum_profiles.csv").exists()
        assert (out / "continuum.png").exists()

    def test_validate_llr_subcommand(self, tmp_path):
        out = tmp_path / "llr"
        res = run_cli(["validate-llr", "--out", str(out), "--no-plot",
                       "--set", "K=64", "--set", "r=4", "--set", "beta=1.0",
                       "--set", "snr_db=10", "--set", "iters=2",
                       "--set", "blocks=1"])
        assert res.returncode == 0
        assert (out / "validate_llr.csv").exists()
