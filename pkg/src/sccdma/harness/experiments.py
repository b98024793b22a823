"""Experiment runners behind the CLI subcommands.

Each runner consumes a flat config dict (see io_utils.KNOWN_KEYS), writes
CSV data plus a JSON summary into the output directory, and returns the
list of files written.  Monte Carlo trials and threshold-table cells are
independent work items on a process pool; aggregation is keyed by trial
index so results are byte-identical at any worker count.
"""

from __future__ import annotations

import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bp import detect, measure_llr_statistics
from ..continuum import asymptotic_me, nonuniform_profiles
from ..density_evolution import (de_run, de_step, initial_state,
                                 multiuser_efficiency,
                                 uncoupled_fixed_points)
from ..ensemble import SystemConfig, sample_coupled, to_factor_graph
from ..errors import InvalidConfig
from ..scalar_channel import default_table
from ..system_model import random_symbols, transmit
from ..thresholds import (ThresholdResult, bp_threshold_uncoupled,
                          coupled_bp_threshold, io_threshold,
                          snr_db_to_sigma)
from .io_utils import wilson_interval, write_csv, write_summary
from .rng import matrix_stream, noise_stream, symbol_stream


_KINDS = ("de", "threshold", "ber", "continuum", "validate-llr")


@dataclass
class ExperimentSpec:
    """One experiment: kind, flat config, seed, output dir, worker count."""

    kind: str
    config: dict = field(default_factory=dict)
    out_dir: str = "out"
    threads: int = 1

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidConfig(f"unknown experiment kind {self.kind!r}")
        trials = self.config.get("trials", 1)
        if not isinstance(trials, int) or trials < 1:
            raise InvalidConfig("trials must be a positive integer")
        for key in ("beta_list", "snr_db_list", "L_list", "W_list"):
            if key in self.config and not _as_list(self.config[key]):
                raise InvalidConfig(f"{key} must be nonempty")
        self.config.setdefault("seed", 0)

    @property
    def base_seed(self) -> int:
        return int(self.config["seed"])

    def run(self) -> list:
        if self.kind == "de":
            return run_de(self.config, self.out_dir)
        if self.kind == "threshold":
            return run_threshold(self.config, self.out_dir, self.threads)
        if self.kind == "ber":
            return run_ber(self.config, self.out_dir, self.threads)
        if self.kind == "continuum":
            return run_continuum(self.config, self.out_dir, self.threads)
        return run_validate_llr(self.config, self.out_dir, self.threads)


def _status(msg: str):
    # progress goes to stderr so data outputs stay clean
    print(msg, file=sys.stderr, flush=True)


def sigma_from_config(cfg: dict) -> float:
    if "sigma_n_sq" in cfg:
        return float(cfg["sigma_n_sq"])
    if "snr_db" in cfg:
        return snr_db_to_sigma(float(cfg["snr_db"]))
    raise InvalidConfig("need snr_db or sigma_n_sq")


def system_config(cfg: dict, need_counts: bool) -> SystemConfig:
    sn2 = sigma_from_config(cfg)
    L = int(cfg.get("L", 1))
    W = int(cfg.get("W", 0))
    beta = float(cfg["beta"])
    beta_init = float(cfg.get("beta_init", beta))
    if not need_counts:
        return SystemConfig.from_loads(beta=beta, beta_init=beta_init, L=L,
                                       W=W, sigma_n_sq=sn2)
    K = int(cfg["K"])
    N = int(cfg.get("N", round(K / beta)))
    if beta_init == 0.0:
        n_init = 0
    else:
        n_init = int(cfg.get("N_init", round(K / beta_init)))
    return SystemConfig.from_counts(K=K, N=N, r=int(cfg["r"]), L=L, W=W,
                                    N_init=n_init, sigma_n_sq=sn2)


# ----------------------------------------------------------------------
# de
# ----------------------------------------------------------------------

def run_de(cfg: dict, out_dir) -> list:
    started = time.time()
    out_dir = Path(out_dir)
    sys_cfg = system_config(cfg, need_counts=False)
    max_iters = int(cfg.get("max_iters", 10**5))
    tol = float(cfg.get("tol", 1e-10))
    stride = int(cfg.get("dump_every", max(1, max_iters // 50)))
    traj = de_run(sys_cfg, max_iters=max_iters, tol=tol,
                  record_every=stride)
    rows = []
    for st in traj.states:
        eta = multiuser_efficiency(st, sys_cfg.sigma_n_sq)
        for pos in range(sys_cfg.L):
            rows.append((st.iteration, pos, st.sir[pos], eta[pos]))
    csv = write_csv(out_dir / "de_trajectory.csv",
                    ["iteration", "position", "sir", "eta"], rows)
    outputs = [csv]
    eta_final = multiuser_efficiency(traj.final, sys_cfg.sigma_n_sq)
    summary = write_summary(out_dir, "de", cfg, outputs, started, extra={
        "converged": traj.converged, "iterations": traj.iterations,
        "residual": traj.residual,
        "eta_middle": float(eta_final[sys_cfg.L // 2]),
        "eta_boundary": float(max(eta_final[0], eta_final[-1]))})
    outputs.append(summary)
    if cfg.get("plot", True):
        from .plots import plot_de_profile
        outputs.append(plot_de_profile(traj, sys_cfg, out_dir))
    return outputs


# ----------------------------------------------------------------------
# threshold
# ----------------------------------------------------------------------

def _threshold_cell(args):
    L, W, snr_db, beta_init, tol_beta, eta_tol = args
    sn2 = snr_db_to_sigma(snr_db)
    if W == 0:
        res = bp_threshold_uncoupled(sn2, tol_beta=tol_beta)
        res.L, res.W, res.beta_init = L, 0, beta_init
        return res
    return coupled_bp_threshold(L=L, W=W, beta_init=beta_init,
                                sigma_n_sq=sn2, tol_beta=tol_beta,
                                eta_tol=eta_tol)


def run_threshold(cfg: dict, out_dir, threads: int = 1) -> list:
    started = time.time()
    out_dir = Path(out_dir)
    snr_db = float(cfg.get("snr_db", 10.0))
    beta_init = float(cfg.get("beta_init", 1.0))
    tol_beta = float(cfg.get("tol_beta", 1e-3))
    eta_tol = float(cfg.get("eta_tol", 1e-3))
    l_list = _as_list(cfg.get("L_list", cfg.get("L", [])))
    w_list = _as_list(cfg.get("W_list", cfg.get("W", [])))
    cells = [(int(L), int(W), snr_db, beta_init, tol_beta, eta_tol)
             for L in l_list for W in w_list]
    results: list[ThresholdResult] = []
    if threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_threshold_cell, cells))
    else:
        results = [_threshold_cell(c) for c in cells]
    if cfg.get("include_io", False):
        res = io_threshold(snr_db_to_sigma(snr_db),
                           tol_beta=float(cfg.get("tol_beta", 1e-4)))
        res.L, res.W, res.beta_init = 0, 0, beta_init
        results.append(res)

    header = ["L", "W", "snr_db", "beta_init", "beta_star", "bracket_lo",
              "bracket_hi", "method"]
    rows = [(r.L, r.W, r.snr_db, r.beta_init, r.beta_star, r.bracket[0],
             r.bracket[1], r.method) for r in results]
    csv = write_csv(out_dir / "thresholds.csv", header, rows)
    txt = out_dir / "thresholds.txt"
    widths = [4, 3, 7, 9, 10, 10, 10, 22]
    with open(txt, "w") as fh:
        fh.write("".join(h.ljust(w + 2) for h, w in zip(header, widths))
                 + "\n")
        for row in rows:
            fh.write("".join(_round_str(v).ljust(w + 2)
                             for v, w in zip(row, widths)) + "\n")
    outputs = [csv, txt]
    summary = write_summary(out_dir, "threshold", cfg, outputs, started)
    outputs.append(summary)
    if cfg.get("plot", True) and rows:
        from .plots import plot_threshold_table
        outputs.append(plot_threshold_table(results, out_dir))
    return outputs


def _round_str(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _as_list(v):
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


# ----------------------------------------------------------------------
# ber
# ----------------------------------------------------------------------

@dataclass
class BerResult:
    """Aggregated error counts per sweep point and iteration."""

    sweep_key: str
    points: list                 # sweep values
    iterations: int
    errors: np.ndarray           # (n_points, iters)
    bits: np.ndarray
    wall_time_s: float

    def ber(self, point_idx: int, iteration: int | None = None):
        it = (iteration or self.iterations) - 1
        return (self.errors[point_idx, it]
                / max(int(self.bits[point_idx, it]), 1))

    def wilson(self, point_idx: int, iteration: int | None = None):
        it = (iteration or self.iterations) - 1
        return wilson_interval(int(self.errors[point_idx, it]),
                               int(self.bits[point_idx, it]))


def _ber_trial(args):
    cfg_fields, sn2, iters, detector, middle_only, base_seed, trial = args
    sys_cfg = SystemConfig(**cfg_fields)
    matrix = sample_coupled(sys_cfg, matrix_stream(base_seed, trial))
    graph = to_factor_graph(matrix)
    symbols = random_symbols(sys_cfg.K, sys_cfg.L,
                             symbol_stream(base_seed, trial))
    block = transmit(matrix, symbols, sn2, noise_stream(base_seed, trial),
                     graph=graph)
    rep = detect(graph, block, iters, detector=detector)
    if middle_only:
        mid = sys_cfg.L // 2
        return rep.errors[:, mid], rep.bits[:, mid]
    return rep.errors.sum(axis=1), rep.bits.sum(axis=1)


def run_ber_point(sys_cfg: SystemConfig, iters: int, trials: int,
                  base_seed: int, detector: str = "ga",
                  middle_only: bool | None = None,
                  threads: int = 1):
    """Accumulated per-iteration error counts over seeded trials."""
    if middle_only is None:
        middle_only = sys_cfg.W > 0
    fields = dict(beta=sys_cfg.beta, beta_init=sys_cfg.beta_init,
                  L=sys_cfg.L, W=sys_cfg.W, sigma_n_sq=sys_cfg.sigma_n_sq,
                  K=sys_cfg.K, N=sys_cfg.N, N_init=sys_cfg.N_init,
                  r=sys_cfg.r)
    jobs = [(fields, sys_cfg.sigma_n_sq, iters, detector, middle_only,
             base_seed, t) for t in range(trials)]
    errors = np.zeros(iters, dtype=np.int64)
    bits = np.zeros(iters, dtype=np.int64)
    if threads > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for e, b in pool.map(_ber_trial, jobs, chunksize=8):
                errors += e
                bits += b
    else:
        for job in jobs:
            e, b = _ber_trial(job)
            errors += e
            bits += b
    return errors, bits


def run_ber(cfg: dict, out_dir, threads: int = 1) -> list:
    started = time.time()
    out_dir = Path(out_dir)
    iters = int(cfg.get("iters", 40))
    trials = int(cfg.get("trials", 10))
    detector = str(cfg.get("detector", "ga"))
    base_seed = int(cfg.get("seed", 0))
    if "beta_list" in cfg:
        sweep_key, points = "beta", [float(b) for b in _as_list(cfg["beta_list"])]
    elif "snr_db_list" in cfg:
        sweep_key, points = "snr_db", [float(s)
                                       for s in _as_list(cfg["snr_db_list"])]
    else:
        sweep_key, points = "beta", [float(cfg["beta"])]

    n_pts = len(points)
    errors = np.zeros((n_pts, iters), dtype=np.int64)
    bits = np.zeros((n_pts, iters), dtype=np.int64)
    rows = []
    outputs = []
    try:
        for i, val in enumerate(points):
            local = dict(cfg)
            local[sweep_key] = val
            sys_cfg = system_config(local, need_counts=True)
            middle_only = bool(cfg.get("middle_only", sys_cfg.W > 0))
            e, b = run_ber_point(sys_cfg, iters, trials,
                                 base_seed + 1000003 * i, detector,
                                 middle_only, threads)
            errors[i], bits[i] = e, b
            snr_db = float(local.get("snr_db",
                                     -10 * np.log10(sys_cfg.sigma_n_sq)))
            for it in (iters,) if not cfg.get("per_iteration") else range(
                    1, iters + 1):
                p, lo, hi = wilson_interval(int(e[it - 1]), int(b[it - 1]))
                rows.append((val if sweep_key == "beta" else sys_cfg.beta,
                             snr_db, it, int(e[it - 1]), int(b[it - 1]),
                             p, lo, hi))
    finally:
        csv = write_csv(out_dir / "ber.csv",
                        ["beta", "snr_db", "iteration", "errors", "bits",
                         "ber", "wilson_lo", "wilson_hi"], rows)
        outputs.append(csv)
    result = BerResult(sweep_key=sweep_key, points=points, iterations=iters,
                       errors=errors, bits=bits,
                       wall_time_s=time.time() - started)
    summary = write_summary(out_dir, "ber", cfg, outputs, started, extra={
        "final_ber": [result.ber(i) for i in range(n_pts)]})
    outputs.append(summary)
    if cfg.get("plot", True):
        from .plots import plot_ber
        outputs.append(plot_ber(points, result, sweep_key, out_dir))
    return outputs


# ----------------------------------------------------------------------
# validate-llr
# ----------------------------------------------------------------------

def run_validate_llr(cfg: dict, out_dir, threads: int = 1) -> list:
    started = time.time()
    out_dir = Path(out_dir)
    iters = int(cfg.get("iters", 5))
    n_blocks = int(cfg.get("blocks", 4))
    detector = str(cfg.get("detector", "ga"))
    base_seed = int(cfg.get("seed", 0))
    sys_cfg = system_config(cfg, need_counts=True)
    sn2 = sys_cfg.sigma_n_sq

    graphs_blocks = []
    for t in range(n_blocks):
        matrix = sample_coupled(sys_cfg, matrix_stream(base_seed, t))
        graph = to_factor_graph(matrix)
        symbols = random_symbols(sys_cfg.K, sys_cfg.L,
                                 symbol_stream(base_seed, t))
        block = transmit(matrix, symbols, sn2, noise_stream(base_seed, t),
                         graph=graph)
        graphs_blocks.append((graph, block))

    # pool statistics across blocks (fresh matrix per block)
    L = sys_cfg.L
    cnt = np.zeros((iters + 1, L))
    s1 = np.zeros((iters + 1, L))
    s2 = np.zeros((iters + 1, L))
    for graph, block in graphs_blocks:
        rep = detect(graph, block, iters, detector=detector,
                     collect_llr=True)
        for it, (c, a, b) in rep.llr_stats.items():
            cnt[it] += c
            s1[it] += a
            s2[it] += b
    mean = s1 / np.maximum(cnt, 1.0)
    var = np.maximum(s2 / np.maximum(cnt, 1.0) - mean**2, 0.0)

    # density-evolution predictions per iteration and position
    state = initial_state(sys_cfg)
    sir_hist = [state.sir.copy()]
    for _ in range(iters):
        state = de_step(state, sys_cfg)
        sir_hist.append(state.sir.copy())

    rows = []
    known = set(sys_cfg.known_positions().tolist())
    for it in range(iters + 1):
        for pos in range(L):
            if pos in known:
                continue
            pm, pv = 2.0 * sir_hist[it][pos], 4.0 * sir_hist[it][pos]
            em, ev = mean[it, pos], var[it, pos]
            rows.append((it, pos, em, ev, pm, pv,
                         _rel_err(em, pm), _rel_err(ev, pv)))
    csv = write_csv(out_dir / "validate_llr.csv",
                    ["iteration", "position", "empirical_mean",
                     "empirical_var", "predicted_mean", "predicted_var",
                     "rel_err_mean", "rel_err_var"], rows)
    outputs = [csv]
    summary = write_summary(out_dir, "validate-llr", cfg, outputs, started,
                            extra={"edges_pooled": float(cnt[1:].sum())})
    outputs.append(summary)
    if cfg.get("plot", True):
        from .plots import plot_validate_llr
        outputs.append(plot_validate_llr(rows, iters, out_dir))
    return outputs


def _rel_err(emp, pred):
    if pred == 0.0:
        return 0.0 if emp == 0.0 else float("inf")
    return abs(emp - pred) / abs(pred)


# ----------------------------------------------------------------------
# continuum
# ----------------------------------------------------------------------

def run_continuum(cfg: dict, out_dir, threads: int = 1) -> list:
    started = time.time()
    out_dir = Path(out_dir)
    sn2 = sigma_from_config(cfg)
    outputs = []
    table = default_table()

    betas = np.linspace(float(cfg.get("beta_min", 1.5)),
                        float(cfg.get("beta_max", 2.2)),
                        int(cfg.get("beta_steps", 71)))
    me_rows = [(float(b), asymptotic_me(float(b), sn2, table))
               for b in betas]
    csv = write_csv(out_dir / "continuum_me.csv", ["beta", "eta_asymptotic"],
                    me_rows)
    outputs.append(csv)

    profile_rows = []
    if cfg.get("profile", False):
        beta = float(cfg["beta"])
        gamma = float(cfg.get("gamma", 0.05))
        profiles = nonuniform_profiles(gamma, beta, sn2, table)
        for prof in profiles:
            eta = prof.efficiency(table, sn2, beta)
            for x, ut, u, e in zip(prof.x, prof.ut, prof.u, eta):
                profile_rows.append((prof.branch, gamma, x, ut, u, e))
        pcsv = write_csv(out_dir / "continuum_profiles.csv",
                         ["branch", "gamma", "x", "u_tilde", "u", "eta"],
                         profile_rows)
        outputs.append(pcsv)

    summary = write_summary(out_dir, "continuum", cfg, outputs, started)
    outputs.append(summary)
    if cfg.get("plot", True):
        from .plots import plot_continuum
        outputs.append(plot_continuum(me_rows, profile_rows, out_dir))
    return outputs
