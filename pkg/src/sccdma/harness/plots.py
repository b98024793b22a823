"""Figure rendering for the report path.

Figures are derived artifacts written next to the CSV data; the CSV stays
canonical.  The Agg backend keeps everything headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ..density_evolution import multiuser_efficiency


def plot_de_profile(traj, sys_cfg, out_dir) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 3.6))
    L = sys_cfg.L
    xs = np.arange(L) / L
    picks = traj.states
    if len(picks) > 8:
        idx = np.unique(np.linspace(0, len(picks) - 1, 8).astype(int))
        picks = [traj.states[i] for i in idx]
    for st in picks:
        eta = multiuser_efficiency(st, sys_cfg.sigma_n_sq)
        ax1.plot(xs, eta, lw=1.2, label=f"i={st.iteration}")
    ax1.set_xlabel("position l'/L")
    ax1.set_ylabel("multiuser efficiency")
    ax1.set_ylim(0, 1.05)
    ax1.legend(fontsize=7)
    mids = [(st.iteration,
             multiuser_efficiency(st, sys_cfg.sigma_n_sq)[L // 2])
            for st in traj.states]
    ax2.plot([m[0] for m in mids], [m[1] for m in mids], "o-", ms=3)
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("middle-position efficiency")
    ax2.set_ylim(0, 1.05)
    fig.tight_layout()
    path = Path(out_dir) / "de_profile.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_threshold_table(results, out_dir) -> Path:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    by_w = {}
    for r in results:
        if r.method == "coupled-DE-bisection":
            by_w.setdefault(r.W, []).append((r.L, r.beta_star))
    for w, pts in sorted(by_w.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-",
                label=f"W={w}")
    for r in results:
        if r.method == "bifurcation" and np.isfinite(r.beta_star):
            ax.axhline(r.beta_star, color="gray", ls=":", lw=1)
        if r.method == "equal-height":
            ax.axhline(r.beta_star, color="black", ls="--", lw=1)
    ax.set_xlabel("chain length L")
    ax.set_ylabel("threshold load")
    ax.set_xscale("log", base=2)
    if by_w:
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(out_dir) / "threshold_table.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_ber(points, result, sweep_key, out_dir) -> Path:
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    bers, los, his = [], [], []
    for i in range(len(points)):
        p, lo, hi = result.wilson(i)
        bers.append(max(p, 1e-12))
        los.append(max(p - lo, 0))
        his.append(max(hi - p, 0))
    ax.errorbar(points, bers, yerr=[los, his], fmt="o-", capsize=3)
    ax.set_yscale("log")
    ax.set_xlabel("load" if sweep_key == "beta" else "SNR (dB)")
    ax.set_ylabel("BER")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = Path(out_dir) / "ber.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_validate_llr(rows, iters, out_dir) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.5))
    its = np.array([r[0] for r in rows])
    emp_m = np.array([r[2] for r in rows])
    emp_v = np.array([r[3] for r in rows])
    pre_m = np.array([r[4] for r in rows])
    pre_v = np.array([r[5] for r in rows])
    ax1.plot(pre_m, emp_m, ".", ms=4)
    lim = max(pre_m.max(), emp_m.max()) * 1.05 + 1e-9
    ax1.plot([0, lim], [0, lim], "k--", lw=0.8)
    ax1.set_xlabel("predicted mean 2*sir")
    ax1.set_ylabel("empirical mean")
    ax2.plot(pre_v, emp_v, ".", ms=4)
    lim = max(pre_v.max(), emp_v.max()) * 1.05 + 1e-9
    ax2.plot([0, lim], [0, lim], "k--", lw=0.8)
    ax2.set_xlabel("predicted var 4*sir")
    ax2.set_ylabel("empirical var")
    fig.suptitle(f"v2f LLR statistics, iterations 0..{iters}")
    fig.tight_layout()
    path = Path(out_dir) / "validate_llr.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_continuum(me_rows, profile_rows, out_dir) -> Path:
    n_panels = 2 if profile_rows else 1
    fig, axes = plt.subplots(1, n_panels, figsize=(4.8 * n_panels, 3.5))
    axes = np.atleast_1d(axes)
    betas = [r[0] for r in me_rows]
    axes[0].plot(betas, [r[1] for r in me_rows], "-")
    axes[0].set_xlabel("load")
    axes[0].set_ylabel("asymptotic middle efficiency")
    axes[0].set_ylim(0, 1.05)
    if profile_rows:
        branches = sorted({r[0] for r in profile_rows})
        for br in branches:
            xs = [r[2] for r in profile_rows if r[0] == br]
            es = [r[5] for r in profile_rows if r[0] == br]
            axes[1].plot(xs, es, label=br)
        axes[1].set_xlabel("x")
        axes[1].set_ylabel("efficiency profile")
        axes[1].legend(fontsize=8)
    fig.tight_layout()
    path = Path(out_dir) / "continuum.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
