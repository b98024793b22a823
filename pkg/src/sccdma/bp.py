"""Iterative multiuser detection on the factor graph, in LLR form.

Two receivers with a shared product step (LLR summation over the variable
neighborhood minus the incoming edge) and flooding schedule:

  * exact_bp_detect: the sum step marginalizes the Gaussian likelihood over
    all 2^(r-1) configurations of the other symbols at a function node,
    done in the log domain with log-sum-exp.  Exponential in r; refused
    above r_max_exact.
  * ga_bp_detect: the cavity interference is replaced by a Gaussian with
    matched mean/variance, giving the f2v LLR 2 a (y - mu) / (v + sigma_n^2).
    Linear in r.

Messages are clamped to +-LLR_CLAMP.  Symbols at known positions (the
beta_init = 0 emulation) enter as pinned clamped v2f messages and are
excluded from error counts and LLR statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .ensemble import FactorGraph
from .errors import ComplexityRefused, DimensionMismatch
from .system_model import TransmissionBlock

LLR_CLAMP = 50.0
R_MAX_EXACT_DEFAULT = 14

# cap on the size of the (configurations x function nodes) work array
_EXACT_CHUNK_ELEMS = 1 << 23


@dataclass
class MessageState:
    """Per-edge LLRs plus the per-symbol marginals of one BP run.

    All entries are clamped to +-LLR_CLAMP; iteration 0 carries all-zero
    v2f messages (the uniform-prior start).
    """

    f2v: np.ndarray
    v2f: np.ndarray
    marginals: np.ndarray
    iteration: int


@dataclass
class GaMomentState:
    """Cavity moments of one GA sum step.

    edge_mean/edge_var are the per-edge symbol posterior moments implied
    by the incoming v2f messages; node_mean/node_var are the gain-weighted
    per-function-node totals from which each edge's cavity interference
    mean and variance are obtained by subtracting its own contribution.
    """

    edge_mean: np.ndarray        # (n_funcs, r)
    edge_var: np.ndarray         # (n_funcs, r)
    node_mean: np.ndarray        # (n_funcs,)
    node_var: np.ndarray         # (n_funcs,)

    def cavity(self, gains: np.ndarray):
        mu = self.node_mean[:, None] - gains * self.edge_mean
        var = self.node_var[:, None] - gains**2 * self.edge_var
        return mu, var


def ga_moments(v2f: np.ndarray, gains: np.ndarray) -> GaMomentState:
    means = np.tanh(0.5 * v2f).reshape(gains.shape)
    variances = 1.0 - means * means
    return GaMomentState(edge_mean=means, edge_var=variances,
                         node_mean=np.sum(gains * means, axis=1),
                         node_var=np.sum(gains**2 * variances, axis=1))


@dataclass
class DetectionReport:
    """Per-iteration decisions, error counts and optional LLR statistics.

    errors/bits are indexed [iteration-1, position]; only unknown symbols
    are counted.  llr_stats, when collected, maps iteration -> per-position
    (count, sum, sumsq) of b * v2f over edges at unknown symbols.
    """

    iterations: int
    positions: int
    errors: np.ndarray
    bits: np.ndarray
    hard_decisions: list = field(default_factory=list)
    llr_stats: dict = field(default_factory=dict)
    final_marginals: np.ndarray | None = None
    final_messages: MessageState | None = None

    def ber(self, position=None):
        if position is None:
            return self.errors.sum(axis=1) / np.maximum(self.bits.sum(axis=1), 1)
        return (self.errors[:, position]
                / np.maximum(self.bits[:, position], 1))

    def to_csv(self, path_or_file):
        """Columns: iteration, position, bit_errors, bits,
        empirical_llr_mean, empirical_llr_var."""
        lines = ["iteration,position,bit_errors,bits,"
                 "empirical_llr_mean,empirical_llr_var"]
        for it in range(1, self.iterations + 1):
            stats = self.llr_stats.get(it)
            for pos in range(self.positions):
                if stats is not None and stats[0][pos] > 1:
                    n, s, ss = (stats[0][pos], stats[1][pos], stats[2][pos])
                    mean = s / n
                    var = max(ss / n - mean * mean, 0.0) * n / (n - 1)
                    tail = f"{mean:.10g},{var:.10g}"
                else:
                    tail = ","
                lines.append(f"{it},{pos},{int(self.errors[it - 1, pos])},"
                             f"{int(self.bits[it - 1, pos])},{tail}")
        text = "\n".join(lines) + "\n"
        if hasattr(path_or_file, "write"):
            path_or_file.write(text)
        else:
            with open(path_or_file, "w") as fh:
                fh.write(text)


class _RunAccumulator:
    """Shared bookkeeping for both detectors."""

    def __init__(self, graph: FactorGraph, block: TransmissionBlock,
                 iters: int, collect_llr: bool):
        cfg = graph.config
        if block.symbols.shape != (cfg.K, cfg.L):
            raise DimensionMismatch("block does not match graph config")
        self.graph = graph
        self.cfg = cfg
        self.truth = block.symbols_flat().astype(float)
        known_pos = cfg.known_positions()
        self.known_var = np.zeros(graph.n_vars, dtype=bool)
        for lp in known_pos:
            self.known_var[lp * cfg.K:(lp + 1) * cfg.K] = True
        self.known_edge = self.known_var[graph.var_of_edge]
        self.unknown_var = ~self.known_var
        self.collect_llr = collect_llr
        self.report = DetectionReport(
            iterations=iters, positions=cfg.L,
            errors=np.zeros((iters, cfg.L), dtype=np.int64),
            bits=np.zeros((iters, cfg.L), dtype=np.int64))
        self._tie_parity = 0
        # per-position unknown symbol counts
        self._pos_of_var = graph.var_pos
        self._unknown_count = np.bincount(self._pos_of_var[self.unknown_var],
                                          minlength=cfg.L)

    def pin_known(self, v2f: np.ndarray):
        if np.any(self.known_edge):
            v2f[self.known_edge] = (LLR_CLAMP
                                    * self.truth[self.graph.var_of_edge
                                                 [self.known_edge]])

    def record(self, iteration: int, marginals: np.ndarray,
               v2f: np.ndarray):
        dec = np.sign(marginals)
        ties = np.nonzero((dec == 0) & self.unknown_var)[0]
        for idx in ties:
            dec[idx] = self.truth[idx] if self._tie_parity else -self.truth[idx]
            self._tie_parity ^= 1
        wrong = (dec != self.truth) & self.unknown_var
        self.report.errors[iteration - 1] = np.bincount(
            self._pos_of_var[wrong], minlength=self.cfg.L)
        self.report.bits[iteration - 1] = self._unknown_count
        self.report.hard_decisions.append(dec.astype(np.int8))
        if self.collect_llr:
            mask = ~self.known_edge
            vals = v2f[mask] * self.truth[self.graph.var_of_edge[mask]]
            pos = self._pos_of_var[self.graph.var_of_edge[mask]]
            cnt = np.bincount(pos, minlength=self.cfg.L)
            s = np.bincount(pos, weights=vals, minlength=self.cfg.L)
            ss = np.bincount(pos, weights=vals * vals, minlength=self.cfg.L)
            self.report.llr_stats[iteration] = (cnt, s, ss)

    def finalize(self, f2v: np.ndarray, v2f: np.ndarray, iters: int):
        if iters == 0:
            zeros = np.zeros(self.graph.n_edges)
            marginals = np.zeros(self.graph.n_vars)
            self.report.final_messages = MessageState(
                f2v=zeros, v2f=zeros.copy(), marginals=marginals,
                iteration=0)
            self.report.final_marginals = marginals
            return
        totals = np.clip(np.bincount(self.graph.var_of_edge, weights=f2v,
                                     minlength=self.graph.n_vars),
                         -LLR_CLAMP, LLR_CLAMP)
        self.report.final_messages = MessageState(
            f2v=f2v.reshape(-1).copy(), v2f=v2f.copy(), marginals=totals,
            iteration=iters)
        self.report.final_marginals = totals


def _product_step(graph: FactorGraph, f2v: np.ndarray):
    totals = np.bincount(graph.var_of_edge, weights=f2v,
                         minlength=graph.n_vars)
    v2f = totals[graph.var_of_edge] - f2v
    np.clip(v2f, -LLR_CLAMP, LLR_CLAMP, out=v2f)
    marginals = np.clip(totals, -LLR_CLAMP, LLR_CLAMP)
    return v2f, marginals


def _config_matrix(m: int) -> np.ndarray:
    """All 2^m sign vectors as an (2^m, m) array of +-1."""
    if m == 0:
        return np.zeros((1, 0))
    bits = ((np.arange(1 << m)[:, None] >> np.arange(m)[None, :]) & 1)
    return (2.0 * bits - 1.0)


def exact_bp_detect(graph: FactorGraph, block: TransmissionBlock,
                    iters: int, r_max_exact: int = R_MAX_EXACT_DEFAULT,
                    collect_llr: bool = False) -> DetectionReport:
    """Exact BP; sum step marginalizes over 2^(r-1) neighbor configurations."""
    r = graph.r
    if r > r_max_exact:
        raise ComplexityRefused(
            f"exact BP over {r} neighbors needs 2^{r - 1} terms per edge; "
            f"cap is r <= {r_max_exact}")
    acc = _RunAccumulator(graph, block, iters, collect_llr)
    nf = graph.n_funcs
    y = block.received
    two_var = 2.0 * block.noise_variance if block.noise_variance > 0 else 2e-30
    A = graph.gain.reshape(nf, r)
    cfgs = _config_matrix(r - 1)
    n_cfg = cfgs.shape[0]
    chunk = max(1, _EXACT_CHUNK_ELEMS // max(n_cfg, 1))
    others = [np.delete(np.arange(r), j) for j in range(r)]

    v2f = np.zeros(graph.n_edges)
    acc.pin_known(v2f)
    f2v = np.zeros(graph.n_edges)
    for it in range(1, iters + 1):
        Lv = v2f.reshape(nf, r)
        F = f2v.reshape(nf, r)
        for j in range(r):
            oj = others[j]
            for lo in range(0, nf, chunk):
                hi = min(lo + chunk, nf)
                A_o = A[lo:hi][:, oj]
                L_o = Lv[lo:hi][:, oj]
                a_e = A[lo:hi, j]
                # log prior weight of each configuration, up to a constant
                w_cfg = 0.5 * (cfgs @ L_o.T)
                i_cfg = cfgs @ A_o.T
                resid = y[lo:hi][None, :] - i_cfg
                t_pos = w_cfg - (resid - a_e[None, :]) ** 2 / two_var
                t_neg = w_cfg - (resid + a_e[None, :]) ** 2 / two_var
                F[lo:hi, j] = logsumexp(t_pos, axis=0) - logsumexp(t_neg,
                                                                   axis=0)
        np.clip(f2v, -LLR_CLAMP, LLR_CLAMP, out=f2v)
        v2f, marginals = _product_step(graph, f2v)
        acc.pin_known(v2f)
        acc.record(it, marginals, v2f)
    acc.finalize(f2v, v2f, iters)
    return acc.report


def ga_bp_detect(graph: FactorGraph, block: TransmissionBlock, iters: int,
                 collect_llr: bool = False) -> DetectionReport:
    """Gaussian-approximation BP; linear in the row weight."""
    acc = _RunAccumulator(graph, block, iters, collect_llr)
    nf = graph.n_funcs
    r = graph.r
    y = block.received
    sn2 = block.noise_variance
    A = graph.gain.reshape(nf, r)

    v2f = np.zeros(graph.n_edges)
    acc.pin_known(v2f)
    f2v = np.zeros(graph.n_edges)
    for it in range(1, iters + 1):
        moments = ga_moments(v2f, A)
        mu_cav, v_cav = moments.cavity(A)
        f2v = (2.0 * A * (y[:, None] - mu_cav) / (v_cav + sn2)).reshape(-1)
        np.clip(f2v, -LLR_CLAMP, LLR_CLAMP, out=f2v)
        v2f, marginals = _product_step(graph, f2v)
        acc.pin_known(v2f)
        acc.record(it, marginals, v2f)
    acc.finalize(f2v, v2f, iters)
    return acc.report


def detect(graph, block, iters, detector="ga", **kwargs) -> DetectionReport:
    if detector == "exact":
        return exact_bp_detect(graph, block, iters, **kwargs)
    if detector == "ga":
        return ga_bp_detect(graph, block, iters, **kwargs)
    raise ValueError(f"unknown detector {detector!r}")


def measure_llr_statistics(graph: FactorGraph, blocks, iters: int,
                           detector: str = "ga"):
    """Pooled conditional mean/variance of v2f LLRs per position/iteration.

    Conditioning on b = +1 is realized by pooling b * LLR, which has the
    same law by the sign-flip symmetry of the update rules.  Returns
    (mean, var), each shaped (iters + 1, L); iteration 0 is all zeros.
    """
    L = graph.config.L
    cnt = np.zeros((iters + 1, L))
    s = np.zeros((iters + 1, L))
    ss = np.zeros((iters + 1, L))
    for block in blocks:
        rep = detect(graph, block, iters, detector=detector, collect_llr=True)
        for it, (c, s1, s2) in rep.llr_stats.items():
            cnt[it] += c
            s[it] += s1
            ss[it] += s2
    cnt[0] = np.maximum(cnt[1], 1.0)
    mean = np.divide(s, np.maximum(cnt, 1.0))
    var = np.maximum(ss / np.maximum(cnt, 1.0) - mean * mean, 0.0)
    return mean, var
