"""Spreading-matrix ensembles and their factor-graph view.

Two generators: the r-quasi-regular ensemble (every row has weight r,
column weights split between c = floor(rN/K) and c+1), and the coupled
(r, L, W)-quasi-regular ensemble whose L x L block structure is
band-circulant: block (l, l') is nonempty iff (l - l') mod L <= W, and
each nonempty block is an r/(W+1)-quasi-regular member.

Support sampling is stub matching (configuration model) with whole-shuffle
rejection of double edges; signs are i.i.d. uniform +-1.  Entry gains are
normalized by the ensemble-average column weight, and the coupled system
carries an extra 1/sqrt(W+1) so that per-chip signal power stays at the
local load.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfig

_SHUFFLE_ATTEMPTS = 100


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of one SC-SCDMA instance.

    beta and beta_init are the communication- and initialization-phase
    loads K/N and K/N_init. Analytical uses (density evolution, thresholds)
    need only the loads; sampling and simulation also need the integer
    counts K, N, N_init and the row weight r.  beta_init = 0 encodes
    "initialization symbols are known to the receiver" (the N_init -> inf
    limit); no initialization-period rows are sampled in that case.
    """

    beta: float
    beta_init: float
    L: int
    W: int
    sigma_n_sq: float
    K: int | None = None
    N: int | None = None
    N_init: int | None = None
    r: int | None = None

    def __post_init__(self):
        if self.L < 1 or self.W < 0:
            raise InvalidConfig("need L >= 1 and W >= 0")
        if self.W >= self.L:
            raise InvalidConfig("coupling width W must be smaller than L")
        if self.sigma_n_sq <= 0:
            raise InvalidConfig("noise variance must be positive")
        if self.beta < 0 or self.beta_init < 0:
            raise InvalidConfig("loads must be nonnegative")
        if self.r is not None and self.r % (self.W + 1) != 0:
            raise InvalidConfig("row weight r must be a multiple of W+1")
        if self.K is not None:
            if self.K < 1 or self.N is None or self.N < 1:
                raise InvalidConfig("counts must be positive")
            if self.W > 0 and self.beta_init > 0 and (
                    self.N_init is None or self.N_init < 1):
                raise InvalidConfig("W > 0 with beta_init > 0 needs N_init")

    @classmethod
    def from_counts(cls, K, N, r, L=1, W=0, N_init=None, sigma_n_sq=1.0):
        if N_init is None:
            N_init = N
        beta_init = 0.0 if N_init == 0 else K / N_init
        return cls(beta=K / N, beta_init=beta_init, L=L, W=W,
                   sigma_n_sq=sigma_n_sq, K=K, N=N,
                   N_init=(None if N_init == 0 else N_init), r=r)

    @classmethod
    def from_loads(cls, beta, beta_init, L, W, sigma_n_sq):
        """Analysis-only config; no integer counts attached."""
        return cls(beta=beta, beta_init=beta_init, L=L, W=W,
                   sigma_n_sq=sigma_n_sq)

    def load_at_period(self, l: int) -> float:
        return self.beta_init if l < self.W else self.beta

    def spreading_factor(self, l: int) -> int:
        if l < self.W:
            if self.beta_init == 0.0:
                return 0
            return int(self.N_init)
        return int(self.N)

    def known_positions(self) -> np.ndarray:
        """Symbol positions known to the receiver when beta_init = 0.

        These are the positions measured by the (removed) initialization
        periods: l' in {-W, ..., W-1} mod L.
        """
        if self.W == 0 or self.beta_init > 0.0:
            return np.zeros(0, dtype=int)
        band = np.arange(-self.W, self.W) % self.L
        return np.unique(band)


def average_load(config: SystemConfig) -> float:
    """Average system load over both phases.

    beta_bar = 1 / ((1/beta_init)(W/L) + (1/beta)(1 - W/L)); reduces to
    beta when W = 0 or beta_init = beta, and to 0 when beta_init = 0
    (the initialization phase spends unbounded chips).
    """
    if config.W == 0:
        return config.beta
    frac = config.W / config.L
    if config.beta_init == 0.0:
        return 0.0
    return 1.0 / (frac / config.beta_init + (1.0 - frac) / config.beta)


@dataclass
class SparseSpreadingMatrix:
    """One quasi-regular member: N x K support with signs.

    norm_scale is 1/sqrt(cbar) with cbar = r N / K the ensemble-average
    column weight; every entry of the spreading matrix has magnitude
    norm_scale.
    """

    K: int
    N: int
    r: int
    rows: np.ndarray
    cols: np.ndarray
    signs: np.ndarray

    @property
    def cbar(self) -> float:
        return self.r * self.N / self.K

    @property
    def norm_scale(self) -> float:
        return 1.0 / np.sqrt(self.cbar)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.N, self.K))
        out[self.rows, self.cols] = self.signs * self.norm_scale
        return out

    def column_weights(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.K)

    def row_weights(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.N)


def sample_quasi_regular(K: int, N: int, r: int,
                         rng_seed) -> SparseSpreadingMatrix:
    """Draw one member of the r-quasi-regular ensemble.

    Column degrees: rN - cK columns of weight c+1 (a uniformly random
    subset), the rest weight c, with c = floor(rN/K).  The binary support
    is stub-matched; a shuffle producing a repeated column inside a row is
    rejected and redrawn.
    """
    if K < 1 or N < 1 or r < 1:
        raise InvalidConfig("K, N, r must be positive")
    if r * N < K:
        raise InvalidConfig("need r*N >= K so every column has weight >= 1")
    if r > K:
        raise InvalidConfig("row weight r cannot exceed the user count K")
    rng = _as_generator(rng_seed)
    n_nonzero = r * N
    c = n_nonzero // K
    n_heavy = n_nonzero - c * K

    degrees = np.full(K, c, dtype=np.int64)
    heavy = rng.permutation(K)[:n_heavy]
    degrees[heavy] += 1

    stubs = np.repeat(np.arange(K), degrees)
    grid = None
    for _ in range(10):
        perm = rng.permutation(stubs)
        grid = _repair_double_edges(perm.reshape(N, r), rng)
        if grid is not None:
            break
    if grid is None:
        raise RuntimeError("stub matching failed to avoid double edges")

    rows = np.repeat(np.arange(N), r)
    cols = grid.reshape(-1)
    signs = rng.integers(0, 2, size=n_nonzero) * 2 - 1
    # canonical (row, col) order so serialization round-trips array-equal
    order = np.lexsort((cols, rows))
    return SparseSpreadingMatrix(K=K, N=N, r=r,
                                 rows=rows[order].astype(np.int64),
                                 cols=cols[order].astype(np.int64),
                                 signs=signs[order].astype(np.int8))


def _repair_double_edges(grid: np.ndarray, rng: np.random.Generator):
    """Swap duplicated stubs within rows against compatible stubs elsewhere.

    A swap is applied only when it removes the duplicate without creating
    one in the donor row, so the violation count never increases.  Returns
    the repaired (N, r) grid, or None if _SHUFFLE_ATTEMPTS sweeps do not
    reach a simple graph (caller then reshuffles).
    """
    n_rows, r = grid.shape
    flat = grid.reshape(-1)
    for _ in range(_SHUFFLE_ATTEMPTS):
        srt = np.sort(grid, axis=1)
        bad_rows = np.nonzero(np.any(srt[:, 1:] == srt[:, :-1], axis=1))[0]
        if bad_rows.size == 0:
            return grid
        for i in bad_rows:
            row = grid[i]
            seen = set()
            for j in range(r):
                col = row[j]
                if col not in seen:
                    seen.add(col)
                    continue
                for q in rng.integers(0, flat.size, size=64):
                    q = int(q)
                    col_q = flat[q]
                    if col_q == col or col_q in row:
                        continue
                    donor = grid[q // r]
                    if col in donor:
                        continue
                    flat[i * r + j], flat[q] = col_q, col
                    break
    return None


@dataclass
class CoupledSpreadingMatrix:
    """Band-circulant block matrix of quasi-regular members.

    blocks maps (l, l_prime) -> SparseSpreadingMatrix for the nonempty
    blocks, i.e. (l - l_prime) mod L in {0, ..., W}.  With beta_init = 0
    the initialization periods l < W carry no rows and are absent.
    """

    config: SystemConfig
    blocks: dict = field(repr=False)

    @property
    def coupling_gain(self) -> float:
        return 1.0 / np.sqrt(self.config.W + 1)

    def periods_with_rows(self):
        cfg = self.config
        start = cfg.W if cfg.beta_init == 0.0 else 0
        return range(start, cfg.L)

    def row_offsets(self) -> np.ndarray:
        cfg = self.config
        sizes = np.array([cfg.spreading_factor(l) for l in range(cfg.L)])
        return np.concatenate([[0], np.cumsum(sizes)])

    @property
    def total_rows(self) -> int:
        return int(self.row_offsets()[-1])

    def entries(self):
        """Global (row, col, sign) triples, position-major."""
        cfg = self.config
        offs = self.row_offsets()
        all_rows, all_cols, all_signs = [], [], []
        for l in self.periods_with_rows():
            for w in range(cfg.W + 1):
                lp = (l - w) % cfg.L
                blk = self.blocks[(l, lp)]
                all_rows.append(blk.rows + offs[l])
                all_cols.append(blk.cols + lp * cfg.K)
                all_signs.append(blk.signs)
        if not all_rows:
            return (np.zeros(0, dtype=np.int64),) * 2 + (np.zeros(0, dtype=np.int8),)
        return (np.concatenate(all_rows), np.concatenate(all_cols),
                np.concatenate(all_signs))

    def dense(self) -> np.ndarray:
        """Full scaled matrix including the 1/sqrt(W+1) coupling gain."""
        cfg = self.config
        out = np.zeros((self.total_rows, cfg.K * cfg.L))
        offs = self.row_offsets()
        for (l, lp), blk in self.blocks.items():
            sub = blk.dense() * self.coupling_gain
            out[offs[l]:offs[l] + blk.N, lp * cfg.K:(lp + 1) * cfg.K] = sub
        return out


def sample_coupled(config: SystemConfig, rng_seed) -> CoupledSpreadingMatrix:
    """Draw one member of the (r, L, W)-quasi-regular coupled ensemble.

    Each nonempty block is an independent r/(W+1)-quasi-regular member
    with N_l rows (N_init for l < W, N otherwise).
    """
    cfg = config
    if cfg.r is None or cfg.K is None or cfg.N is None:
        raise InvalidConfig("sampling requires integer K, N and row weight r")
    if cfg.r % (cfg.W + 1) != 0:
        raise InvalidConfig("row weight r must be a multiple of W+1")
    rng = _as_generator(rng_seed)
    r_block = cfg.r // (cfg.W + 1)
    blocks = {}
    start = cfg.W if cfg.beta_init == 0.0 else 0
    for l in range(start, cfg.L):
        n_l = cfg.spreading_factor(l)
        for w in range(cfg.W + 1):
            lp = (l - w) % cfg.L
            blocks[(l, lp)] = sample_quasi_regular(cfg.K, n_l, r_block, rng)
    return CoupledSpreadingMatrix(config=cfg, blocks=blocks)


@dataclass
class FactorGraph:
    """Flat edge-list view of a coupled spreading matrix.

    Edges are function-node major; every function node has exactly r
    edges, so per-node arrays are reshapes of the flat edge arrays.
    gain holds the full signed per-edge coefficient
    sign / sqrt((W+1) * cbar_block).
    """

    config: SystemConfig
    n_vars: int
    n_funcs: int
    var_of_edge: np.ndarray
    fn_of_edge: np.ndarray
    gain: np.ndarray
    var_pos: np.ndarray
    fn_pos: np.ndarray
    r: int

    @property
    def n_edges(self) -> int:
        return self.var_of_edge.size

    def var_index(self, k: int, l_prime: int) -> int:
        return l_prime * self.config.K + k


def to_factor_graph(matrix: CoupledSpreadingMatrix) -> FactorGraph:
    cfg = matrix.config
    offs = matrix.row_offsets()
    rows_l, cols_l, gains_l = [], [], []
    for l in matrix.periods_with_rows():
        beta_l = cfg.load_at_period(l)
        for w in range(cfg.W + 1):
            lp = (l - w) % cfg.L
            blk = matrix.blocks[(l, lp)]
            # cbar of the block times (W+1) equals r / beta_l
            scale = blk.norm_scale * matrix.coupling_gain
            rows_l.append(blk.rows + offs[l])
            cols_l.append(blk.cols + lp * cfg.K)
            gains_l.append(blk.signs * scale)
    rows = np.concatenate(rows_l)
    cols = np.concatenate(cols_l)
    gains = np.concatenate(gains_l)
    order = np.argsort(rows, kind="stable")
    rows, cols, gains = rows[order], cols[order], gains[order]

    n_funcs = matrix.total_rows
    fn_pos = np.searchsorted(offs, np.arange(n_funcs), side="right") - 1
    var_pos = np.repeat(np.arange(cfg.L), cfg.K)
    graph = FactorGraph(config=cfg, n_vars=cfg.K * cfg.L, n_funcs=n_funcs,
                        var_of_edge=cols, fn_of_edge=rows, gain=gains,
                        var_pos=var_pos, fn_pos=fn_pos, r=int(cfg.r))
    counts = np.bincount(rows, minlength=n_funcs)
    if n_funcs and not np.all(counts == cfg.r):
        raise InvalidConfig("factor graph lost the constant row weight")
    return graph


def from_factor_graph(graph: FactorGraph) -> CoupledSpreadingMatrix:
    """Rebuild the block matrix from a factor graph (exact round trip)."""
    cfg = graph.config
    offs = np.concatenate([[0], np.cumsum([cfg.spreading_factor(l)
                                           for l in range(cfg.L)])])
    r_block = cfg.r // (cfg.W + 1)
    blocks = {}
    fn_l = graph.fn_pos[graph.fn_of_edge]
    var_l = graph.var_of_edge // cfg.K
    for l in set(fn_l.tolist()):
        for w in range(cfg.W + 1):
            lp = (l - w) % cfg.L
            mask = (fn_l == l) & (var_l == lp)
            rows = graph.fn_of_edge[mask] - offs[l]
            cols = graph.var_of_edge[mask] - lp * cfg.K
            signs = np.sign(graph.gain[mask]).astype(np.int8)
            order = np.lexsort((cols, rows))
            blocks[(l, lp)] = SparseSpreadingMatrix(
                K=cfg.K, N=cfg.spreading_factor(l), r=r_block,
                rows=rows[order], cols=cols[order], signs=signs[order])
    return CoupledSpreadingMatrix(config=cfg, blocks=blocks)


# --------------------------------------------------------------------------
# serialization
#
# Text format: a header line "K N r L W", an optional line
# "N_init <value>" when the initialization spreading factor differs from N
# (0 means beta_init = 0, i.e. no initialization rows), then one
# "row col sign" triple per line with global indices into the full block
# matrix.  The binary form is an .npz with the same content.
# --------------------------------------------------------------------------

def save_text(matrix: CoupledSpreadingMatrix, path_or_file):
    cfg = matrix.config
    rows, cols, signs = matrix.entries()
    n_init = 0 if cfg.beta_init == 0.0 else (cfg.N_init or cfg.N)
    lines = [f"{cfg.K} {cfg.N} {cfg.r} {cfg.L} {cfg.W}"]
    if n_init != cfg.N:
        lines.append(f"N_init {n_init}")
    lines.extend(f"{r} {c} {s:+d}" for r, c, s in zip(rows, cols, signs))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def load_text(path_or_file, sigma_n_sq: float = 1.0) -> CoupledSpreadingMatrix:
    if hasattr(path_or_file, "read"):
        content = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            content = fh.read()
    lines = [ln for ln in content.splitlines() if ln.strip()]
    K, N, r, L, W = (int(tok) for tok in lines[0].split())
    idx = 1
    n_init = N
    if idx < len(lines) and lines[idx].startswith("N_init"):
        n_init = int(lines[idx].split()[1])
        idx += 1
    triples = np.array([[int(tok) for tok in ln.split()] for ln in lines[idx:]],
                       dtype=np.int64).reshape(-1, 3)
    cfg = SystemConfig.from_counts(K=K, N=N, r=r, L=L, W=W,
                                   N_init=n_init, sigma_n_sq=sigma_n_sq)
    return _matrix_from_triples(cfg, triples[:, 0], triples[:, 1],
                                triples[:, 2].astype(np.int8))


def save_binary(matrix: CoupledSpreadingMatrix, path):
    cfg = matrix.config
    rows, cols, signs = matrix.entries()
    n_init = 0 if cfg.beta_init == 0.0 else (cfg.N_init or cfg.N)
    np.savez_compressed(path, header=np.array([cfg.K, cfg.N, cfg.r, cfg.L,
                                               cfg.W, n_init], dtype=np.int64),
                        rows=rows, cols=cols, signs=signs)


def load_binary(path, sigma_n_sq: float = 1.0) -> CoupledSpreadingMatrix:
    data = np.load(path)
    K, N, r, L, W, n_init = (int(v) for v in data["header"])
    cfg = SystemConfig.from_counts(K=K, N=N, r=r, L=L, W=W,
                                   N_init=n_init, sigma_n_sq=sigma_n_sq)
    return _matrix_from_triples(cfg, data["rows"], data["cols"],
                                data["signs"].astype(np.int8))


def _matrix_from_triples(cfg, rows, cols, signs) -> CoupledSpreadingMatrix:
    offs = np.concatenate([[0], np.cumsum([cfg.spreading_factor(l)
                                           for l in range(cfg.L)])])
    period = np.searchsorted(offs, rows, side="right") - 1
    var_l = cols // cfg.K
    r_block = cfg.r // (cfg.W + 1)
    blocks = {}
    start = cfg.W if cfg.beta_init == 0.0 else 0
    for l in range(start, cfg.L):
        for w in range(cfg.W + 1):
            lp = (l - w) % cfg.L
            mask = (period == l) & (var_l == lp)
            order_rows = rows[mask] - offs[l]
            order_cols = cols[mask] - lp * cfg.K
            order = np.lexsort((order_cols, order_rows))
            blocks[(l, lp)] = SparseSpreadingMatrix(
                K=cfg.K, N=cfg.spreading_factor(l), r=r_block,
                rows=order_rows[order], cols=order_cols[order],
                signs=signs[mask][order])
    return CoupledSpreadingMatrix(config=cfg, blocks=blocks)


def _as_generator(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.Generator(np.random.Philox(key=rng_seed))
