"""Transmission simulator: BPSK symbols through the coupled matrix plus AWGN.

received = (1/sqrt(W+1)) G b + w with w ~ N(0, sigma_n^2 I), stored flat
in position-major order together with the per-period row offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import (CoupledSpreadingMatrix, FactorGraph, _as_generator,
                       to_factor_graph)
from .errors import DimensionMismatch


@dataclass
class TransmissionBlock:
    """One detection block: K x L symbols and the flat received vector."""

    symbols: np.ndarray          # (K, L) of +-1, column l' holds position l'
    received: np.ndarray         # (total_rows,) position-major
    row_offsets: np.ndarray      # (L+1,)
    noise_variance: float
    matrix: CoupledSpreadingMatrix

    def received_at(self, l: int) -> np.ndarray:
        return self.received[self.row_offsets[l]:self.row_offsets[l + 1]]

    def symbols_flat(self) -> np.ndarray:
        # variable index convention: l' * K + k
        return self.symbols.T.reshape(-1)


def noise_free_output(graph: FactorGraph, symbols_flat: np.ndarray) -> np.ndarray:
    """(1/sqrt(W+1)) G b evaluated through the edge list."""
    contrib = graph.gain * symbols_flat[graph.var_of_edge]
    return np.bincount(graph.fn_of_edge, weights=contrib,
                       minlength=graph.n_funcs)


def transmit(matrix: CoupledSpreadingMatrix, symbols: np.ndarray,
             sigma_n_sq: float, rng_seed,
             graph: FactorGraph | None = None) -> TransmissionBlock:
    """Simulate one block; deterministic given the seed.

    Noise is drawn in a single position-major stream so results do not
    depend on how the caller parallelizes across blocks.
    """
    cfg = matrix.config
    symbols = np.asarray(symbols)
    if symbols.shape != (cfg.K, cfg.L):
        raise DimensionMismatch(
            f"symbols must be shaped ({cfg.K}, {cfg.L}), got {symbols.shape}")
    if sigma_n_sq < 0:
        raise DimensionMismatch("noise variance must be nonnegative")
    if graph is None:
        graph = to_factor_graph(matrix)
    flat = symbols.astype(float).T.reshape(-1)
    clean = noise_free_output(graph, flat)
    rng = _as_generator(rng_seed)
    noise = rng.standard_normal(clean.size) * np.sqrt(sigma_n_sq)
    return TransmissionBlock(symbols=symbols, received=clean + noise,
                             row_offsets=matrix.row_offsets(),
                             noise_variance=float(sigma_n_sq), matrix=matrix)


def random_symbols(K: int, L: int, rng_seed) -> np.ndarray:
    rng = _as_generator(rng_seed)
    return (rng.integers(0, 2, size=(K, L)) * 2 - 1).astype(np.int8)
