"""Shared fixtures and independent oracles used across the suite."""

from itertools import product

import numpy as np
import pytest
from scipy.special import logsumexp

from sccdma.scalar_channel import default_table


@pytest.fixture(scope="session")
def table():
    return default_table()


def is_cycle_free(graph) -> bool:
    """Union-find cycle search over the bipartite factor graph."""
    parent = list(range(graph.n_vars + graph.n_funcs))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for v, f in zip(graph.var_of_edge, graph.fn_of_edge):
        ra, rb = find(int(v)), find(graph.n_vars + int(f))
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def brute_force_marginal_llrs(graph, block) -> np.ndarray:
    """Enumerate the posterior over all 2^(K L) symbol vectors."""
    n = graph.n_vars
    y = block.received
    logp = []
    for bits in product([-1.0, 1.0], repeat=n):
        b = np.array(bits)
        clean = np.bincount(graph.fn_of_edge,
                            weights=graph.gain * b[graph.var_of_edge],
                            minlength=graph.n_funcs)
        logp.append(-np.sum((y - clean) ** 2) / (2 * block.noise_variance))
    logp = np.array(logp).reshape([2] * n)
    out = np.zeros(n)
    for k in range(n):
        ax = tuple(i for i in range(n) if i != k)
        m = logsumexp(logp, axis=ax)
        out[k] = m[1] - m[0]
    return out
