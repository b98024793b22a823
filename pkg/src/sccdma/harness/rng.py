"""Reproducible counter-based random streams.

Every random draw in the harness comes from numpy's Philox generator
(counter-based, output stable under numpy's generator-versioning policy).
A stream is addressed by (base_seed, trial, tag): the three words become
the Philox key, so any worker can open any trial's stream independently
of scheduling.  Stream tags within a trial, consumed in this order:

    1  spreading-matrix sampling
    2  data symbols
    3  channel noise

The identity string below is recorded in every run's JSON summary.
"""

from __future__ import annotations

import numpy as np

RNG_ID = ("numpy-philox4x32 keyed "
          "(base_seed * 0x9E3779B97F4A7C15 + tag, trial) v1")

_MATRIX, _SYMBOLS, _NOISE = 1, 2, 3
_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def stream(base_seed: int, trial: int = 0, tag: int = 0) -> np.random.Generator:
    word0 = ((base_seed & _MASK) * _GOLDEN + tag) & _MASK
    key = np.array([word0, trial & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def matrix_stream(base_seed: int, trial: int) -> np.random.Generator:
    return stream(base_seed, trial, _MATRIX)


def symbol_stream(base_seed: int, trial: int) -> np.random.Generator:
    return stream(base_seed, trial, _SYMBOLS)


def noise_stream(base_seed: int, trial: int) -> np.random.Generator:
    return stream(base_seed, trial, _NOISE)
