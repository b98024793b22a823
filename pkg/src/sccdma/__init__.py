"""Spatially coupled sparsely-spread CDMA toolkit.

Library layout:
  scalar_channel      scalar BPSK/AWGN primitives (posterior mean, MMSE, C)
  ensemble            quasi-regular and coupled spreading-matrix ensembles
  system_model        transmission simulator (BPSK through G plus AWGN)
  bp                  exact and Gaussian-approximation BP receivers
  density_evolution   coupled DE recursion and fixed-point machinery
  thresholds          free energy, potential, BP/IO/coupled thresholds
  continuum           continuum-limit effective potential and profiles
  harness             seeded experiment orchestration and the CLI
"""

__version__ = "0.1.0"
