"""Scalar BPSK-over-AWGN primitives.

Everything downstream (density evolution, free energy, potentials) reduces
to three functions of the scalar channel z = b + w, b uniform on {-1,+1},
w ~ N(0, 1/s) with SNR s >= 0:

  * posterior_mean(z, s)  -- Bayes estimate of b, equals tanh(s*z)
  * mmse_xi(s)            -- mean-squared error of the posterior mean
  * mutual_info_c(s)      -- input-output mutual information in nats

The expectations are standard-normal integrals evaluated by Gauss-Hermite
quadrature.  Because the coupled recursions evaluate xi millions of times,
a memoized table (dense SNR grid + monotone cubic interpolation) backs the
hot path; direct quadrature remains available for oracle-grade checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

LN2 = float(np.log(2.0))

# scalar-channel SNR: a nonnegative, finite float
Snr = float

# SNR above which xi underflows and C is ln 2 to double precision.
_S_SATURATED = 1.0e4


@dataclass(frozen=True)
class GaussHermite:
    """Quadrature rule for expectations over a standard normal variable.

    Nodes/weights are stored in "probabilist" form: E[f(X)] for X ~ N(0,1)
    is approximated by sum(weights * f(nodes)) and the weights sum to 1.
    """

    n_nodes: int = 127
    kind: str = "gauss-hermite"
    nodes: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_nodes < 32:
            raise ValueError("need at least 32 quadrature nodes")
        x, w = np.polynomial.hermite.hermgauss(self.n_nodes)
        object.__setattr__(self, "nodes", x * np.sqrt(2.0))
        object.__setattr__(self, "weights", w / np.sqrt(np.pi))

    def expect(self, f):
        """E[f(X)] with X standard normal; f must broadcast over arrays."""
        return np.sum(self.weights * f(self.nodes), axis=-1)


_DEFAULT_QUAD = GaussHermite()


def posterior_mean(z, s):
    """Posterior mean of b in {-1,+1} observed through z = b + N(0, 1/s).

    Equals tanh(s*z); s = 0 returns the prior mean 0.
    """
    return np.tanh(np.multiply(s, z))


def _stable_log1pexp(t):
    # log(1 + exp(t)) without overflow for large |t|
    t = np.asarray(t, dtype=float)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def mmse_xi(s, quad: GaussHermite = _DEFAULT_QUAD):
    """MSE of the posterior mean estimator at SNR s (vectorized).

    xi(s) = E[(b - tanh(s z))^2] = 1 - E[tanh^2(s + sqrt(s) X)] with
    X ~ N(0,1), using symmetry in b.  Strictly decreasing from xi(0) = 1.
    """
    s_arr = np.asarray(s, dtype=float)
    scalar = s_arr.ndim == 0
    s_arr = np.atleast_1d(s_arr)
    if np.any(s_arr < 0) or not np.all(np.isfinite(s_arr)):
        raise ValueError("SNR must be finite and nonnegative")
    out = np.empty_like(s_arr)
    zero = s_arr == 0.0
    sat = s_arr >= _S_SATURATED
    mid = ~(zero | sat)
    out[zero] = 1.0
    out[sat] = 0.0
    if np.any(mid):
        sm = s_arr[mid][:, None]
        t = np.tanh(sm + np.sqrt(sm) * quad.nodes[None, :])
        out[mid] = 1.0 - np.sum(quad.weights[None, :] * t * t, axis=1)
    np.clip(out, 0.0, 1.0, out=out)
    return float(out[0]) if scalar else out


def mutual_info_c(s, quad: GaussHermite = _DEFAULT_QUAD):
    """BPSK-input AWGN mutual information C(s) in nats (vectorized).

    C(s) = ln 2 - E[ln(1 + exp(-2s - 2 sqrt(s) X))], bounded by ln 2.
    """
    s_arr = np.asarray(s, dtype=float)
    scalar = s_arr.ndim == 0
    s_arr = np.atleast_1d(s_arr)
    if np.any(s_arr < 0) or not np.all(np.isfinite(s_arr)):
        raise ValueError("SNR must be finite and nonnegative")
    out = np.empty_like(s_arr)
    zero = s_arr == 0.0
    sat = s_arr >= _S_SATURATED
    mid = ~(zero | sat)
    out[zero] = 0.0
    out[sat] = LN2
    if np.any(mid):
        sm = s_arr[mid][:, None]
        t = -2.0 * sm - 2.0 * np.sqrt(sm) * quad.nodes[None, :]
        out[mid] = LN2 - np.sum(quad.weights[None, :] * _stable_log1pexp(t), axis=1)
    np.clip(out, 0.0, LN2, out=out)
    return float(out[0]) if scalar else out


class ScalarChannelTable:
    """Memoized xi(s) and C(s) on a dense uniform SNR grid.

    Monotone cubic (PCHIP) interpolation keeps xi shape-preserving, so the
    density-evolution monotonicity argument survives the memoization.  The
    grid step targets an interpolation error below 1e-8; SNRs beyond the
    grid fall back to direct quadrature.
    """

    def __init__(self, s_max: float = 64.0, step: float = 1e-3,
                 quad: GaussHermite | None = None):
        self.quad = quad if quad is not None else _DEFAULT_QUAD
        self.s_max = float(s_max)
        n = int(round(self.s_max / step)) + 1
        self.grid = np.linspace(0.0, self.s_max, n)
        self._xi_grid = mmse_xi(self.grid, self.quad)
        self._c_grid = mutual_info_c(self.grid, self.quad)
        self._xi_interp = PchipInterpolator(self.grid, self._xi_grid, extrapolate=False)
        self._c_interp = PchipInterpolator(self.grid, self._c_grid, extrapolate=False)
        self._xi_deriv = self._xi_interp.derivative()

    def xi(self, s):
        s_arr = np.asarray(s, dtype=float)
        scalar = s_arr.ndim == 0
        s_arr = np.atleast_1d(s_arr)
        out = np.empty_like(s_arr)
        inside = s_arr <= self.s_max
        if np.any(inside):
            out[inside] = self._xi_interp(s_arr[inside])
        if np.any(~inside):
            out[~inside] = mmse_xi(s_arr[~inside], self.quad)
        np.clip(out, 0.0, 1.0, out=out)
        return float(out[0]) if scalar else out

    def capacity(self, s):
        s_arr = np.asarray(s, dtype=float)
        scalar = s_arr.ndim == 0
        s_arr = np.atleast_1d(s_arr)
        out = np.empty_like(s_arr)
        inside = s_arr <= self.s_max
        if np.any(inside):
            out[inside] = self._c_interp(s_arr[inside])
        if np.any(~inside):
            out[~inside] = mutual_info_c(s_arr[~inside], self.quad)
        np.clip(out, 0.0, LN2, out=out)
        return float(out[0]) if scalar else out

    def xi_derivative(self, s):
        s_arr = np.clip(np.asarray(s, dtype=float), 0.0, self.s_max)
        return self._xi_deriv(s_arr)

    def xi_inverse(self, x, rtol: float = 1e-13):
        """Solve xi(v) = x for v by bisection on the monotone memo grid."""
        x = float(x)
        if not 0.0 <= x <= 1.0:
            raise ValueError("xi takes values in [0, 1]")
        if x >= 1.0:
            return 0.0
        xi_hi = float(self._xi_grid[-1])
        if x <= xi_hi:
            return self.s_max
        # grid values are decreasing; locate the bracketing interval
        idx = int(np.searchsorted(-self._xi_grid, -x, side="left"))
        idx = min(max(idx, 1), len(self.grid) - 1)
        lo, hi = self.grid[idx - 1], self.grid[idx]
        f_lo = self._xi_grid[idx - 1] - x
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            f_mid = float(self._xi_interp(mid)) - x
            if f_mid == 0.0:
                return mid
            if (f_mid > 0) == (f_lo > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
            if hi - lo <= rtol * max(hi, 1e-30):
                break
        return 0.5 * (lo + hi)


_shared_table: ScalarChannelTable | None = None


def default_table() -> ScalarChannelTable:
    """Process-wide shared memo table (built once, immutable afterwards)."""
    global _shared_table
    if _shared_table is None:
        _shared_table = ScalarChannelTable()
    return _shared_table
