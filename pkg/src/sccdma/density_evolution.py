"""Coupled density evolution for the BP multiuser detector.

State per position l: the noise-plus-MAI variance sigma_l^2 and the
per-symbol SIR.  One sweep of the coupled recursion:

    sigma_l^2(i) = sigma_n^2 + (beta_l/(W+1)) sum_{w=0..W} xi(sir_{(l-w) mod L}(i-1))
    sir_l'(i)    = (1/(W+1)) sum_{w=0..W} 1 / sigma_{(l'+w) mod L}^2(i)

with beta_l = beta_init for l < W and beta otherwise, started from
sir = 0.  From that start the iterates increase monotonically toward a
fixed point, which the runner asserts exactly at every step.

The uncoupled (W = 0) fixed points solve 1/s = sigma_n^2 + beta xi(s);
they are located by a sign-change scan plus bisection and tagged stable
or unstable from the derivative of the scalar iteration map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensemble import SystemConfig
from .errors import InvalidConfig
from .scalar_channel import ScalarChannelTable, default_table


@dataclass
class DEState:
    sir: np.ndarray
    sigma_sq: np.ndarray
    iteration: int

    def copy(self) -> "DEState":
        return DEState(self.sir.copy(), self.sigma_sq.copy(), self.iteration)


@dataclass
class DETrajectory:
    states: list
    converged: bool
    residual: float
    iterations: int

    @property
    def final(self) -> DEState:
        return self.states[-1]


@dataclass
class FixedPointSet:
    """Roots s of 1/s = sigma_n^2 + beta*xi(s) with stability tags."""

    roots: np.ndarray            # ascending
    stable: np.ndarray           # bool per root
    brackets: list = field(default_factory=list)

    def __len__(self):
        return len(self.roots)

    @property
    def largest(self) -> float:
        return float(self.roots[-1])

    @property
    def smallest_stable(self) -> float:
        return float(self.roots[self.stable][0])


def beta_profile(config: SystemConfig) -> np.ndarray:
    out = np.full(config.L, config.beta, dtype=float)
    out[:config.W] = config.beta_init
    return out


def initial_state(config: SystemConfig) -> DEState:
    sir0 = np.zeros(config.L)
    return DEState(sir=sir0, sigma_sq=np.full(config.L, np.nan), iteration=0)


def de_step(state: DEState, config: SystemConfig,
            table: ScalarChannelTable | None = None) -> DEState:
    """One flooding sweep of the coupled recursion."""
    if state.sir.shape != (config.L,):
        raise InvalidConfig("state length does not match L")
    table = table or default_table()
    W = config.W
    xi_vals = table.xi(state.sir)
    acc = xi_vals.copy()
    for w in range(1, W + 1):
        acc += np.roll(xi_vals, w)          # picks xi[(l - w) mod L]
    sigma_sq = config.sigma_n_sq + beta_profile(config) * acc / (W + 1)
    inv = 1.0 / sigma_sq
    sir_acc = inv.copy()
    for w in range(1, W + 1):
        sir_acc += np.roll(inv, -w)         # picks 1/sigma^2[(l' + w) mod L]
    sir = sir_acc / (W + 1)
    return DEState(sir=sir, sigma_sq=sigma_sq, iteration=state.iteration + 1)


def de_run(config: SystemConfig, max_iters: int = 10**6, tol: float = 1e-10,
           table: ScalarChannelTable | None = None,
           initial: DEState | None = None,
           record_every: int = 0, relax: float = 1.0) -> DETrajectory:
    """Iterate from sir = 0 (or a caller-supplied state) to a fixed point.

    When started from zero with the plain iteration (relax = 1, the
    default for every analysis run) the run asserts the exact
    componentwise monotone increase of the SIR vector.  relax != 1
    over-relaxes the update; the monotonicity contract does not cover it.
    Convergence: max componentwise sir change below tol; hitting
    max_iters sets converged = False.
    """
    if tol <= 0:
        raise InvalidConfig("tolerance must be positive")
    table = table or default_table()
    state = initial.copy() if initial is not None else initial_state(config)
    plain = relax == 1.0
    from_zero = initial is None and plain
    states = [state.copy()]
    residual = np.inf
    converged = False
    for _ in range(max_iters):
        new = de_step(state, config, table)
        if not plain:
            blended = np.clip(state.sir + relax * (new.sir - state.sir),
                              0.0, 1.0 / config.sigma_n_sq)
            new = DEState(sir=blended, sigma_sq=new.sigma_sq,
                          iteration=new.iteration)
        if from_zero and np.any(new.sir < state.sir):
            raise AssertionError("monotone SIR increase violated")
        residual = float(np.max(np.abs(new.sir - state.sir)))
        state = new
        if record_every and state.iteration % record_every == 0:
            states.append(state.copy())
        if residual < tol:
            converged = True
            break
    if states[-1].iteration != state.iteration:
        states.append(state.copy())
    return DETrajectory(states=states, converged=converged,
                        residual=residual, iterations=state.iteration)


def multiuser_efficiency(state_or_sir, sigma_n_sq: float) -> np.ndarray:
    """eta = sigma_n^2 * sir, componentwise; lies in [0, 1]."""
    sir = state_or_sir.sir if isinstance(state_or_sir, DEState) else state_or_sir
    return sigma_n_sq * np.asarray(sir, dtype=float)


def scalar_recursion(beta: float, sigma_n_sq: float, iters: int,
                     table: ScalarChannelTable | None = None,
                     s0: float = 0.0, tol: float = 0.0):
    """Plain uncoupled map s <- 1/(sigma_n^2 + beta*xi(s)); returns history."""
    table = table or default_table()
    s = float(s0)
    hist = [s]
    for _ in range(iters):
        s_new = 1.0 / (sigma_n_sq + beta * float(table.xi(s)))
        hist.append(s_new)
        if tol and abs(s_new - s) < tol:
            s = s_new
            break
        s = s_new
    return np.array(hist)


def uncoupled_fixed_points(beta: float, sigma_n_sq: float,
                           table: ScalarChannelTable | None = None,
                           grid_points: int = 10**4,
                           rtol: float = 1e-12) -> FixedPointSet:
    """All roots of 1/s = sigma_n^2 + beta*xi(s) on (0, 1/sigma_n^2].

    Sign-change scan of the residual on a log grid (every root lies in
    [1/(sigma_n^2+beta), 1/sigma_n^2]) followed by bisection to rtol
    relative; stability from |T'(s*)| < 1 for the map
    T(s) = 1/(sigma_n^2 + beta*xi(s)).
    """
    if beta < 0 or sigma_n_sq <= 0:
        raise InvalidConfig("need beta >= 0 and sigma_n_sq > 0")
    table = table or default_table()
    s_hi = 1.0 / sigma_n_sq
    if beta == 0.0:
        return FixedPointSet(roots=np.array([s_hi]),
                             stable=np.array([True]),
                             brackets=[(s_hi, s_hi)])

    def residual(s):
        return 1.0 / s - sigma_n_sq - beta * table.xi(s)

    s_lo = 0.999 / (sigma_n_sq + beta)
    grid = np.geomspace(s_lo, s_hi, grid_points)
    res = residual(grid)
    roots, brackets = [], []
    exact = np.nonzero(res == 0.0)[0]
    for i in exact:
        roots.append(grid[i])
        brackets.append((grid[i], grid[i]))
    flips = np.nonzero(np.sign(res[:-1]) * np.sign(res[1:]) < 0)[0]
    for i in flips:
        lo, hi = float(grid[i]), float(grid[i + 1])
        f_lo = res[i]
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            f_mid = residual(mid)
            if f_mid == 0.0:
                lo = hi = mid
                break
            if (f_mid > 0) == (f_lo > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
        brackets.append((float(grid[i]), float(grid[i + 1])))
    order = np.argsort(roots)
    roots = np.array(roots)[order]
    brackets = [brackets[i] for i in order]
    # T'(s*) = -beta * xi'(s*) * s*^2 (using T(s*) = s*)
    deriv = -beta * table.xi_derivative(roots) * roots**2
    stable = np.abs(deriv) < 1.0
    return FixedPointSet(roots=roots, stable=stable, brackets=brackets)
