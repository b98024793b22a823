"""Free energy, potential and threshold location.

Scalar analysis for the uncoupled system:

  F(s)  = beta C(s) + (sigma_n^2 s - ln(sigma_n^2 s) - 1) / 2
  Ft(s) = beta C(s) + (ln((sigma_n^2 + beta xi(s))/sigma_n^2) - beta s xi(s)) / 2
  V(u)  = -beta v xi(v) + 2 beta C(v) + ln(sigma_n^2 + beta xi(v)) - ln sigma_n^2
          with v = xi^{-1}(-u/beta), u in [-beta, 0]

Stationary points of all three coincide with the fixed points of
1/s = sigma_n^2 + beta xi(s), and F, Ft, V/2 take equal values there.
Three thresholds are located by bisection on the load:

  * bp_threshold_uncoupled  -- bifurcation from one to three fixed points
  * io_threshold            -- equal depth of the two stable minima
  * coupled_bp_threshold    -- coupled DE from zero reaches the top branch
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density_evolution import (de_run, multiuser_efficiency,
                                uncoupled_fixed_points)
from .ensemble import SystemConfig
from .errors import DomainError, InvalidConfig, MonostableRegime
from .scalar_channel import ScalarChannelTable, default_table


def snr_db_to_sigma(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


@dataclass
class ThresholdResult:
    beta_star: float
    bracket: tuple
    method: str
    snr_db: float
    diagnostics: dict = field(default_factory=dict)
    L: int | None = None
    W: int | None = None
    beta_init: float | None = None

    @property
    def in_range(self) -> bool:
        return math.isfinite(self.beta_star)


@dataclass
class PotentialCurve:
    u: np.ndarray
    values: np.ndarray
    stationary_u: np.ndarray
    stationary_tags: list          # left-stable / unstable / right-stable


def free_energy(s, beta: float, sigma_n_sq: float,
                table: ScalarChannelTable | None = None):
    table = table or default_table()
    s = np.asarray(s, dtype=float)
    return beta * table.capacity(s) + 0.5 * (sigma_n_sq * s
                                             - np.log(sigma_n_sq * s) - 1.0)


def free_energy_alt(s, beta: float, sigma_n_sq: float,
                    table: ScalarChannelTable | None = None):
    table = table or default_table()
    s = np.asarray(s, dtype=float)
    xi = table.xi(s)
    return beta * table.capacity(s) + 0.5 * (
        np.log((sigma_n_sq + beta * xi) / sigma_n_sq) - beta * s * xi)


def potential_from_snr(v, beta: float, sigma_n_sq: float,
                       table: ScalarChannelTable | None = None):
    """V evaluated parametrically at v = xi^{-1}(-u/beta); equals 2*Ft(v)."""
    table = table or default_table()
    v = np.asarray(v, dtype=float)
    xi = table.xi(v)
    return (-beta * v * xi + 2.0 * beta * table.capacity(v)
            + np.log(sigma_n_sq + beta * xi) - np.log(sigma_n_sq))


def potential(u, beta: float, sigma_n_sq: float,
              table: ScalarChannelTable | None = None) -> float:
    """Single-system potential V(u) on u in [-beta, 0]."""
    table = table or default_table()
    x = -float(u) / beta
    if not 0.0 <= x <= 1.0:
        raise DomainError("u must lie in [-beta, 0]")
    v = table.xi_inverse(x)
    return float(potential_from_snr(v, beta, sigma_n_sq, table))


def potential_curve(beta: float, sigma_n_sq: float, n: int = 1000,
                    table: ScalarChannelTable | None = None) -> PotentialCurve:
    """Sampled potential with its stationary points tagged.

    The curve is generated parametrically through s (u = -beta*xi(s)), which
    avoids inverting xi at every grid point and reaches u = -beta exactly.
    """
    table = table or default_table()
    s_grid = np.concatenate([[0.0], np.geomspace(1e-4, table.s_max, n - 1)])
    u = -beta * table.xi(s_grid)
    vals = potential_from_snr(s_grid, beta, sigma_n_sq, table)
    fps = uncoupled_fixed_points(beta, sigma_n_sq, table)
    stationary_u = -beta * table.xi(fps.roots)
    if len(fps) == 1:
        tags = ["right-stable"]
    else:
        tags = ["left-stable", "unstable", "right-stable"][:len(fps)]
    return PotentialCurve(u=u, values=vals, stationary_u=stationary_u,
                          stationary_tags=tags)


def _bisect_load(classify_good, lo: float, hi: float, tol: float):
    """Shrink [lo, hi] with lo good / hi bad until hi - lo <= tol."""
    probes = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if classify_good(mid):
            lo = mid
        else:
            hi = mid
        probes += 1
    return lo, hi, probes


def recursion_reaches(beta: float, sigma_n_sq: float, target: float,
                      table: ScalarChannelTable, max_iters: int = 200000,
                      rel_tol: float = 1e-6) -> bool:
    """Does the plain uncoupled recursion from s = 0 reach `target`?"""
    s = 0.0
    for _ in range(max_iters):
        s_new = 1.0 / (sigma_n_sq + beta * float(table.xi(s)))
        if abs(s_new - s) < 1e-13 * s_new:
            s = s_new
            break
        s = s_new
    return abs(s - target) <= rel_tol * target


def bp_threshold_uncoupled(sigma_n_sq: float, tol_beta: float = 1e-4,
                           beta_range: tuple = (0.05, 4.0),
                           table: ScalarChannelTable | None = None
                           ) -> ThresholdResult:
    """Bifurcation load between monostable and bistable fixed-point sets.

    good(beta): the fixed-point equation has a single root, or the plain
    recursion from zero still reaches the largest root.  If no bad load
    exists below beta_range[1] the result carries beta_star = nan.
    """
    table = table or default_table()
    snr_db = -10.0 * math.log10(sigma_n_sq)

    def good(beta):
        fps = uncoupled_fixed_points(beta, sigma_n_sq, table)
        if len(fps) == 1:
            return True
        return recursion_reaches(beta, sigma_n_sq, fps.largest, table)

    lo, hi = beta_range
    if not good(lo):
        raise InvalidConfig("beta_range[0] must be below the threshold")
    # expand to find a bad load
    probe = lo
    found_bad = False
    while probe < hi:
        probe = min(probe + 0.25, hi)
        if not good(probe):
            found_bad = True
            break
    if not found_bad:
        return ThresholdResult(beta_star=math.nan, bracket=(lo, hi),
                               method="bifurcation", snr_db=snr_db,
                               diagnostics={"in_range": False,
                                            "note": "monostable over range"})
    b_lo, b_hi, probes = _bisect_load(good, probe - 0.25, probe, tol_beta)
    return ThresholdResult(beta_star=0.5 * (b_lo + b_hi), bracket=(b_lo, b_hi),
                           method="bifurcation", snr_db=snr_db,
                           diagnostics={"probes": probes, "in_range": True})


def _stable_pair(beta, sigma_n_sq, table):
    """(s_left, s_right) stable roots, or None when not bistable."""
    fps = uncoupled_fixed_points(beta, sigma_n_sq, table)
    stable = fps.roots[fps.stable]
    if len(fps) >= 3 and len(stable) >= 2:
        return float(stable[0]), float(stable[-1])
    return None


def io_threshold(sigma_n_sq: float, tol_beta: float = 1e-4,
                 table: ScalarChannelTable | None = None,
                 criterion: str = "free-energy",
                 beta_max: float = 4.0) -> ThresholdResult:
    """Equal-height load of the two stable minima.

    criterion selects the functional whose values are compared at the two
    stable roots: "free-energy" uses F(s), "potential" uses V(u) evaluated
    through the u-domain inversion.  Both locate the same load; the pair
    is cross-checked in the test suite.  Raises MonostableRegime when no
    bistable window exists below beta_max.
    """
    table = table or default_table()
    snr_db = -10.0 * math.log10(sigma_n_sq)
    bp = bp_threshold_uncoupled(sigma_n_sq, tol_beta=1e-3,
                                beta_range=(0.05, beta_max), table=table)
    if not bp.in_range:
        raise MonostableRegime("no bistable load window at this SNR")

    def height_gap(beta):
        """F(left) - F(right); positive while the right minimum is global."""
        pair = _stable_pair(beta, sigma_n_sq, table)
        if pair is None:
            fps = uncoupled_fixed_points(beta, sigma_n_sq, table)
            # bistability lost: decide by which branch survived
            return 1.0 if fps.largest > 0.5 / sigma_n_sq else -1.0
        s_l, s_r = pair
        if criterion == "potential":
            u_l = -beta * float(table.xi(s_l))
            u_r = -beta * float(table.xi(s_r))
            return potential(u_l, beta, sigma_n_sq, table) - potential(
                u_r, beta, sigma_n_sq, table)
        return float(free_energy(s_l, beta, sigma_n_sq, table)
                     - free_energy(s_r, beta, sigma_n_sq, table))

    lo = bp.beta_star + 0.01
    if height_gap(lo) <= 0:
        raise MonostableRegime("no equal-height crossing above the BP "
                               "threshold")
    hi = lo
    while height_gap(hi) > 0:
        hi += 0.2
        if hi > beta_max:
            raise MonostableRegime("equal-height crossing not found below "
                                   f"beta = {beta_max}")
    b_lo, b_hi, probes = _bisect_load(lambda b: height_gap(b) > 0,
                                      max(lo, hi - 0.2), hi, tol_beta)
    return ThresholdResult(beta_star=0.5 * (b_lo + b_hi), bracket=(b_lo, b_hi),
                           method="equal-height", snr_db=snr_db,
                           diagnostics={"probes": probes,
                                        "criterion": criterion})


def coupled_bp_threshold(L: int, W: int, beta_init: float, sigma_n_sq: float,
                         tol_beta: float = 1e-3,
                         de_tol: float = 1e-10, max_iters: int = 10**6,
                         table: ScalarChannelTable | None = None,
                         eta_tol: float = 1e-3,
                         beta_max: float = 4.0) -> ThresholdResult:
    """Largest load at which coupled DE from zero reaches the top branch.

    good(beta): the terminal middle-position efficiency reaches the
    largest-root efficiency (one-sided within eta_tol; finite L/W lets the
    middle sit slightly above the uncoupled root).  Each probe is a full
    DE run at tolerance de_tol with an iteration cap.
    """
    if W >= L:
        raise InvalidConfig("need W < L")
    table = table or default_table()
    snr_db = -10.0 * math.log10(sigma_n_sq)
    capped_runs = []

    def good(beta):
        cfg = SystemConfig.from_loads(beta=beta, beta_init=beta_init, L=L,
                                      W=W, sigma_n_sq=sigma_n_sq)
        traj = de_run(cfg, max_iters=max_iters, tol=de_tol, table=table)
        if not traj.converged:
            capped_runs.append(beta)
        eta_mid = float(multiuser_efficiency(traj.final,
                                             sigma_n_sq)[L // 2])
        fps = uncoupled_fixed_points(beta, sigma_n_sq, table)
        return eta_mid >= sigma_n_sq * fps.largest - eta_tol

    bp = bp_threshold_uncoupled(sigma_n_sq, tol_beta=1e-3,
                                beta_range=(0.05, beta_max), table=table)
    lo = (bp.beta_star - 0.05) if bp.in_range else 0.5
    if not good(lo):
        raise InvalidConfig("lower probe unexpectedly bad; widen the range")
    hi = lo + 0.2
    while good(hi):
        lo = hi
        hi += 0.1
        if hi > beta_max:
            return ThresholdResult(beta_star=math.nan, bracket=(lo, hi),
                                   method="coupled-DE-bisection",
                                   snr_db=snr_db, L=L, W=W,
                                   beta_init=beta_init,
                                   diagnostics={"in_range": False})
    b_lo, b_hi, probes = _bisect_load(good, lo, hi, tol_beta)
    diag = {"probes": probes, "de_tol": de_tol, "max_iters": max_iters,
            "not_converged_probes": capped_runs}
    return ThresholdResult(beta_star=0.5 * (b_lo + b_hi),
                           bracket=(b_lo, b_hi),
                           method="coupled-DE-bisection", snr_db=snr_db,
                           L=L, W=W, beta_init=beta_init, diagnostics=diag)
